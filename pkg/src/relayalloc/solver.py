"""Generic max-min concave solver used by every relaxation scheme.

The solver maximizes ``min_k R_k(x)`` where each utility is a sum of groups
and each group is the pointwise minimum of smooth concave *pieces*.  A piece
is an affine function plus a sum of perspective-of-log terms

    weight * u * log2(1 + v/u),   u = z[u_idx] + u0,   v = a_coef . z + a0,

which covers plain log rates (constant u) as well as the time-shared
perspective rates of the lifted programs.  The nonsmooth max-min objective is
rewritten in epigraph form with one auxiliary share per group,

    max t   s.t.  piece(x) >= zeta_g,   sum_{g in k} zeta_g >= t,

plus the caller's linear equalities and inequalities.  The epigraph program is
smooth and concave and is solved by a log-barrier interior method with damped
Newton inner steps; the barrier parameter shrinks by a fixed factor per outer
stage.  A projected-supergradient fallback is available for problems whose
feasible set is a product of simplices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LogTerm",
    "Piece",
    "MaxMinProblem",
    "Solution",
    "DualInfo",
    "solve_maxmin",
    "project_simplex",
    "kkt_residual",
]

_LN2 = float(np.log(2.0))


@dataclass
class LogTerm:
    """One perspective-of-log term: weight * u * log2(1 + v/u)."""

    weight: float
    u_idx: int | None
    u0: float
    a_idx: np.ndarray
    a_coef: np.ndarray
    a0: float = 0.0

    def __post_init__(self):
        self.a_idx = np.asarray(self.a_idx, dtype=np.intp)
        self.a_coef = np.asarray(self.a_coef, dtype=float)


class Piece:
    """Concave building block: affine part plus perspective-of-log terms.

    On construction the union of referenced variables (the support) is
    precomputed so gradients and Hessians can be evaluated as small local
    arrays; the solver scatters them into its dense system.
    """

    def __init__(self, terms=(), lin_idx=(), lin_coef=(), lin0=0.0):
        self.terms = list(terms)
        self.lin_idx = np.asarray(lin_idx, dtype=np.intp)
        self.lin_coef = np.asarray(lin_coef, dtype=float)
        self.lin0 = float(lin0)
        self._compile()

    def _compile(self):
        n_t = len(self.terms)
        width = max((tm.a_idx.size for tm in self.terms), default=0)
        self._w = np.array([tm.weight for tm in self.terms])
        self._u_idx = np.array(
            [tm.u_idx if tm.u_idx is not None else -1 for tm in self.terms], dtype=np.intp
        )
        self._u0 = np.array([tm.u0 for tm in self.terms])
        self._a0 = np.array([tm.a0 for tm in self.terms])
        self._a_idx = np.zeros((n_t, width), dtype=np.intp)
        self._a_coef = np.zeros((n_t, width))
        for i, tm in enumerate(self.terms):
            # zero-coefficient padding repeats a referenced index so the
            # support map stays well defined
            pad = tm.a_idx[0] if tm.a_idx.size else (tm.u_idx or 0)
            self._a_idx[i, :] = pad
            self._a_idx[i, : tm.a_idx.size] = tm.a_idx
            self._a_coef[i, : tm.a_coef.size] = tm.a_coef
        sup = np.unique(
            np.concatenate(
                [self._u_idx[self._u_idx >= 0], self._a_idx.ravel(), self.lin_idx]
            )
        ).astype(np.intp)
        self.support = sup
        pos = {v: i for i, v in enumerate(sup)}
        self._u_pos = np.array(
            [pos[v] if v >= 0 else -1 for v in self._u_idx], dtype=np.intp
        )
        self._a_pos = np.vectorize(pos.get, otypes=[np.intp])(self._a_idx) if sup.size else self._a_idx
        self._lin_pos = np.array([pos[v] for v in self.lin_idx], dtype=np.intp)
        self._has_u = self._u_pos >= 0

    def _uv(self, z):
        u = np.where(self._u_idx >= 0, z[self._u_idx] + self._u0, self._u0)
        v = (self._a_coef * z[self._a_idx]).sum(axis=1) + self._a0
        return u, v

    def value(self, z):
        """Piece value; NaN marks a domain violation (u <= 0)."""
        val = self.lin0
        if self.lin_idx.size:
            val += float(self.lin_coef @ z[self.lin_idx])
        if not self.terms:
            return val
        u, v = self._uv(z)
        dead = (np.abs(u) < 1e-300) & (v <= 0.0) & (self._u_idx >= 0)
        if np.any((u <= 0.0) & ~dead) or np.any(v / np.where(u > 0, u, 1.0) <= -1.0):
            return np.nan
        ok = ~dead
        return val + float(
            (self._w[ok] * u[ok] * np.log1p(v[ok] / u[ok])).sum() / _LN2
        )

    def grad_local(self, z):
        """Gradient on ``self.support``."""
        g = np.zeros(self.support.size)
        if self.lin_idx.size:
            np.add.at(g, self._lin_pos, self.lin_coef)
        if not self.terms:
            return g
        u, v = self._uv(z)
        c = self._w / _LN2
        fv = c * u / (u + v)
        np.add.at(g, self._a_pos.ravel(), (fv[:, None] * self._a_coef).ravel())
        if self._has_u.any():
            q = v / u
            fu = c * (np.log1p(q) - q / (1.0 + q))
            np.add.at(g, self._u_pos[self._has_u], fu[self._has_u])
        return g

    def hess_local(self, z):
        """Hessian on ``self.support`` (small dense symmetric matrix)."""
        s = self.support.size
        h = np.zeros((s, s))
        if not self.terms:
            return h
        u, v = self._uv(z)
        c = self._w / _LN2
        denom = (u + v) ** 2
        fvv = -c * u / denom
        np.add.at(
            h,
            (self._a_pos[:, :, None], self._a_pos[:, None, :]),
            fvv[:, None, None] * self._a_coef[:, :, None] * self._a_coef[:, None, :],
        )
        hu = self._has_u
        if hu.any():
            fuu = -c * v**2 / (u * denom)
            fuv = c * v / denom
            np.add.at(h, (self._u_pos[hu], self._u_pos[hu]), fuu[hu])
            cross = fuv[hu, None] * self._a_coef[hu]
            np.add.at(h, (self._u_pos[hu, None], self._a_pos[hu]), cross)
            np.add.at(h, (self._a_pos[hu], self._u_pos[hu, None]), cross)
        return h

    def grad(self, z, dim):
        g = np.zeros(dim)
        np.add.at(g, self.support, self.grad_local(z))
        return g


@dataclass
class Solution:
    """Solver output.  ``x_opt`` covers the caller's core variables only;
    ``zeta`` holds the per-group epigraph shares at the final center."""

    x_opt: np.ndarray
    t_opt: float
    zeta: np.ndarray
    utilities: np.ndarray
    iterations: int
    kkt_residual: float
    status: str
    history: list = field(default_factory=list)
    stage_iterations: list = field(default_factory=list)
    duals: dict = field(default_factory=dict)
    mu_final: float = np.nan


@dataclass
class DualInfo:
    """Multipliers at the final barrier center: ``gamma[k]`` for the rate
    (epigraph-sum) constraints, ``mu`` for rows registered as budgets,
    ``lam`` for rows registered as nonnegativity bounds."""

    gamma: np.ndarray
    mu: np.ndarray
    lam: np.ndarray


class MaxMinProblem:
    """Epigraph max-min program over smooth concave pieces.

    Build with ``n_core`` variables, then register groups (source index plus
    one or more pieces over core variables), affine inequalities
    ``coef . x <= rhs`` and equalities ``coef . x = rhs``.  ``finalize`` (done
    lazily by the solver) appends one zeta variable per group and the scalar
    epigraph variable t.
    """

    def __init__(self, n_core: int, n_sources: int):
        self.n_core = int(n_core)
        self.n_sources = int(n_sources)
        self.groups: list[tuple[int, list[Piece]]] = []
        self._ineq_rows: list[tuple[np.ndarray, np.ndarray, float, str]] = []
        self._eq_rows: list[tuple[np.ndarray, np.ndarray, float]] = []
        self.x0: np.ndarray | None = None
        self.simplex_blocks: list[tuple[np.ndarray, float]] = []
        self._final = None

    def add_group(self, source: int, pieces) -> int:
        pieces = [pieces] if isinstance(pieces, Piece) else list(pieces)
        self.groups.append((int(source), pieces))
        return len(self.groups) - 1

    def add_ineq(self, idx, coef, rhs, name="ineq"):
        self._ineq_rows.append(
            (np.asarray(idx, dtype=np.intp), np.asarray(coef, dtype=float), float(rhs), name)
        )

    def add_eq(self, idx, coef, rhs):
        self._eq_rows.append(
            (np.asarray(idx, dtype=np.intp), np.asarray(coef, dtype=float), float(rhs))
        )

    def add_simplex_block(self, idx, budget=1.0):
        """Declare that x[idx] lives on a simplex of the given budget; enables
        the projected-supergradient fallback."""
        self.simplex_blocks.append((np.asarray(idx, dtype=np.intp), float(budget)))

    def set_start(self, x0):
        self.x0 = np.asarray(x0, dtype=float).copy()

    # -- assembled representation -------------------------------------------

    @property
    def dim(self) -> int:
        return self.n_core + len(self.groups) + 1

    @property
    def t_idx(self) -> int:
        return self.dim - 1

    def zeta_idx(self, gi: int) -> int:
        return self.n_core + gi

    def utilities(self, x_core) -> np.ndarray:
        """True concave utilities R_k(x) = sum over groups of min over pieces."""
        z = np.zeros(self.dim)
        z[: self.n_core] = x_core
        out = np.zeros(self.n_sources)
        for k, pieces in self.groups:
            out[k] += min(pc.value(z) for pc in pieces)
        return out

    def utility_supergradient(self, x_core):
        """Supergradient of min_k R_k at x (core variables only)."""
        z = np.zeros(self.dim)
        z[: self.n_core] = x_core
        vals = self.utilities(x_core)
        k_min = int(np.argmin(vals))
        g = np.zeros(self.dim)
        for k, pieces in self.groups:
            if k != k_min:
                continue
            active = min(pieces, key=lambda pc: pc.value(z))
            np.add.at(g, active.support, active.grad_local(z))
        return vals, g[: self.n_core]

    def _assemble(self):
        if self._final is not None:
            return self._final
        dim = self.dim
        rows = []
        names = []
        # caller inequalities over core variables
        for idx, coef, rhs, name in self._ineq_rows:
            rows.append((idx, coef, rhs))
            names.append(name)
        # epigraph sum rows: t - sum_{g in k} zeta_g <= 0
        for k in range(self.n_sources):
            zidx = [self.zeta_idx(gi) for gi, (src, _) in enumerate(self.groups) if src == k]
            idx = np.array(zidx + [self.t_idx], dtype=np.intp)
            coef = np.array([-1.0] * len(zidx) + [1.0])
            rows.append((idx, coef, 0.0))
            names.append("rate")
        # classify
        single = [(i, r) for i, r in enumerate(rows) if r[0].size == 1]
        double = [(i, r) for i, r in enumerate(rows) if r[0].size == 2]
        general = [(i, r) for i, r in enumerate(rows) if r[0].size > 2]
        s1_i = np.array([r[0][0] for _, r in single], dtype=np.intp)
        s1_c = np.array([r[1][0] for _, r in single])
        s1_h = np.array([r[2] for _, r in single])
        s1_rows = np.array([i for i, _ in single], dtype=np.intp)
        s2_i = np.array([r[0] for _, r in double], dtype=np.intp).reshape(-1, 2)
        s2_c = np.array([r[1] for _, r in double]).reshape(-1, 2)
        s2_h = np.array([r[2] for _, r in double])
        s2_rows = np.array([i for i, _ in double], dtype=np.intp)
        g_mat = np.zeros((len(general), dim))
        g_h = np.zeros(len(general))
        g_rows = np.array([i for i, _ in general], dtype=np.intp)
        for out_r, (i, (idx, coef, rhs)) in enumerate(general):
            g_mat[out_r, idx] = coef
            g_h[out_r] = rhs
        # equalities
        a_mat = np.zeros((len(self._eq_rows), dim))
        b_vec = np.zeros(len(self._eq_rows))
        for r, (idx, coef, rhs) in enumerate(self._eq_rows):
            a_mat[r, idx] = coef
            b_vec[r] = rhs
        self._final = {
            "n_rows": len(rows),
            "names": names,
            "s1": (s1_rows, s1_i, s1_c, s1_h),
            "s2": (s2_rows, s2_i, s2_c, s2_h),
            "gen": (g_rows, g_mat, g_h),
            "A": a_mat,
            "b": b_vec,
        }
        return self._final

    def affine_slacks(self, z):
        asm = self._assemble()
        s = np.empty(asm["n_rows"])
        s1_rows, s1_i, s1_c, s1_h = asm["s1"]
        s2_rows, s2_i, s2_c, s2_h = asm["s2"]
        g_rows, g_mat, g_h = asm["gen"]
        if s1_rows.size:
            s[s1_rows] = s1_h - s1_c * z[s1_i]
        if s2_rows.size:
            s[s2_rows] = s2_h - s2_c[:, 0] * z[s2_i[:, 0]] - s2_c[:, 1] * z[s2_i[:, 1]]
        if g_rows.size:
            s[g_rows] = g_h - g_mat @ z
        return s

    def affine_grad_accum(self, z, weights, out):
        """out -= sum_i weights[i] * grad(slack_i); slack grads are -coef."""
        asm = self._assemble()
        s1_rows, s1_i, s1_c, _ = asm["s1"]
        s2_rows, s2_i, s2_c, _ = asm["s2"]
        g_rows, g_mat, _ = asm["gen"]
        if s1_rows.size:
            np.add.at(out, s1_i, weights[s1_rows] * s1_c)
        if s2_rows.size:
            np.add.at(out, s2_i[:, 0], weights[s2_rows] * s2_c[:, 0])
            np.add.at(out, s2_i[:, 1], weights[s2_rows] * s2_c[:, 1])
        if g_rows.size:
            out += g_mat.T @ weights[g_rows]

    def affine_hess_accum(self, z, weights, out):
        """out += sum_i weights[i] * coef_i coef_i^T."""
        asm = self._assemble()
        s1_rows, s1_i, s1_c, _ = asm["s1"]
        s2_rows, s2_i, s2_c, _ = asm["s2"]
        g_rows, g_mat, _ = asm["gen"]
        if s1_rows.size:
            np.add.at(out, (s1_i, s1_i), weights[s1_rows] * s1_c**2)
        if s2_rows.size:
            w = weights[s2_rows]
            np.add.at(out, (s2_i[:, 0], s2_i[:, 0]), w * s2_c[:, 0] ** 2)
            np.add.at(out, (s2_i[:, 1], s2_i[:, 1]), w * s2_c[:, 1] ** 2)
            np.add.at(out, (s2_i[:, 0], s2_i[:, 1]), w * s2_c[:, 0] * s2_c[:, 1])
            np.add.at(out, (s2_i[:, 1], s2_i[:, 0]), w * s2_c[:, 0] * s2_c[:, 1])
        if g_rows.size:
            out += g_mat.T @ (weights[g_rows, None] * g_mat)

    def dual_rows(self, name):
        asm = self._assemble()
        return np.array([i for i, nm in enumerate(asm["names"]) if nm == name], dtype=np.intp)


def _init_full(problem: MaxMinProblem, x_core):
    """Strictly feasible full vector (x, zeta, t) from a strict core point."""
    z = np.zeros(problem.dim)
    z[: problem.n_core] = x_core
    per_source = np.zeros(problem.n_sources)
    for gi, (k, pieces) in enumerate(problem.groups):
        v = min(pc.value(z) for pc in pieces)
        if not np.isfinite(v):
            raise ValueError("starting point violates a piece domain")
        z[problem.zeta_idx(gi)] = v - 0.1 * (1.0 + abs(v))
        per_source[k] += z[problem.zeta_idx(gi)]
    t0 = per_source.min()
    z[problem.t_idx] = t0 - 0.1 * (1.0 + abs(t0))
    return z


def _piece_slacks(problem, z):
    vals = []
    for gi, (_, pieces) in enumerate(problem.groups):
        zg = z[problem.zeta_idx(gi)]
        for pc in pieces:
            vals.append(pc.value(z) - zg)
    return np.array(vals)


def _compile_slacks(pc_flat):
    """Vectorized evaluator of all piece slacks.

    Concatenates every term of every piece into flat arrays with a
    piece-of-term map, so one pass over ``z`` yields all slacks.  Returns a
    callable z -> slack vector (NaN where a perspective domain is violated).
    """
    n_pc = len(pc_flat)
    t_pid, t_w, t_uidx, t_u0, t_a0 = [], [], [], [], []
    a_idx_rows, a_coef_rows = [], []
    width = max(
        (tm.a_idx.size for _, pc, *_ in pc_flat for tm in pc.terms), default=1
    )
    lin_const = np.zeros(n_pc)
    l_pid, l_idx, l_coef = [], [], []
    zeta_idx = np.array([zi for zi, *_ in pc_flat], dtype=np.intp)
    for pid, (zi, pc, *_rest) in enumerate(pc_flat):
        lin_const[pid] = pc.lin0
        for i, v in zip(pc.lin_idx, pc.lin_coef):
            l_pid.append(pid)
            l_idx.append(i)
            l_coef.append(v)
        for tm in pc.terms:
            t_pid.append(pid)
            t_w.append(tm.weight)
            t_uidx.append(tm.u_idx if tm.u_idx is not None else -1)
            t_u0.append(tm.u0)
            t_a0.append(tm.a0)
            pad = tm.a_idx[0] if tm.a_idx.size else 0
            row = np.full(width, pad, dtype=np.intp)
            row[: tm.a_idx.size] = tm.a_idx
            a_idx_rows.append(row)
            crow = np.zeros(width)
            crow[: tm.a_coef.size] = tm.a_coef
            a_coef_rows.append(crow)
    t_pid = np.asarray(t_pid, dtype=np.intp)
    t_w = np.asarray(t_w)
    t_uidx = np.asarray(t_uidx, dtype=np.intp)
    t_u0 = np.asarray(t_u0)
    t_a0 = np.asarray(t_a0)
    a_idx = np.asarray(a_idx_rows, dtype=np.intp).reshape(-1, width)
    a_coef = np.asarray(a_coef_rows).reshape(-1, width)
    l_pid = np.asarray(l_pid, dtype=np.intp)
    l_idx = np.asarray(l_idx, dtype=np.intp)
    l_coef = np.asarray(l_coef)
    has_u = t_uidx >= 0

    def slacks(z):
        vals = lin_const - z[zeta_idx]
        if l_pid.size:
            np.add.at(vals, l_pid, l_coef * z[l_idx])
        if t_pid.size:
            u = np.where(has_u, z[t_uidx] + t_u0, t_u0)
            v = (a_coef * z[a_idx]).sum(axis=1) + t_a0
            with np.errstate(divide="ignore", invalid="ignore"):
                term = t_w * u * np.log1p(v / u) / _LN2
            bad = (u <= 0.0) | (v / np.where(u > 0, u, 1.0) <= -1.0)
            term = np.where(bad, np.nan, term)
            np.add.at(vals, t_pid, term)
        return vals

    return slacks


def solve_maxmin(
    problem: MaxMinProblem,
    tol: float = 1e-5,
    max_iters: int = 50000,
    gap_tol: float = 1e-8,
    mu0: float = 1.0,
    mu_factor: float = 0.2,
    method: str = "barrier",
):
    """Solve the epigraph max-min program.

    Returns ``(Solution, DualInfo)``.  ``tol`` bounds the reported KKT
    residual, ``gap_tol`` the absolute objective suboptimality target that
    sets the final barrier parameter.  ``method`` is "barrier" or
    "subgradient" (the latter requires simplex block structure and is a
    low-accuracy fallback).
    """
    if problem.x0 is None:
        raise ValueError("problem has no starting point; call set_start")
    if method == "subgradient":
        return _solve_subgradient(problem, max_iters)

    asm = problem._assemble()
    dim = problem.dim
    z = _init_full(problem, problem.x0)
    a_mat, b_vec = asm["A"], asm["b"]
    if a_mat.size and np.max(np.abs(a_mat @ z - b_vec)) > 1e-9:
        return _failed(problem, z, "infeasible")
    if np.any(problem.affine_slacks(z) <= 0) or np.any(_piece_slacks(problem, z) <= 0):
        return _failed(problem, z, "infeasible")

    n_pc = _piece_slacks(problem, z).size
    m_total = asm["n_rows"] + n_pc
    mu_stop = max(gap_tol / max(m_total, 1), 1e-13)

    pc_flat = []
    for gi, (_, pieces) in enumerate(problem.groups):
        for pc in pieces:
            # support extended with the group's zeta variable, plus the index
            # grid used to scatter the local Hessian into the dense system
            sup = np.append(pc.support, problem.zeta_idx(gi))
            pc_flat.append((problem.zeta_idx(gi), pc, sup, sup[:, None], sup[None, :]))
    slack_eval = _compile_slacks(pc_flat)

    def phi(zv):
        s_aff = problem.affine_slacks(zv)
        if np.any(s_aff <= 0):
            return np.inf
        s_pc = slack_eval(zv)
        if not np.all(np.isfinite(s_pc)) or np.any(s_pc <= 0):
            return np.inf
        return -zv[problem.t_idx] - mu * (np.log(s_aff).sum() + np.log(s_pc).sum())

    n_eq = a_mat.shape[0]
    iters = 0
    history = []
    stage_iters = []
    best_val, best_x = -np.inf, problem.x0.copy()

    schedule = [mu0]
    while schedule[-1] > mu_stop:
        schedule.append(schedule[-1] * mu_factor)
    for stage, mu in enumerate(schedule):
        tight = stage == len(schedule) - 1
        thresh = 1e-18 if tight else 0.1 * mu
        stage_iters.append(0)
        prev_lam2 = np.inf
        for _ in range(200):
            if iters >= max_iters:
                break
            iters += 1
            stage_iters[-1] += 1
            s_aff = problem.affine_slacks(z)
            s_pc = slack_eval(z)
            grad = np.zeros(dim)
            grad[problem.t_idx] = -1.0
            problem.affine_grad_accum(z, mu / s_aff, grad)
            hess = np.zeros((dim, dim))
            problem.affine_hess_accum(z, mu / s_aff**2, hess)
            for (zi, pc, sup, rows, cols), s in zip(pc_flat, s_pc):
                g_loc = np.append(pc.grad_local(z), -1.0)
                np.add.at(grad, sup, -(mu / s) * g_loc)
                h_loc = (mu / s**2) * np.outer(g_loc, g_loc)
                h_loc[:-1, :-1] -= (mu / s) * pc.hess_local(z)
                hess[rows, cols] += h_loc
            dmax = max(hess.diagonal().max(), 1.0)
            hess[np.diag_indices_from(hess)] += 1e-12 * dmax
            dz = None
            for reg in (0.0, 1e-8, 1e-4):
                try:
                    h_try = hess if reg == 0.0 else hess + reg * dmax * np.eye(dim)
                    if n_eq:
                        rhs = np.column_stack([grad, a_mat.T])
                        sol = np.linalg.solve(h_try, rhs)
                        yg, ya = sol[:, 0], sol[:, 1:]
                        schur = a_mat @ ya
                        w = np.linalg.solve(schur, -a_mat @ yg)
                        cand = -yg - ya @ w
                    else:
                        cand = -np.linalg.solve(h_try, grad)
                    if np.all(np.isfinite(cand)) and grad @ cand < 0:
                        dz = cand
                        break
                except np.linalg.LinAlgError:
                    continue
            if dz is None:
                break
            lam2 = -grad @ dz
            if lam2 / 2.0 <= thresh:
                break
            # numerical floor: decrement no longer shrinking meaningfully
            if lam2 > 0.25 * prev_lam2 and lam2 / 2.0 <= max(mu * 1e-3, 1e-16):
                break
            prev_lam2 = lam2
            # exact cap from affine slacks, then backtracking for the rest
            ds = s_aff - problem.affine_slacks(z + dz)  # = linear decrease at step 1
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(ds > 0, s_aff / ds, np.inf)
            alpha = min(1.0, 0.99 * ratio.min())
            phi0 = phi(z)
            gtd = grad @ dz
            accepted = False
            while alpha > 1e-13:
                znew = z + alpha * dz
                val = phi(znew)
                if np.isfinite(val) and val <= phi0 + 0.25 * alpha * gtd:
                    z = znew
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                break
        util = problem.utilities(z[: problem.n_core])
        t_true = util.min()
        history.append(t_true)
        if t_true > best_val:
            best_val, best_x = t_true, z[: problem.n_core].copy()
        if iters >= max_iters:
            break

    # duals from the final center; near-active multipliers refit to absorb
    # the residual centering error
    s_aff = problem.affine_slacks(z)
    lam_aff = mu / s_aff
    lam_pc = np.array([mu / (pc.value(z) - z[zi]) for zi, pc, *_ in pc_flat])
    res, nu = _kkt(problem, z, lam_aff, lam_pc, fit_active=10.0 * np.sqrt(mu))

    util = problem.utilities(best_x)
    status = "converged" if res <= tol else "max_iters"
    rate_rows = problem.dual_rows("rate")
    duals = {
        name: lam_aff[problem.dual_rows(name)]
        for name in set(problem._assemble()["names"])
    }
    duals["_eq"] = nu
    sol = Solution(
        x_opt=best_x,
        t_opt=float(util.min()),
        zeta=z[problem.n_core : problem.n_core + len(problem.groups)].copy(),
        utilities=util,
        iterations=iters,
        kkt_residual=res,
        status=status,
        history=history,
        stage_iterations=stage_iters,
        duals=duals,
        mu_final=mu,
    )
    dual = DualInfo(
        gamma=lam_aff[rate_rows],
        mu=sol.duals.get("relay_budget", np.zeros(0)),
        lam=sol.duals.get("nonneg", np.zeros(0)),
    )
    return sol, dual


def _failed(problem, z, status):
    util = problem.utilities(problem.x0 if problem.x0 is not None else z[: problem.n_core])
    sol = Solution(
        x_opt=problem.x0.copy(),
        t_opt=float(util.min()),
        zeta=np.zeros(len(problem.groups)),
        utilities=util,
        iterations=0,
        kkt_residual=np.inf,
        status=status,
    )
    return sol, DualInfo(np.zeros(problem.n_sources), np.zeros(0), np.zeros(0))


def _solve_subgradient(problem: MaxMinProblem, max_iters: int):
    """Projected supergradient ascent over declared simplex blocks."""
    if not problem.simplex_blocks:
        raise ValueError("subgradient method requires simplex blocks")
    x = problem.x0.copy()
    best_val, best_x = -np.inf, x.copy()
    history = []
    n_it = min(max_iters, 3000)
    step0 = 0.5
    for it in range(n_it):
        vals, g = problem.utility_supergradient(x)
        v = vals.min()
        if v > best_val:
            best_val, best_x = v, x.copy()
        if it % 50 == 0:
            history.append(best_val)
        norm = np.linalg.norm(g)
        if norm < 1e-14:
            break
        x = x + step0 / np.sqrt(it + 1.0) * g / norm
        for idx, budget in problem.simplex_blocks:
            x[idx] = project_simplex(x[idx], budget)
    util = problem.utilities(best_x)
    sol = Solution(
        x_opt=best_x,
        t_opt=float(util.min()),
        zeta=np.zeros(len(problem.groups)),
        utilities=util,
        iterations=n_it,
        kkt_residual=np.inf,
        status="converged",
        history=history,
    )
    return sol, DualInfo(np.zeros(problem.n_sources), np.zeros(0), np.zeros(0))


def project_simplex(v, budget=1.0, inequality=False):
    """Euclidean projection onto {w >= 0, sum w = budget} (or <= budget).

    Exact O(n log n) sort-based projection.  With ``inequality=True`` the
    nearer of the clipped interior point and the simplex face is returned.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    v = np.asarray(v, dtype=float)
    if inequality:
        clipped = np.maximum(v, 0.0)
        if clipped.sum() <= budget:
            return clipped
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - budget
    j = np.arange(1, v.size + 1)
    cond = u - css / j > 0
    rho = int(np.nonzero(cond)[0][-1])
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _kkt(problem: MaxMinProblem, z, lam_aff, lam_pc=None, nu=None, fit_active=None):
    asm = problem._assemble()
    dim = problem.dim
    grad_l = np.zeros(dim)
    grad_l[problem.t_idx] = -1.0  # objective: minimize -t
    s_aff = problem.affine_slacks(z)
    problem.affine_grad_accum(z, lam_aff, grad_l)
    cs = np.abs(lam_aff * s_aff).max() if lam_aff.size else 0.0
    if lam_pc is None:
        lam_pc = np.zeros(0)
    pc_grads, pc_slacks = [], []
    i = 0
    for gi, (_, pieces) in enumerate(problem.groups):
        zi = problem.zeta_idx(gi)
        for pc in pieces:
            gpc = pc.grad(z, dim)
            gpc[zi] -= 1.0
            pc_grads.append(gpc)
            pc_slacks.append(pc.value(z) - z[zi])
            if i < lam_pc.size and lam_pc[i] != 0.0:
                grad_l -= lam_pc[i] * gpc
                cs = max(cs, abs(lam_pc[i] * pc_slacks[-1]))
            i += 1
    a_mat = asm["A"]

    if fit_active is not None and a_mat.size:
        # Absorb the centering error: correct the multipliers of near-active
        # constraints (and the equality duals) by least squares, keeping them
        # nonnegative.  The fitted point is the nearest KKT certificate.
        thr = fit_active
        act_aff = np.nonzero(s_aff <= thr)[0]
        act_pc = [i for i, s in enumerate(pc_slacks) if s <= thr]
        cols = [a_mat.T]
        aff_normals = np.zeros((dim, act_aff.size))
        for c, row in enumerate(act_aff):
            w = np.zeros(asm["n_rows"])
            w[row] = 1.0
            tmp = np.zeros(dim)
            problem.affine_grad_accum(z, w, tmp)
            aff_normals[:, c] = tmp
        cols.append(aff_normals)
        cols.append(-np.column_stack([pc_grads[i] for i in act_pc]) if act_pc else np.zeros((dim, 0)))
        jmat = np.column_stack(cols)
        delta, *_ = np.linalg.lstsq(jmat, -grad_l, rcond=None)
        n_a = a_mat.shape[0]
        nu = delta[:n_a]
        d_aff = delta[n_a : n_a + act_aff.size]
        d_pc = delta[n_a + act_aff.size :]
        lam_aff = lam_aff.copy()
        lam_aff[act_aff] = np.maximum(lam_aff[act_aff] + d_aff, 0.0)
        lam_pc = lam_pc.copy()
        for c, i in enumerate(act_pc):
            lam_pc[i] = max(lam_pc[i] + d_pc[c], 0.0)
        return _kkt(problem, z, lam_aff, lam_pc, nu=nu)

    if a_mat.size:
        if nu is None:
            nu, *_ = np.linalg.lstsq(a_mat.T, -grad_l, rcond=None)
        grad_l = grad_l + a_mat.T @ nu
    else:
        nu = np.zeros(0)
    return float(max(np.abs(grad_l).max(), cs)), nu


def kkt_residual(problem: MaxMinProblem, z, lam_aff, lam_pc=None, nu=None):
    """Max-norm of stationarity plus complementary-slackness violations.

    ``z`` is the full vector (core, zeta, t); ``lam_aff`` the multipliers of
    the affine rows; ``lam_pc`` those of the piece epigraph constraints (in
    group-major order).  Equality multipliers ``nu`` are fitted by least
    squares when not supplied.
    """
    res, _ = _kkt(problem, z, lam_aff, lam_pc, nu)
    return res
