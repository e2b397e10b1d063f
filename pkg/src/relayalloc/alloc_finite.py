"""Allocation schemes with finite-power source-relay channels.

Every scheme here jointly considers the transmission strategy (direct or
decode-and-forward through one relay), the serving relay, and the power split
at sources and relays.  The relaxations introduce per-strategy time shares
``rho`` and the lifted products ``r = rho * alpha_src`` and
``p = rho * alpha_relay`` so the rate becomes jointly concave; enforcing a
single strategy afterwards yields the matching lower bounds.

Schemes:

* ``ubsb_finite`` / ``lbsb_finite`` -- per-subcarrier strategy choice.
* ``ubbb_finite`` / ``lbbb_finite`` -- one strategy per OFDM block.
* ``decentralized_finite`` -- local block-level choices plus per-relay
  waterfilling; never worse than forcing direct transmission.
* ``direct_only`` -- waterfilled direct transmission baseline.
"""

from __future__ import annotations

import numpy as np

from .netmodel import ChannelSet, SnrConfig
from .rates import Allocation
from .results import SolveResult
from .solver import DualInfo, LogTerm, MaxMinProblem, Piece, solve_maxmin
from .waterfilling import waterfill

__all__ = [
    "ubsb_finite",
    "lbsb_finite",
    "ubbb_finite",
    "lbbb_finite",
    "decentralized_finite",
    "direct_only",
]

# time shares below this are treated as an unused strategy when extracting
# physical powers from a relaxed solution
RHO_FLOOR = 1e-9


class _Lifted:
    """Index bookkeeping for the lifted programs.

    Variables are laid out as (rho block, optional r block, p block).  With a
    single subcarrier or pinned equal source power the r variables are forced
    (r = rho * alpha0) and eliminated; ``alpha0_fixed`` then carries the
    constant source fraction.
    """

    def __init__(self, k_n, j_n, n_n, block, fix_source_power):
        self.k_n, self.j_n, self.n_n, self.block = k_n, j_n, n_n, block
        self.has_r = n_n > 1 and not fix_source_power
        self.alpha0_fixed = 1.0 / n_n
        self.n_rho = (j_n + 1) * k_n * (1 if block else n_n)
        self.n_r = (j_n + 1) * k_n * n_n if self.has_r else 0
        self.n_p = j_n * k_n * n_n
        self.n_core = self.n_rho + self.n_r + self.n_p

    def rho(self, j, k, n=0):
        base = (j * self.k_n + k)
        return base if self.block else base * self.n_n + n

    def r(self, j, k, n):
        return self.n_rho + (j * self.k_n + k) * self.n_n + n

    def p(self, j, k, n):
        return self.n_rho + self.n_r + ((j - 1) * self.k_n + k) * self.n_n + n

    def source_term(self, snr_gain, j, k, n):
        """(a_idx, a_coef) of the source-power part snr*g*r inside a piece."""
        if self.has_r:
            return [self.r(j, k, n)], [snr_gain]
        return [self.rho(j, k, n)], [snr_gain * self.alpha0_fixed]


def _build_lifted(ch: ChannelSet, snrs: SnrConfig, block: bool, fix_source_power=False):
    dims = ch.dims
    k_n, j_n, n_n = dims.k, dims.j, dims.n
    lay = _Lifted(k_n, j_n, n_n, block, fix_source_power)
    prob = MaxMinProblem(n_core=lay.n_core, n_sources=k_n)

    span = [0] if block else range(n_n)
    for k in range(k_n):
        for nn in span:
            ns = range(n_n) if block else [nn]
            # direct: full-slot perspective(s) in (rho_0, r_0)
            terms = []
            for n in ns:
                ai, ac = lay.source_term(snrs.snr_sd[k] * ch.g_sd[k, n], 0, k, n)
                terms.append(LogTerm(1.0, lay.rho(0, k, nn), 0.0, ai, ac))
            prob.add_group(k, Piece(terms=terms))
            # each relay: min of half-slot S-R and S-R-D perspectives
            for j in range(1, j_n + 1):
                sr_terms, srd_terms = [], []
                for n in ns:
                    ai, ac = lay.source_term(
                        snrs.snr_sr[k, j - 1] * ch.g_sr[k, j - 1, n], j, k, n
                    )
                    sr_terms.append(LogTerm(0.5, lay.rho(j, k, nn), 0.0, ai, ac))
                    ai, ac = lay.source_term(snrs.snr_sd[k] * ch.g_sd[k, n], j, k, n)
                    srd_terms.append(
                        LogTerm(
                            0.5,
                            lay.rho(j, k, nn),
                            0.0,
                            list(ai) + [lay.p(j, k, n)],
                            list(ac) + [snrs.snr_rd[j - 1, k] * ch.g_rd[j - 1, k, n]],
                        )
                    )
                prob.add_group(k, [Piece(terms=sr_terms), Piece(terms=srd_terms)])

    rho_span = [0] if block else range(n_n)
    for k in range(k_n):
        for nn in rho_span:
            idx = [lay.rho(j, k, nn) for j in range(j_n + 1)]
            prob.add_eq(idx, np.ones(j_n + 1), 1.0)
    if lay.has_r:
        for k in range(k_n):
            idx = [lay.r(j, k, n) for j in range(j_n + 1) for n in range(n_n)]
            prob.add_eq(idx, np.ones(len(idx)), 1.0)
        for j in range(j_n + 1):
            for k in range(k_n):
                for n in range(n_n):
                    prob.add_ineq([lay.r(j, k, n)], [-1.0], 0.0, name="nonneg")
                    prob.add_ineq(
                        [lay.r(j, k, n), lay.rho(j, k, 0 if block else n)],
                        [1.0, -1.0],
                        0.0,
                        name="r_le_rho",
                    )
    else:
        for j in range(j_n + 1):
            for k in range(k_n):
                for nn in rho_span:
                    prob.add_ineq([lay.rho(j, k, nn)], [-1.0], 0.0, name="rho_nonneg")
    for j in range(1, j_n + 1):
        for k in range(k_n):
            for n in range(n_n):
                prob.add_ineq([lay.p(j, k, n)], [-1.0], 0.0, name="nonneg")
                prob.add_ineq(
                    [lay.p(j, k, n), lay.rho(j, k, 0 if block else n)],
                    [1.0, -1.0],
                    0.0,
                    name="p_le_rho",
                )
    for j in range(1, j_n + 1):
        idx = [lay.p(j, k, n) for k in range(k_n) for n in range(n_n)]
        prob.add_ineq(idx, np.ones(len(idx)), 1.0, name="relay_budget")

    x0 = np.empty(lay.n_core)
    x0[: lay.n_rho] = 1.0 / (j_n + 1)
    if lay.has_r:
        x0[lay.n_rho : lay.n_rho + lay.n_r] = 1.0 / ((j_n + 1) * n_n)
    x0[lay.n_rho + lay.n_r :] = 1.0 / ((j_n + 1) * k_n * n_n)
    prob.set_start(x0)
    return prob, lay


def _extract_lifted(lay: _Lifted, x):
    """Dense (rho, r, p) arrays from a core solution vector."""
    k_n, j_n, n_n = lay.k_n, lay.j_n, lay.n_n
    if lay.block:
        rho_kj = x[: lay.n_rho].reshape(j_n + 1, k_n)
        rho = np.repeat(rho_kj[:, :, None], n_n, axis=2)
    else:
        rho = x[: lay.n_rho].reshape(j_n + 1, k_n, n_n)
    if lay.has_r:
        r = x[lay.n_rho : lay.n_rho + lay.n_r].reshape(j_n + 1, k_n, n_n)
    else:
        r = rho * lay.alpha0_fixed
    p = x[lay.n_rho + lay.n_r :].reshape(j_n, k_n, n_n)
    return rho, r, p


def _direct_candidate(ch: ChannelSet, snrs: SnrConfig):
    """Exact waterfilled direct-only solution, lifted into the relaxed sets."""
    k_n, n_n = ch.g_sd.shape
    j_n = ch.g_sr.shape[1]
    alpha = np.vstack([waterfill(snrs.snr_sd[k] * ch.g_sd[k], 1.0) for k in range(k_n)])
    rates = np.log2(1.0 + snrs.snr_sd[:, None] * alpha * ch.g_sd).sum(axis=1)
    rho = np.zeros((j_n + 1, k_n, n_n))
    rho[0] = 1.0
    r = np.zeros_like(rho)
    r[0] = alpha
    p = np.zeros((j_n, k_n, n_n))
    return rates, Allocation(
        alpha_src=alpha, alpha_relay=p.copy(), rho=rho, r_lift=r, p_lift=p
    )


def _finite_result(scheme, sol, dual, lay, ch, snrs, candidates):
    """Assemble a SolveResult, flooring the value with feasible candidates."""
    rho, r, p = _extract_lifted(lay, sol.x_opt)
    per_source = sol.utilities
    min_rate = float(per_source.min())
    alloc = Allocation(
        alpha_src=r.sum(axis=0), alpha_relay=p.copy(), rho=rho, r_lift=r, p_lift=p
    )
    picked = "solver"
    for name, cand_rates, cand_alloc in candidates:
        if cand_rates.min() > min_rate:
            min_rate = float(cand_rates.min())
            per_source = cand_rates
            alloc = cand_alloc
            picked = name
    return SolveResult(
        scheme=scheme,
        min_rate=min_rate,
        per_source=per_source,
        allocation=alloc,
        status=sol.status,
        iterations=sol.iterations,
        kkt_residual=sol.kkt_residual,
        duals=DualInfo(
            gamma=sol.duals.get("rate", np.zeros(0)),
            mu=sol.duals.get("relay_budget", np.zeros(0)),
            lam=sol.duals.get("nonneg", np.zeros(0)),
        ),
        diagnostics={"solver_history": sol.history, "value_source": picked},
    )


def ubsb_finite(
    ch: ChannelSet,
    snrs: SnrConfig,
    solver_options=None,
    fix_equal_source_power=False,
    polish=True,
) -> SolveResult:
    """Per-subcarrier time-sharing relaxation (upper bound).

    Solves the concave epigraph program over (rho, r, p) with per-subcarrier
    strategy shares.  ``fix_equal_source_power`` pins every source to an
    equal split (removing the r variables), which models power allocation at
    the relays only.
    """
    prob, lay = _build_lifted(ch, snrs, block=False, fix_source_power=fix_equal_source_power)
    sol, dual = solve_maxmin(prob, **dict(solver_options or {}))
    candidates = []
    if polish and not fix_equal_source_power:
        rates, alloc = _direct_candidate(ch, snrs)
        candidates.append(("direct", rates, alloc))
    return _finite_result("ubsb_finite", sol, dual, lay, ch, snrs, candidates)


def ubbb_finite(ch: ChannelSet, snrs: SnrConfig, solver_options=None, polish=True) -> SolveResult:
    """Block-level time-sharing relaxation (upper bound).

    Identical machinery with one strategy share per (source, strategy) pair,
    so each relay-or-direct choice covers the whole OFDM block.
    """
    prob, lay = _build_lifted(ch, snrs, block=True)
    sol, dual = solve_maxmin(prob, **dict(solver_options or {}))
    candidates = []
    if polish:
        rates, alloc = _direct_candidate(ch, snrs)
        candidates.append(("direct", rates, alloc))
        dec = decentralized_finite(ch, snrs)
        candidates.append(("decentralized", dec.per_source, dec.allocation))
    return _finite_result("ubbb_finite", sol, dual, lay, ch, snrs, candidates)


def _strategy_rates_subcarrier(ch, snrs, k, n, alpha0_by_strategy, alpha_relay):
    """Rates of the J+1 strategies on one subcarrier at given powers."""
    j_n = ch.g_sr.shape[1]
    out = np.empty(j_n + 1)
    out[0] = np.log2(1.0 + snrs.snr_sd[k] * alpha0_by_strategy[0] * ch.g_sd[k, n])
    for j in range(1, j_n + 1):
        a0 = alpha0_by_strategy[j]
        sr = 0.5 * np.log2(1.0 + snrs.snr_sr[k, j - 1] * a0 * ch.g_sr[k, j - 1, n])
        srd = 0.5 * np.log2(
            1.0
            + snrs.snr_sd[k] * a0 * ch.g_sd[k, n]
            + snrs.snr_rd[j - 1, k] * alpha_relay[j - 1] * ch.g_rd[j - 1, k, n]
        )
        out[j] = min(sr, srd)
    return out


def lbsb_finite(
    ub: SolveResult,
    ch: ChannelSet,
    snrs: SnrConfig,
    second_waterfill: bool = False,
) -> SolveResult:
    """Enforce one strategy per subcarrier on the relaxed solution.

    Each subcarrier keeps the strategy with the largest rate at the
    relaxation's implied powers (alpha = r/rho, p/rho where rho is used);
    source budgets are restored by proportional rescaling and relay budgets
    by downscaling when oversubscribed.  ``second_waterfill`` redistributes
    each relay's full budget over its selected subcarriers instead.
    """
    dims = ch.dims
    k_n, j_n, n_n = dims.k, dims.j, dims.n
    rho, r, p = ub.allocation.rho, ub.allocation.r_lift, ub.allocation.p_lift

    used = rho > RHO_FLOOR
    a0_cand = np.where(used, r / np.where(used, rho, 1.0), 0.0)        # (J+1,K,N)
    q_cand = np.where(used[1:], p / np.where(used[1:], rho[1:], 1.0), 0.0)

    sel = np.zeros((k_n, n_n), dtype=int)
    for k in range(k_n):
        for n in range(n_n):
            cand = _strategy_rates_subcarrier(
                ch, snrs, k, n, a0_cand[:, k, n], q_cand[:, k, n]
            )
            sel[k, n] = int(np.argmax(cand))

    a0 = np.take_along_axis(a0_cand, sel[None, :, :], axis=0)[0]       # (K,N)
    tot = a0.sum(axis=1)
    a0 = np.where(tot[:, None] > 0, a0 / np.where(tot[:, None] > 0, tot[:, None], 1.0), 1.0 / n_n)

    alpha_relay = np.zeros((j_n, k_n, n_n))
    for j in range(1, j_n + 1):
        mask = sel == j
        alpha_relay[j - 1][mask] = q_cand[j - 1][mask]
    demand = alpha_relay.reshape(j_n, -1).sum(axis=1)
    over = demand > 1.0
    alpha_relay[over] /= demand[over, None, None]

    if second_waterfill:
        for j in range(1, j_n + 1):
            mask = sel == j
            if not mask.any():
                alpha_relay[j - 1] = 0.0
                continue
            cvals = snrs.snr_sd[:, None] * a0 * ch.g_sd
            eff = (snrs.snr_rd[j - 1, :, None] * ch.g_rd[j - 1])[mask] / (1.0 + cvals[mask])
            fill = np.zeros((k_n, n_n))
            fill[mask] = waterfill(eff, 1.0)
            alpha_relay[j - 1] = fill

    per_subc = np.zeros((k_n, n_n))
    for k in range(k_n):
        for n in range(n_n):
            a0_vec = np.full(j_n + 1, a0[k, n])
            per_subc[k, n] = _strategy_rates_subcarrier(
                ch, snrs, k, n, a0_vec, alpha_relay[:, k, n]
            )[sel[k, n]]
    per_source = per_subc.sum(axis=1)

    rho_out = np.zeros((j_n + 1, k_n, n_n))
    np.put_along_axis(rho_out, sel[None, :, :], 1.0, axis=0)
    r_out = rho_out * a0[None, :, :]
    p_out = rho_out[1:] * alpha_relay
    alloc = Allocation(
        alpha_src=a0, alpha_relay=alpha_relay, rho=rho_out, r_lift=r_out, p_lift=p_out
    )
    return SolveResult(
        scheme="lbsb_finite",
        min_rate=float(per_source.min()),
        per_source=per_source,
        allocation=alloc,
        chosen=sel,
        status=ub.status,
    )


def _block_strategy_rates(ch, snrs, k, a0, alpha_relay):
    """Block rates of all J+1 strategies for source k at given powers.

    ``a0`` is (J+1, N) source fractions per strategy; ``alpha_relay`` (J, N).
    """
    j_n = ch.g_sr.shape[1]
    out = np.empty(j_n + 1)
    out[0] = np.log2(1.0 + snrs.snr_sd[k] * a0[0] * ch.g_sd[k]).sum()
    for j in range(1, j_n + 1):
        sr = 0.5 * np.log2(1.0 + snrs.snr_sr[k, j - 1] * a0[j] * ch.g_sr[k, j - 1]).sum()
        srd = 0.5 * np.log2(
            1.0
            + snrs.snr_sd[k] * a0[j] * ch.g_sd[k]
            + snrs.snr_rd[j - 1, k] * alpha_relay[j - 1] * ch.g_rd[j - 1, k]
        ).sum()
        out[j] = min(sr, srd)
    return out


def lbbb_finite(ub: SolveResult, ch: ChannelSet, snrs: SnrConfig) -> SolveResult:
    """Enforce one strategy per block on the relaxed block solution."""
    dims = ch.dims
    k_n, j_n, n_n = dims.k, dims.j, dims.n
    rho, r, p = ub.allocation.rho, ub.allocation.r_lift, ub.allocation.p_lift

    sel = np.zeros(k_n, dtype=int)
    a0 = np.zeros((k_n, n_n))
    alpha_relay = np.zeros((j_n, k_n, n_n))
    for k in range(k_n):
        rho_k = rho[:, k, 0]
        used = rho_k > RHO_FLOOR
        a0_cand = np.where(used[:, None], r[:, k, :] / np.where(used, rho_k, 1.0)[:, None], 0.0)
        q_cand = np.where(
            used[1:, None], p[:, k, :] / np.where(used[1:], rho_k[1:], 1.0)[:, None], 0.0
        )
        cand = _block_strategy_rates(ch, snrs, k, a0_cand, q_cand)
        sel[k] = int(np.argmax(cand))
        a0[k] = a0_cand[sel[k]]
        tot = a0[k].sum()
        a0[k] = a0[k] / tot if tot > 0 else 1.0 / n_n
        if sel[k] > 0:
            alpha_relay[sel[k] - 1, k, :] = q_cand[sel[k] - 1]
    demand = alpha_relay.reshape(j_n, -1).sum(axis=1)
    over = demand > 1.0
    alpha_relay[over] /= demand[over, None, None]

    per_source = np.array(
        [
            _block_strategy_rates(
                ch, snrs, k, np.tile(a0[k], (j_n + 1, 1)), alpha_relay[:, k, :]
            )[sel[k]]
            for k in range(k_n)
        ]
    )
    rho_out = np.zeros((j_n + 1, k_n, n_n))
    rho_out[sel, np.arange(k_n), :] = 1.0
    alloc = Allocation(
        alpha_src=a0,
        alpha_relay=alpha_relay,
        rho=rho_out,
        r_lift=rho_out * a0[None, :, :],
        p_lift=rho_out[1:] * alpha_relay,
    )
    return SolveResult(
        scheme="lbbb_finite",
        min_rate=float(per_source.min()),
        per_source=per_source,
        allocation=alloc,
        chosen=sel,
        status=ub.status,
    )


def decentralized_finite(ch: ChannelSet, snrs: SnrConfig) -> SolveResult:
    """Local strategy choice per source, then per-relay waterfilling.

    Stage 1: each source ranks relays by the block rate it would get with
    equal source power and the candidate relay's full budget spread equally
    over its own subcarriers.  Stage 2: the best relay competes against
    waterfilled direct transmission.  Stage 3: each relay waterfills its
    budget over its assigned sources' subcarriers; any source whose realized
    cooperative rate falls short of its direct rate (because the relay is
    shared) reverts to direct, so the scheme never loses to the direct-only
    baseline.
    """
    dims = ch.dims
    k_n, j_n, n_n = dims.k, dims.j, dims.n

    alpha_direct = np.vstack(
        [waterfill(snrs.snr_sd[k] * ch.g_sd[k], 1.0) for k in range(k_n)]
    )
    d_rates = np.log2(1.0 + snrs.snr_sd[:, None] * alpha_direct * ch.g_sd).sum(axis=1)

    c_eq = snrs.snr_sd[:, None] * ch.g_sd / n_n                       # (K,N)
    sr_eq = 0.5 * np.log2(
        1.0 + snrs.snr_sr.T[:, :, None] * ch.g_sr.transpose(1, 0, 2) / n_n
    ).sum(axis=2)                                                     # (J,K)
    srd_eq = 0.5 * np.log2(
        1.0 + c_eq[None, :, :] + snrs.snr_rd[:, :, None] * ch.g_rd / n_n
    ).sum(axis=2)                                                     # (J,K)
    cand = np.minimum(sr_eq, srd_eq)
    best_relay = cand.argmax(axis=0) + 1                              # (K,)
    coop = cand.max(axis=0) > d_rates

    n_waterfills = 0

    def realized(coop_mask):
        nonlocal n_waterfills
        alpha_relay = np.zeros((j_n, k_n, n_n))
        n_waterfills = 0
        for j in range(1, j_n + 1):
            ks = np.nonzero(coop_mask & (best_relay == j))[0]
            if ks.size == 0:
                continue
            eff = (snrs.snr_rd[j - 1, ks, None] * ch.g_rd[j - 1, ks, :] / (1.0 + c_eq[ks, :])).ravel()
            alpha_relay[j - 1, ks, :] = waterfill(eff, 1.0).reshape(ks.size, n_n)
            n_waterfills += 1
        rates = d_rates.copy()
        for k in np.nonzero(coop_mask)[0]:
            j = best_relay[k]
            srd = 0.5 * np.log2(
                1.0 + c_eq[k] + snrs.snr_rd[j - 1, k] * alpha_relay[j - 1, k] * ch.g_rd[j - 1, k]
            ).sum()
            rates[k] = min(sr_eq[j - 1, k], srd)
        return rates, alpha_relay

    rates, alpha_relay = realized(coop)
    # shared relays can realize less than the stage-2 estimate; revert those
    # sources to direct and refill
    for _ in range(k_n):
        losers = coop & (rates < d_rates)
        if not losers.any():
            break
        coop = coop & ~losers
        rates, alpha_relay = realized(coop)

    alpha_src = np.where(coop[:, None], 1.0 / n_n, alpha_direct)
    sel = np.where(coop, best_relay, 0)
    rho = np.zeros((j_n + 1, k_n, n_n))
    rho[sel, np.arange(k_n), :] = 1.0
    alloc = Allocation(
        alpha_src=alpha_src,
        alpha_relay=alpha_relay,
        rho=rho,
        r_lift=rho * alpha_src[None, :, :],
        p_lift=rho[1:] * alpha_relay,
    )
    return SolveResult(
        scheme="decentralized",
        min_rate=float(rates.min()),
        per_source=rates,
        allocation=alloc,
        chosen=sel,
        diagnostics={"relay_waterfill_count": n_waterfills},
    )


def direct_only(ch: ChannelSet, snrs: SnrConfig) -> SolveResult:
    """Waterfilled direct transmission for every source (baseline)."""
    rates, alloc = _direct_candidate(ch, snrs)
    return SolveResult(
        scheme="direct",
        min_rate=float(rates.min()),
        per_source=rates,
        allocation=alloc,
        chosen=np.zeros(ch.g_sd.shape[0], dtype=int),
    )
