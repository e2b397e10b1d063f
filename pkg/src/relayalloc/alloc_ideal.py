"""Allocation schemes when every relay can always decode its sources.

Under that assumption the source-to-relay side never limits the rate, sources
spread their power equally over their subcarriers, and only relay power needs
to be allocated.  Four schemes are provided:

* ``ubsb_ideal`` -- subcarrier-level relaxation dropping the one-relay-per-
  subcarrier selection rule; a true upper bound on the selection problem.
* ``lbsb_ideal`` -- selection enforced on the (few) violating subcarriers of
  the relaxed solution; a feasible lower bound.
* ``block_exhaustive_ideal`` -- best of all J^K whole-block relay assignments
  with per-relay waterfilling.
* ``block_decentralized_ideal`` -- each source picks its own relay from local
  channel state only, then relays waterfill over their assigned sources.
"""

from __future__ import annotations

import itertools

import numpy as np

from .netmodel import ChannelSet, SnrConfig
from .rates import Allocation
from .results import SolveResult
from .solver import DualInfo, LogTerm, MaxMinProblem, Piece, solve_maxmin
from .waterfilling import waterfill

__all__ = [
    "ubsb_ideal",
    "violation_count",
    "lbsb_ideal",
    "block_exhaustive_ideal",
    "block_decentralized_ideal",
]

# enumeration guard for the polish candidate inside ubsb_ideal
_POLISH_ASSIGNMENT_CAP = 256


def _effective_channels(ch: ChannelSet, snrs: SnrConfig):
    """Base S-D SNR per subcarrier (equal source power) and R-D coefficients.

    Returns ``c[k, n] = SNR_sd[k] * g_sd[k, n] / N`` and
    ``b[j, k, n] = SNR_rd[j, k] * g_rd[j, k, n]``.
    """
    n = ch.g_sd.shape[1]
    c = snrs.snr_sd[:, None] * ch.g_sd / n
    b = snrs.snr_rd[:, :, None] * ch.g_rd
    return c, b


def _rates_from_relay_power(c, b, alpha):
    """Per-source rates sum_n 0.5*log2(1 + c + sum_j b*alpha)."""
    return 0.5 * np.log2(1.0 + c + (b * alpha).sum(axis=0)).sum(axis=1)


def ubsb_ideal(ch: ChannelSet, snrs: SnrConfig, solver_options=None, polish=True) -> SolveResult:
    """Relaxed subcarrier-level relay power allocation (upper bound).

    Maximizes the minimum source rate over all nonnegative relay power
    fractions with each relay's budget spent exactly, ignoring the
    one-relay-per-subcarrier rule.  With ``polish`` the reported value is
    additionally floored by the best exhaustive block assignment (also a
    feasible point of this relaxation), which guards the upper-bound property
    against solver slack on degenerate instances.
    """
    dims = ch.dims
    k_n, j_n, n_n = dims.k, dims.j, dims.n
    c, b = _effective_channels(ch, snrs)

    def vid(j, k, n):
        return (j * k_n + k) * n_n + n

    prob = MaxMinProblem(n_core=j_n * k_n * n_n, n_sources=k_n)
    for k in range(k_n):
        terms = [
            LogTerm(
                weight=0.5,
                u_idx=None,
                u0=1.0,
                a_idx=[vid(j, k, n) for j in range(j_n)],
                a_coef=b[:, k, n],
                a0=c[k, n],
            )
            for n in range(n_n)
        ]
        prob.add_group(k, Piece(terms=terms))
    for j in range(j_n):
        for k in range(k_n):
            for n in range(n_n):
                prob.add_ineq([vid(j, k, n)], [-1.0], 0.0, name="nonneg")
    for j in range(j_n):
        idx = [vid(j, k, n) for k in range(k_n) for n in range(n_n)]
        prob.add_eq(idx, np.ones(len(idx)), 1.0)
        prob.add_simplex_block(idx, 1.0)
    prob.set_start(np.full(j_n * k_n * n_n, 1.0 / (k_n * n_n)))

    opts = dict(solver_options or {})
    sol, dual = solve_maxmin(prob, **opts)
    alpha = sol.x_opt.reshape(j_n, k_n, n_n)
    per_source = _rates_from_relay_power(c, b, alpha)
    min_rate = float(per_source.min())

    if polish and j_n**k_n <= _POLISH_ASSIGNMENT_CAP:
        cand_alpha, cand_rates = _best_block_alpha_padded(c, b, k_n, j_n, n_n)
        if cand_rates.min() > min_rate:
            alpha, per_source, min_rate = cand_alpha, cand_rates, float(cand_rates.min())

    alloc = Allocation(
        alpha_src=np.full((k_n, n_n), 1.0 / n_n),
        alpha_relay=alpha,
    )
    nu = sol.duals.get("_eq", np.zeros(j_n))
    return SolveResult(
        scheme="ubsb_ideal",
        min_rate=min_rate,
        per_source=per_source,
        allocation=alloc,
        status=sol.status,
        iterations=sol.iterations,
        kkt_residual=sol.kkt_residual,
        duals=DualInfo(gamma=dual.gamma, mu=np.abs(nu), lam=dual.lam),
        diagnostics={"solver_history": sol.history},
    )


def _best_block_alpha_padded(c, b, k_n, j_n, n_n):
    """Best exhaustive block assignment, with idle relays' budgets spread
    uniformly so each relay budget is met with equality."""
    best_rates, best_alpha = None, None
    for assign in itertools.product(range(j_n), repeat=k_n):
        alpha = np.zeros((j_n, k_n, n_n))
        for j in range(j_n):
            ks = [k for k in range(k_n) if assign[k] == j]
            if not ks:
                alpha[j] = 1.0 / (k_n * n_n)
                continue
            eff = (b[j, ks, :] / (1.0 + c[ks, :])).ravel()
            alpha[j, ks, :] = waterfill(eff, 1.0).reshape(len(ks), n_n)
        rates = _rates_from_relay_power(c, b, alpha)
        if best_rates is None or rates.min() > best_rates.min():
            best_rates, best_alpha = rates, alpha
    return best_alpha, best_rates


def violation_count(alloc: Allocation, threshold: float = 1e-6) -> np.ndarray:
    """Subcarriers of each source helped by two or more relays.

    ``threshold`` is the power fraction (of the unit relay budget) above
    which a relay counts as helping.
    """
    helping = alloc.alpha_relay > threshold
    return (helping.sum(axis=0) >= 2).sum(axis=1).astype(int)


def lbsb_ideal(
    ub: SolveResult,
    ch: ChannelSet,
    snrs: SnrConfig,
    second_waterfill: bool = False,
    threshold: float = 1e-6,
) -> SolveResult:
    """Enforce relay selection on the relaxed solution (lower bound).

    Every subcarrier helped by more than one relay keeps only the relay whose
    combined rate term is largest; the freed power is dropped unless
    ``second_waterfill`` redistributes each relay's full budget over the
    subcarriers it still serves.
    """
    dims = ch.dims
    k_n, j_n, n_n = dims.k, dims.j, dims.n
    c, b = _effective_channels(ch, snrs)
    alpha = ub.allocation.alpha_relay.copy()

    helping = alpha > threshold
    multi = helping.sum(axis=0) >= 2  # (K,N)
    for k, n in zip(*np.nonzero(multi)):
        per_relay = 0.5 * np.log2(1.0 + c[k, n] + b[:, k, n] * alpha[:, k, n])
        per_relay[~helping[:, k, n]] = -np.inf
        keep = int(np.argmax(per_relay))
        drop = np.ones(j_n, dtype=bool)
        drop[keep] = False
        alpha[drop, k, n] = 0.0

    if second_waterfill:
        for j in range(j_n):
            served = alpha[j] > threshold
            if not served.any():
                continue
            eff = (b[j][served] / (1.0 + c[served])).ravel()
            fill = np.zeros((k_n, n_n))
            fill[served] = waterfill(eff, 1.0)
            alpha[j] = fill

    per_source = _rates_from_relay_power(c, b, alpha)
    chosen = np.where(
        (alpha > threshold).any(axis=0), (alpha > threshold).argmax(axis=0) + 1, 0
    )
    alloc = Allocation(alpha_src=np.full((k_n, n_n), 1.0 / n_n), alpha_relay=alpha)
    return SolveResult(
        scheme="lbsb_ideal",
        min_rate=float(per_source.min()),
        per_source=per_source,
        allocation=alloc,
        chosen=chosen,
        status=ub.status,
        diagnostics={"pruned_subcarriers": int(multi.sum())},
    )


def block_exhaustive_ideal(ch: ChannelSet, snrs: SnrConfig, max_assignments: int = 10**6) -> SolveResult:
    """Best whole-block relay assignment by exhaustive search.

    Each of the J^K assignments is scored by letting every relay waterfill its
    unit budget jointly over all subcarriers of its assigned sources; the
    assignment with the largest minimum rate wins, ties resolved toward lower
    relay indices by enumeration order.
    """
    dims = ch.dims
    k_n, j_n, n_n = dims.k, dims.j, dims.n
    if j_n**k_n > max_assignments:
        raise ValueError(
            f"J^K = {j_n**k_n} assignments exceed the enumeration guard "
            f"({max_assignments}); use block_decentralized_ideal instead"
        )
    c, b = _effective_channels(ch, snrs)
    best = None
    for assign in itertools.product(range(1, j_n + 1), repeat=k_n):
        rates, alpha = _block_rates_for_assignment(c, b, np.array(assign), k_n, j_n, n_n)
        if best is None or rates.min() > best[0].min():
            best = (rates, alpha, np.array(assign))
    rates, alpha, assign = best
    alloc = Allocation(alpha_src=np.full((k_n, n_n), 1.0 / n_n), alpha_relay=alpha)
    return SolveResult(
        scheme="block_exhaustive_ideal",
        min_rate=float(rates.min()),
        per_source=rates,
        allocation=alloc,
        chosen=assign,
        diagnostics={"assignments_checked": j_n**k_n},
    )


def _block_rates_for_assignment(c, b, assign, k_n, j_n, n_n):
    """Waterfill each relay over its assigned sources; return rates, alpha."""
    alpha = np.zeros((j_n, k_n, n_n))
    for j in range(1, j_n + 1):
        ks = np.nonzero(assign == j)[0]
        if ks.size == 0:
            continue
        eff = (b[j - 1][ks, :] / (1.0 + c[ks, :])).ravel()
        alpha[j - 1, ks, :] = waterfill(eff, 1.0).reshape(ks.size, n_n)
    return _rates_from_relay_power(c, b, alpha), alpha


def block_decentralized_ideal(
    ch: ChannelSet, snrs: SnrConfig, corrected_metric: bool = False
) -> SolveResult:
    """Local whole-block relay choice followed by per-relay waterfilling.

    Each source ranks relays by the rate it would see if the relay split its
    power equally over that source's subcarriers alone.  The ranking metric
    uses the channel magnitude (not its square), matching the decentralized
    selection rule as published; ``corrected_metric`` switches to the squared
    magnitude.  Relay power is then waterfilled jointly over each relay's
    assigned sources.
    """
    dims = ch.dims
    k_n, j_n, n_n = dims.k, dims.j, dims.n
    c, b = _effective_channels(ch, snrs)
    mag = ch.g_rd if corrected_metric else np.sqrt(ch.g_rd)
    metric = np.log2(1.0 + snrs.snr_rd[:, :, None] * mag / n_n).sum(axis=2)  # (J,K)
    assign = metric.argmax(axis=0) + 1  # ties -> lowest relay index
    rates, alpha = _block_rates_for_assignment(c, b, assign, k_n, j_n, n_n)
    alloc = Allocation(alpha_src=np.full((k_n, n_n), 1.0 / n_n), alpha_relay=alpha)
    return SolveResult(
        scheme="block_decentralized_ideal",
        min_rate=float(rates.min()),
        per_source=rates,
        allocation=alloc,
        chosen=assign,
        diagnostics={"metric": metric},
    )
