"""Information-rate arithmetic for two-hop decode-and-forward OFDM links.

Conventions used throughout the library:

* rates are in bits per OFDM use per subcarrier (``log2``);
* every cooperative rate carries the half-duplex factor 1/2, the direct rate
  uses the whole slot and carries none;
* a source's rate is the plain sum of its subcarrier rates (no 1/N average);
* node indices follow ``0 = direct, 1..J = relays`` and every argmax breaks
  ties toward direct first, then the lowest relay index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Allocation",
    "RateReport",
    "shannon",
    "rate_sr",
    "rate_srd",
    "rate_sd",
    "perspective",
    "subcarrier_rate_finite",
    "block_rate_finite",
    "lifted_objective",
    "build_rate_report",
    "hessian_check_f",
    "hessian_check_g",
]


@dataclass
class Allocation:
    """Power fractions and (optionally) lifted relaxation variables.

    ``alpha_src[k, n]`` is the fraction of source k's power spent on its n-th
    subcarrier; ``alpha_relay[j, k, n]`` the fraction of relay j's power spent
    on subcarrier n of source k.  Relaxation outputs additionally carry the
    time shares ``rho[j, k, n]`` over the extended node set (index 0 =
    direct) and the lifted products ``r_lift = rho * alpha_src`` and
    ``p_lift = rho * alpha_relay``.  Block-based schemes store ``rho``
    broadcast along the subcarrier axis.
    """

    alpha_src: np.ndarray
    alpha_relay: np.ndarray
    rho: np.ndarray | None = None
    r_lift: np.ndarray | None = None
    p_lift: np.ndarray | None = None

    def validate(self, atol: float = 1e-6) -> None:
        """Check budget and simplex invariants; raises ValueError."""
        k, n = self.alpha_src.shape
        src_tot = self.alpha_src.sum(axis=1)
        if np.any(np.abs(src_tot - 1.0) > atol):
            raise ValueError(f"source budgets not met: {src_tot}")
        rel_tot = self.alpha_relay.reshape(self.alpha_relay.shape[0], -1).sum(axis=1)
        if np.any(rel_tot > 1.0 + atol):
            raise ValueError(f"relay budgets exceeded: {rel_tot}")
        if np.any(self.alpha_src < -atol) or np.any(self.alpha_relay < -atol):
            raise ValueError("negative power fractions")
        if self.rho is not None:
            tot = self.rho.sum(axis=0)
            if np.any(np.abs(tot - 1.0) > atol):
                raise ValueError("time shares do not sum to one")
            if self.r_lift is not None and np.any(self.r_lift > self.rho + atol):
                raise ValueError("r_lift exceeds rho")
            if self.p_lift is not None and np.any(self.p_lift > self.rho[1:] + atol):
                raise ValueError("p_lift exceeds rho")


@dataclass
class RateReport:
    """Achieved rates of an allocation.

    ``per_subcarrier[k, n]`` may be absent for block schemes; ``chosen_node``
    is indexed per (k, n) for subcarrier schemes and per k for block schemes,
    or None for relaxed (time-shared) allocations.
    """

    per_source: np.ndarray
    min_rate: float
    per_subcarrier: np.ndarray | None = None
    chosen_node: np.ndarray | None = None


def shannon(x):
    """log2(1 + x) for x >= 0."""
    return np.log2(1.0 + x)


def rate_sr(snr, alpha_src, gain):
    """Half-slot source-to-relay rate."""
    return 0.5 * np.log2(1.0 + snr * alpha_src * gain)


def rate_srd(snr_sd, alpha_src, g_sd, snr_rd, alpha_relay, g_rd):
    """Half-slot compound rate: direct signal plus relayed signal combined."""
    return 0.5 * np.log2(1.0 + snr_sd * alpha_src * g_sd + snr_rd * alpha_relay * g_rd)


def rate_sd(snr_sd, alpha_src, g_sd):
    """Full-slot direct rate (no half-duplex penalty)."""
    return np.log2(1.0 + snr_sd * alpha_src * g_sd)


def perspective(u, v, weight=1.0):
    """weight * u * log2(1 + v/u), continuously extended to 0 at u = 0."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    out = np.zeros(np.broadcast(u, v).shape)
    pos = u > 0.0
    uu = np.where(pos, u, 1.0)
    np.copyto(out, weight * uu * np.log2(1.0 + v / uu), where=pos)
    return out if out.ndim else float(out)


def _candidate_rates(k, n, channels, snrs, alloc):
    """Rates of all J+1 strategies on subcarrier n of source k."""
    a0 = alloc.alpha_src[k, n]
    direct = rate_sd(snrs.snr_sd[k], a0, channels.g_sd[k, n])
    sr = rate_sr(snrs.snr_sr[k, :], a0, channels.g_sr[k, :, n])
    srd = rate_srd(
        snrs.snr_sd[k],
        a0,
        channels.g_sd[k, n],
        snrs.snr_rd[:, k],
        alloc.alpha_relay[:, k, n],
        channels.g_rd[:, k, n],
    )
    return np.concatenate([[direct], np.minimum(sr, srd)])


def subcarrier_rate_finite(k, n, channels, snrs, alloc):
    """Best-strategy rate of one subcarrier and the node achieving it.

    Returns ``(rate, chosen)`` where chosen is 0 for direct or the 1-based
    relay index; ties break toward direct, then the lowest relay index.
    """
    cand = _candidate_rates(k, n, channels, snrs, alloc)
    chosen = int(np.argmax(cand))
    return float(cand[chosen]), chosen


def block_rate_finite(k, channels, snrs, alloc):
    """Best single-strategy rate of source k's whole OFDM block.

    One node serves all N subcarriers; the cooperative rate is the minimum of
    the summed S-R and summed S-R-D rates.
    """
    a0 = alloc.alpha_src[k, :]
    direct = rate_sd(snrs.snr_sd[k], a0, channels.g_sd[k, :]).sum()
    sr = rate_sr(snrs.snr_sr[k, :, None], a0[None, :], channels.g_sr[k, :, :]).sum(axis=1)
    srd = rate_srd(
        snrs.snr_sd[k],
        a0[None, :],
        channels.g_sd[k, None, :],
        snrs.snr_rd[:, k, None],
        alloc.alpha_relay[:, k, :],
        channels.g_rd[:, k, :],
    ).sum(axis=1)
    cand = np.concatenate([[direct], np.minimum(sr, srd)])
    chosen = int(np.argmax(cand))
    return float(cand[chosen]), chosen


def lifted_objective(k, channels, snrs, alloc):
    """Relaxed subcarrier rate of source k under time sharing.

    Evaluates the jointly concave form in (rho, r, p): per subcarrier, the
    direct term is a full-slot perspective in (rho_0, r_0) and each relay term
    is the minimum of the half-slot S-R and S-R-D perspectives in
    (rho_j, r_j, p_j).  Terms with rho = 0 contribute 0.
    """
    if alloc.rho is None or alloc.r_lift is None or alloc.p_lift is None:
        raise ValueError("lifted_objective requires rho, r_lift and p_lift")
    rho = alloc.rho[:, k, :]        # (J+1, N)
    r = alloc.r_lift[:, k, :]
    p = alloc.p_lift[:, k, :]
    direct = perspective(rho[0], snrs.snr_sd[k] * r[0] * channels.g_sd[k, :])
    sr = perspective(
        rho[1:],
        snrs.snr_sr[k, :, None] * r[1:] * channels.g_sr[k, :, :],
        weight=0.5,
    )
    srd = perspective(
        rho[1:],
        snrs.snr_sd[k] * r[1:] * channels.g_sd[k, None, :]
        + snrs.snr_rd[:, k, None] * p * channels.g_rd[:, k, :],
        weight=0.5,
    )
    return float(direct.sum() + np.minimum(sr, srd).sum())


def build_rate_report(channels, snrs, alloc):
    """Per-subcarrier rate report of an allocation (best strategy per slot)."""
    k_n, n_n = alloc.alpha_src.shape
    per_sub = np.zeros((k_n, n_n))
    chosen = np.zeros((k_n, n_n), dtype=int)
    for k in range(k_n):
        for n in range(n_n):
            per_sub[k, n], chosen[k, n] = subcarrier_rate_finite(k, n, channels, snrs, alloc)
    per_source = per_sub.sum(axis=1)
    return RateReport(
        per_source=per_source,
        min_rate=float(per_source.min()),
        per_subcarrier=per_sub,
        chosen_node=chosen,
    )


def _hessian_f(x, y):
    """Analytic Hessian of f(x, y) = x * ln(1 + y/x)."""
    s = 1.0 / (1.0 + y / x) ** 2
    return s * np.array([[-(y**2) / x**3, y / x**2], [y / x**2, -1.0 / x]])


def _hessian_g(x, y, z):
    """Analytic Hessian of g(x, y, z) = x * ln(1 + y/x + z/x)."""
    w = y + z
    s = 1.0 / (1.0 + w / x) ** 2
    a = -(w**2) / x**3
    b = w / x**2
    c = -1.0 / x
    return s * np.array([[a, b, b], [b, c, c], [b, c, c]])


def hessian_check_f(x, y):
    """Largest eigenvalue of the Hessian of x*ln(1 + y/x); <= 0 certifies
    concavity of the perspective of the log."""
    if x <= 0:
        raise ValueError("x must be positive")
    return float(np.linalg.eigvalsh(_hessian_f(float(x), float(y)))[-1])


def hessian_check_g(x, y, z):
    """Largest eigenvalue of the Hessian of x*ln(1 + y/x + z/x)."""
    if x <= 0:
        raise ValueError("x must be positive")
    return float(np.linalg.eigvalsh(_hessian_g(float(x), float(y), float(z)))[-1])
