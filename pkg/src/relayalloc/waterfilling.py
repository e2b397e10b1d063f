"""Exact waterfilling over parallel log channels."""

from __future__ import annotations

import numpy as np

__all__ = ["waterfill", "water_level"]


def waterfill(gains, budget: float):
    """Maximize sum log2(1 + g_i p_i) subject to sum p_i = budget, p >= 0.

    Returns the optimal power vector.  The solution has the closed form
    ``p_i = max(0, nu - 1/g_i)`` with the water level nu chosen to meet the
    budget exactly; channels with zero gain receive zero power.
    """
    g = np.asarray(gains, dtype=float)
    if budget <= 0:
        raise ValueError("budget must be positive")
    if g.ndim != 1 or g.size == 0:
        raise ValueError("gains must be a nonempty 1-D array")
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise ValueError("gains must be finite and nonnegative")
    live = g > 0
    if not live.any():
        raise ValueError("all gains are zero; waterfilling undefined")

    inv = 1.0 / g[live]
    order = np.argsort(inv)
    inv_sorted = inv[order]
    csum = np.cumsum(inv_sorted)
    m = np.arange(1, inv_sorted.size + 1)
    nu_cand = (budget + csum) / m
    # the largest active set whose water level still covers its worst channel
    active = nu_cand > inv_sorted
    m_star = int(np.nonzero(active)[0][-1]) + 1
    nu = (budget + csum[m_star - 1]) / m_star

    p_live = np.maximum(nu - inv, 0.0)
    out = np.zeros_like(g)
    out[live] = p_live
    return out


def water_level(gains, powers):
    """Implied water level nu = p_i + 1/g_i on each active channel."""
    g = np.asarray(gains, dtype=float)
    p = np.asarray(powers, dtype=float)
    act = p > 0
    return p[act] + 1.0 / g[act]
