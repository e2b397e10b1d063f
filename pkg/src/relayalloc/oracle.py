"""Brute-force verification oracles for tiny instances.

These deliberately share no rate or solver code with the schemes they check:
all rates are computed inline from the channel arrays.  Each oracle
enumerates every node selection and maximizes the power split over quantized
simplices, optionally refined by shrinking the grid around the incumbent, so
the returned value is always achieved by a feasible point (a certified lower
bound on the true optimum) and converges to it from below.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .netmodel import ChannelSet, SnrConfig

__all__ = [
    "enumerate_block_assignments",
    "grid_oracle_subcarrier",
    "grid_oracle_block",
    "grid_oracle_ideal",
]

_CHUNK = 200_000


def enumerate_block_assignments(k: int, j: int, allow_direct: bool = False, guard: int = 10**6):
    """All whole-block node assignments.

    Returns ``(count, iterator)`` where the iterator yields length-k tuples of
    node indices (1..J, plus 0 for direct when ``allow_direct``).
    """
    base = j + 1 if allow_direct else j
    count = base**k
    if count > guard:
        raise ValueError(f"{count} assignments exceed the enumeration guard ({guard})")
    lo = 0 if allow_direct else 1
    return count, itertools.product(range(lo, j + 1), repeat=k)


def _simplex_grid(dim: int, levels: int) -> np.ndarray:
    """Barycentric grid on the unit simplex: all compositions of levels-1."""
    if dim == 1:
        return np.ones((1, 1))
    m = levels - 1
    pts = []
    for bars in itertools.combinations(range(m + dim - 1), dim - 1):
        comp = []
        prev = -1
        for b in bars:
            comp.append(b - prev - 1)
            prev = b
        comp.append(m + dim - 1 - prev - 1)
        pts.append(comp)
    return np.asarray(pts, dtype=float) / m


def _local_candidates(inc, grid, span):
    """Additive neighborhood of the incumbent on the simplex.

    Steps of size ~span in every simplex direction, independent of how close
    the incumbent sits to a face; leaving candidates are clipped and
    renormalized so every point stays exactly feasible.
    """
    d = inc.size
    cand = inc[None, :] + span * (grid - 1.0 / d)
    np.maximum(cand, 0.0, out=cand)
    cand /= cand.sum(axis=1, keepdims=True)
    return cand


def _search_blocks(block_dims, eval_fn, levels, refine_rounds, refine_levels, shrink):
    """Maximize eval_fn over a product of simplices by gridding + shrinking.

    ``eval_fn`` maps a list of (batch, d_i) arrays to a (batch,) score.
    Returns (best value, list of best block points).
    """
    grids = [_simplex_grid(d, levels) for d in block_dims]
    best_val, best_pts = _product_scan(grids, eval_fn)
    local = [_simplex_grid(d, refine_levels) for d in block_dims]
    span = 1.0
    for _ in range(refine_rounds):
        span *= shrink
        cand = [
            _local_candidates(inc, g, span) for inc, g in zip(best_pts, local)
        ]
        val, pts = _product_scan(cand, eval_fn)
        if val > best_val:
            best_val, best_pts = val, pts
    return best_val, best_pts


def _product_scan(grids, eval_fn):
    sizes = [g.shape[0] for g in grids]
    total = math.prod(sizes)
    best_val, best_pts = -np.inf, None
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(start + _CHUNK, total))
        multi = np.unravel_index(flat, sizes)
        batch = [g[m] for g, m in zip(grids, multi)]
        vals = eval_fn(batch)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val = float(vals[i])
            best_pts = [b[i].copy() for b in batch]
    return best_val, best_pts


def _selection_blocks(sel_nodes, slots, k_n, n_n, j_n):
    """Block dims and slot maps for a fixed node selection.

    ``sel_nodes[(k, n)]`` gives the serving node of each slot.  Returns the
    list of block dimensions (K source simplices then one simplex per relay
    with at least one slot) and the relay slot lists.
    """
    relay_slots = {j: [] for j in range(1, j_n + 1)}
    for (k, n) in slots:
        node = sel_nodes[(k, n)]
        if node > 0:
            relay_slots[node].append((k, n))
    dims = [n_n] * k_n + [len(s) for j, s in sorted(relay_slots.items()) if s]
    live_relays = [j for j in sorted(relay_slots) if relay_slots[j]]
    return dims, {j: relay_slots[j] for j in live_relays}


def _rates_fixed_selection(ch, snrs, sel, batch_blocks, relay_slots, per_block):
    """Min rate across sources for a batch of power points, selection fixed.

    ``sel`` maps slots to nodes ((k, n) keys for subcarrier selection; when
    ``per_block`` the same node serves every subcarrier of a source).
    """
    k_n, n_n = ch.g_sd.shape
    batch = batch_blocks[0].shape[0]
    a0 = np.stack(batch_blocks[:k_n], axis=1)                    # (batch, K, N)
    prelay = np.zeros((batch, ch.g_sr.shape[1], k_n, n_n))
    for bi, (j, slot_list) in enumerate(relay_slots.items()):
        pts = batch_blocks[k_n + bi]                             # (batch, len(slots))
        for col, (k, n) in enumerate(slot_list):
            prelay[:, j - 1, k, n] = pts[:, col]

    rates = np.zeros((batch, k_n))
    for k in range(k_n):
        if per_block:
            node = sel[(k, 0)]
            if node == 0:
                rates[:, k] = np.log2(
                    1.0 + snrs.snr_sd[k] * a0[:, k, :] * ch.g_sd[k]
                ).sum(axis=1)
            else:
                j = node
                sr = 0.5 * np.log2(
                    1.0 + snrs.snr_sr[k, j - 1] * a0[:, k, :] * ch.g_sr[k, j - 1]
                ).sum(axis=1)
                srd = 0.5 * np.log2(
                    1.0
                    + snrs.snr_sd[k] * a0[:, k, :] * ch.g_sd[k]
                    + snrs.snr_rd[j - 1, k] * prelay[:, j - 1, k, :] * ch.g_rd[j - 1, k]
                ).sum(axis=1)
                rates[:, k] = np.minimum(sr, srd)
        else:
            for n in range(n_n):
                node = sel[(k, n)]
                if node == 0:
                    rates[:, k] += np.log2(
                        1.0 + snrs.snr_sd[k] * a0[:, k, n] * ch.g_sd[k, n]
                    )
                else:
                    j = node
                    sr = 0.5 * np.log2(
                        1.0 + snrs.snr_sr[k, j - 1] * a0[:, k, n] * ch.g_sr[k, j - 1, n]
                    )
                    srd = 0.5 * np.log2(
                        1.0
                        + snrs.snr_sd[k] * a0[:, k, n] * ch.g_sd[k, n]
                        + snrs.snr_rd[j - 1, k]
                        * prelay[:, j - 1, k, n]
                        * ch.g_rd[j - 1, k, n]
                    )
                    rates[:, k] += np.minimum(sr, srd)
    return rates.min(axis=1)


def _oracle_over_selections(
    ch, snrs, selections, per_block, levels, refine_rounds, refine_levels, shrink, refine_margin
):
    k_n, n_n = ch.g_sd.shape
    j_n = ch.g_sr.shape[1]
    slots = [(k, n) for k in range(k_n) for n in range(n_n)]

    coarse = []
    for sel_tuple in selections:
        sel = dict(zip(slots, sel_tuple))
        dims, relay_slots = _selection_blocks(sel, slots, k_n, n_n, j_n)

        def eval_fn(batch, sel=sel, relay_slots=relay_slots):
            return _rates_fixed_selection(ch, snrs, sel, batch, relay_slots, per_block)

        val, pts = _search_blocks(dims, eval_fn, levels, 0, refine_levels, shrink)
        coarse.append((val, sel, dims, relay_slots, eval_fn))

    best = max(c[0] for c in coarse)
    if refine_rounds == 0:
        return best
    cutoff = best - max(refine_margin, 0.05 * abs(best))
    for val, sel, dims, relay_slots, eval_fn in coarse:
        if val < cutoff:
            continue
        refined, _ = _search_blocks(dims, eval_fn, levels, refine_rounds, refine_levels, shrink)
        best = max(best, refined)
    return best


def grid_oracle_subcarrier(
    ch: ChannelSet,
    snrs: SnrConfig,
    levels: int = 21,
    refine_rounds: int = 60,
    refine_levels: int = 9,
    shrink: float = 0.7,
) -> float:
    """Exhaustive selection x quantized-power search, subcarrier granularity.

    Every slot independently picks direct or one relay; given the selection,
    source and relay power simplices are gridded and locally refined.  The
    result never exceeds the true optimum of the selection-constrained
    problem.  Guards: K*N <= 4, J <= 2, levels <= 51.
    """
    dims = ch.dims
    if dims.k * dims.n > 4 or dims.j > 2 or levels > 51:
        raise ValueError("instance too large for the subcarrier grid oracle")
    selections = itertools.product(range(dims.j + 1), repeat=dims.k * dims.n)
    return _oracle_over_selections(
        ch, snrs, selections, False, levels, refine_rounds, refine_levels, shrink, 0.1
    )


def grid_oracle_block(
    ch: ChannelSet,
    snrs: SnrConfig,
    levels: int = 21,
    refine_rounds: int = 60,
    refine_levels: int = 9,
    shrink: float = 0.7,
) -> float:
    """Exhaustive block-strategy x quantized-power search.

    Guards: (J+1)^K <= 1e4 and K*N <= 8.
    """
    dims = ch.dims
    if (dims.j + 1) ** dims.k > 10**4 or dims.k * dims.n > 8:
        raise ValueError("instance too large for the block grid oracle")
    per_source = itertools.product(range(dims.j + 1), repeat=dims.k)
    selections = (
        tuple(node for node in assign for _ in range(dims.n)) for assign in per_source
    )
    return _oracle_over_selections(
        ch, snrs, selections, True, levels, refine_rounds, refine_levels, shrink, 0.1
    )


def grid_oracle_ideal(
    ch: ChannelSet,
    snrs: SnrConfig,
    levels: int = 21,
    refine_rounds: int = 60,
    refine_levels: int = 9,
    shrink: float = 0.7,
) -> float:
    """Grid search over the relaxed ideal-decoding program itself.

    Sources spend equal power; each relay's unit budget is gridded over all
    K*N slots simultaneously (no selection constraint), matching the relaxed
    feasible set.  Guards: K*N <= 4, J <= 2.
    """
    dims = ch.dims
    k_n, j_n, n_n = dims.k, dims.j, dims.n
    if k_n * n_n > 4 or j_n > 2 or levels > 51:
        raise ValueError("instance too large for the ideal grid oracle")
    c = snrs.snr_sd[:, None] * ch.g_sd / n_n
    b = snrs.snr_rd[:, :, None] * ch.g_rd

    def eval_fn(batch):
        acc = 1.0 + c[None, :, :]
        for j in range(j_n):
            acc = acc + b[None, j] * batch[j].reshape(-1, k_n, n_n)
        return (0.5 * np.log2(acc)).sum(axis=2).min(axis=1)

    val, _ = _search_blocks(
        [k_n * n_n] * j_n, eval_fn, levels, refine_rounds, refine_levels, shrink
    )
    return val
