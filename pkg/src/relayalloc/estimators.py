"""Estimator-style interface to the allocation schemes.

Each scheme is wrapped in a small scikit-learn compatible estimator: options
are constructor parameters (so ``get_params``/``set_params``/``clone`` work),
``fit(X)`` runs the scheme on a network instance, and the outcome is exposed
through trailing-underscore attributes (``min_rate_``, ``per_source_rates_``,
``allocation_`` and the raw ``result_``).  ``score(X)`` evaluates the fitted
allocation on another instance with the same dimensions, returning its
minimum rate (higher is better).

``make_scheme`` builds an estimator from one of the CLI scheme names.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import alloc_finite, alloc_ideal
from .rates import lifted_objective, subcarrier_rate_finite
from .validation import as_instance, check_instance

__all__ = [
    "SubcarrierUpperBound",
    "SubcarrierSelection",
    "BlockUpperBound",
    "BlockSelection",
    "BlockExhaustive",
    "BlockDecentralized",
    "DirectOnly",
    "SCHEME_NAMES",
    "make_scheme",
    "evaluate_allocation",
]


def evaluate_allocation(channels, snrs, alloc):
    """Per-source rates of an existing allocation under given channels.

    Selection-style allocations (or plain power allocations) are scored with
    the best strategy per subcarrier at the stored powers; relaxed
    allocations carrying fractional time shares are scored with the lifted
    objective.
    """
    k_n, n_n = channels.g_sd.shape
    relaxed = alloc.rho is not None and not np.allclose(
        alloc.rho.max(axis=0), 1.0, atol=1e-6
    )
    if relaxed:
        per_source = np.array(
            [lifted_objective(k, channels, snrs, alloc) for k in range(k_n)]
        )
    else:
        per_source = np.array(
            [
                sum(
                    subcarrier_rate_finite(k, n, channels, snrs, alloc)[0]
                    for n in range(n_n)
                )
                for k in range(k_n)
            ]
        )
    return per_source


class _AllocatorBase(BaseEstimator):
    """Shared fit/score plumbing; subclasses implement ``_solve``."""

    def fit(self, X, y=None):
        inst = check_instance(as_instance(X))
        res = self._solve(inst.channels, inst.snrs)
        self.result_ = res
        self.min_rate_ = res.min_rate
        self.per_source_rates_ = res.per_source
        self.allocation_ = res.allocation
        self.chosen_ = res.chosen
        self.status_ = res.status
        self.n_iterations_ = res.iterations
        return self

    def score(self, X, y=None):
        if not hasattr(self, "result_"):
            raise AttributeError("estimator is not fitted; call fit first")
        inst = check_instance(as_instance(X))
        per_source = evaluate_allocation(inst.channels, inst.snrs, self.allocation_)
        return float(per_source.min())

    def _solver_options(self):
        return {"tol": self.tol, "gap_tol": self.gap_tol, "max_iters": self.max_iters}


class SubcarrierUpperBound(_AllocatorBase):
    """Per-subcarrier relaxation bound (ideal or finite S-R channels)."""

    def __init__(self, ideal_sr=False, fix_equal_source_power=False, tol=1e-5,
                 gap_tol=1e-8, max_iters=50000, polish=True):
        self.ideal_sr = ideal_sr
        self.fix_equal_source_power = fix_equal_source_power
        self.tol = tol
        self.gap_tol = gap_tol
        self.max_iters = max_iters
        self.polish = polish

    def _solve(self, ch, snrs):
        if self.ideal_sr:
            return alloc_ideal.ubsb_ideal(
                ch, snrs, solver_options=self._solver_options(), polish=self.polish
            )
        return alloc_finite.ubsb_finite(
            ch,
            snrs,
            solver_options=self._solver_options(),
            fix_equal_source_power=self.fix_equal_source_power,
            polish=self.polish,
        )


class SubcarrierSelection(_AllocatorBase):
    """Relaxation followed by per-subcarrier selection (lower bound)."""

    def __init__(self, ideal_sr=False, second_waterfill=False, tol=1e-5,
                 gap_tol=1e-8, max_iters=50000, polish=True):
        self.ideal_sr = ideal_sr
        self.second_waterfill = second_waterfill
        self.tol = tol
        self.gap_tol = gap_tol
        self.max_iters = max_iters
        self.polish = polish

    def _solve(self, ch, snrs):
        if self.ideal_sr:
            ub = alloc_ideal.ubsb_ideal(
                ch, snrs, solver_options=self._solver_options(), polish=self.polish
            )
            return alloc_ideal.lbsb_ideal(ub, ch, snrs, second_waterfill=self.second_waterfill)
        ub = alloc_finite.ubsb_finite(
            ch, snrs, solver_options=self._solver_options(), polish=self.polish
        )
        return alloc_finite.lbsb_finite(ub, ch, snrs, second_waterfill=self.second_waterfill)


class BlockUpperBound(_AllocatorBase):
    """Block-level relaxation bound (finite S-R channels)."""

    def __init__(self, tol=1e-5, gap_tol=1e-8, max_iters=50000, polish=True):
        self.tol = tol
        self.gap_tol = gap_tol
        self.max_iters = max_iters
        self.polish = polish

    def _solve(self, ch, snrs):
        return alloc_finite.ubbb_finite(
            ch, snrs, solver_options=self._solver_options(), polish=self.polish
        )


class BlockSelection(_AllocatorBase):
    """Block relaxation followed by one strategy per source."""

    def __init__(self, tol=1e-5, gap_tol=1e-8, max_iters=50000, polish=True):
        self.tol = tol
        self.gap_tol = gap_tol
        self.max_iters = max_iters
        self.polish = polish

    def _solve(self, ch, snrs):
        ub = alloc_finite.ubbb_finite(
            ch, snrs, solver_options=self._solver_options(), polish=self.polish
        )
        return alloc_finite.lbbb_finite(ub, ch, snrs)


class BlockExhaustive(_AllocatorBase):
    """Exhaustive whole-block relay assignment (ideal S-R channels)."""

    def __init__(self, max_assignments=10**6):
        self.max_assignments = max_assignments

    def _solve(self, ch, snrs):
        return alloc_ideal.block_exhaustive_ideal(ch, snrs, max_assignments=self.max_assignments)


class BlockDecentralized(_AllocatorBase):
    """Decentralized whole-block selection (ideal or finite S-R channels)."""

    def __init__(self, ideal_sr=False, corrected_metric=False):
        self.ideal_sr = ideal_sr
        self.corrected_metric = corrected_metric

    def _solve(self, ch, snrs):
        if self.ideal_sr:
            return alloc_ideal.block_decentralized_ideal(
                ch, snrs, corrected_metric=self.corrected_metric
            )
        return alloc_finite.decentralized_finite(ch, snrs)


class DirectOnly(_AllocatorBase):
    """Waterfilled direct transmission baseline."""

    def __init__(self):
        pass

    def _solve(self, ch, snrs):
        return alloc_finite.direct_only(ch, snrs)


_FACTORIES = {
    "ubsb_ideal": lambda: SubcarrierUpperBound(ideal_sr=True),
    "lbsb_ideal": lambda: SubcarrierSelection(ideal_sr=True),
    "block_exhaustive_ideal": lambda: BlockExhaustive(),
    "block_decentralized_ideal": lambda: BlockDecentralized(ideal_sr=True),
    "ubsb_finite": lambda: SubcarrierUpperBound(),
    "lbsb_finite": lambda: SubcarrierSelection(),
    "ubbb": lambda: BlockUpperBound(),
    "lbbb": lambda: BlockSelection(),
    "decentralized": lambda: BlockDecentralized(),
    "direct": lambda: DirectOnly(),
}

SCHEME_NAMES = tuple(_FACTORIES)


def make_scheme(name: str, **params):
    """Estimator for one of the named schemes; extra params are set on it."""
    if name not in _FACTORIES:
        raise ValueError(f"unknown scheme {name!r}; known: {', '.join(SCHEME_NAMES)}")
    est = _FACTORIES[name]()
    if params:
        est.set_params(**params)
    return est
