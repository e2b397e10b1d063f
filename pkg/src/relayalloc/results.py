"""Common result record for all allocation schemes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rates import Allocation
from .solver import DualInfo

__all__ = ["SolveResult"]


@dataclass
class SolveResult:
    """Outcome of one scheme on one network instance.

    ``chosen`` holds the serving node per (k, n) for subcarrier selection
    schemes, per k for block schemes, and None for relaxed (time-shared)
    solutions.  ``diagnostics`` carries scheme-specific extras such as
    violation counts or waterfilling-problem counts.
    """

    scheme: str
    min_rate: float
    per_source: np.ndarray
    allocation: Allocation
    status: str = "converged"
    chosen: np.ndarray | None = None
    iterations: int = 0
    kkt_residual: float = np.nan
    duals: DualInfo | None = None
    diagnostics: dict = field(default_factory=dict)
