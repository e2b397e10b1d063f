"""Max-min fair relay selection and power allocation for cooperative OFDM.

The package provides channel/instance generators (:mod:`relayalloc.netmodel`),
rate arithmetic (:mod:`relayalloc.rates`), a concave max-min solver
(:mod:`relayalloc.solver`), the allocation schemes themselves
(:mod:`relayalloc.alloc_ideal`, :mod:`relayalloc.alloc_finite`), brute-force
verification oracles (:mod:`relayalloc.oracle`), scikit-learn style estimator
wrappers (:mod:`relayalloc.estimators`), and an experiment harness with CLI
(:mod:`relayalloc.experiments`, ``relayalloc`` console script).
"""

from .alloc_finite import (
    decentralized_finite,
    direct_only,
    lbbb_finite,
    lbsb_finite,
    ubbb_finite,
    ubsb_finite,
)
from .alloc_ideal import (
    block_decentralized_ideal,
    block_exhaustive_ideal,
    lbsb_ideal,
    ubsb_ideal,
    violation_count,
)
from .estimators import SCHEME_NAMES, make_scheme
from .experiments import ExperimentConfig, preset, run_experiment
from .netmodel import (
    ChannelSet,
    Cost231Params,
    NetworkDims,
    NetworkInstance,
    NodeLayout,
    SnrConfig,
    cost231_path_loss_db,
    gen_geometric_instance,
    gen_iid_channels,
    snr_config_from_db,
)
from .rates import Allocation, RateReport, build_rate_report
from .results import SolveResult
from .solver import MaxMinProblem, project_simplex, solve_maxmin
from .waterfilling import waterfill

__version__ = "0.1.0"
