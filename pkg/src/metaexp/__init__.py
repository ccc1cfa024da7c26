"""metaexp: a desk-scale laboratory for meta-experiments.

Simulates a fleet of A/B tests and their owners, runs a randomized
intervention (low-power alerts with a one-click fix) on top of them, and
analyzes the result with the same statistical toolkit the simulated
experimenters use.
"""

from ._backend import backend_name
from .stats import (
    PowerSpec,
    SequentialState,
    TestResult,
    cuped_adjust,
    normal_cdf,
    normal_quantile,
    power_two_proportions,
    required_sample_size,
    sequential_update,
    two_proportion_ztest,
)

__version__ = "0.1.0"

__all__ = [
    "PowerSpec",
    "SequentialState",
    "TestResult",
    "backend_name",
    "cuped_adjust",
    "normal_cdf",
    "normal_quantile",
    "power_two_proportions",
    "required_sample_size",
    "sequential_update",
    "two_proportion_ztest",
    "__version__",
]
