"""Statistical kernels for experiment power, testing and variance reduction.

Pure functions throughout: nothing here mutates its inputs, so concurrent
use needs no locking. The numeric heavy lifting lives in the kernel backend
(compiled or pure Python, see ``metaexp._backend``); this module adds
validation, the public dataclasses and the covariate-adjustment helper.

Defaults follow the package-wide convention: two-sided alpha 0.05 and a
power threshold of 0.80, both configurable everywhere they appear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from ._backend import kernels

DEFAULT_ALPHA = 0.05
DEFAULT_POWER_THRESHOLD = 0.80
DEFAULT_TAU_SQ = 1e-4


@dataclass(frozen=True)
class TestResult:
    """Outcome of a two-proportion significance test.

    ``estimate`` is the absolute difference of proportions (second sample
    minus first); the confidence interval always brackets it.
    """

    estimate: float
    z_score: float
    p_value: float
    ci_low: float
    ci_high: float
    alpha: float

    @property
    def significant(self) -> bool:
        return self.p_value <= self.alpha


@dataclass(frozen=True)
class PowerSpec:
    """Design parameters of a two-proportion test.

    ``mde_abs`` is the absolute (percentage-point) minimum detectable
    effect. ``n_per_arm`` may be omitted when the spec is only used to
    compute a required sample size.
    """

    baseline_rate: float
    mde_abs: float
    alpha: float = DEFAULT_ALPHA
    target_power: float = DEFAULT_POWER_THRESHOLD
    n_per_arm: int | None = None

    def __post_init__(self):
        if not 0.0 < self.baseline_rate < 1.0:
            raise ValueError(f"baseline_rate must be in (0,1), got {self.baseline_rate}")
        if self.mde_abs <= 0.0:
            raise ValueError(f"mde_abs must be > 0, got {self.mde_abs}")
        if not 0.0 < self.baseline_rate + self.mde_abs < 1.0:
            raise ValueError("baseline_rate + mde_abs must stay in (0,1)")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0,1), got {self.alpha}")
        if not 0.0 < self.target_power < 1.0:
            raise ValueError(f"target_power must be in (0,1), got {self.target_power}")
        if self.n_per_arm is not None and self.n_per_arm < 1:
            raise ValueError(f"n_per_arm must be >= 1, got {self.n_per_arm}")


@dataclass(frozen=True)
class SequentialState:
    """Accumulated counts and the running always-valid p-value of an mSPRT.

    Updated by value: ``sequential_update`` returns a new state. ``running_p``
    is the infimum of ``1/Lambda`` over all looks so far and never increases.
    """

    n1: int = 0
    n2: int = 0
    x1: int = 0
    x2: int = 0
    tau_sq: float = DEFAULT_TAU_SQ
    running_p: float = 1.0

    def __post_init__(self):
        if self.tau_sq <= 0.0:
            raise ValueError(f"tau_sq must be > 0, got {self.tau_sq}")
        if not (0 <= self.x1 <= self.n1 and 0 <= self.x2 <= self.n2):
            raise ValueError("conversion counts must satisfy 0 <= x_i <= n_i")


def normal_cdf(x: float) -> float:
    """Standard normal CDF; rejects non-finite input."""
    if not math.isfinite(x):
        raise ValueError(f"normal_cdf requires finite input, got {x}")
    return kernels.normal_cdf(x)


@lru_cache(maxsize=1024)
def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF for p in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"normal_quantile requires p in (0,1), got {p}")
    return kernels.normal_quantile(p)


def power_two_proportions(spec: PowerSpec) -> float:
    """Two-sided power of the pooled z-test under ``spec``.

    Uses the normal approximation for the difference of proportions with
    per-arm variance ``p1 q1 + p2 q2``; both rejection tails are counted, so
    the power tends to alpha as the effect vanishes.
    """
    if spec.n_per_arm is None:
        raise ValueError("power_two_proportions needs n_per_arm")
    z_alpha = normal_quantile(1.0 - spec.alpha / 2.0)
    return kernels.power_at(
        spec.baseline_rate, spec.baseline_rate + spec.mde_abs, spec.n_per_arm, z_alpha
    )


def required_sample_size(spec: PowerSpec) -> int:
    """Minimal per-arm n whose power reaches ``spec.target_power``.

    Exact in the sense of the implemented power function: the returned n
    clears the target and n - 1 does not (unless n == 1).
    """
    return _required_n_cached(
        spec.baseline_rate, spec.mde_abs, spec.alpha, spec.target_power
    )


@lru_cache(maxsize=4096)
def _required_n_cached(baseline, mde, alpha, target_power):
    z_alpha = normal_quantile(1.0 - alpha / 2.0)
    z_power = normal_quantile(target_power)
    return kernels.required_n(baseline, baseline + mde, z_alpha, z_power, target_power)


def two_proportion_ztest(
    x1: int, n1: int, x2: int, n2: int, alpha: float = DEFAULT_ALPHA
) -> TestResult:
    """Pooled-variance two-proportion z-test with an unpooled-variance CI.

    The estimate is ``x2/n2 - x1/n1``. Proportions used in variance terms
    get a continuity floor of 0.5/n, so degenerate counts never divide by
    zero (the z statistic is then 0, the p-value 1).
    """
    if n1 < 1 or n2 < 1:
        raise ValueError("both sample sizes must be >= 1")
    if not (0 <= x1 <= n1 and 0 <= x2 <= n2):
        raise ValueError("conversion counts must satisfy 0 <= x_i <= n_i")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0,1), got {alpha}")
    est, z, p = kernels.ztest_core(float(x1), float(n1), float(x2), float(n2))
    z_alpha = normal_quantile(1.0 - alpha / 2.0)
    f1 = min(max(x1 / n1, 0.5 / n1), 1.0 - 0.5 / n1)
    f2 = min(max(x2 / n2, 0.5 / n2), 1.0 - 0.5 / n2)
    se = math.sqrt(f1 * (1.0 - f1) / n1 + f2 * (1.0 - f2) / n2)
    return TestResult(
        estimate=est,
        z_score=z,
        p_value=p,
        ci_low=est - z_alpha * se,
        ci_high=est + z_alpha * se,
        alpha=alpha,
    )


def sequential_update(
    state: SequentialState,
    successes1: int,
    trials1: int,
    successes2: int,
    trials2: int,
) -> SequentialState:
    """Fold one per-arm Bernoulli batch into an mSPRT state.

    Rejection at level alpha means ``running_p <= alpha`` at any look; the
    mixture construction keeps that decision valid under continuous
    monitoring.
    """
    if trials1 < 0 or trials2 < 0:
        raise ValueError("batch trial counts must be >= 0")
    if not (0 <= successes1 <= trials1) or not (0 <= successes2 <= trials2):
        raise ValueError("batch successes must satisfy 0 <= s_i <= t_i")
    n1 = state.n1 + trials1
    n2 = state.n2 + trials2
    x1 = state.x1 + successes1
    x2 = state.x2 + successes2
    p = kernels.msprt_step(
        float(n1), float(x1), float(n2), float(x2), state.tau_sq, state.running_p
    )
    return replace(state, n1=n1, n2=n2, x1=x1, x2=x2, running_p=p)


def cuped_adjust(
    outcomes: Sequence[float], covariates: Sequence[float]
) -> tuple[np.ndarray, float]:
    """Covariate adjustment: subtract ``theta * (x - mean(x))`` from y.

    ``theta = cov(x, y) / var(x)`` minimizes the adjusted variance; the
    adjusted series keeps the original mean. Raises on fewer than two pairs
    or a constant covariate.
    """
    y = np.asarray(outcomes, dtype=float)
    x = np.asarray(covariates, dtype=float)
    if y.shape != x.shape or y.ndim != 1:
        raise ValueError("outcomes and covariates must be 1-d of equal length")
    if y.size < 2:
        raise ValueError("cuped_adjust needs at least 2 pairs")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx <= 0.0:
        raise ValueError("covariate variance must be > 0")
    theta = float(xc @ (y - y.mean())) / sxx
    return y - theta * xc, theta
