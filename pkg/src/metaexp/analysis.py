"""Metrics over one replication's snapshots, events and assignment.

The metric taxonomy follows the report's needs:

* success: fraction of eligible experiments sufficiently powered, measured
  either at a fixed day after treatment (the primary, duration-bias-free
  estimator) or at each experiment's final day (the monitoring twin whose
  comparison quantifies duration bias);
* supporting: alert clicks (variant-only, no test) and power-setting
  changes;
* monitoring: experiments not shipped.

All functions are pure over the immutable run outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from . import stats
from .engine import VARIANT, Assignment

SUCCESS = "success"
SUPPORTING = "supporting"
MONITORING = "monitoring"


@dataclass(frozen=True)
class MetricResult:
    """One metric's per-arm values, effect and test.

    ``absolute_effect`` equals ``variant_value - base_value`` except for
    variant-only metrics (alert clicks), where ``base_value`` is None and
    the effect is the variant value itself.
    """

    name: str
    kind: str
    base_value: Optional[float]
    variant_value: float
    absolute_effect: float
    test: Optional[stats.TestResult]
    significant: Optional[bool]
    base_x: int = 0
    base_n: int = 0
    variant_x: int = 0
    variant_n: int = 0


@dataclass(frozen=True)
class SubgroupResult:
    group: str
    result: MetricResult
    low_power: bool


@dataclass(frozen=True)
class TimelineResult:
    """Interrupted-time-series step on weekly aggregates."""

    step: float
    ci_low: float
    ci_high: float
    z_score: float
    p_value: float
    pre_mean: float
    post_mean: float
    alpha: float

    @property
    def significant(self) -> bool:
        return self.p_value <= self.alpha


def _split_by_arm(assignment: Assignment) -> tuple[list[str], list[str]]:
    base, variant = [], []
    for exp, arm in assignment.experiment_arms.items():
        (variant if arm == VARIANT else base).append(exp)
    return sorted(base), sorted(variant)


def _binary_metric(
    name: str,
    kind: str,
    positives: set,
    assignment: Assignment,
    alpha: float,
) -> MetricResult:
    base, variant = _split_by_arm(assignment)
    if not base or not variant:
        raise ValueError(f"metric {name!r} needs members in both arms")
    bx = sum(1 for e in base if e in positives)
    vx = sum(1 for e in variant if e in positives)
    test = stats.two_proportion_ztest(bx, len(base), vx, len(variant), alpha=alpha)
    return MetricResult(
        name=name,
        kind=kind,
        base_value=bx / len(base),
        variant_value=vx / len(variant),
        absolute_effect=test.estimate,
        test=test,
        significant=test.significant,
        base_x=bx,
        base_n=len(base),
        variant_x=vx,
        variant_n=len(variant),
    )


def powered_at_fixed_day(
    snapshots: Sequence[tuple], measure_day: int
) -> set:
    """Experiments observed sufficiently powered on their given local day.

    An experiment whose runtime ended before the measurement day has no
    snapshot then and therefore does not count, which is exactly how a
    fixed-day measurement misses experiments that finished early.
    """
    return {
        s[1] for s in snapshots if s[2] == measure_day and s[4]
    }


def success_metric_fixed_day(
    snapshots: Sequence[tuple],
    assignment: Assignment,
    measure_day_offset: int,
    eligibility_day: int = 7,
    alpha: float = stats.DEFAULT_ALPHA,
) -> MetricResult:
    """Powered fraction per arm at ``eligibility_day + measure_day_offset``."""
    if measure_day_offset < 0:
        raise ValueError("measure_day_offset must be >= 0")
    if not assignment.experiment_arms:
        raise ValueError("empty assignment")
    measure_day = eligibility_day + measure_day_offset
    if not any(s[2] == measure_day for s in snapshots):
        raise ValueError(
            f"no snapshot covers local day {measure_day}; offset beyond the simulated horizon"
        )
    powered = powered_at_fixed_day(snapshots, measure_day)
    return _binary_metric(
        f"sufficient_power_day{measure_day}", SUCCESS, powered, assignment, alpha
    )


def success_metric_end_of_run(
    snapshots: Sequence[tuple],
    assignment: Assignment,
    alpha: float = stats.DEFAULT_ALPHA,
) -> MetricResult:
    """Powered fraction per arm at each experiment's own final day."""
    if not assignment.experiment_arms:
        raise ValueError("empty assignment")
    last_day: dict = {}
    powered_last: dict = {}
    for s in snapshots:
        exp, local_day, is_powered = s[1], s[2], s[4]
        if local_day >= last_day.get(exp, -1):
            last_day[exp] = local_day
            powered_last[exp] = bool(is_powered)
    powered = {e for e, ok in powered_last.items() if ok}
    return _binary_metric(
        "sufficient_power_end_of_run", SUCCESS, powered, assignment, alpha
    )


def supporting_and_monitoring_metrics(
    events: Sequence[tuple],
    assignment: Assignment,
    alpha: float = stats.DEFAULT_ALPHA,
) -> list[MetricResult]:
    """Click rate (variant only), settings changes and not-shipped rates."""
    base, variant = _split_by_arm(assignment)
    clicked = {ev[2] for ev in events if ev[1] == "click"}
    changed = {ev[2] for ev in events if ev[1] == "settings_change"}
    not_shipped = {ev[2] for ev in events if ev[1] == "complete" and not ev[7]}
    if not variant:
        raise ValueError("click metric needs a variant arm")
    click_rate = sum(1 for e in variant if e in clicked) / len(variant)
    click = MetricResult(
        name="clicked_alert_link",
        kind=SUPPORTING,
        base_value=None,  # alerts are impossible in base
        variant_value=click_rate,
        absolute_effect=click_rate,
        test=None,
        significant=None,
        variant_x=sum(1 for e in variant if e in clicked),
        variant_n=len(variant),
    )
    settings = _binary_metric(
        "changed_power_settings", SUPPORTING, changed, assignment, alpha
    )
    shipped = _binary_metric(
        "experiment_not_shipped", MONITORING, not_shipped, assignment, alpha
    )
    return [click, settings, shipped]


def subgroup_analysis(
    snapshots: Sequence[tuple],
    assignment: Assignment,
    experiment_types: Mapping[str, str],
    measure_day_offset: int,
    eligibility_day: int = 7,
    alpha: float = stats.DEFAULT_ALPHA,
    min_group_n: int = 30,
) -> list[SubgroupResult]:
    """Fixed-day success metric per experiment type.

    Groups whose smaller arm falls below ``min_group_n`` are flagged as
    low-power rather than dropped.
    """
    missing = [e for e in assignment.experiment_arms if e not in experiment_types]
    if missing:
        raise ValueError(f"experiments without a type attribute: {missing[:3]}")
    measure_day = eligibility_day + measure_day_offset
    powered = powered_at_fixed_day(snapshots, measure_day)
    groups = sorted({experiment_types[e] for e in assignment.experiment_arms})
    results = []
    for group in groups:
        members = {
            e: arm
            for e, arm in assignment.experiment_arms.items()
            if experiment_types[e] == group
        }
        sub_assignment = Assignment(assignment.unit, {}, members)
        result = _binary_metric(
            f"sufficient_power_day{measure_day}", SUCCESS, powered, sub_assignment, alpha
        )
        results.append(
            SubgroupResult(
                group=group,
                result=result,
                low_power=min(result.base_n, result.variant_n) < min_group_n,
            )
        )
    return results


def subgroup_difference_test(
    a: MetricResult, b: MetricResult, alpha: float = stats.DEFAULT_ALPHA
) -> stats.TestResult:
    """z-test for a difference between two subgroup effects."""
    se = math.sqrt(_effect_variance(a) + _effect_variance(b))
    diff = a.absolute_effect - b.absolute_effect
    z = diff / se if se > 0 else 0.0
    p = 2.0 * stats.normal_cdf(-abs(z))
    z_alpha = stats.normal_quantile(1.0 - alpha / 2.0)
    return stats.TestResult(
        estimate=diff,
        z_score=z,
        p_value=min(p, 1.0),
        ci_low=diff - z_alpha * se,
        ci_high=diff + z_alpha * se,
        alpha=alpha,
    )


def _effect_variance(m: MetricResult) -> float:
    v = 0.0
    for x, n in ((m.base_x, m.base_n), (m.variant_x, m.variant_n)):
        f = min(max(x / n, 0.5 / n), 1.0 - 0.5 / n)
        v += f * (1.0 - f) / n
    return v


def weekly_powered_fractions(
    snapshots: Sequence[tuple],
) -> tuple[list[int], list[float]]:
    """Mean powered fraction of running eligible experiments per meta-week."""
    totals: dict = {}
    powered: dict = {}
    for s in snapshots:
        week = s[0] // 7
        totals[week] = totals.get(week, 0) + 1
        powered[week] = powered.get(week, 0) + (1 if s[4] else 0)
    weeks = sorted(totals)
    return weeks, [powered[w] / totals[w] for w in weeks]


def timeline_analysis(
    weekly_series: Sequence[float],
    intervention_week: int,
    alpha: float = stats.DEFAULT_ALPHA,
) -> TimelineResult:
    """Pre/post mean step on weekly aggregates with a two-sample CI.

    ``intervention_week`` is the index of the first post-intervention entry
    in the series. Deliberately the weakest reasonable timeline estimator:
    it treats weekly values as independent samples, which is exactly the
    assumption week-level drift violates.
    """
    pre = np.asarray(weekly_series[:intervention_week], dtype=float)
    post = np.asarray(weekly_series[intervention_week:], dtype=float)
    if len(pre) < 4 or len(post) < 4:
        raise ValueError("timeline analysis needs >= 4 weeks on each side")
    step = float(post.mean() - pre.mean())
    se = math.sqrt(
        float(pre.var(ddof=1)) / len(pre) + float(post.var(ddof=1)) / len(post)
    )
    if se > 0.0:
        z = step / se
        p = min(1.0, 2.0 * stats.normal_cdf(-abs(z)))
    else:
        z = 0.0 if step == 0.0 else math.copysign(math.inf, step)
        p = 1.0 if step == 0.0 else 0.0
    z_alpha = stats.normal_quantile(1.0 - alpha / 2.0)
    return TimelineResult(
        step=step,
        ci_low=step - z_alpha * se,
        ci_high=step + z_alpha * se,
        z_score=z,
        p_value=p,
        pre_mean=float(pre.mean()),
        post_mean=float(post.mean()),
        alpha=alpha,
    )


def success_metric_fixed_day_cuped(
    snapshots: Sequence[tuple],
    assignment: Assignment,
    covariates: Mapping[str, float],
    measure_day_offset: int,
    eligibility_day: int = 7,
    alpha: float = stats.DEFAULT_ALPHA,
) -> MetricResult:
    """Optional CUPED variant of the fixed-day success metric.

    Adjusts the binary powered outcome with a pre-treatment covariate
    (typically each experiment's day-7 prospective power); the test is a
    normal-approximation z on the adjusted means.
    """
    measure_day = eligibility_day + measure_day_offset
    powered = powered_at_fixed_day(snapshots, measure_day)
    base, variant = _split_by_arm(assignment)
    if not base or not variant:
        raise ValueError("CUPED success metric needs members in both arms")
    exps = base + variant
    y = np.array([1.0 if e in powered else 0.0 for e in exps])
    x = np.array([covariates[e] for e in exps])
    adjusted, _ = stats.cuped_adjust(y, x)
    yb, yv = adjusted[: len(base)], adjusted[len(base):]
    effect = float(yv.mean() - yb.mean())
    se = math.sqrt(
        float(yb.var(ddof=1)) / len(yb) + float(yv.var(ddof=1)) / len(yv)
    )
    z = effect / se if se > 0 else 0.0
    p = min(1.0, 2.0 * stats.normal_cdf(-abs(z)))
    z_alpha = stats.normal_quantile(1.0 - alpha / 2.0)
    test = stats.TestResult(
        estimate=effect,
        z_score=z,
        p_value=p,
        ci_low=effect - z_alpha * se,
        ci_high=effect + z_alpha * se,
        alpha=alpha,
    )
    return MetricResult(
        name=f"sufficient_power_day{measure_day}_cuped",
        kind=SUCCESS,
        base_value=float(yb.mean()),
        variant_value=float(yv.mean()),
        absolute_effect=effect,
        test=test,
        significant=test.significant,
        base_n=len(base),
        variant_n=len(variant),
    )
