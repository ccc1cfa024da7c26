"""One simulated A/B experiment: accrual, power assessment, fixes, shipping.

An experiment is a binary-conversion test with a fixed 50/50 split and a
fixed daily traffic budget per arm, so its prospective power is a pure
function of its planned total sample size. That is what the day-7 power
assessment evaluates (matching an alert that fires long before most data
exists), and what the one-click fix restores by extending the runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import stats

STATUS_RUNNING = "running"
STATUS_COMPLETED = "completed"


@dataclass(frozen=True)
class ExperimentConfig:
    """Design parameters of one sample experiment (immutable)."""

    id: str
    owner_id: str
    baseline_rate: float
    true_lift_abs: float
    daily_traffic_per_arm: int
    planned_runtime_days: int
    target_mde_abs: float
    alpha: float = stats.DEFAULT_ALPHA
    power_threshold: float = stats.DEFAULT_POWER_THRESHOLD
    experiment_type: str = "generic"
    max_extension_days: int = 0

    def __post_init__(self):
        if not 0.0 <= self.baseline_rate < 1.0:
            raise ValueError(f"baseline_rate must be in [0,1), got {self.baseline_rate}")
        if not 0.0 <= self.baseline_rate + self.true_lift_abs < 1.0:
            raise ValueError("baseline_rate + true_lift_abs must stay in [0,1)")
        if self.daily_traffic_per_arm < 1:
            raise ValueError("daily_traffic_per_arm must be >= 1")
        if self.planned_runtime_days < 7:
            raise ValueError("planned_runtime_days must be >= 7 (power is assessed at day 7)")
        if self.target_mde_abs <= 0.0:
            raise ValueError("target_mde_abs must be > 0")
        if self.baseline_rate + self.target_mde_abs >= 1.0:
            raise ValueError("baseline_rate + target_mde_abs must stay below 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0,1)")
        if not 0.0 < self.power_threshold < 1.0:
            raise ValueError("power_threshold must be in (0,1)")
        if self.max_extension_days < 0:
            raise ValueError("max_extension_days must be >= 0")


@dataclass
class ExperimentState:
    """Mutable lifecycle state of one experiment."""

    day: int = 0
    n_control: int = 0
    n_treatment: int = 0
    conversions_control: int = 0
    conversions_treatment: int = 0
    runtime_days_current: int = 0
    settings_changed: bool = False
    alert_received: bool = False
    alert_clicked: bool = False
    status: str = STATUS_RUNNING
    shipped: Optional[bool] = None
    sufficiently_powered_today: bool = False


def new_state(config: ExperimentConfig) -> ExperimentState:
    """Fresh state with the runtime set to the planned value."""
    return ExperimentState(runtime_days_current=config.planned_runtime_days)


@dataclass(frozen=True)
class PowerAssessment:
    achieved_power: float
    is_sufficient: bool
    evaluated_at_day: int


def draw_daily_conversions(
    rng: np.random.Generator, traffic: int, rate: float, days: int
) -> np.ndarray:
    """Conversion counts for ``days`` consecutive days of one arm.

    Batched and day-at-a-time consumption of the same generator produce the
    same values, so callers may draw whole stretches at once.
    """
    return rng.binomial(traffic, rate, size=days)


def simulate_day(
    config: ExperimentConfig, state: ExperimentState, rng: np.random.Generator
) -> ExperimentState:
    """Advance one day: accrue traffic, draw conversions, maybe complete.

    Draws the control arm first, then the treatment arm. Mutates and
    returns ``state``.
    """
    if state.status != STATUS_RUNNING:
        raise ValueError(f"cannot simulate a day of a {state.status} experiment")
    t = config.daily_traffic_per_arm
    state.n_control += t
    state.n_treatment += t
    state.conversions_control += int(draw_daily_conversions(rng, t, config.baseline_rate, 1)[0])
    treatment_rate = config.baseline_rate + config.true_lift_abs
    state.conversions_treatment += int(draw_daily_conversions(rng, t, treatment_rate, 1)[0])
    state.day += 1
    if state.day >= state.runtime_days_current:
        state.status = STATUS_COMPLETED
    return state


def assess_power(
    config: ExperimentConfig, state: ExperimentState, at_day: int
) -> PowerAssessment:
    """Prospective power for the target MDE at the current planned runtime.

    Planned total n per arm is ``daily_traffic_per_arm * runtime_days_current``;
    accrued data plays no role, so the assessment is available from day one.
    """
    if at_day < 1:
        raise ValueError("at_day must be >= 1")
    n_planned = config.daily_traffic_per_arm * state.runtime_days_current
    achieved = stats.power_two_proportions(
        stats.PowerSpec(
            baseline_rate=config.baseline_rate,
            mde_abs=config.target_mde_abs,
            alpha=config.alpha,
            target_power=config.power_threshold,
            n_per_arm=n_planned,
        )
    )
    return PowerAssessment(
        achieved_power=achieved,
        is_sufficient=achieved >= config.power_threshold,
        evaluated_at_day=at_day,
    )


def required_runtime_days(config: ExperimentConfig) -> int:
    """Minimal runtime (days) whose planned sample reaches the power threshold."""
    n_required = stats.required_sample_size(
        stats.PowerSpec(
            baseline_rate=config.baseline_rate,
            mde_abs=config.target_mde_abs,
            alpha=config.alpha,
            target_power=config.power_threshold,
        )
    )
    return math.ceil(n_required / config.daily_traffic_per_arm)


def apply_one_click_fix(
    config: ExperimentConfig, state: ExperimentState
) -> Optional[tuple[ExperimentConfig, ExperimentState]]:
    """Extend the runtime to the minimal sufficiently-powered value.

    No-op when power is already sufficient. Returns None (and leaves
    everything unchanged) when the required total runtime would exceed
    ``planned_runtime_days + max_extension_days`` — the experiment is then
    unfixable and stays underpowered.
    """
    current = assess_power(config, state, at_day=max(state.day, 1))
    if current.is_sufficient:
        return config, state
    needed = required_runtime_days(config)
    if needed > config.planned_runtime_days + config.max_extension_days:
        return None
    state.runtime_days_current = needed
    state.settings_changed = True
    state.sufficiently_powered_today = True
    if state.status == STATUS_COMPLETED and state.day < needed:
        state.status = STATUS_RUNNING
    return config, state


def decide_ship(config: ExperimentConfig, state: ExperimentState) -> bool:
    """Ship when the final z-test is significant with a positive estimate."""
    if state.status != STATUS_COMPLETED:
        raise ValueError("ship decision requires a completed experiment")
    if state.n_control == 0 or state.n_treatment == 0:
        state.shipped = False
        return False
    result = stats.two_proportion_ztest(
        state.conversions_control,
        state.n_control,
        state.conversions_treatment,
        state.n_treatment,
        alpha=config.alpha,
    )
    state.shipped = bool(result.significant and result.estimate > 0.0)
    return state.shipped
