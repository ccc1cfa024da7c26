"""The meta-experiment engine.

Selects the experiments that are underpowered at day 7 of their life,
randomizes them (or their owners) into base and variant, delivers alerts in
variant, drives the owners' responses, and emits an event log plus one
daily status snapshot per running eligible experiment.

Behavioral response model
-------------------------
At its day-7 decision point an eligible experiment's owner can change the
experiment's power settings through one of three channels:

* ``one_click``: clicked the alert and accepted the suggested fix as-is;
  the runtime extends to exactly the sufficient value (or not at all, when
  the needed extension exceeds the experiment's cap).
* ``manual_alert``: clicked the alert but edited the suggestion down,
  extending by about half of what is needed; the settings change without
  reaching sufficient power.
* ``spontaneous``: no alert involved. The owner computes the needed
  extension correctly with probability ``p_manual_accuracy`` (and applies
  it, capped), otherwise underestimates it by half.

Owners learn to rely on alerts: every accepted one-click fix raises the
owner's ``reliance``, which multiplicatively suppresses future spontaneous
fixes on all of that owner's experiments. Under experiment-level
randomization this leaks treatment effect into base (the spillover the
analysis module quantifies); under experimenter-level randomization the
mechanism stays inside one arm.

Every response consumes exactly four uniforms from the experiment's own
response stream regardless of which branches fire, so paired counterfactual
runs (same seed, one parameter changed) stay aligned draw for draw.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import streams
from .experiments import (
    STATUS_COMPLETED,
    STATUS_RUNNING,
    ExperimentConfig,
    ExperimentState,
    apply_one_click_fix,
    assess_power,
    decide_ship,
    draw_daily_conversions,
    new_state,
    required_runtime_days,
)
from .scenario import Scenario

BASE = "base"
VARIANT = "variant"

# Event tuples, in this order. "value" and "flag" are per-kind:
#   alert / click:     value 0, flag 0
#   settings_change:   channel one_click|manual_alert|spontaneous,
#                      value new runtime (days), flag 1 if now sufficiently
#                      powered else 0
#   unfixable:         value runtime needed (days), flag 0
#   reliance:          value owner reliance after the update
#   complete:          value final runtime (days), flag 1 if shipped else 0
EVENT_FIELDS = ("day", "kind", "experiment", "arm", "owner", "channel", "value", "flag")

# Snapshot tuples, one per running eligible experiment per day, in this
# order. "day" is the meta-experiment day, "local_day" the experiment's own.
SNAPSHOT_FIELDS = (
    "day",
    "experiment",
    "local_day",
    "arm",
    "powered",
    "settings_changed",
    "alert_received",
    "alert_clicked",
    "status",
)

_EVENT_RANK = {
    "alert": 0,
    "click": 1,
    "settings_change": 2,
    "unfixable": 2,
    "reliance": 3,
    "complete": 4,
}


@dataclass
class ExperimenterAgent:
    """Behavioral owner of one or more experiments."""

    id: str
    p_spontaneous_fix: float
    p_click_alert: float
    p_fix_given_click: float
    p_partial_given_click: float = 0.0
    p_manual_accuracy: float = 1.0
    reliance: float = 0.0
    reliance_gain: float = 0.0

    def effective_spontaneous_fix(self, scale: float = 1.0) -> float:
        """Spontaneous-fix probability after reliance suppression."""
        return self.p_spontaneous_fix * (1.0 - self.reliance) * scale


@dataclass(frozen=True)
class MetaDesign:
    """Meta-experiment design: unit, eligibility day, split, window."""

    randomization_unit: str = "experiment"
    eligibility_day: int = 7
    variant_split: float = 0.5
    duration_days: int = 180
    seed: int = 0

    def __post_init__(self):
        if self.randomization_unit not in ("experiment", "experimenter"):
            raise ValueError("randomization_unit must be 'experiment' or 'experimenter'")
        if self.eligibility_day < 1:
            raise ValueError("eligibility_day must be >= 1")
        if not 0.0 < self.variant_split < 1.0:
            raise ValueError("variant_split must be in (0,1)")
        if self.duration_days < 1:
            raise ValueError("duration_days must be >= 1")


@dataclass(frozen=True)
class Assignment:
    """Unit-level arm map plus its per-experiment resolution."""

    unit: str
    unit_arms: dict
    experiment_arms: dict

    def arm_of(self, experiment_id: str) -> str:
        return self.experiment_arms[experiment_id]


@dataclass(frozen=True)
class FleetEntry:
    """One experiment in the simulated fleet."""

    index: int
    config: ExperimentConfig
    start_day: int


@dataclass
class MetaRunResult:
    """Everything one replication produces."""

    events: list
    snapshots: list
    assignment: Assignment
    fleet: list  # eligible FleetEntry objects, id order
    states: dict  # experiment id -> final ExperimentState
    agents: dict  # owner id -> ExperimenterAgent (final reliance)


def select_eligible(
    fleet: Iterable[tuple[ExperimentConfig, ExperimentState]], eligibility_day: int
) -> set[str]:
    """Experiments underpowered and still alive at the eligibility day.

    Power is prospective (a function of planned runtime only), so the check
    gives the same answer before the experiment starts and at day 7; an
    experiment whose runtime ends exactly on the eligibility day still
    counts, since the alert lands during that day.
    """
    chosen = set()
    for config, state in fleet:
        if state.runtime_days_current < eligibility_day:
            continue
        if state.status == STATUS_COMPLETED and state.day > eligibility_day:
            continue
        if not assess_power(config, state, eligibility_day).is_sufficient:
            chosen.add(config.id)
    return chosen


def randomize(
    eligible_units: Sequence[str],
    design: MetaDesign,
    owner_of: Optional[Mapping[str, str]] = None,
) -> Assignment:
    """Assign units to arms by seeded shuffle-and-split.

    Units are sorted, shuffled with a Philox stream keyed by ``design.seed``
    and split so arm counts differ by at most one (exactly balanced for a
    0.5 split and even counts). With experimenter randomization,
    ``eligible_units`` are experiment ids and ``owner_of`` maps them to their
    owners; all experiments of one owner land in the owner's arm.
    """
    units = sorted(set(eligible_units))
    if not units:
        raise ValueError("cannot randomize an empty unit set")
    if design.randomization_unit == "experimenter":
        if owner_of is None:
            raise ValueError("experimenter randomization needs owner_of")
        ids = sorted({owner_of[e] for e in units})
    else:
        ids = units
    rng = streams.generator(design.seed)
    order = rng.permutation(len(ids))
    n_variant = int(len(ids) * design.variant_split + 0.5)
    unit_arms = {}
    for pos, j in enumerate(order):
        unit_arms[ids[int(j)]] = VARIANT if pos < n_variant else BASE
    if design.randomization_unit == "experimenter":
        experiment_arms = {e: unit_arms[owner_of[e]] for e in units}
    else:
        experiment_arms = dict(unit_arms)
    return Assignment(
        unit=design.randomization_unit,
        unit_arms=unit_arms,
        experiment_arms=experiment_arms,
    )


def _manual_change(
    config: ExperimentConfig,
    state: ExperimentState,
    accurate: bool,
    channel: str,
    arm: str,
    meta_day: int,
    events: list,
) -> None:
    """A hand-made runtime extension; inaccurate ones fall short by half."""
    needed = required_runtime_days(config)
    cap_total = config.planned_runtime_days + config.max_extension_days
    if accurate:
        target = min(needed, cap_total)
    else:
        extension = needed - state.runtime_days_current
        target = min(state.runtime_days_current + (extension + 1) // 2, cap_total)
    if target <= state.runtime_days_current:
        return
    state.runtime_days_current = target
    state.settings_changed = True
    sufficient = target >= needed
    state.sufficiently_powered_today = sufficient
    if state.status == STATUS_COMPLETED and state.day < target:
        state.status = STATUS_RUNNING
    events.append(
        (meta_day, "settings_change", config.id, arm, config.owner_id, channel,
         target, int(sufficient))
    )


def deliver_alert_and_respond(
    config: ExperimentConfig,
    state: ExperimentState,
    agent: ExperimenterAgent,
    arm: str,
    rng: np.random.Generator,
    meta_day: int = 0,
    spontaneous_scale: float = 1.0,
) -> list:
    """Run one experiment's day-7 decision point; returns new events.

    Variant experiments receive the alert; base experiments only have the
    spontaneous channel. Mutates ``state`` and (on an accepted one-click
    fix) the agent's reliance.
    """
    u_click, u_action, u_spont, u_acc = rng.random(4)
    events = []
    owner = config.owner_id
    if arm == VARIANT:
        state.alert_received = True
        events.append((meta_day, "alert", config.id, arm, owner, "", 0, 0))
        if u_click < agent.p_click_alert:
            state.alert_clicked = True
            events.append((meta_day, "click", config.id, arm, owner, "", 0, 0))
            if u_action < agent.p_fix_given_click:
                fixed = apply_one_click_fix(config, state)
                if fixed is None:
                    events.append(
                        (meta_day, "unfixable", config.id, arm, owner, "one_click",
                         required_runtime_days(config), 0)
                    )
                else:
                    events.append(
                        (meta_day, "settings_change", config.id, arm, owner,
                         "one_click", state.runtime_days_current, 1)
                    )
                    agent.reliance = min(1.0, agent.reliance + agent.reliance_gain)
                    events.append(
                        (meta_day, "reliance", config.id, arm, owner, "",
                         agent.reliance, 0)
                    )
            elif u_action < agent.p_fix_given_click + agent.p_partial_given_click:
                _manual_change(config, state, False, "manual_alert", arm, meta_day, events)
            return events
    # base arm, or a variant owner who never clicked
    if u_spont < agent.effective_spontaneous_fix(spontaneous_scale):
        accurate = u_acc < agent.p_manual_accuracy
        _manual_change(config, state, accurate, "spontaneous", arm, meta_day, events)
    return events


def build_fleet(scenario: Scenario, seed: int) -> list[FleetEntry]:
    """Sample the experiment fleet from the scenario's distributions.

    Field arrays are drawn from the fleet stream in a fixed, documented
    order (start day, baseline, traffic, planned runtime, relative MDE,
    type, extension cap, lift components, owner multiplicities), so the
    fleet is a pure function of (scenario, seed).
    """
    f = scenario.fleet
    n = f.n_experiments
    g = streams.generator(seed, streams.FLEET)
    start_day = f.start_day.sample(g, n).astype(int)
    baseline = f.baseline_rate.sample(g, n).astype(float)
    traffic = f.daily_traffic_per_arm.sample(g, n).astype(int)
    planned = f.planned_runtime_days.sample(g, n).astype(int)
    mde_rel = f.target_mde_rel.sample(g, n).astype(float)
    exp_type = f.experiment_type.sample(g, n)
    max_ext = f.max_extension_days.sample(g, n).astype(int)
    lift_zero = g.random(n)
    lift_rel = f.true_lift.magnitude_rel_to_mde.sample(g, n).astype(float)
    lift_sign = g.random(n)
    owners = []
    owner_count = 0
    while len(owners) < n:
        k = int(f.experiments_per_owner.sample(g, 1)[0])
        owners.extend([f"o{owner_count:04d}"] * k)
        owner_count += 1
    owners = owners[:n]
    entries = []
    for i in range(n):
        mde = float(baseline[i] * mde_rel[i])
        if lift_zero[i] < f.true_lift.zero_prob:
            lift = 0.0
        else:
            lift = float(lift_rel[i] * mde)
            if lift_sign[i] < f.true_lift.negative_prob:
                lift = -lift
        config = ExperimentConfig(
            id=f"e{i:04d}",
            owner_id=owners[i],
            baseline_rate=float(baseline[i]),
            true_lift_abs=lift,
            daily_traffic_per_arm=int(traffic[i]),
            planned_runtime_days=int(planned[i]),
            target_mde_abs=mde,
            alpha=scenario.analysis.alpha,
            power_threshold=scenario.analysis.power_threshold,
            experiment_type=str(exp_type[i]),
            max_extension_days=int(max_ext[i]),
        )
        entries.append(FleetEntry(index=i, config=config, start_day=int(start_day[i])))
    return entries


def _drift_multipliers(scenario: Scenario, seed: int, weeks: int) -> np.ndarray:
    """Weekly multiplier on the spontaneous-fix rate (mean-one log walk)."""
    sigma = scenario.agents.spontaneous_drift_sigma
    g = streams.generator(seed, streams.DRIFT)
    steps = g.normal(size=weeks)
    if sigma == 0.0:
        return np.ones(weeks)
    log_level = np.cumsum(sigma * steps - 0.5 * sigma * sigma)
    return np.exp(log_level)


def run_meta_experiment(scenario: Scenario, seed: int, mode: str = "rct") -> MetaRunResult:
    """Simulate one full replication.

    ``mode="rct"`` randomizes eligible units into base and variant;
    ``mode="rollout"`` is the non-randomized counterfactual used by the
    timeline comparison: experiments whose day 7 falls before the
    scenario's rollout week get no alert (base), later ones all get it
    (variant).

    The result is a pure function of (scenario, seed, mode): all draws come
    from streams derived per purpose and per experiment, and experiments
    whose day 7 falls outside the meta-experiment window are excluded from
    eligibility. Experiments that do enter always run to completion, even
    past the window's end.
    """
    if mode not in ("rct", "rollout"):
        raise ValueError("mode must be 'rct' or 'rollout'")
    design = scenario.design_template()
    fleet = build_fleet(scenario, seed)
    states = {e.config.id: new_state(e.config) for e in fleet}
    in_window = [
        e for e in fleet
        if e.start_day + design.eligibility_day <= design.duration_days
    ]
    eligible_ids = select_eligible(
        ((e.config, states[e.config.id]) for e in in_window), design.eligibility_day
    )
    eligible = [e for e in in_window if e.config.id in eligible_ids]
    eligible.sort(key=lambda e: e.config.id)

    if mode == "rct":
        if eligible:
            owner_of = {e.config.id: e.config.owner_id for e in eligible}
            assignment = randomize(
                sorted(eligible_ids),
                replace(design, seed=streams.derive_key(seed, streams.ASSIGN)),
                owner_of=owner_of,
            )
        else:
            assignment = Assignment(design.randomization_unit, {}, {})
    else:
        rollout_day = scenario.design.rollout_week * 7
        arms = {
            e.config.id: (
                VARIANT
                if e.start_day + design.eligibility_day >= rollout_day
                else BASE
            )
            for e in eligible
        }
        assignment = Assignment("rollout", dict(arms), arms)

    agents = {}
    for e in eligible:
        owner = e.config.owner_id
        if owner not in agents:
            a = scenario.agents
            agents[owner] = ExperimenterAgent(
                id=owner,
                p_spontaneous_fix=a.p_spontaneous_fix,
                p_click_alert=a.p_click_alert,
                p_fix_given_click=a.p_fix_given_click,
                p_partial_given_click=a.p_partial_given_click,
                p_manual_accuracy=a.p_manual_accuracy,
                reliance_gain=a.reliance_gain,
            )

    horizon = 0
    for e in fleet:
        cap = e.config.planned_runtime_days + e.config.max_extension_days
        horizon = max(horizon, e.start_day + cap)
    drift = _drift_multipliers(scenario, seed, horizon // 7 + 2)

    events = []
    for e in sorted(eligible, key=lambda x: (x.start_day + design.eligibility_day, x.config.id)):
        decision_day = e.start_day + design.eligibility_day
        rng = streams.generator(seed, streams.RESPONSE, e.index)
        events.extend(
            deliver_alert_and_respond(
                e.config,
                states[e.config.id],
                agents[e.config.owner_id],
                assignment.arm_of(e.config.id),
                rng,
                meta_day=decision_day,
                spontaneous_scale=float(drift[decision_day // 7]),
            )
        )

    snapshots = []
    for e in eligible:
        config = e.config
        state = states[config.id]
        runtime = state.runtime_days_current
        rng = streams.generator(seed, streams.TRAFFIC, e.index)
        control = draw_daily_conversions(
            rng, config.daily_traffic_per_arm, config.baseline_rate, runtime
        )
        treatment = draw_daily_conversions(
            rng,
            config.daily_traffic_per_arm,
            config.baseline_rate + config.true_lift_abs,
            runtime,
        )
        state.day = runtime
        state.n_control = config.daily_traffic_per_arm * runtime
        state.n_treatment = state.n_control
        state.conversions_control = int(control.sum())
        state.conversions_treatment = int(treatment.sum())
        state.status = STATUS_COMPLETED
        shipped = decide_ship(config, state)
        events.append(
            (e.start_day + runtime, "complete", config.id,
             assignment.arm_of(config.id), config.owner_id, "", runtime, int(shipped))
        )
        powered = runtime >= required_runtime_days(config)
        state.sufficiently_powered_today = powered
        arm = assignment.arm_of(config.id)
        for local_day in range(design.eligibility_day, runtime + 1):
            snapshots.append(
                (e.start_day + local_day, config.id, local_day, arm, int(powered),
                 int(state.settings_changed), int(state.alert_received),
                 int(state.alert_clicked),
                 STATUS_COMPLETED if local_day == runtime else STATUS_RUNNING)
            )

    events.sort(key=lambda ev: (ev[0], ev[2], _EVENT_RANK[ev[1]]))
    snapshots.sort(key=lambda s: (s[0], s[1]))
    return MetaRunResult(
        events=events,
        snapshots=snapshots,
        assignment=assignment,
        fleet=eligible,
        states=states,
        agents=agents,
    )
