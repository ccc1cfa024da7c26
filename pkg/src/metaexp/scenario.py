"""Scenario files: schema, strict validation, bundled presets.

A scenario is a single JSON document describing the fleet of sample
experiments (as distributions over their design parameters), the owners'
behavioral parameters, the meta-experiment design, the analysis settings,
and the replication defaults. Validation is strict: unknown keys are
rejected (scenario files are the experiment record, silent typos would
corrupt calibration claims) and all problems are reported at once, each
with its dotted path.

Distribution fields accept either a bare number (a constant) or an object::

    {"kind": "constant",    "value": 14}
    {"kind": "choice",      "values": [7, 14, 28], "weights": [1, 2, 1]}
    {"kind": "uniform_int", "low": 7, "high": 28}      # inclusive bounds
    {"kind": "uniform",     "low": 0.05, "high": 0.25} # half-open [low, high)
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np


class ScenarioError(ValueError):
    """Carries every validation problem found in a scenario document."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class Dist:
    """A sampleable field distribution."""

    kind: str
    value: float = 0.0
    values: tuple = ()
    weights: tuple = ()
    low: float = 0.0
    high: float = 0.0

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "constant":
            return np.full(n, self.value)
        if self.kind == "choice":
            w = np.asarray(self.weights, dtype=float)
            idx = rng.choice(len(self.values), size=n, p=w / w.sum())
            return np.asarray(self.values)[idx]
        if self.kind == "uniform_int":
            return rng.integers(int(self.low), int(self.high) + 1, size=n)
        if self.kind == "uniform":
            return self.low + (self.high - self.low) * rng.random(n)
        raise ValueError(f"unknown distribution kind {self.kind!r}")

    def support_min(self) -> float:
        if self.kind == "constant":
            return float(self.value)
        if self.kind == "choice":
            return float(min(self.values))
        return float(self.low)

    def support_max(self) -> float:
        if self.kind == "constant":
            return float(self.value)
        if self.kind == "choice":
            return float(max(self.values))
        return float(self.high)


@dataclass(frozen=True)
class LiftSpec:
    zero_prob: float
    magnitude_rel_to_mde: Dist
    negative_prob: float


@dataclass(frozen=True)
class FleetSpec:
    n_experiments: int
    start_day: Dist
    baseline_rate: Dist
    daily_traffic_per_arm: Dist
    planned_runtime_days: Dist
    target_mde_rel: Dist
    experiment_type: Dist
    max_extension_days: Dist
    experiments_per_owner: Dist
    true_lift: LiftSpec


@dataclass(frozen=True)
class AgentParams:
    p_click_alert: float
    p_fix_given_click: float
    p_partial_given_click: float
    p_spontaneous_fix: float
    p_manual_accuracy: float
    reliance_gain: float
    spontaneous_drift_sigma: float


@dataclass(frozen=True)
class DesignSpec:
    randomization_unit: str
    eligibility_day: int
    variant_split: float
    duration_days: int
    rollout_week: int


@dataclass(frozen=True)
class AnalysisSpec:
    alpha: float
    power_threshold: float
    measure_day_offset: int
    min_subgroup_n: int
    sequential_tau_sq: float
    cuped: bool


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    fleet: FleetSpec
    agents: AgentParams
    design: DesignSpec
    analysis: AnalysisSpec
    replications: int
    seed: int
    digest: str
    raw: dict

    def design_template(self):
        from .engine import MetaDesign

        return MetaDesign(
            randomization_unit=self.design.randomization_unit,
            eligibility_day=self.design.eligibility_day,
            variant_split=self.design.variant_split,
            duration_days=self.design.duration_days,
        )


def config_digest(raw: dict) -> str:
    """sha256 of the canonical JSON form; recorded in every output."""
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


class _Check:
    """Collects problems while pulling typed fields out of raw dicts."""

    def __init__(self):
        self.problems: list[str] = []

    def fail(self, path: str, message: str):
        self.problems.append(f"{path}: {message}")

    def section(self, raw: dict, path: str, allowed: set[str]) -> dict:
        if not isinstance(raw, dict):
            self.fail(path, f"must be an object, got {type(raw).__name__}")
            return {}
        for key in raw:
            if key not in allowed:
                self.fail(f"{path}.{key}", "unknown key")
        return raw

    def number(self, raw, path, lo=None, hi=None, integer=False, lo_open=False, hi_open=False):
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            self.fail(path, f"must be a number, got {raw!r}")
            return 0
        if integer and int(raw) != raw:
            self.fail(path, f"must be an integer, got {raw!r}")
            return 0
        v = int(raw) if integer else float(raw)
        if lo is not None and (v <= lo if lo_open else v < lo):
            self.fail(path, f"must be {'>' if lo_open else '>='} {lo}, got {raw!r}")
        if hi is not None and (v >= hi if hi_open else v > hi):
            self.fail(path, f"must be {'<' if hi_open else '<='} {hi}, got {raw!r}")
        return v

    def dist(self, raw, path, lo=None, hi=None, integer=False, categorical=False):
        if isinstance(raw, (int, float)) and not isinstance(raw, bool):
            raw = {"kind": "constant", "value": raw}
        if isinstance(raw, str) and categorical:
            raw = {"kind": "choice", "values": [raw], "weights": [1.0]}
        if not isinstance(raw, dict):
            self.fail(path, f"must be a number or distribution object, got {raw!r}")
            return Dist(kind="constant", value=lo if lo is not None else 0.0)
        kind = raw.get("kind")
        allowed_kinds = ("choice",) if categorical else (
            "constant", "choice", "uniform_int", "uniform"
        )
        if kind not in allowed_kinds:
            self.fail(f"{path}.kind", f"must be one of {allowed_kinds}, got {kind!r}")
            return Dist(kind="constant", value=lo if lo is not None else 0.0)
        keys = {"kind"}
        if kind == "constant":
            keys.add("value")
            value = self.number(raw.get("value"), f"{path}.value", lo, hi, integer)
            out = Dist(kind="constant", value=value)
        elif kind == "choice":
            keys.update(("values", "weights"))
            values = raw.get("values")
            if not isinstance(values, list) or not values:
                self.fail(f"{path}.values", "must be a non-empty list")
                values = [lo if lo is not None else 0.0]
            if not categorical:
                values = [
                    self.number(v, f"{path}.values[{i}]", lo, hi, integer)
                    for i, v in enumerate(values)
                ]
            weights = raw.get("weights", [1.0] * len(values))
            if not isinstance(weights, list) or len(weights) != len(values):
                self.fail(f"{path}.weights", "must match values in length")
                weights = [1.0] * len(values)
            else:
                weights = [
                    self.number(w, f"{path}.weights[{i}]", 0.0)
                    for i, w in enumerate(weights)
                ]
                if sum(weights) <= 0:
                    self.fail(f"{path}.weights", "must sum to a positive value")
                    weights = [1.0] * len(values)
            out = Dist(kind="choice", values=tuple(values), weights=tuple(weights))
        else:
            keys.update(("low", "high"))
            low = self.number(raw.get("low"), f"{path}.low", lo, hi, integer)
            high = self.number(raw.get("high"), f"{path}.high", lo, hi, integer)
            if high < low:
                self.fail(f"{path}.high", "must be >= low")
                high = low
            out = Dist(kind=kind, low=low, high=high)
        for key in raw:
            if key not in keys:
                self.fail(f"{path}.{key}", "unknown key")
        return out

    def prob(self, raw, path):
        return self.number(raw, path, 0.0, 1.0)


def _bool_field(c: _Check, raw, path) -> bool:
    if not isinstance(raw, bool):
        c.fail(path, f"must be a boolean, got {raw!r}")
        return False
    return raw


_TOP_KEYS = {
    "name", "description", "fleet", "agents", "design", "analysis",
    "replications", "seed",
}
_FLEET_KEYS = {
    "n_experiments", "start_day", "baseline_rate", "daily_traffic_per_arm",
    "planned_runtime_days", "target_mde_rel", "experiment_type",
    "max_extension_days", "experiments_per_owner", "true_lift",
}
_LIFT_KEYS = {"zero_prob", "magnitude_rel_to_mde", "negative_prob"}
_AGENT_KEYS = {
    "p_click_alert", "p_fix_given_click", "p_partial_given_click",
    "p_spontaneous_fix", "p_manual_accuracy", "reliance_gain",
    "spontaneous_drift_sigma",
}
_DESIGN_KEYS = {
    "randomization_unit", "eligibility_day", "variant_split", "duration_days",
    "rollout_week",
}
_ANALYSIS_KEYS = {
    "alpha", "power_threshold", "measure_day_offset", "min_subgroup_n",
    "sequential_tau_sq", "cuped",
}


def validate_scenario(raw: dict) -> Scenario:
    """Turn a raw JSON document into a Scenario or raise ScenarioError."""
    c = _Check()
    top = c.section(raw, "scenario", _TOP_KEYS)
    name = top.get("name")
    if not isinstance(name, str) or not name:
        c.fail("scenario.name", "must be a non-empty string")
        name = "unnamed"
    description = top.get("description", "")
    if not isinstance(description, str):
        c.fail("scenario.description", "must be a string")
        description = ""

    fr = c.section(top.get("fleet", {}), "fleet", _FLEET_KEYS)
    lr = c.section(fr.get("true_lift", {}), "fleet.true_lift", _LIFT_KEYS)
    lift = LiftSpec(
        zero_prob=c.prob(lr.get("zero_prob", 1.0), "fleet.true_lift.zero_prob"),
        magnitude_rel_to_mde=c.dist(
            lr.get("magnitude_rel_to_mde", 0.0),
            "fleet.true_lift.magnitude_rel_to_mde", lo=0.0,
        ),
        negative_prob=c.prob(lr.get("negative_prob", 0.0), "fleet.true_lift.negative_prob"),
    )
    fleet = FleetSpec(
        n_experiments=c.number(fr.get("n_experiments"), "fleet.n_experiments", 1, integer=True),
        start_day=c.dist(fr.get("start_day", 0), "fleet.start_day", lo=0, integer=True),
        baseline_rate=c.dist(fr.get("baseline_rate"), "fleet.baseline_rate", 0.0, 1.0),
        daily_traffic_per_arm=c.dist(
            fr.get("daily_traffic_per_arm"), "fleet.daily_traffic_per_arm", 1, integer=True
        ),
        planned_runtime_days=c.dist(
            fr.get("planned_runtime_days"), "fleet.planned_runtime_days", 7, integer=True
        ),
        target_mde_rel=c.dist(fr.get("target_mde_rel"), "fleet.target_mde_rel", lo=1e-9),
        experiment_type=c.dist(
            fr.get("experiment_type", "generic"), "fleet.experiment_type", categorical=True
        ),
        max_extension_days=c.dist(
            fr.get("max_extension_days", 0), "fleet.max_extension_days", 0, integer=True
        ),
        experiments_per_owner=c.dist(
            fr.get("experiments_per_owner", 1), "fleet.experiments_per_owner", 1, integer=True
        ),
        true_lift=lift,
    )
    if not c.problems:
        top_rate = fleet.baseline_rate.support_max() * (1.0 + fleet.target_mde_rel.support_max())
        if top_rate >= 1.0:
            c.fail(
                "fleet.target_mde_rel",
                "baseline_rate + target MDE can reach 1.0 at the distribution extremes",
            )
        if fleet.baseline_rate.support_min() <= 0.0:
            c.fail("fleet.baseline_rate", "must be > 0 everywhere in its support")

    ar = c.section(top.get("agents", {}), "agents", _AGENT_KEYS)
    agents = AgentParams(
        p_click_alert=c.prob(ar.get("p_click_alert", 0.0), "agents.p_click_alert"),
        p_fix_given_click=c.prob(ar.get("p_fix_given_click", 0.0), "agents.p_fix_given_click"),
        p_partial_given_click=c.prob(
            ar.get("p_partial_given_click", 0.0), "agents.p_partial_given_click"
        ),
        p_spontaneous_fix=c.prob(ar.get("p_spontaneous_fix", 0.0), "agents.p_spontaneous_fix"),
        p_manual_accuracy=c.prob(ar.get("p_manual_accuracy", 1.0), "agents.p_manual_accuracy"),
        reliance_gain=c.prob(ar.get("reliance_gain", 0.0), "agents.reliance_gain"),
        spontaneous_drift_sigma=c.number(
            ar.get("spontaneous_drift_sigma", 0.0), "agents.spontaneous_drift_sigma", 0.0
        ),
    )
    if agents.p_fix_given_click + agents.p_partial_given_click > 1.0:
        c.fail(
            "agents.p_partial_given_click",
            "p_fix_given_click + p_partial_given_click must not exceed 1",
        )

    dr = c.section(top.get("design", {}), "design", _DESIGN_KEYS)
    unit = dr.get("randomization_unit", "experiment")
    if unit not in ("experiment", "experimenter"):
        c.fail("design.randomization_unit", "must be 'experiment' or 'experimenter'")
        unit = "experiment"
    design = DesignSpec(
        randomization_unit=unit,
        eligibility_day=c.number(dr.get("eligibility_day", 7), "design.eligibility_day", 1, integer=True),
        variant_split=c.number(dr.get("variant_split", 0.5), "design.variant_split", 0.0, 1.0, lo_open=True, hi_open=True),
        duration_days=c.number(dr.get("duration_days"), "design.duration_days", 1, integer=True),
        rollout_week=c.number(dr.get("rollout_week", 1), "design.rollout_week", 1, integer=True),
    )

    nr = c.section(top.get("analysis", {}), "analysis", _ANALYSIS_KEYS)
    analysis = AnalysisSpec(
        alpha=c.number(nr.get("alpha", 0.05), "analysis.alpha", 0.0, 1.0, lo_open=True, hi_open=True),
        power_threshold=c.number(
            nr.get("power_threshold", 0.8), "analysis.power_threshold", 0.0, 1.0, lo_open=True, hi_open=True
        ),
        measure_day_offset=c.number(
            nr.get("measure_day_offset", 7), "analysis.measure_day_offset", 0, integer=True
        ),
        min_subgroup_n=c.number(
            nr.get("min_subgroup_n", 30), "analysis.min_subgroup_n", 0, integer=True
        ),
        sequential_tau_sq=c.number(
            nr.get("sequential_tau_sq", 1e-4), "analysis.sequential_tau_sq", 0.0, lo_open=True
        ),
        cuped=_bool_field(c, nr.get("cuped", False), "analysis.cuped"),
    )

    replications = c.number(top.get("replications", 1), "scenario.replications", 1, integer=True)
    seed = c.number(top.get("seed", 0), "scenario.seed", 0, 2**64 - 1, integer=True)

    if c.problems:
        raise ScenarioError(c.problems)
    return Scenario(
        name=name,
        description=description,
        fleet=fleet,
        agents=agents,
        design=design,
        analysis=analysis,
        replications=replications,
        seed=seed,
        digest=config_digest(raw),
        raw=raw,
    )


def bundled_scenario_path(name: str) -> Path | None:
    """Path of a bundled preset, or None when no such preset exists."""
    candidate = resources.files("metaexp").joinpath(f"scenarios/{name}.json")
    if candidate.is_file():
        return Path(str(candidate))
    return None


def load_scenario(path_or_name: str) -> Scenario:
    """Load a scenario from a file path or a bundled preset name."""
    path = Path(path_or_name)
    if not path.is_file():
        bundled = bundled_scenario_path(str(path_or_name))
        if bundled is None:
            raise FileNotFoundError(
                f"no scenario file or bundled preset named {path_or_name!r}"
            )
        path = bundled
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"scenario: not valid JSON ({exc})"]) from exc
    return validate_scenario(raw)
