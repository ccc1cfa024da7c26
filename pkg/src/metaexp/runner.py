"""Replication fan-out, aggregation and artifact emission.

A run is ``replications`` independent simulations of one scenario, each
seeded by ``mix64(master_seed, replication_index)``. Workers only ever see
their own replication index, so the output is byte-identical at any
parallelism degree; aggregation always folds replications in index order.

Artifact directory layout (stable)::

    run_metadata.json   scenario document, digest, master seed, replication
                        count, mode, package version
    metrics.csv         one row per metric per replication
    timeline.csv        weekly powered fraction per arm per replication
    report.md           PICOT-structured report (unless --format json/csv)
    report.json         machine-readable twin, always written
    events/             per-replication event and snapshot logs (JSON lines,
                        documented field order; only with --emit-events, and
                        size-guarded to runs of at most 100 replications)
"""

from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import dataclass
from multiprocessing import get_context
from pathlib import Path
from typing import Optional

from . import __version__, analysis, streams
from .engine import EVENT_FIELDS, SNAPSHOT_FIELDS, VARIANT, run_meta_experiment
from .report import AnalysisReport, MetricAggregate, SubgroupAggregate, metric_label
from .scenario import Scenario, validate_scenario

EVENTS_REPLICATION_CAP = 100


@dataclass
class ReplicationMetrics:
    """Per-replication analysis results (picklable)."""

    rep: int
    eligible_n: int
    base_n: int
    variant_n: int
    metrics: list
    subgroups: list
    weekly: list  # (week, base_frac|None, variant_frac|None, base_n, variant_n)
    timeline: Optional[analysis.TimelineResult]
    events_jsonl: Optional[str] = None
    snapshots_jsonl: Optional[str] = None


def _weekly_by_arm(snapshots) -> list:
    buckets: dict = {}
    for s in snapshots:
        week, arm, powered = s[0] // 7, s[3], s[4]
        key = (week, arm)
        n, x = buckets.get(key, (0, 0))
        buckets[key] = (n + 1, x + (1 if powered else 0))
    weeks = sorted({w for w, _ in buckets})
    rows = []
    for week in weeks:
        nb, xb = buckets.get((week, "base"), (0, 0))
        nv, xv = buckets.get((week, VARIANT), (0, 0))
        rows.append(
            (
                week,
                xb / nb if nb else None,
                xv / nv if nv else None,
                nb,
                nv,
            )
        )
    return rows


def _jsonl(fields, rows) -> str:
    out = io.StringIO()
    for row in rows:
        out.write(json.dumps(dict(zip(fields, row))) + "\n")
    return out.getvalue()


def replicate_once(
    scenario: Scenario,
    master_seed: int,
    rep: int,
    mode: str = "rct",
    keep_logs: bool = False,
) -> ReplicationMetrics:
    """Simulate and analyze one replication."""
    rep_seed = streams.mix64(master_seed, rep)
    result = run_meta_experiment(scenario, rep_seed, mode=mode)
    arms = result.assignment.experiment_arms
    eligible_n = len(arms)
    base_n = sum(1 for a in arms.values() if a != VARIANT)
    variant_n = eligible_n - base_n
    metrics: list = []
    subgroups: list = []
    timeline = None
    an = scenario.analysis
    if eligible_n and base_n and variant_n:
        metrics.append(
            analysis.success_metric_fixed_day(
                result.snapshots, result.assignment, an.measure_day_offset,
                eligibility_day=scenario.design.eligibility_day, alpha=an.alpha,
            )
        )
        metrics.append(
            analysis.success_metric_end_of_run(
                result.snapshots, result.assignment, alpha=an.alpha
            )
        )
        metrics.extend(
            analysis.supporting_and_monitoring_metrics(
                result.events, result.assignment, alpha=an.alpha
            )
        )
        types = {e.config.id: e.config.experiment_type for e in result.fleet}
        if an.cuped:
            from .experiments import assess_power, new_state

            covariates = {
                e.config.id: assess_power(
                    e.config, new_state(e.config), scenario.design.eligibility_day
                ).achieved_power
                for e in result.fleet
            }
            metrics.append(
                analysis.success_metric_fixed_day_cuped(
                    result.snapshots, result.assignment, covariates,
                    an.measure_day_offset,
                    eligibility_day=scenario.design.eligibility_day, alpha=an.alpha,
                )
            )
        subgroups = analysis.subgroup_analysis(
            result.snapshots, result.assignment, types, an.measure_day_offset,
            eligibility_day=scenario.design.eligibility_day, alpha=an.alpha,
            min_group_n=an.min_subgroup_n,
        )
    weekly = _weekly_by_arm(result.snapshots)
    if mode == "rollout" and result.snapshots:
        weeks, fractions = analysis.weekly_powered_fractions(result.snapshots)
        pre_weeks = sum(1 for w in weeks if w < scenario.design.rollout_week)
        try:
            timeline = analysis.timeline_analysis(fractions, pre_weeks, alpha=an.alpha)
        except ValueError:
            timeline = None
    return ReplicationMetrics(
        rep=rep,
        eligible_n=eligible_n,
        base_n=base_n,
        variant_n=variant_n,
        metrics=metrics,
        subgroups=subgroups,
        weekly=weekly,
        timeline=timeline,
        events_jsonl=_jsonl(EVENT_FIELDS, result.events) if keep_logs else None,
        snapshots_jsonl=_jsonl(SNAPSHOT_FIELDS, result.snapshots) if keep_logs else None,
    )


def _worker(args) -> ReplicationMetrics:
    raw, master_seed, rep, mode, keep_logs = args
    return replicate_once(validate_scenario(raw), master_seed, rep, mode, keep_logs)


def run_replications(
    scenario: Scenario,
    master_seed: int,
    replications: int,
    parallelism: int = 1,
    mode: str = "rct",
    keep_logs: bool = False,
) -> list[ReplicationMetrics]:
    """All replications, in index order, serial or fanned out."""
    if parallelism <= 1 or replications == 1:
        return [
            replicate_once(scenario, master_seed, rep, mode, keep_logs)
            for rep in range(replications)
        ]
    jobs = [
        (scenario.raw, master_seed, rep, mode, keep_logs)
        for rep in range(replications)
    ]
    with get_context("spawn").Pool(parallelism) as pool:
        return pool.map(_worker, jobs, chunksize=max(1, replications // (parallelism * 4)))


def _mean(values) -> Optional[float]:
    vals = [v for v in values if v is not None]
    return sum(vals) / len(vals) if vals else None


def aggregate(
    scenario: Scenario, master_seed: int, rows: list, mode: str = "rct"
) -> AnalysisReport:
    """Fold per-replication metrics into the report (order-independent)."""
    reps = len(rows)
    by_name: dict = {}
    order: list = []
    for row in rows:
        for m in row.metrics:
            if m.name not in by_name:
                by_name[m.name] = []
                order.append(m.name)
            by_name[m.name].append(m)
    aggregates = []
    for name in order:
        ms = by_name[name]
        sig = [m.significant for m in ms if m.significant is not None]
        pvals = [m.test.p_value for m in ms if m.test is not None]
        aggregates.append(
            MetricAggregate(
                name=name,
                label=metric_label(name),
                kind=ms[0].kind,
                base_value=_mean([m.base_value for m in ms]),
                variant_value=_mean([m.variant_value for m in ms]),
                absolute_effect=_mean([m.absolute_effect for m in ms]),
                mean_p_value=_mean(pvals),
                significant_fraction=(sum(sig) / len(sig)) if sig else None,
                replications=len(ms),
            )
        )

    by_group: dict = {}
    for row in rows:
        for s in row.subgroups:
            by_group.setdefault(s.group, []).append(s)
    subgroup_aggregates = [
        SubgroupAggregate(
            group=group,
            absolute_effect=_mean([s.result.absolute_effect for s in items]) or 0.0,
            significant_fraction=sum(bool(s.result.significant) for s in items) / len(items),
            mean_base_n=_mean([s.result.base_n for s in items]) or 0.0,
            mean_variant_n=_mean([s.result.variant_n for s in items]) or 0.0,
            low_power_fraction=sum(s.low_power for s in items) / len(items),
        )
        for group, items in sorted(by_group.items())
    ]

    comparison = {}
    gaps = []
    for row in rows:
        fixed = next((m for m in row.metrics if m.name.startswith("sufficient_power_day")
                      and not m.name.endswith("cuped")), None)
        end = next((m for m in row.metrics if m.name == "sufficient_power_end_of_run"), None)
        if fixed and end:
            gaps.append((fixed.absolute_effect, end.absolute_effect))
    if gaps:
        mean_fixed = sum(g[0] for g in gaps) / len(gaps)
        mean_end = sum(g[1] for g in gaps) / len(gaps)
        deltas = [e - f for f, e in gaps]
        mean_gap = sum(deltas) / len(deltas)
        if len(deltas) > 1:
            var = sum((d - mean_gap) ** 2 for d in deltas) / (len(deltas) - 1)
            gap_se = (var / len(deltas)) ** 0.5
        else:
            gap_se = 0.0
        comparison = {
            "mean_fixed_day": mean_fixed,
            "mean_end_of_run": mean_end,
            "mean_gap": mean_gap,
            "gap_se": gap_se,
        }

    week_bucket: dict = {}
    for row in rows:
        for week, bf, vf, _, _ in row.weekly:
            slot = week_bucket.setdefault(week, ([], []))
            if bf is not None:
                slot[0].append(bf)
            if vf is not None:
                slot[1].append(vf)
    timeline = [
        {"week": week, "base": _mean(bs), "variant": _mean(vs)}
        for week, (bs, vs) in sorted(week_bucket.items())
    ]

    notes = []
    if mode == "rollout":
        detections = [r.timeline.significant for r in rows if r.timeline is not None]
        if detections:
            rate = sum(detections) / len(detections)
            notes.append(
                f"Rollout timeline (interrupted time series) detection rate:"
                f" {rate:.1%} of {len(detections)} replications"
            )

    metadata = {
        "scenario": scenario.name,
        "config_digest": scenario.digest,
        "master_seed": master_seed,
        "replications": reps,
        "mode": mode,
        "randomization_unit": scenario.design.randomization_unit,
        "eligibility_day": scenario.design.eligibility_day,
        "duration_days": scenario.design.duration_days,
        "alpha": scenario.analysis.alpha,
        "power_threshold": scenario.analysis.power_threshold,
        "measure_day_offset": scenario.analysis.measure_day_offset,
        "mean_eligible": _mean([r.eligible_n for r in rows]) or 0.0,
        "mean_base_n": _mean([r.base_n for r in rows]) or 0.0,
        "mean_variant_n": _mean([r.variant_n for r in rows]) or 0.0,
        "package_version": __version__,
    }
    return AnalysisReport(
        metadata=metadata,
        metrics=aggregates,
        subgroups=subgroup_aggregates,
        estimator_comparison=comparison,
        timeline=timeline,
        notes=notes,
    )


_CSV_COLUMNS = [
    "rep", "metric", "kind", "base_value", "variant_value", "absolute_effect",
    "z_score", "p_value", "ci_low", "ci_high", "significant",
    "base_x", "base_n", "variant_x", "variant_n",
]


def _write_metrics_csv(path: Path, rows: list) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for row in rows:
            for m in row.metrics:
                writer.writerow([
                    row.rep, m.name, m.kind,
                    "" if m.base_value is None else repr(m.base_value),
                    repr(m.variant_value), repr(m.absolute_effect),
                    "" if m.test is None else repr(m.test.z_score),
                    "" if m.test is None else repr(m.test.p_value),
                    "" if m.test is None else repr(m.test.ci_low),
                    "" if m.test is None else repr(m.test.ci_high),
                    "" if m.significant is None else int(m.significant),
                    m.base_x, m.base_n, m.variant_x, m.variant_n,
                ])


def _write_timeline_csv(path: Path, rows: list) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rep", "week", "base_fraction", "variant_fraction",
                         "base_snapshots", "variant_snapshots"])
        for row in rows:
            for week, bf, vf, nb, nv in row.weekly:
                writer.writerow([
                    row.rep, week,
                    "" if bf is None else repr(bf),
                    "" if vf is None else repr(vf),
                    nb, nv,
                ])


def run_scenario(
    scenario: Scenario,
    master_seed: int,
    replications: int,
    out_dir: Path,
    parallelism: int = 1,
    emit_events: bool = False,
    fmt: str = "md",
    mode: str = "rct",
) -> AnalysisReport:
    """Run, aggregate and write the artifact directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    keep_logs = emit_events
    if emit_events and replications > EVENTS_REPLICATION_CAP:
        print(
            f"warning: --emit-events ignored above {EVENTS_REPLICATION_CAP}"
            " replications (disk guard)",
            file=sys.stderr,
        )
        keep_logs = False
    rows = run_replications(
        scenario, master_seed, replications, parallelism, mode, keep_logs
    )
    report = aggregate(scenario, master_seed, rows, mode)

    metadata = {
        "scenario": scenario.raw,
        "config_digest": scenario.digest,
        "master_seed": master_seed,
        "replications": replications,
        "mode": mode,
        "emit_events": keep_logs,
        "package_version": __version__,
    }
    (out_dir / "run_metadata.json").write_text(
        json.dumps(metadata, indent=2, sort_keys=True) + "\n"
    )
    _write_metrics_csv(out_dir / "metrics.csv", rows)
    _write_timeline_csv(out_dir / "timeline.csv", rows)
    (out_dir / "report.json").write_text(report.to_json())
    if fmt == "md":
        (out_dir / "report.md").write_text(report.to_markdown())
    if keep_logs:
        events_dir = out_dir / "events"
        events_dir.mkdir(exist_ok=True)
        for row in rows:
            (events_dir / f"rep-{row.rep:05d}.events.jsonl").write_text(
                row.events_jsonl or ""
            )
            (events_dir / f"rep-{row.rep:05d}.snapshots.jsonl").write_text(
                row.snapshots_jsonl or ""
            )
    return report


def report_from_artifacts(artifact_dir: Path, fmt: str = "md") -> AnalysisReport:
    """Recompute the report of a finished run from its metadata alone.

    The metadata embeds the full scenario, master seed and replication
    count, so the replay reproduces every number bit-exactly.
    """
    artifact_dir = Path(artifact_dir)
    meta_path = artifact_dir / "run_metadata.json"
    if not meta_path.is_file():
        raise FileNotFoundError(f"{meta_path} not found; not an artifact directory")
    metadata = json.loads(meta_path.read_text())
    scenario = validate_scenario(metadata["scenario"])
    rows = run_replications(
        scenario,
        metadata["master_seed"],
        metadata["replications"],
        parallelism=1,
        mode=metadata.get("mode", "rct"),
    )
    report = aggregate(scenario, metadata["master_seed"], rows, metadata.get("mode", "rct"))
    (artifact_dir / "report.json").write_text(report.to_json())
    if fmt == "md":
        (artifact_dir / "report.md").write_text(report.to_markdown())
    return report
