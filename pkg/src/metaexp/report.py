"""Aggregated analysis report: PICOT-structured Markdown plus a JSON twin.

The report is a pure function of the aggregated numbers; it contains no
timestamps or environment details, so identical runs render byte-identical
documents. The reproducibility block carries everything needed to replay
the run (scenario digest, master seed, replication count).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass(frozen=True)
class MetricAggregate:
    """One metric averaged over replications."""

    name: str
    label: str
    kind: str
    base_value: float | None
    variant_value: float
    absolute_effect: float
    mean_p_value: float | None
    significant_fraction: float | None
    replications: int


@dataclass(frozen=True)
class SubgroupAggregate:
    group: str
    absolute_effect: float
    significant_fraction: float
    mean_base_n: float
    mean_variant_n: float
    low_power_fraction: float


@dataclass
class AnalysisReport:
    """Everything the run reports, ready to render."""

    metadata: dict
    metrics: list
    subgroups: list = field(default_factory=list)
    estimator_comparison: dict = field(default_factory=dict)
    timeline: list = field(default_factory=list)  # {"week", "base", "variant"}
    notes: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "metadata": dict(self.metadata),
            "metrics": [vars(m) for m in self.metrics],
            "subgroups": [vars(s) for s in self.subgroups],
            "estimator_comparison": dict(self.estimator_comparison),
            "timeline": [dict(t) for t in self.timeline],
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    def to_markdown(self) -> str:
        md = self.metadata
        reps = md["replications"]
        lines = [
            f"# Meta-experiment report: {md['scenario']}",
            "",
            "## Population",
            "",
            f"- randomization unit: {md['randomization_unit']}",
            f"- eligible experiments (mean per replication): {md['mean_eligible']:.1f}"
            f" ({md['mean_base_n']:.1f} base / {md['mean_variant_n']:.1f} variant)",
            f"- eligibility: underpowered at day {md['eligibility_day']} of the"
            f" experiment's life, day {md['eligibility_day']} inside the"
            f" {md['duration_days']}-day window",
            "",
            "## Intervention / comparison",
            "",
            "- variant: a low-power alert at the eligibility day with a one-click",
            "  runtime fix; base: no alert (spontaneous fixes only)",
            f"- alpha {md['alpha']:g} two-sided, power threshold {md['power_threshold']:g}"
            " (recorded with every run)",
            "",
            "## Outcome",
            "",
            "| Metric type | Metric | Absolute effect | Significance |",
            "|---|---|---|---|",
        ]
        for m in self.metrics:
            lines.append(
                f"| {_KIND_LABEL[m.kind]} | {m.label} | {_effect_cell(m, reps)} |"
                f" {_significance_cell(m, reps)} |"
            )
        if self.subgroups:
            lines += [
                "",
                "### Heterogeneous treatment effects"
                f" (fixed-day success metric by experiment type)",
                "",
                "| Type | Absolute effect | Significant in | Mean n (base/variant) | Low power |",
                "|---|---|---|---|---|",
            ]
            for s in self.subgroups:
                lines.append(
                    f"| {s.group} | {s.absolute_effect:+.4f} |"
                    f" {s.significant_fraction:.1%} of replications |"
                    f" {s.mean_base_n:.0f}/{s.mean_variant_n:.0f} |"
                    f" {'yes' if s.low_power_fraction > 0.5 else 'no'} |"
                )
        if self.estimator_comparison:
            ec = self.estimator_comparison
            lines += [
                "",
                "### Measurement-day sensitivity (duration bias)",
                "",
                f"- fixed-day estimator effect (primary): {ec['mean_fixed_day']:+.4f}",
                f"- end-of-run estimator effect: {ec['mean_end_of_run']:+.4f}",
                f"- paired gap (end-of-run minus fixed-day): {ec['mean_gap']:+.4f}"
                f" (se {ec['gap_se']:.4f})",
            ]
        lines += [
            "",
            "## Time",
            "",
            f"- window: {md['duration_days']} days; experiments entering the window"
            " run to completion",
            f"- success metric measured {md['measure_day_offset']} days after"
            " treatment; the full daily series is retained",
        ]
        if self.timeline:
            lines += [
                "",
                "Mean weekly powered fraction of running eligible experiments:",
                "",
                "| Week | Base | Variant |",
                "|---|---|---|",
            ]
            for t in self.timeline:
                lines.append(
                    f"| {t['week']} | {_frac_cell(t['base'])} | {_frac_cell(t['variant'])} |"
                )
        for note in self.notes:
            lines += ["", f"_{note}_"]
        lines += [
            "",
            "## Reproducibility",
            "",
            f"- scenario digest (sha256): `{md['config_digest']}`",
            f"- master seed: {md['master_seed']}",
            f"- replications: {reps}",
            "",
        ]
        return "\n".join(lines)


_KIND_LABEL = {
    "success": "Success metric (KPI component)",
    "supporting": "Supporting behavioral metric",
    "monitoring": "Monitoring metric",
}

_METRIC_LABEL = {
    "clicked_alert_link": "Clicked link in alert (only possible in variant)",
    "changed_power_settings": "Changed power-related experiment settings",
    "experiment_not_shipped": "Experiment not shipped",
}


def metric_label(name: str) -> str:
    if name in _METRIC_LABEL:
        return _METRIC_LABEL[name]
    if name.startswith("sufficient_power"):
        suffix = " (end of run)" if name.endswith("end_of_run") else ""
        suffix = " (CUPED)" if name.endswith("cuped") else suffix
        return "Experiment has sufficient power" + suffix
    return name


def _effect_cell(m: MetricAggregate, reps: int) -> str:
    return f"{m.absolute_effect * 100:+.2f}pp"


def _significance_cell(m: MetricAggregate, reps: int) -> str:
    if m.significant_fraction is None:
        return "N/A"
    if reps == 1:
        word = "Significant" if m.significant_fraction >= 1.0 else "Not significant"
        return f"{word} (p={m.mean_p_value:.4g})"
    return (
        f"significant in {m.significant_fraction:.1%} of {reps} replications"
        f" (mean p={m.mean_p_value:.4g})"
    )


def _frac_cell(v) -> str:
    return "-" if v is None else f"{v:.3f}"
