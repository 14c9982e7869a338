"""Sustainability report assembly: indicator values attached to the process
fragments whose values they measure, with review flags and provenance.

Assembly is deterministic: identical inputs yield identical JSON bytes
(fragments and indicators ordered by id, generation time is an input).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional

from .bpmn import Fragment
from .errors import DomainError
from .eventlog import ConformanceResult
from .indicators import UNCLASSIFIED, IndicatorValue
from .metamodel import SustainabilityModel

REPORT_SCHEMA = "susbp.report/1"


class UnknownReference(DomainError):
    pass


def _needs_review(band_label: str) -> bool:
    return band_label == UNCLASSIFIED or band_label.startswith(("moderate", "poor"))


@dataclass(frozen=True)
class FragmentAssessment:
    fragment_ref: str
    value_refs: tuple[str, ...]
    indicator_values: tuple[IndicatorValue, ...]
    review_flag: bool
    conformance: Optional[dict] = None
    notes: str = ""

    def to_json(self) -> dict:
        return {
            "fragment": self.fragment_ref,
            "values": list(self.value_refs),
            "indicator_values": [iv.to_json() for iv in self.indicator_values],
            "review_flag": self.review_flag,
            "conformance": self.conformance,
            "notes": self.notes,
        }


@dataclass(frozen=True)
class SustainabilityReport:
    model_ref: str
    observation_period: Optional[tuple[str, str]]
    assessments: tuple[FragmentAssessment, ...]
    provenance: tuple[str, ...]
    generated_at: Optional[str]
    unattached_indicator_values: tuple[IndicatorValue, ...] = ()

    def to_json(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "model": self.model_ref,
            "observation_period": (
                list(self.observation_period) if self.observation_period else None
            ),
            "generated_at": self.generated_at,
            "assessments": [a.to_json() for a in self.assessments],
            "unattached_indicator_values": [
                iv.to_json() for iv in self.unattached_indicator_values
            ],
            "provenance": list(self.provenance),
        }


def _conformance_excerpt(result: ConformanceResult) -> dict:
    return {
        "conforming_case_fraction": result.conforming_case_fraction,
        "cases": len(result.per_case),
        "deviations": result.deviation_count(),
    }


def build_report(
    model: SustainabilityModel,
    fragments: Iterable[Fragment],
    indicator_values: Iterable[IndicatorValue],
    conformance: Optional[ConformanceResult] = None,
    observation_period: Optional[tuple[str, str]] = None,
    notes: Optional[dict[str, str]] = None,
    generated_at: Optional[str] = None,
) -> SustainabilityReport:
    """Attach each indicator value to the first fragment (by id) whose
    values its indicator measures; assessments with a band needing review
    (moderate/poor/unclassified) carry review_flag."""
    fragments = sorted(fragments, key=lambda f: f.id)
    notes = notes or {}

    assigned: dict[str, list[IndicatorValue]] = {f.id: [] for f in fragments}
    unattached: list[IndicatorValue] = []
    for iv in sorted(indicator_values, key=lambda v: (v.indicator_ref, v.value)):
        indicator = model.indicators.get(iv.indicator_ref)
        if indicator is None:
            raise UnknownReference(f"indicator {iv.indicator_ref!r} not in model")
        home = next(
            (f for f in fragments if f.value_refs & indicator.value_refs), None
        )
        if home is None:
            unattached.append(iv)
        else:
            assigned[home.id].append(iv)

    assessments = []
    provenance: list[str] = []
    for fragment in fragments:
        values = assigned[fragment.id]
        flagged = any(_needs_review(iv.band_label) for iv in values)
        excerpt = _conformance_excerpt(conformance) if conformance else None
        assessments.append(
            FragmentAssessment(
                fragment_ref=fragment.id,
                value_refs=tuple(sorted(fragment.value_refs)),
                indicator_values=tuple(values),
                review_flag=flagged,
                conformance=excerpt,
                notes=notes.get(fragment.id, ""),
            )
        )
        provenance.extend(f"{fragment.id}:{iv.indicator_ref}" for iv in values)

    return SustainabilityReport(
        model_ref=model.id,
        observation_period=observation_period,
        assessments=tuple(assessments),
        provenance=tuple(provenance),
        generated_at=generated_at,
        unattached_indicator_values=tuple(unattached),
    )


def render(report: SustainabilityReport, fmt: str = "json") -> str:
    """JSON is canonical and lossless; Markdown carries a table per fragment
    and a provenance appendix."""
    if fmt == "json":
        return json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n"
    if fmt != "markdown":
        raise ValueError(f"unknown report format {fmt!r}")

    lines = [f"# Sustainability report: {report.model_ref}", ""]
    if report.observation_period:
        start, end = report.observation_period
        lines.append(f"Observation period: {start} to {end}")
    if report.generated_at:
        lines.append(f"Generated at: {report.generated_at}")
    lines.append("")
    for a in report.assessments:
        review = " (review)" if a.review_flag else ""
        lines.append(f"## Fragment {a.fragment_ref}{review}")
        lines.append("")
        lines.append(f"Values: {', '.join(a.value_refs) or '-'}")
        lines.append("")
        lines.append("| indicator | value | unit | band | period |")
        lines.append("|---|---|---|---|---|")
        for iv in a.indicator_values:
            period = " to ".join(iv.observation_period) if iv.observation_period else "-"
            lines.append(
                f"| {iv.indicator_ref} | {iv.value:.4f} | {iv.unit or '-'} "
                f"| {iv.band_label} | {period} |"
            )
        if a.conformance:
            lines.append("")
            lines.append(
                f"Conformance: {a.conformance['conforming_case_fraction']:.3f} of "
                f"{a.conformance['cases']} cases conform "
                f"({a.conformance['deviations']} deviations)"
            )
        if a.notes:
            lines.append("")
            lines.append(f"Notes: {a.notes}")
        lines.append("")
    lines.append("## Provenance")
    lines.append("")
    for entry in report.provenance:
        lines.append(f"- {entry}")
    for a in report.assessments:
        for iv in a.indicator_values:
            for item in iv.provenance:
                lines.append(f"- {iv.indicator_ref}: {item}")
    return "\n".join(lines) + "\n"
