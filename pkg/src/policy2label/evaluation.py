"""Scoring generated labels against ground truth, and under-claim detection.

Metrics are macro-averaged per section: each attribute contributes its own
precision/recall/F1 and the section reports their unweighted means.
Conventions for degenerate denominators: an attribute that never occurs
anywhere (tp+fp+fn = 0) is excluded from the macro mean so vacuous attributes
cannot inflate scores; a zero denominator with the complementary error count
positive scores 0. Yes/No attributes additionally report plain accuracy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .errors import EmptySection, SchemaMismatch
from .generation import CostStats
from .schema import (
    LabelSchema,
    Presence,
    PrivacyLabel,
    ProvenanceEntry,
    Section,
    ValueDomain,
    validate_label,
)


@dataclass
class AttributeCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def occurrences(self) -> int:
        return self.tp + self.fp + self.fn


@dataclass
class ConfusionCounts:
    """Per-(section, attribute) tallies over a corpus of label pairs."""

    schema_ref: str
    corpus_size: int
    counts: dict[tuple[str, str], AttributeCounts] = field(default_factory=dict)


def compare_labels(
    pairs: Sequence[tuple[PrivacyLabel, PrivacyLabel]],
    schema: LabelSchema,
    exclude_omnibus: bool = False,
) -> ConfusionCounts:
    """Tally (generated, truth) agreement per attribute across a corpus.

    Omnibus attributes are skipped entirely when exclude_omnibus is set.
    Every label must validate against the schema.
    """
    keys = [
        (section.name, attr.name)
        for section in schema.sections
        for attr in section.attributes
        if not (exclude_omnibus and attr.omnibus)
    ]
    result = ConfusionCounts(
        schema_ref=schema.ref,
        corpus_size=len(pairs),
        counts={key: AttributeCounts() for key in keys},
    )
    for generated, truth in pairs:
        validate_label(generated, schema)
        validate_label(truth, schema)
        for key in keys:
            generated_present = generated.values[key] is Presence.PRESENT
            truth_present = truth.values[key] is Presence.PRESENT
            counts = result.counts[key]
            if truth_present and generated_present:
                counts.tp += 1
            elif truth_present:
                counts.fn += 1
            elif generated_present:
                counts.fp += 1
            else:
                counts.tn += 1
    return result


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float


def _prf(counts: AttributeCounts) -> PRF:
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall
        else 0.0
    )
    return PRF(precision, recall, f1)


@dataclass
class SectionMetrics:
    """Macro precision/recall/F1 for one section, plus Yes/No accuracies."""

    section: str
    precision: float
    recall: float
    f1: float
    corpus_size: int
    per_attribute: dict[str, PRF]
    included_attributes: tuple[str, ...]
    accuracy: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "section": self.section,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "corpus_size": self.corpus_size,
            "included_attributes": list(self.included_attributes),
            "per_attribute": {
                name: {"precision": p, "recall": r, "f1": f}
                for name, (p, r, f) in self.per_attribute.items()
            },
            "accuracy": dict(self.accuracy),
        }


def macro_metrics(counts: ConfusionCounts, section: Section) -> SectionMetrics:
    """Unweighted means over the section's attributes that occur in the corpus.

    Raises EmptySection if no attribute qualifies (none present in the counts
    with tp+fp+fn > 0).
    """
    per_attribute: dict[str, PRF] = {}
    included: list[str] = []
    accuracy: dict[str, float] = {}
    for attr in section.attributes:
        key = (section.name, attr.name)
        if key not in counts.counts:
            continue
        attr_counts = counts.counts[key]
        per_attribute[attr.name] = _prf(attr_counts)
        if attr_counts.occurrences > 0:
            included.append(attr.name)
        if attr.value_domain is ValueDomain.YES_NO and counts.corpus_size > 0:
            accuracy[attr.name] = (attr_counts.tp + attr_counts.tn) / counts.corpus_size
    if not included:
        raise EmptySection(f"no attribute of {section.name!r} qualifies for macro averaging")
    macro = [per_attribute[name] for name in included]
    return SectionMetrics(
        section=section.name,
        precision=sum(m.precision for m in macro) / len(macro),
        recall=sum(m.recall for m in macro) / len(macro),
        f1=sum(m.f1 for m in macro) / len(macro),
        corpus_size=counts.corpus_size,
        per_attribute=per_attribute,
        included_attributes=tuple(included),
        accuracy=accuracy,
    )


@dataclass(frozen=True)
class UnderclaimFinding:
    """A practice the policy evidences (truth Present) but the declared label omits.

    detected records whether the generated label also marked it Present.
    Advisory only: platform disclosure exemptions are not modeled.
    """

    app_id: str
    section: str
    attribute: str
    detected: bool
    provenance: tuple[ProvenanceEntry, ...] = ()


def detect_underclaims(
    truth: PrivacyLabel,
    declared: PrivacyLabel,
    generated: PrivacyLabel,
    schema: LabelSchema,
    exclude_omnibus: bool = False,
    app_id: str = "",
) -> list[UnderclaimFinding]:
    """Findings for every attribute with truth Present and declared Absent.

    All three labels must cover the same schema; raises SchemaMismatch
    otherwise.
    """
    for label in (truth, declared, generated):
        validate_label(label, schema)
    if not (truth.schema_ref == declared.schema_ref == generated.schema_ref):
        raise SchemaMismatch("labels reference different schemas")
    findings: list[UnderclaimFinding] = []
    for section in schema.sections:
        for attr in section.attributes:
            if exclude_omnibus and attr.omnibus:
                continue
            key = (section.name, attr.name)
            if truth.values[key] is Presence.PRESENT and declared.values[key] is Presence.ABSENT:
                provenance: tuple[ProvenanceEntry, ...] = ()
                if generated.provenance and key in generated.provenance:
                    provenance = tuple(generated.provenance[key])
                findings.append(
                    UnderclaimFinding(
                        app_id=app_id,
                        section=section.name,
                        attribute=attr.name,
                        detected=generated.values[key] is Presence.PRESENT,
                        provenance=provenance,
                    )
                )
    return findings


def detection_rate(findings: Iterable[UnderclaimFinding]) -> float | None:
    """Detected findings over total findings; None (JSON null) with no findings."""
    findings = list(findings)
    if not findings:
        return None
    return sum(1 for f in findings if f.detected) / len(findings)


@dataclass
class EvalReport:
    """Corpus metrics with and without omnibus attributes, plus audit findings."""

    schema_ref: str
    corpus_size: int
    sections: list[SectionMetrics]
    sections_without_omnibus: list[SectionMetrics]
    findings: list[UnderclaimFinding] = field(default_factory=list)
    detection_rate: float | None = None
    cost: CostStats | None = None

    def to_dict(self) -> dict:
        return {
            "schema_ref": self.schema_ref,
            "corpus_size": self.corpus_size,
            "sections": [m.to_dict() for m in self.sections],
            "sections_without_omnibus": [
                m.to_dict() for m in self.sections_without_omnibus
            ],
            "findings": [
                {
                    "app_id": f.app_id,
                    "section": f.section,
                    "attribute": f.attribute,
                    "detected": f.detected,
                    "provenance": [
                        {
                            "segment_id": e.segment_id,
                            "answer": e.answer,
                            "group_specific": e.group_specific,
                        }
                        for e in f.provenance
                    ],
                }
                for f in self.findings
            ],
            "detection_rate": self.detection_rate,
            "cost": self.cost.to_dict() if self.cost is not None else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"


def build_report(
    pairs: Sequence[tuple[PrivacyLabel, PrivacyLabel]],
    schema: LabelSchema,
    underclaim_triples: Sequence[tuple[str, PrivacyLabel, PrivacyLabel, PrivacyLabel]] = (),
    exclude_omnibus_findings: bool = False,
    cost: CostStats | None = None,
) -> EvalReport:
    """Assemble the full report from (generated, truth) pairs and, optionally,
    (app_id, truth, declared, generated) audit triples. Sections where no
    attribute ever occurs are left out of the metric lists.
    """

    def section_metrics(exclude_omnibus: bool) -> list[SectionMetrics]:
        counts = compare_labels(pairs, schema, exclude_omnibus=exclude_omnibus)
        metrics = []
        for section in schema.sections:
            try:
                metrics.append(macro_metrics(counts, section))
            except EmptySection:
                continue
        return metrics

    findings: list[UnderclaimFinding] = []
    for app_id, truth, declared, generated in underclaim_triples:
        findings.extend(
            detect_underclaims(
                truth,
                declared,
                generated,
                schema,
                exclude_omnibus=exclude_omnibus_findings,
                app_id=app_id,
            )
        )
    return EvalReport(
        schema_ref=schema.ref,
        corpus_size=len(pairs),
        sections=section_metrics(False) if pairs else [],
        sections_without_omnibus=section_metrics(True) if pairs else [],
        findings=findings,
        detection_rate=detection_rate(findings),
        cost=cost,
    )


def render_text(report: EvalReport) -> str:
    """Fixed-column text rendering: section, precision, recall, F1, accuracy.

    Yes/No attributes get their own indented rows carrying F1 and accuracy;
    cells that do not apply show "-".
    """
    width = max(
        [24]
        + [len(m.section) for m in report.sections + report.sections_without_omnibus]
        + [
            len(name) + 2
            for m in report.sections + report.sections_without_omnibus
            for name in m.accuracy
        ]
    )
    lines: list[str] = []

    def header(title: str):
        lines.append(title)
        lines.append(
            f"{'section'.ljust(width)}  {'precision':>9}  {'recall':>9}  {'f1':>9}  {'accuracy':>9}"
        )

    def row(name: str, precision, recall, f1, accuracy):
        def cell(value):
            return f"{value:9.4f}" if value is not None else f"{'-':>9}"

        lines.append(
            f"{name.ljust(width)}  {cell(precision)}  {cell(recall)}  {cell(f1)}  {cell(accuracy)}"
        )

    def table(metrics: list[SectionMetrics]):
        for m in metrics:
            mean_accuracy = (
                sum(m.accuracy.values()) / len(m.accuracy) if m.accuracy else None
            )
            row(m.section, m.precision, m.recall, m.f1, mean_accuracy)
            for attr_name, accuracy in m.accuracy.items():
                prf = m.per_attribute.get(attr_name)
                row(f"  {attr_name}", None, None, prf.f1 if prf else None, accuracy)

    if report.sections:
        header(f"All attributes (corpus of {report.corpus_size})")
        table(report.sections)
    if report.sections_without_omnibus:
        lines.append("")
        header("Without omnibus attributes")
        table(report.sections_without_omnibus)
    if report.findings:
        lines.append("")
        detected = sum(1 for f in report.findings if f.detected)
        rate = "n/a" if report.detection_rate is None else f"{report.detection_rate:.4f}"
        lines.append(
            f"Under-claim findings: {len(report.findings)} ({detected} detected, rate {rate})"
        )
        for f in report.findings:
            status = "detected" if f.detected else "missed"
            lines.append(f"  {f.app_id or '-'}: {f.section}/{f.attribute} [{status}]")
    if report.cost is not None:
        c = report.cost
        lines.append("")
        lines.append(
            f"Cost ({c.strategy.value}): {c.prompts_sent} prompts, "
            f"{c.prompt_words} prompt words, {c.answer_words} answer words"
        )
    return "\n".join(lines) + "\n"
