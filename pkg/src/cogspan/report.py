"""Render evaluation reports as JSON, markdown, or CSV.

All three renders are byte-deterministic: fixed three-decimal numbers, fixed
row order (the seven categories in canonical order, then micro, then macro),
no timestamps.
"""

from __future__ import annotations

import csv
import io
import json
from enum import Enum

from .corpus import CATEGORIES
from .scorer import TAXONOMY_KINDS, EvalReport, MatchCriterion


class RenderTarget(str, Enum):
    JSON = "json"
    MARKDOWN = "markdown"
    CSV = "csv"


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def _criterion_order(report: EvalReport) -> list[MatchCriterion]:
    declared = [MatchCriterion.STRICT, MatchCriterion.LENIENT]
    return [c for c in declared if c in report.criteria] + [
        c for c in report.criteria if c not in declared
    ]


def _render_json(report: EvalReport) -> bytes:
    return (json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n").encode("utf-8")


def _render_markdown(report: EvalReport) -> bytes:
    lines: list[str] = ["# Evaluation report", ""]
    for criterion in _criterion_order(report):
        rep = report.criteria[criterion]
        lines.append(f"## {criterion.value} matching")
        lines.append("")
        lines.append("| category | precision | recall | f1 | tp | fp | fn |")
        lines.append("| --- | ---: | ---: | ---: | ---: | ---: | ---: |")
        for cat in CATEGORIES:
            s = rep.per_category[cat]
            c = rep.counts[cat]
            lines.append(
                f"| {cat.value} | {_fmt(s.precision)} | {_fmt(s.recall)} | {_fmt(s.f1)} "
                f"| {c.tp} | {c.fp} | {c.fn} |"
            )
        total_tp = sum(c.tp for c in rep.counts.values())
        total_fp = sum(c.fp for c in rep.counts.values())
        total_fn = sum(c.fn for c in rep.counts.values())
        lines.append(
            f"| micro | {_fmt(rep.micro.precision)} | {_fmt(rep.micro.recall)} "
            f"| {_fmt(rep.micro.f1)} | {total_tp} | {total_fp} | {total_fn} |"
        )
        lines.append(
            f"| macro | {_fmt(rep.macro.precision)} | {_fmt(rep.macro.recall)} "
            f"| {_fmt(rep.macro.f1)} | | | |"
        )
        lines.append("")
    lines.append("## Error taxonomy")
    lines.append("")
    lines.append("| kind | count |")
    lines.append("| --- | ---: |")
    for kind in TAXONOMY_KINDS:
        lines.append(f"| {kind} | {report.taxonomy.get(kind, 0)} |")
    lines.append("")
    return "\n".join(lines).encode("utf-8")


def _render_csv(report: EvalReport) -> bytes:
    """Long-format score table; the taxonomy lives in the other two renders."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["criterion", "category", "precision", "recall", "f1", "tp", "fp", "fn"])
    for criterion in _criterion_order(report):
        rep = report.criteria[criterion]
        for cat in CATEGORIES:
            s = rep.per_category[cat]
            c = rep.counts[cat]
            writer.writerow(
                [criterion.value, cat.value, _fmt(s.precision), _fmt(s.recall), _fmt(s.f1), c.tp, c.fp, c.fn]
            )
        total_tp = sum(c.tp for c in rep.counts.values())
        total_fp = sum(c.fp for c in rep.counts.values())
        total_fn = sum(c.fn for c in rep.counts.values())
        writer.writerow(
            [criterion.value, "micro", _fmt(rep.micro.precision), _fmt(rep.micro.recall),
             _fmt(rep.micro.f1), total_tp, total_fp, total_fn]
        )
        writer.writerow(
            [criterion.value, "macro", _fmt(rep.macro.precision), _fmt(rep.macro.recall),
             _fmt(rep.macro.f1), "", "", ""]
        )
    return buffer.getvalue().encode("utf-8")


def render_report(report: EvalReport, target: RenderTarget) -> bytes:
    target = RenderTarget(target)
    if target is RenderTarget.JSON:
        return _render_json(report)
    if target is RenderTarget.MARKDOWN:
        return _render_markdown(report)
    return _render_csv(report)
