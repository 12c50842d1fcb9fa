"""Result files: results.csv, roc.csv, summary.csv and an roc.svg plot."""

from __future__ import annotations

import csv
import math
from pathlib import Path

from .harness import RocCurve, SequenceResult

_SVG_COLORS = {
    "change": "#1f77b4",
    "gridmap": "#d62728",
    "entropy": "#2ca02c",
    "histogram": "#9467bd",
}


def write_results_csv(results: list[SequenceResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sequence", "label", "detector", "max_score", "mean_ms", "first_alarm"])
        for r in results:
            for det in sorted(r.max_score):
                first = r.first_alarm.get(det)
                w.writerow(
                    [
                        r.sequence_id,
                        r.label,
                        det,
                        repr(r.max_score[det]),
                        f"{r.mean_ms[det]:.3f}",
                        "" if first is None else first,
                    ]
                )


def read_results_csv(path) -> list[SequenceResult]:
    by_seq: dict[str, SequenceResult] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            r = by_seq.setdefault(
                row["sequence"], SequenceResult(row["sequence"], row["label"])
            )
            det = row["detector"]
            r.max_score[det] = float(row["max_score"])
            r.mean_ms[det] = float(row["mean_ms"])
            r.first_alarm[det] = int(row["first_alarm"]) if row["first_alarm"] else None
    return list(by_seq.values())


def write_roc_csv(curves: list[RocCurve], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["detector", "threshold", "fpr", "tpr"])
        for c in curves:
            thresholds = c.thresholds or [math.nan] * len(c.points)
            for t, (fpr, tpr) in zip(thresholds, c.points):
                w.writerow([c.detector, repr(float(t)), repr(fpr), repr(tpr)])


def write_summary_csv(curves: list[RocCurve], results: list[SequenceResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["detector", "auc", "mean_ms_per_vertex"])
        for c in curves:
            times = [r.mean_ms[c.detector] for r in results if c.detector in r.mean_ms]
            mean_ms = sum(times) / len(times) if times else 0.0
            w.writerow([c.detector, repr(c.auc), f"{mean_ms:.3f}"])


def write_roc_svg(curves: list[RocCurve], path) -> None:
    """Standalone SVG: unit ROC axes, one polyline path per detector."""
    size, margin = 480, 50
    span = size - 2 * margin

    def sx(fpr: float) -> float:
        return margin + fpr * span

    def sy(tpr: float) -> float:
        return size - margin - tpr * span

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect x="{margin}" y="{margin}" width="{span}" height="{span}" '
        'fill="white" stroke="black"/>',
        f'<line x1="{sx(0)}" y1="{sy(0)}" x2="{sx(1)}" y2="{sy(1)}" '
        'stroke="#bbbbbb" stroke-dasharray="4 4"/>',
    ]
    for frac in (0.0, 0.5, 1.0):
        parts.append(
            f'<text x="{sx(frac):.1f}" y="{size - margin + 18}" font-size="11" '
            f'text-anchor="middle">{frac:g}</text>'
        )
        parts.append(
            f'<text x="{margin - 8}" y="{sy(frac) + 4:.1f}" font-size="11" '
            f'text-anchor="end">{frac:g}</text>'
        )
    parts.append(
        f'<text x="{size / 2}" y="{size - 12}" font-size="12" text-anchor="middle">'
        "false positive rate</text>"
    )
    parts.append(
        f'<text x="14" y="{size / 2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {size / 2})">true positive rate</text>'
    )
    for i, c in enumerate(curves):
        color = _SVG_COLORS.get(c.detector, "#333333")
        d = "M " + " L ".join(f"{sx(f):.2f} {sy(t):.2f}" for f, t in c.points)
        parts.append(f'<path d="{d}" fill="none" stroke="{color}" stroke-width="1.6"/>')
        ly = margin + 16 + 16 * i
        parts.append(
            f'<line x1="{size - margin - 120}" y1="{ly - 4}" x2="{size - margin - 100}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{size - margin - 94}" y="{ly}" font-size="11">'
            f"{c.detector} (AUC {c.auc:.3f})</text>"
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def emit_reports(results: list[SequenceResult], curves: list[RocCurve], out_dir) -> None:
    """Write results.csv, roc.csv, summary.csv and roc.svg into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_results_csv(results, out / "results.csv")
    write_roc_csv(curves, out / "roc.csv")
    write_summary_csv(curves, results, out / "summary.csv")
    write_roc_svg(curves, out / "roc.svg")
