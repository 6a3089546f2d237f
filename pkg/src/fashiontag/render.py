"""Plain-text table rendering for reports.

Column orders are fixed so golden-text tests can diff rendered output:
results tables use JSON Valid / Cat. Acc. / Mat. Acc. / Style F1 / Occ. F1;
per-category tables add N and the exact 95% CI on category accuracy;
baseline tables show Style F1 / Occ. F1 for the direct-vs-defaults rows.
"""

from __future__ import annotations

from typing import Optional, Sequence

from .evaluation import MetricsReport
from .labeling import DistributionTable


def _pct(value: Optional[float]) -> str:
    return "---" if value is None else f"{100.0 * value:.1f}%"


def _f1(value: Optional[float]) -> str:
    return "---" if value is None else f"{value:.3f}"


def _grid(header: Sequence[str], rows: Sequence[Sequence[str]], right_from: int = 1) -> str:
    """Left-align the first columns, right-align numeric ones, two-space gaps."""
    widths = [len(h) for h in header]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = []

    def fmt(cells):
        parts = []
        for i, cell in enumerate(cells):
            parts.append(cell.ljust(widths[i]) if i < right_from else cell.rjust(widths[i]))
        return "  ".join(parts).rstrip()

    lines.append(fmt(header))
    lines.append("  ".join("-" * w for w in widths))
    lines.extend(fmt(row) for row in rows)
    return "\n".join(lines) + "\n"


def render_results_table(report: MetricsReport, method: str = "model") -> str:
    """One-row overall results table (the headline comparison layout)."""
    header = ("Method", "JSON Valid", "Cat. Acc.", "Mat. Acc.", "Style F1", "Occ. F1")
    row = (
        method,
        _pct(report.validity_rate),
        _pct(report.category_acc),
        _pct(report.material_acc),
        _f1(report.style_f1_mean),
        _f1(report.occasion_f1_mean),
    )
    return _grid(header, [row])


def render_per_category_table(report: MetricsReport) -> str:
    """Per-category accuracy breakdown with exact binomial CIs."""
    level = f"{report.confidence * 100:g}%"
    header = ("Category", "N", "Cat. Acc.", "Mat. Acc.", f"Cat. {level} CI")
    rows = []
    for row in report.per_category:
        rows.append(
            (
                row.category.capitalize(),
                f"{row.n:,}",
                _pct(row.category_acc),
                _pct(row.material_acc),
                f"[{100.0 * row.ci_low:.1f}%, {100.0 * row.ci_high:.1f}%]",
            )
        )
    rows.append(
        (
            "Overall",
            f"{report.n_valid:,}",
            _pct(report.category_acc),
            _pct(report.material_acc),
            f"[{100.0 * report.category_ci_low:.1f}%, {100.0 * report.category_ci_high:.1f}%]",
        )
    )
    return _grid(header, rows)


def render_baseline_table(
    direct: MetricsReport, baseline: MetricsReport, oracle: bool
) -> str:
    """Direct model predictions vs. the category-then-defaults baseline."""
    source = "oracle" if oracle else "predicted"
    header = ("Method", "Style F1", "Occ. F1")
    rows = [
        ("model (direct)", _f1(direct.style_f1_mean), _f1(direct.occasion_f1_mean)),
        (
            f"category -> defaults ({source})",
            _f1(baseline.style_f1_mean),
            _f1(baseline.occasion_f1_mean),
        ),
    ]
    return _grid(header, rows)


def render_distribution_table(table: DistributionTable) -> str:
    """Category distribution with counts and one-decimal percentages."""
    header = ("Category", "Count", "%")
    rows = [
        (row.category.capitalize(), f"{row.count:,}", f"{row.percent:.1f}")
        for row in table.rows
    ]
    rows.append(("Total", f"{table.total.count:,}", f"{table.total.percent:.1f}"))
    return _grid(header, rows)
