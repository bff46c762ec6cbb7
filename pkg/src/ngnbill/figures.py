"""Report figures rendered next to the delimited outputs.

Matplotlib is imported lazily with the Agg backend so headless batch runs
work and library users who never render pay nothing. The renderings are
deterministic: same inputs, byte-identical PNGs.
"""

from __future__ import annotations

from decimal import Decimal
from pathlib import Path
from typing import Sequence


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _bar_figure(labels: Sequence[str], values: Sequence[float], title: str,
                ylabel: str, path: Path) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(max(6.0, 0.6 * len(labels) + 2.0), 4.0))
    ax.bar(labels, values, color="#4878a8")
    ax.set_title(title)
    ax.set_ylabel(ylabel)
    ax.grid(axis="y", alpha=0.3)
    if labels and max(len(label) for label in labels) > 8:
        ax.tick_params(axis="x", rotation=45)
        for tick in ax.get_xticklabels():
            tick.set_horizontalalignment("right")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render_billing_figures(invoices, charges, out_dir, currency: str) -> list[str]:
    """Invoice totals per subscriber and charge mass per service type."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    ordered = sorted(invoices, key=lambda inv: inv.subscriber_id)
    totals_path = out_dir / "invoice_totals.png"
    _bar_figure(
        [inv.subscriber_id for inv in ordered],
        [float(inv.total) for inv in ordered],
        "Invoice totals", f"amount [{currency}]", totals_path)
    written.append(str(totals_path))

    by_service: dict[str, Decimal] = {}
    for charge in charges:
        key = charge.service_type.value
        by_service[key] = by_service.get(key, Decimal(0)) + charge.gross_amount
    services = sorted(by_service)
    breakdown_path = out_dir / "service_breakdown.png"
    _bar_figure(
        services,
        [float(by_service[s]) for s in services],
        "Gross charges by service", f"amount [{currency}]", breakdown_path)
    written.append(str(breakdown_path))
    return written


def render_settlement_figures(report, out_dir) -> list[str]:
    """Per-operator settlement shares."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    shares_path = out_dir / "operator_shares.png"
    _bar_figure(
        [operator_id for operator_id, _ in report.per_operator],
        [float(amount) for _, amount in report.per_operator],
        f"Operator settlement shares ({report.period})", "amount", shares_path)
    return [str(shares_path)]
