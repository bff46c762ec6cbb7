"""Inter-operator settlement: fold rated charges into per-operator totals.

Settlement never re-rates; it trusts each charge's operator allocation
(and verifies that the allocation conserves the gross amount).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import Decimal
from typing import Iterable, Sequence

from .money import D, fmt4, money_sum
from .rating import RatedCharge


class AllocationMismatch(Exception):
    """A charge's operator shares do not sum to its gross amount."""


@dataclass(frozen=True)
class SettlementReport:
    period: str
    per_operator: tuple[tuple[str, Decimal], ...]  # sorted by operator id
    grand_total: Decimal


def settle(charges: Iterable[RatedCharge], period: str) -> SettlementReport:
    """Sum operator allocations across charges; conservation is exact."""
    totals: dict[str, Decimal] = {}
    grand_total = Decimal(0)
    for charge in charges:
        allocated = money_sum(amount for _, amount in charge.operator_allocation)
        if allocated != charge.gross_amount:
            raise AllocationMismatch(
                f"charge {charge.record_id}: allocation {allocated} != gross "
                f"{charge.gross_amount}")
        for operator_id, amount in charge.operator_allocation:
            totals[operator_id] = totals.get(operator_id, Decimal(0)) + amount
        grand_total += charge.gross_amount
    return SettlementReport(
        period=period,
        per_operator=tuple(sorted(totals.items())),
        grand_total=grand_total)


def settle_uniform_duration(duration_s: int,
                            segments: Sequence[tuple[Decimal, Decimal]]) -> Decimal:
    """Analytic cross-check for the case where every operator charges a
    per-distance-per-time unit price: total = duration x sum(price x distance).

    Used as an oracle against the general path (rate, allocate, settle).
    """
    total = Decimal(0)
    for price, distance in segments:
        if price < 0 or distance < 0:
            raise ValueError("segment prices and distances must be non-negative")
        total += D(price) * D(distance)
    return total * duration_s


def report_to_dict(report: SettlementReport) -> dict:
    return {
        "period": report.period,
        "per_operator": [{"operator_id": operator_id, "amount": fmt4(amount)}
                         for operator_id, amount in report.per_operator],
        "grand_total": fmt4(report.grand_total),
    }


def write_settlement_report(report: SettlementReport, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report_to_dict(report), handle, indent=2)
        handle.write("\n")
