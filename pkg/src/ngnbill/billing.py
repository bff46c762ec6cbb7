"""Invoice aggregation: per-subscriber, per-period totals with bundle
adjustments and taxes.

Application order is fixed: included allowances, then volume discounts,
then third-party discounts, then taxes. Line items are processed in
record-time order, so shuffling the input charge list never changes an
invoice total. All the arithmetic that involves proportions runs on exact
rationals and rounds to the money scale half-even.
"""

from __future__ import annotations

import calendar
import json
from dataclasses import dataclass
from datetime import date, datetime, timezone
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Sequence

from .money import allocate, fmt2, fmt4, money_sum, q4_fraction
from .rating import RatedCharge
from .tariff import (BundleRule, IncludedAllowance, SubscriptionPlusUsage,
                     TariffPlan, TaxRule, ThirdPartyDiscount, VolumeDiscount,
                     VolumeRate, leaf_strategy)

# re-exported plan configuration types; the rules live with the plan
__all__ = ["Period", "PeriodMismatch", "Invoice", "aggregate_invoice",
           "apply_bundles", "apply_tax", "render_invoice_text",
           "invoice_to_dict", "write_invoice_files",
           "BundleRule", "IncludedAllowance", "VolumeDiscount",
           "ThirdPartyDiscount", "TaxRule"]


class PeriodMismatch(Exception):
    """A charge belongs to another subscriber or falls outside the period."""


@dataclass(frozen=True)
class Period:
    start: date
    end: date  # inclusive

    @classmethod
    def from_month(cls, text: str) -> "Period":
        """Build a calendar-month period from 'YYYY-MM'."""
        year_text, month_text = text.split("-")
        year, month = int(year_text), int(month_text)
        last_day = calendar.monthrange(year, month)[1]
        return cls(start=date(year, month, 1), end=date(year, month, last_day))

    def contains(self, at: datetime) -> bool:
        return self.start <= at.astimezone(timezone.utc).date() <= self.end

    def label(self) -> str:
        return f"{self.start.year:04d}-{self.start.month:02d}"


@dataclass(frozen=True)
class Invoice:
    subscriber_id: str
    period: Period
    line_items: tuple[tuple[str, Decimal], ...]          # (record_id, amount)
    subscription_fees: tuple[tuple[str, Decimal], ...]   # (policy_id, amount)
    bundle_adjustments: tuple[tuple[str, Decimal], ...]  # (rule_id, deducted amount)
    subtotal: Decimal
    tax_lines: tuple[tuple[str, Decimal], ...]           # (jurisdiction, amount)
    total: Decimal
    currency: str = "EUR"


def _charge_order(charges: Iterable[RatedCharge]) -> list[RatedCharge]:
    return sorted(charges, key=lambda c: (c.start_time, c.record_id))


def _is_volume_priced(charge: RatedCharge, plan: TariffPlan) -> bool:
    policy = plan.policy_by_id(charge.policy_id)
    if policy is not None:
        return isinstance(leaf_strategy(policy.strategy), VolumeRate)
    return charge.strategy_kind == "VolumeRate"


def apply_bundles(charges: Sequence[RatedCharge], remaining: list[Decimal],
                  plan: TariffPlan, context: frozenset[str]) -> list[tuple[str, Decimal]]:
    """Compute bundle adjustments against time-ordered charges.

    `remaining` holds each charge's still-chargeable amount and is mutated
    in place so later rules discount what earlier rules left. Adjustments
    can never exceed the amounts they discount.
    """
    adjustments: list[tuple[str, Decimal]] = []

    def add(rule_id: str, amount: Decimal) -> None:
        if amount > 0:
            adjustments.append((rule_id, amount))

    kind_order = (IncludedAllowance, VolumeDiscount, ThirdPartyDiscount)
    for kind in kind_order:
        for bundle in plan.bundles:
            rule = bundle.rule
            if not isinstance(rule, kind):
                continue
            if isinstance(rule, IncludedAllowance):
                left = rule.amount
                rule_total = Decimal(0)
                for i, charge in enumerate(charges):
                    if left <= 0:
                        break
                    if charge.service_type is not rule.service_type:
                        continue
                    units = (charge.duration_s if rule.metric == "seconds"
                             else charge.volume_bytes)
                    if units <= 0:
                        continue
                    consumed = min(units, left)
                    cut = q4_fraction(Fraction(remaining[i]) * Fraction(consumed, units))
                    cut = min(cut, remaining[i])
                    remaining[i] -= cut
                    rule_total += cut
                    left -= consumed
                add(bundle.rule_id, rule_total)
            elif isinstance(rule, VolumeDiscount):
                in_scope = [i for i, charge in enumerate(charges)
                            if _is_volume_priced(charge, plan)]
                total_bytes = sum(charges[i].volume_bytes for i in in_scope)
                fraction = None
                for above_bytes, threshold_fraction in rule.thresholds:
                    if total_bytes > above_bytes:
                        fraction = threshold_fraction
                if fraction is None or not in_scope:
                    continue
                pool = money_sum(remaining[i] for i in in_scope)
                cut_total = q4_fraction(Fraction(pool) * Fraction(fraction))
                cut_total = min(cut_total, pool)
                if cut_total > 0:
                    parts = allocate(cut_total, [Fraction(remaining[i]) for i in in_scope])
                    for i, part in zip(in_scope, parts):
                        remaining[i] -= part
                add(bundle.rule_id, cut_total)
            elif isinstance(rule, ThirdPartyDiscount):
                if rule.trigger_tag not in context:
                    continue
                pool = money_sum(remaining)
                cut_total = q4_fraction(Fraction(pool) * Fraction(rule.discount_fraction))
                cut_total = min(cut_total, pool)
                if cut_total > 0 and pool > 0:
                    parts = allocate(cut_total, [Fraction(r) for r in remaining])
                    for i, part in enumerate(parts):
                        remaining[i] -= part
                add(bundle.rule_id, cut_total)
    return adjustments


def apply_tax(subtotal: Decimal, charges: Sequence[RatedCharge],
              rules: Sequence[TaxRule]) -> list[tuple[str, Decimal]]:
    """One tax line per rule: rate times the slice of the post-adjustment
    subtotal attributable to the rule's service scope, where the subtotal
    is spread over services in proportion to their gross line amounts."""
    lines = []
    gross_total = money_sum(c.gross_amount for c in charges)
    for rule in rules:
        if rule.applies_to is None:
            base = Fraction(subtotal)
        elif gross_total > 0:
            scope_gross = money_sum(
                c.gross_amount for c in charges if c.service_type in rule.applies_to)
            base = Fraction(subtotal) * Fraction(scope_gross) / Fraction(gross_total)
        else:
            base = Fraction(0)
        lines.append((rule.jurisdiction, q4_fraction(Fraction(rule.rate) * base)))
    return lines


def aggregate_invoice(subscriber_id: str, period: Period,
                      charges: Iterable[RatedCharge], plan: TariffPlan,
                      context: frozenset[str] = frozenset()) -> Invoice:
    """Build one subscriber's invoice for one period.

    Every charge must belong to the subscriber and start inside the
    period; anything else raises PeriodMismatch.
    """
    ordered = _charge_order(charges)
    for charge in ordered:
        if charge.subscriber_id != subscriber_id:
            raise PeriodMismatch(
                f"charge {charge.record_id} belongs to {charge.subscriber_id}, "
                f"not {subscriber_id}")
        if not period.contains(charge.start_time):
            raise PeriodMismatch(
                f"charge {charge.record_id} at {charge.start_time} is outside "
                f"{period.start}..{period.end}")

    line_items = tuple((c.record_id, c.gross_amount) for c in ordered)

    subscription_fees = []
    seen_policies = set()
    for charge in ordered:
        if charge.policy_id in seen_policies:
            continue
        seen_policies.add(charge.policy_id)
        policy = plan.policy_by_id(charge.policy_id)
        if policy is not None and isinstance(policy.strategy, SubscriptionPlusUsage):
            subscription_fees.append((charge.policy_id, policy.strategy.monthly_fee))

    remaining = [c.gross_amount for c in ordered]
    adjustments = apply_bundles(ordered, remaining, plan, context)

    subtotal = (money_sum(amount for _, amount in line_items)
                + money_sum(amount for _, amount in subscription_fees)
                - money_sum(amount for _, amount in adjustments))
    if subtotal < 0:
        subtotal = Decimal(0)

    tax_lines = apply_tax(subtotal, ordered, plan.tax_rules)
    total = subtotal + money_sum(amount for _, amount in tax_lines)

    return Invoice(
        subscriber_id=subscriber_id,
        period=period,
        line_items=line_items,
        subscription_fees=tuple(subscription_fees),
        bundle_adjustments=tuple(adjustments),
        subtotal=subtotal,
        tax_lines=tuple(tax_lines),
        total=total,
        currency=plan.currency)


# --- rendering ---------------------------------------------------------------

def invoice_to_dict(invoice: Invoice) -> dict:
    return {
        "subscriber_id": invoice.subscriber_id,
        "period": {"start": invoice.period.start.isoformat(),
                   "end": invoice.period.end.isoformat()},
        "currency": invoice.currency,
        "line_items": [{"record_id": rid, "amount": fmt4(amount)}
                       for rid, amount in invoice.line_items],
        "subscription_fees": [{"policy_id": pid, "amount": fmt4(amount)}
                              for pid, amount in invoice.subscription_fees],
        "bundle_adjustments": [{"rule_id": rid, "amount": fmt4(-amount)}
                               for rid, amount in invoice.bundle_adjustments],
        "subtotal": fmt4(invoice.subtotal),
        "tax_lines": [{"jurisdiction": jur, "amount": fmt4(amount)}
                      for jur, amount in invoice.tax_lines],
        "total": fmt4(invoice.total),
    }


def render_invoice_text(invoice: Invoice, digits: int = 2) -> str:
    """Human-readable rendering with presentation rounding (half-even)."""
    cur = invoice.currency
    width = 14
    lines = [
        f"Invoice for subscriber {invoice.subscriber_id}",
        f"Period: {invoice.period.start.isoformat()} .. {invoice.period.end.isoformat()}",
        "",
        "Charges:",
    ]
    for record_id, amount in invoice.line_items:
        lines.append(f"  {record_id:<28} {fmt2(amount, digits):>{width}} {cur}")
    if not invoice.line_items:
        lines.append("  (none)")
    if invoice.subscription_fees:
        lines.append("Subscriptions:")
        for policy_id, amount in invoice.subscription_fees:
            lines.append(f"  {policy_id:<28} {fmt2(amount, digits):>{width}} {cur}")
    if invoice.bundle_adjustments:
        lines.append("Bundle adjustments:")
        for rule_id, amount in invoice.bundle_adjustments:
            lines.append(f"  {rule_id:<28} {fmt2(-amount, digits):>{width}} {cur}")
    lines.append("")
    lines.append(f"  {'Subtotal':<28} {fmt2(invoice.subtotal, digits):>{width}} {cur}")
    for jurisdiction, amount in invoice.tax_lines:
        lines.append(f"  {'Tax ' + jurisdiction:<28} {fmt2(amount, digits):>{width}} {cur}")
    lines.append(f"  {'Total':<28} {fmt2(invoice.total, digits):>{width}} {cur}")
    lines.append("")
    return "\n".join(lines)


def write_invoice_files(invoice: Invoice, out_dir, digits: int = 2) -> tuple[str, str]:
    """Write the structured and the human-readable invoice; returns paths."""
    stem = f"invoice_{invoice.subscriber_id}_{invoice.period.label()}"
    json_path = str(out_dir / f"{stem}.json")
    text_path = str(out_dir / f"{stem}.txt")
    with open(json_path, "w", encoding="utf-8") as handle:
        json.dump(invoice_to_dict(invoice), handle, indent=2)
        handle.write("\n")
    with open(text_path, "w", encoding="utf-8") as handle:
        handle.write(render_invoice_text(invoice, digits))
    return json_path, text_path
