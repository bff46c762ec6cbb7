"""Core charge computation.

One usage record rates to one charge: the matched policy's strategy
produces a base amount, the service-quality rebate scales it, an optional
content fee is added, and the resulting gross amount is split across the
operator path.

Arithmetic contract: strategy outputs are exact decimals at their natural
scale; the single money rounding point is the gross amount (and content
fee), quantized to 4 decimals half-even. Operator shares are produced by
largest-remainder rounding at the same scale, so they always sum to the
gross exactly. All operations here are pure; records may be rated
concurrently in any order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Optional

from .content import (ContentCatalog, ContractStatus, ItemUnknown,
                      ServiceContract, content_charge)
from .money import D, allocate, fmt4, q4
from .records import (OperatorSegment, QoSMetrics, ServiceType, SwitchingMode,
                      UsageRecord, format_timestamp, parse_timestamp)
from .tariff import (ContentRate, DurationRate, FlatRate, Policy,
                     QoSRebateRule, StrategyUnsupportedForCircuit,
                     SubscriptionPlusUsage, TariffPlan, VolumeRate,
                     BYTES_PER_MB, leaf_strategy, price_modifier,
                     select_policy, unit_price)


class ContentItemUnknown(Exception):
    """The record references a content item or view missing from the catalog."""


@dataclass(frozen=True)
class RatedCharge:
    """Per-record rating result with its full breakdown.

    Carries enough record context (service, times, usage metrics) for the
    billing and settlement stages to work from charges alone.
    """

    record_id: str
    subscriber_id: str
    policy_id: str
    service_type: ServiceType
    strategy_kind: str
    start_time: datetime
    duration_s: int
    volume_bytes: int
    base_amount: Decimal
    unit_price_used: Decimal
    qos_rebate_factor: Decimal
    content_fee: Decimal
    gross_amount: Decimal
    operator_allocation: tuple[tuple[str, Decimal], ...]


def qos_rebate(contract: Optional[QoSMetrics], measured: QoSMetrics,
               rules: Iterable[QoSRebateRule]) -> Decimal:
    """Multiplicative rebate factor in [0, 1]; 1 means fully compliant.

    A parameter is violated when the delivered value is strictly worse
    than the contract: bandwidths and reliability lower, delay and jitter
    higher. Equality is compliant. Each violated rule multiplies the
    factor by (1 - rebate_fraction).
    """
    factor = Decimal(1)
    if contract is None:
        return factor
    for rule in rules:
        delivered = getattr(measured, rule.parameter)
        agreed = getattr(contract, rule.parameter)
        if rule.parameter in ("max_delay_ms", "jitter_ms"):
            violated = delivered > agreed
        else:
            violated = delivered < agreed
        if violated:
            factor *= Decimal(1) - rule.rebate_fraction
    return factor


def graduated_volume_charge(strategy: VolumeRate, volume_bytes: int,
                            price_scale: Decimal = Decimal(1)) -> Decimal:
    """Marginal tier pricing: the first tier's rate covers the bytes up to
    its bound, the next rate covers the following bytes, and so on."""
    total = Decimal(0)
    consumed = 0
    for tier in strategy.tiers:
        ceiling = tier.up_to_bytes if tier.up_to_bytes is not None else volume_bytes
        in_tier = min(volume_bytes, ceiling) - consumed
        if in_tier <= 0:
            continue
        total += (tier.price_per_mb * price_scale) * in_tier / Decimal(BYTES_PER_MB)
        consumed += in_tier
    return total


def rate_circuit(policy: Policy, record: UsageRecord, u: Decimal) -> Decimal:
    """Circuit-switched base charge. The bit rate is fixed on a dedicated
    channel, so volume carries no meaning: volume/content strategies are
    rejected and neither volume nor peak rate influences the result."""
    strategy = leaf_strategy(policy.strategy)
    if isinstance(strategy, FlatRate):
        return strategy.amount_per_period
    if isinstance(strategy, DurationRate):
        return u * record.duration_s
    raise StrategyUnsupportedForCircuit(
        f"{type(strategy).__name__} cannot rate circuit record {record.record_id}")


def rate_packet(policy: Policy, record: UsageRecord, u: Decimal,
                price_scale: Decimal = Decimal(1)) -> Decimal:
    """Packet-switched base charge for any strategy. The subscription
    shell's recurring fee is not charged here; it is billed once per
    invoice period."""
    strategy = leaf_strategy(policy.strategy)
    if isinstance(strategy, FlatRate):
        return strategy.amount_per_period
    if isinstance(strategy, DurationRate):
        return u * record.duration_s
    if isinstance(strategy, VolumeRate):
        return graduated_volume_charge(strategy, record.volume_bytes, price_scale)
    if isinstance(strategy, ContentRate):
        return Decimal(0)
    raise TypeError(f"unknown strategy {strategy!r}")


def allocate_operators(gross: Decimal, path: tuple[OperatorSegment, ...],
                       default_unit_price: Decimal) -> list[tuple[str, Decimal]]:
    """Split a gross amount across the operator path.

    Each leg is weighted by its own per-km-s price (falling back to the
    record's applied unit price) times its distance. Shares are rounded
    by largest remainder so they sum to the gross exactly. An all-zero
    weighting falls back to an equal split so money is still conserved.
    """
    if not path:
        raise ValueError("operator path must be non-empty")
    weights = []
    for seg in path:
        price = (seg.unit_price_override
                 if seg.unit_price_override is not None else default_unit_price)
        weights.append(Fraction(price) * Fraction(seg.distance_km))
    shares = allocate(gross, weights)
    return [(seg.operator_id, share) for seg, share in zip(path, shares)]


def rate_record(plan: TariffPlan, record: UsageRecord,
                catalog: Optional[ContentCatalog] = None) -> RatedCharge:
    """Rate one validated record against a plan.

    Raises NoMatchingPolicy when no selector matches,
    StrategyUnsupportedForCircuit for volume/content pricing of circuit
    records, and ContentItemUnknown when the record references content
    missing from (or rated without) a catalog.
    """
    policy = select_policy(plan, record)
    u = unit_price(policy, record, plan)
    scale = price_modifier(plan, record, policy)
    if record.switching_mode is SwitchingMode.CIRCUIT:
        base = rate_circuit(policy, record, u)
    else:
        base = rate_packet(policy, record, u, price_scale=scale)

    factor = qos_rebate(plan.qos_contracts.get(record.service_type),
                        record.qos_measured, plan.qos_rebate_rules)

    fee = Decimal(0)
    if record.content_item is not None:
        if catalog is None:
            raise ContentItemUnknown(
                f"record {record.record_id} references content but no catalog was given")
        try:
            view = catalog.view(record.content_item.item_id, record.content_item.view_id)
        except ItemUnknown as exc:
            raise ContentItemUnknown(str(exc)) from exc
        # The record is the accounting of a delivered access, so the
        # contract behind it was necessarily accepted.
        contract = ServiceContract(
            subscriber_id=record.subscriber_id,
            item_id=record.content_item.item_id,
            view_id=record.content_item.view_id,
            offered_price=view.price,
            status=ContractStatus.ACCEPTED)
        fee = content_charge(contract, policy)

    gross = q4(base * factor) + fee
    allocation = allocate_operators(gross, record.operator_path, u)

    return RatedCharge(
        record_id=record.record_id,
        subscriber_id=record.subscriber_id,
        policy_id=policy.policy_id,
        service_type=record.service_type,
        strategy_kind=policy.strategy.kind,
        start_time=record.start_time,
        duration_s=record.duration_s,
        volume_bytes=record.volume_bytes,
        base_amount=base,
        unit_price_used=u,
        qos_rebate_factor=factor,
        content_fee=fee,
        gross_amount=gross,
        operator_allocation=tuple(allocation))


# --- charge files -----------------------------------------------------------

def charge_to_dict(charge: RatedCharge) -> dict:
    return {
        "record_id": charge.record_id,
        "subscriber_id": charge.subscriber_id,
        "policy_id": charge.policy_id,
        "service_type": charge.service_type.value,
        "strategy_kind": charge.strategy_kind,
        "start_time": format_timestamp(charge.start_time),
        "duration_s": charge.duration_s,
        "volume_bytes": charge.volume_bytes,
        "base_amount": fmt4(charge.base_amount),
        "unit_price_used": fmt4(charge.unit_price_used),
        "qos_rebate_factor": str(charge.qos_rebate_factor),
        "content_fee": fmt4(charge.content_fee),
        "gross_amount": fmt4(charge.gross_amount),
        "operator_allocation": [
            {"operator_id": operator_id, "amount": fmt4(amount)}
            for operator_id, amount in charge.operator_allocation],
    }


def charge_from_dict(obj: dict) -> RatedCharge:
    return RatedCharge(
        record_id=obj["record_id"],
        subscriber_id=obj["subscriber_id"],
        policy_id=obj["policy_id"],
        service_type=ServiceType(obj["service_type"]),
        strategy_kind=obj["strategy_kind"],
        start_time=parse_timestamp(obj["start_time"]),
        duration_s=int(obj["duration_s"]),
        volume_bytes=int(obj["volume_bytes"]),
        base_amount=D(obj["base_amount"]),
        unit_price_used=D(obj["unit_price_used"]),
        qos_rebate_factor=D(obj["qos_rebate_factor"]),
        content_fee=D(obj["content_fee"]),
        gross_amount=D(obj["gross_amount"]),
        operator_allocation=tuple(
            (entry["operator_id"], D(entry["amount"]))
            for entry in obj["operator_allocation"]))


def write_charges_file(path, charges: Iterable[RatedCharge]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for charge in charges:
            handle.write(json.dumps(charge_to_dict(charge), separators=(",", ":")) + "\n")


def read_charges_file(path) -> list[RatedCharge]:
    charges = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                charges.append(charge_from_dict(json.loads(line)))
    return charges
