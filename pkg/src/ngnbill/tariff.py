"""Declarative tariff plans.

A plan is an ordered policy list plus rating modifiers (location/network
multipliers, QoS rebate rules), per-service QoS contracts, bundle rules
and tax rules. Policy selection is first-match in declared order; the
unit price composes the strategy's base price with multiplicative
modifiers and the operator margin.

Plans are immutable after load and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from decimal import Decimal
from types import MappingProxyType
from typing import Mapping, Optional, Union

from .money import D
from .records import (PaymentOption, QoSMetrics, ServiceType, SwitchingMode,
                      UsageRecord, qos_from_dict)

BYTES_PER_MB = 1_000_000  # decimal megabyte; keeps byte->MB scaling exact

ONE = Decimal(1)


class NoMatchingPolicy(Exception):
    """No policy selector matches the record; the record is unratable."""


class StrategyUnsupportedForCircuit(Exception):
    """Circuit switching fixes the bit rate, so volume has no meaning and
    volume/content strategies cannot rate circuit records."""


# --- time-of-day windows ---------------------------------------------------

@dataclass(frozen=True)
class Window:
    """Inclusive time-of-day window, minute resolution, evaluated in UTC."""

    start_minute: int
    end_minute: int

    def contains(self, at: datetime) -> bool:
        minute = at.hour * 60 + at.minute
        return self.start_minute <= minute <= self.end_minute

    def covers(self, other: Optional["Window"]) -> bool:
        if other is None:
            return self.start_minute == 0 and self.end_minute == 24 * 60 - 1
        return (self.start_minute <= other.start_minute
                and self.end_minute >= other.end_minute)

    def __str__(self) -> str:
        return (f"{self.start_minute // 60:02d}:{self.start_minute % 60:02d}"
                f"-{self.end_minute // 60:02d}:{self.end_minute % 60:02d}")


def parse_window(text: str) -> Window:
    """Parse "HH:MM-HH:MM"."""
    try:
        start_text, end_text = text.split("-")
        h1, m1 = (int(part) for part in start_text.split(":"))
        h2, m2 = (int(part) for part in end_text.split(":"))
    except ValueError as exc:
        raise ValueError(f"window must look like 'HH:MM-HH:MM', got {text!r}") from exc
    if not (0 <= h1 < 24 and 0 <= h2 < 24 and 0 <= m1 < 60 and 0 <= m2 < 60):
        raise ValueError(f"window out of range: {text!r}")
    return Window(start_minute=h1 * 60 + m1, end_minute=h2 * 60 + m2)


# --- strategies ------------------------------------------------------------

@dataclass(frozen=True)
class FlatRate:
    """Fixed fee per period; usage-independent, modifier- and margin-free.
    An optional window restricts the times of day the fee applies at all."""

    amount_per_period: Decimal
    period: str = "session"
    window: Optional[Window] = None

    kind = "FlatRate"


@dataclass(frozen=True)
class DurationRate:
    """Charge proportional to session length, priced per km per second."""

    unit_price_per_km_s: Decimal

    kind = "DurationRate"


@dataclass(frozen=True)
class VolumeTier:
    up_to_bytes: Optional[int]  # None = unbounded final tier
    price_per_mb: Decimal


@dataclass(frozen=True)
class VolumeRate:
    """Graduated volume pricing: each tier's rate applies only to the bytes
    that fall inside that tier."""

    tiers: tuple[VolumeTier, ...]

    kind = "VolumeRate"


@dataclass(frozen=True)
class ContentRate:
    """Content access billing: the charge is the resolved view price times
    this surcharge; no usage-proportional base."""

    surcharge_multiplier: Decimal

    kind = "ContentRate"


@dataclass(frozen=True)
class SubscriptionPlusUsage:
    """Recurring fee (billed once per invoice period) plus a usage part
    rated per record."""

    monthly_fee: Decimal
    usage: "Strategy"

    kind = "SubscriptionPlusUsage"


Strategy = Union[FlatRate, DurationRate, VolumeRate, ContentRate,
                 SubscriptionPlusUsage]


def leaf_strategy(strategy: Strategy) -> Strategy:
    """The per-record usage strategy, unwrapping a subscription shell."""
    if isinstance(strategy, SubscriptionPlusUsage):
        return strategy.usage
    return strategy


# --- policies --------------------------------------------------------------

@dataclass(frozen=True)
class Selector:
    """Match predicate over service type, start time-of-day, payment option
    and switching mode. None means "any"."""

    service_types: Optional[frozenset[ServiceType]] = None
    window: Optional[Window] = None
    payment_options: Optional[frozenset[PaymentOption]] = None
    switching_modes: Optional[frozenset[SwitchingMode]] = None

    def matches(self, record: UsageRecord) -> bool:
        if self.service_types is not None and record.service_type not in self.service_types:
            return False
        if self.window is not None and not self.window.contains(record.start_time):
            return False
        if self.payment_options is not None and record.payment_option not in self.payment_options:
            return False
        if self.switching_modes is not None and record.switching_mode not in self.switching_modes:
            return False
        return True


@dataclass(frozen=True)
class Policy:
    policy_id: str
    selector: Selector
    strategy: Strategy
    margin: Decimal = Decimal(0)  # price multiplier is (1 + margin)

    def matches(self, record: UsageRecord) -> bool:
        """Selector match, plus the flat-rate window gate: a windowed flat
        fee only applies inside its window, otherwise the policy does not
        match at all and selection moves on."""
        if not self.selector.matches(record):
            return False
        strategy = leaf_strategy(self.strategy)
        if isinstance(strategy, FlatRate) and strategy.window is not None:
            return strategy.window.contains(record.start_time)
        return True


@dataclass(frozen=True)
class QoSRebateRule:
    parameter: str  # one of QoSMetrics.PARAMETERS
    rebate_fraction: Decimal


# --- bundles and taxes (plan configuration; applied by the billing module) -

@dataclass(frozen=True)
class IncludedAllowance:
    service_type: ServiceType
    metric: str  # "seconds" | "bytes"
    amount: int

    kind = "IncludedAllowance"


@dataclass(frozen=True)
class VolumeDiscount:
    thresholds: tuple[tuple[int, Decimal], ...]  # (above_bytes, discount_fraction)

    kind = "VolumeDiscount"


@dataclass(frozen=True)
class ThirdPartyDiscount:
    trigger_tag: str
    discount_fraction: Decimal

    kind = "ThirdPartyDiscount"


@dataclass(frozen=True)
class BundleRule:
    rule_id: str
    rule: Union[IncludedAllowance, VolumeDiscount, ThirdPartyDiscount]


@dataclass(frozen=True)
class TaxRule:
    jurisdiction: str
    rate: Decimal
    applies_to: Optional[frozenset[ServiceType]] = None  # None = all services


@dataclass(frozen=True)
class TariffPlan:
    plan_id: str
    currency: str
    policies: tuple[Policy, ...]
    location_multipliers: Mapping[str, Decimal] = field(
        default_factory=lambda: MappingProxyType({}))
    network_multipliers: Mapping[str, Decimal] = field(
        default_factory=lambda: MappingProxyType({}))
    qos_rebate_rules: tuple[QoSRebateRule, ...] = ()
    qos_contracts: Mapping[ServiceType, QoSMetrics] = field(
        default_factory=lambda: MappingProxyType({}))
    bundles: tuple[BundleRule, ...] = ()
    tax_rules: tuple[TaxRule, ...] = ()
    rounding: int = 2  # presentation decimals on rendered invoices

    def policy_by_id(self, policy_id: str) -> Optional[Policy]:
        for policy in self.policies:
            if policy.policy_id == policy_id:
                return policy
        return None


# --- operations ------------------------------------------------------------

def select_policy(plan: TariffPlan, record: UsageRecord) -> Policy:
    """First policy in declared order that matches the record."""
    for policy in plan.policies:
        if policy.matches(record):
            return policy
    raise NoMatchingPolicy(
        f"no policy matches record {record.record_id} "
        f"({record.service_type.value}/{record.switching_mode.value})")


def price_modifier(plan: TariffPlan, record: UsageRecord, policy: Policy) -> Decimal:
    """Multiplicative price modifier: location x network x (1 + margin).
    Flat rates are exempt; their fee is fixed by definition."""
    if isinstance(leaf_strategy(policy.strategy), FlatRate):
        return ONE
    loc = plan.location_multipliers.get(record.location_zone, ONE)
    net = plan.network_multipliers.get(record.access_network, ONE)
    return loc * net * (ONE + policy.margin)


def _raw_duration_price(strategy: DurationRate, record: UsageRecord) -> Decimal:
    """Per-second price over the operator path: each leg contributes its own
    per-km-s price (segment override, else the policy price) times its
    distance. With no overrides this is exactly price x total distance."""
    total = Decimal(0)
    for seg in record.operator_path:
        per_km_s = (seg.unit_price_override
                    if seg.unit_price_override is not None
                    else strategy.unit_price_per_km_s)
        total += per_km_s * seg.distance_km
    return total


def _marginal_tier(tiers: tuple[VolumeTier, ...], volume_bytes: int) -> VolumeTier:
    for tier in tiers:
        if tier.up_to_bytes is None or volume_bytes <= tier.up_to_bytes:
            return tier
    return tiers[-1]


def unit_price(policy: Policy, record: UsageRecord, plan: TariffPlan) -> Decimal:
    """The unit price actually applied to the record.

    DurationRate: per-second price (path legs x modifiers).
    VolumeRate: marginal tier price per MB x modifiers.
    FlatRate: the period fee, unmodified.
    ContentRate: zero; the money is carried by the content fee.
    Missing multiplier entries default to 1.
    """
    strategy = policy.strategy
    if isinstance(strategy, SubscriptionPlusUsage):
        inner = Policy(policy_id=policy.policy_id, selector=policy.selector,
                       strategy=strategy.usage, margin=policy.margin)
        return unit_price(inner, record, plan)
    if isinstance(strategy, FlatRate):
        return strategy.amount_per_period
    modifier = price_modifier(plan, record, policy)
    if isinstance(strategy, DurationRate):
        return _raw_duration_price(strategy, record) * modifier
    if isinstance(strategy, VolumeRate):
        return _marginal_tier(strategy.tiers, record.volume_bytes).price_per_mb * modifier
    if isinstance(strategy, ContentRate):
        return Decimal(0)
    raise TypeError(f"unknown strategy {strategy!r}")


# --- validation ------------------------------------------------------------

def _validate_strategy(policy_id: str, strategy: Strategy, violations: list[str],
                       nested: bool = False) -> None:
    if isinstance(strategy, FlatRate):
        if strategy.amount_per_period < 0:
            violations.append(f"{policy_id}: flat amount must be non-negative")
        if strategy.window is not None and strategy.window.start_minute > strategy.window.end_minute:
            violations.append(f"{policy_id}: flat window must satisfy start <= end")
    elif isinstance(strategy, DurationRate):
        if strategy.unit_price_per_km_s < 0:
            violations.append(f"{policy_id}: duration unit price must be non-negative")
    elif isinstance(strategy, VolumeRate):
        tiers = strategy.tiers
        if not tiers:
            violations.append(f"{policy_id}: volume strategy needs at least one tier")
            return
        previous = -1
        for position, tier in enumerate(tiers):
            if tier.up_to_bytes is None:
                if position != len(tiers) - 1:
                    violations.append(f"{policy_id}: only the last tier may be unbounded")
                    break
            elif tier.up_to_bytes <= previous:
                violations.append(f"{policy_id}: tiers not increasing")
                break
            else:
                previous = tier.up_to_bytes
        if tiers[-1].up_to_bytes is not None:
            violations.append(f"{policy_id}: last tier must be unbounded")
        if any(tier.price_per_mb < 0 for tier in tiers):
            violations.append(f"{policy_id}: tier prices must be non-negative")
    elif isinstance(strategy, ContentRate):
        if strategy.surcharge_multiplier < 0:
            violations.append(f"{policy_id}: content surcharge must be non-negative")
    elif isinstance(strategy, SubscriptionPlusUsage):
        if nested:
            violations.append(f"{policy_id}: subscriptions cannot nest")
            return
        if strategy.monthly_fee < 0:
            violations.append(f"{policy_id}: monthly fee must be non-negative")
        _validate_strategy(policy_id, strategy.usage, violations, nested=True)


def _effective_window(policy: Policy) -> Optional[Window]:
    """Intersection of selector window and flat window, for shadow checks."""
    windows = [w for w in (policy.selector.window,) if w is not None]
    strategy = leaf_strategy(policy.strategy)
    if isinstance(strategy, FlatRate) and strategy.window is not None:
        windows.append(strategy.window)
    if not windows:
        return None
    start = max(w.start_minute for w in windows)
    end = min(w.end_minute for w in windows)
    return Window(start, end)


def _covers_set(earlier, later, universe) -> bool:
    earlier_set = universe if earlier is None else earlier
    later_set = universe if later is None else later
    return later_set <= earlier_set


def _shadows(earlier: Policy, later: Policy) -> bool:
    if not _covers_set(earlier.selector.service_types, later.selector.service_types,
                       frozenset(ServiceType)):
        return False
    if not _covers_set(earlier.selector.payment_options, later.selector.payment_options,
                       frozenset(PaymentOption)):
        return False
    if not _covers_set(earlier.selector.switching_modes, later.selector.switching_modes,
                       frozenset(SwitchingMode)):
        return False
    earlier_window = _effective_window(earlier)
    if earlier_window is None:
        return True
    return earlier_window.covers(_effective_window(later))


def validate_plan(plan: TariffPlan) -> list[str]:
    """Report every plan invariant violation, including policies that can
    never be selected because an earlier selector fully covers them."""
    violations: list[str] = []
    if not plan.policies:
        violations.append("plan must declare at least one policy")
    seen_ids = set()
    for policy in plan.policies:
        if policy.policy_id in seen_ids:
            violations.append(f"duplicate policy id {policy.policy_id}")
        seen_ids.add(policy.policy_id)
        if policy.margin < 0:
            violations.append(f"{policy.policy_id}: margin must be non-negative")
        sel = policy.selector
        if sel.window is not None and sel.window.start_minute > sel.window.end_minute:
            violations.append(f"{policy.policy_id}: selector window must satisfy start <= end")
        _validate_strategy(policy.policy_id, policy.strategy, violations)
    for name, multipliers in (("location", plan.location_multipliers),
                              ("network", plan.network_multipliers)):
        for key, value in multipliers.items():
            if value <= 0:
                violations.append(f"{name} multiplier for {key!r} must be positive")
    for rule in plan.qos_rebate_rules:
        if rule.parameter not in QoSMetrics.PARAMETERS:
            violations.append(f"unknown QoS parameter {rule.parameter!r}")
        if not (0 <= rule.rebate_fraction <= 1):
            violations.append(f"rebate fraction for {rule.parameter} must be in [0, 1]")
    for bundle in plan.bundles:
        rule = bundle.rule
        if isinstance(rule, IncludedAllowance):
            if rule.metric not in ("seconds", "bytes"):
                violations.append(f"{bundle.rule_id}: allowance metric must be seconds or bytes")
            if rule.amount < 0:
                violations.append(f"{bundle.rule_id}: allowance amount must be non-negative")
        elif isinstance(rule, VolumeDiscount):
            previous = -1
            for above_bytes, fraction in rule.thresholds:
                if above_bytes <= previous:
                    violations.append(f"{bundle.rule_id}: thresholds not increasing")
                    break
                previous = above_bytes
            if any(not (0 <= fraction <= 1) for _, fraction in rule.thresholds):
                violations.append(f"{bundle.rule_id}: discount fractions must be in [0, 1]")
        elif isinstance(rule, ThirdPartyDiscount):
            if not (0 <= rule.discount_fraction <= 1):
                violations.append(f"{bundle.rule_id}: discount fraction must be in [0, 1]")
    for tax in plan.tax_rules:
        if tax.rate < 0:
            violations.append(f"tax {tax.jurisdiction}: rate must be non-negative")
    for index, later in enumerate(plan.policies):
        for earlier in plan.policies[:index]:
            if _shadows(earlier, later):
                violations.append(
                    f"{later.policy_id} unreachable: fully shadowed by {earlier.policy_id}")
                break
    return violations


# --- plan files -------------------------------------------------------------

def _strategy_from_dict(obj: dict, nested: bool = False) -> Strategy:
    kind = obj.get("kind")
    if kind == "FlatRate":
        window = obj.get("window")
        return FlatRate(
            amount_per_period=D(obj["amount_per_period"]),
            period=obj.get("period", "session"),
            window=parse_window(window) if window else None)
    if kind == "DurationRate":
        return DurationRate(unit_price_per_km_s=D(obj["unit_price_per_km_s"]))
    if kind == "VolumeRate":
        tiers = tuple(
            VolumeTier(
                up_to_bytes=tier["up_to_bytes"],
                price_per_mb=D(tier["price_per_MB"]))
            for tier in obj["tiers"])
        return VolumeRate(tiers=tiers)
    if kind == "ContentRate":
        return ContentRate(surcharge_multiplier=D(obj["surcharge_multiplier"]))
    if kind == "SubscriptionPlusUsage":
        if nested:
            raise ValueError("subscriptions cannot nest")
        return SubscriptionPlusUsage(
            monthly_fee=D(obj["monthly_fee"]),
            usage=_strategy_from_dict(obj["usage"], nested=True))
    raise ValueError(f"unknown strategy kind {kind!r}")


def _selector_from_dict(obj: dict) -> Selector:
    services = obj.get("service_types")
    payments = obj.get("payment_options")
    modes = obj.get("switching_modes")
    window = obj.get("window")
    return Selector(
        service_types=(frozenset(ServiceType(s) for s in services)
                       if services is not None else None),
        window=parse_window(window) if window else None,
        payment_options=(frozenset(PaymentOption(p) for p in payments)
                         if payments is not None else None),
        switching_modes=(frozenset(SwitchingMode(m) for m in modes)
                         if modes is not None else None))


def _bundle_from_dict(obj: dict) -> BundleRule:
    kind = obj.get("kind")
    if kind == "IncludedAllowance":
        rule = IncludedAllowance(
            service_type=ServiceType(obj["service_type"]),
            metric=obj["metric"],
            amount=int(obj["amount"]))
    elif kind == "VolumeDiscount":
        rule = VolumeDiscount(thresholds=tuple(
            (int(t["above_bytes"]), D(t["discount_fraction"]))
            for t in obj["thresholds"]))
    elif kind == "ThirdPartyDiscount":
        rule = ThirdPartyDiscount(
            trigger_tag=obj["trigger_tag"],
            discount_fraction=D(obj["discount_fraction"]))
    else:
        raise ValueError(f"unknown bundle kind {kind!r}")
    return BundleRule(rule_id=obj["rule_id"], rule=rule)


def plan_from_dict(obj: dict) -> TariffPlan:
    policies = tuple(
        Policy(
            policy_id=p["policy_id"],
            selector=_selector_from_dict(p.get("selector", {})),
            strategy=_strategy_from_dict(p["strategy"]),
            margin=D(p.get("margin", "0")))
        for p in obj["policies"])
    return TariffPlan(
        plan_id=obj["plan_id"],
        currency=obj.get("currency", "EUR"),
        policies=policies,
        location_multipliers=MappingProxyType(
            {zone: D(value) for zone, value in obj.get("location_multipliers", {}).items()}),
        network_multipliers=MappingProxyType(
            {net: D(value) for net, value in obj.get("network_multipliers", {}).items()}),
        qos_rebate_rules=tuple(
            QoSRebateRule(parameter=r["parameter"], rebate_fraction=D(r["rebate_fraction"]))
            for r in obj.get("qos_rebate_rules", [])),
        qos_contracts=MappingProxyType(
            {ServiceType(service): qos_from_dict(metrics)
             for service, metrics in obj.get("qos_contracts", {}).items()}),
        bundles=tuple(_bundle_from_dict(b) for b in obj.get("bundles", [])),
        tax_rules=tuple(
            TaxRule(jurisdiction=t["jurisdiction"], rate=D(t["rate"]),
                    applies_to=(frozenset(ServiceType(s) for s in t["applies_to"])
                                if t.get("applies_to") not in (None, "all") else None))
            for t in obj.get("tax_rules", [])),
        rounding=int(obj.get("rounding", 2)))


def load_plan(path) -> TariffPlan:
    with open(path, "r", encoding="utf-8") as handle:
        return plan_from_dict(json.load(handle))
