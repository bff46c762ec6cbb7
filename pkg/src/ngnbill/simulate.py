"""Seeded synthetic usage-record generation.

Determinism matters more than realism here: the generator runs on an
in-tree SplitMix64 recurrence with integer-only sampling, so one config
(seed included) always produces byte-identical output files, on any
platform. SplitMix64 steps the state by the constant 0x9E3779B97F4A7C15
and mixes with 0xBF58476D1CE4E5B9 / 0x94D049BB133111EB (shifts 30/27/31);
the constants are fixed here and must not change under existing seeds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .content import (ContentCatalog, CredentialSet, ServiceContract,
                      ContractStatus, NoAccessibleView, negotiate,
                      resolve_view)
from .money import D
from .records import (ContentRef, OperatorSegment, PaymentOption, QoSMetrics,
                      ServiceType, SwitchingMode, UsageRecord, validate_record,
                      write_udr_file)

MASK64 = (1 << 64) - 1


class InvalidConfig(Exception):
    pass


class SplitMix64:
    """Deterministic 64-bit generator; see the module docstring for the
    published constants."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n), bias-free via rejection."""
        if n <= 0:
            raise ValueError("below() needs a positive bound")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            draw = self.next_u64()
            if draw < limit:
                return draw % n

    def between(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], inclusive."""
        if hi < lo:
            raise ValueError("empty range")
        return lo + self.below(hi - lo + 1)

    def chance(self, probability: Fraction) -> bool:
        """True with the given probability (exact rational threshold)."""
        threshold = (probability.numerator << 64) // probability.denominator
        return self.next_u64() < threshold

    def weighted(self, items: list, weights: list[int]):
        total = sum(weights)
        draw = self.below(total)
        acc = 0
        for item, weight in zip(items, weights):
            acc += weight
            if draw < acc:
                return item
        return items[-1]


# Services rated per time on a reserved channel run circuit-switched.
CIRCUIT_SERVICES = frozenset({ServiceType.VOICE})


@dataclass(frozen=True)
class ParamRange:
    lo: int
    hi: int


@dataclass(frozen=True)
class SimConfig:
    seed: int
    record_count: int
    subscriber_count: int
    period: str  # YYYY-MM
    service_mix: dict[ServiceType, int]
    duration_s: ParamRange
    volume_bytes: ParamRange
    distance_milli_km: ParamRange
    operator_pool: tuple[str, ...]
    max_path_length: int
    content_access_probability: Fraction
    content_decline_probability: Fraction
    qos_baseline: QoSMetrics
    qos_degradation_prob: dict[str, Fraction]
    location_zones: tuple[str, ...] = ("default",)
    access_networks: tuple[str, ...] = ("umts",)
    credential_tags: tuple[str, ...] = ()
    catalog_path: Optional[str] = None


def _fraction(value) -> Fraction:
    return Fraction(D(value))


def config_from_dict(obj: dict, base_dir: Optional[Path] = None) -> SimConfig:
    catalog_path = obj.get("catalog_path")
    if catalog_path and base_dir is not None:
        catalog_path = str(base_dir / catalog_path)
    try:
        mix = {ServiceType(s): int(w) for s, w in obj["service_mix"].items()}
        ranges = obj["ranges"]
        config = SimConfig(
            seed=int(obj["seed"]),
            record_count=int(obj["record_count"]),
            subscriber_count=int(obj["subscriber_count"]),
            period=obj["period"],
            service_mix=mix,
            duration_s=ParamRange(*[int(x) for x in ranges["duration_s"]]),
            volume_bytes=ParamRange(*[int(x) for x in ranges["volume_bytes"]]),
            distance_milli_km=ParamRange(*[int(x) for x in ranges["distance_milli_km"]]),
            operator_pool=tuple(obj["operator_pool"]),
            max_path_length=int(obj["max_path_length"]),
            content_access_probability=_fraction(obj.get("content_access_probability", "0")),
            content_decline_probability=_fraction(obj.get("content_decline_probability", "0")),
            qos_baseline=QoSMetrics(
                peak_bw_bps=int(obj["qos_baseline"]["peak_bw_bps"]),
                avg_bw_bps=int(obj["qos_baseline"]["avg_bw_bps"]),
                min_bw_bps=int(obj["qos_baseline"]["min_bw_bps"]),
                max_delay_ms=D(obj["qos_baseline"]["max_delay_ms"]),
                jitter_ms=D(obj["qos_baseline"]["jitter_ms"]),
                reliability_pct=D(obj["qos_baseline"]["reliability_pct"])),
            qos_degradation_prob={
                key: _fraction(value)
                for key, value in obj.get("qos_degradation_prob", {}).items()},
            location_zones=tuple(obj.get("location_zones", ["default"])),
            access_networks=tuple(obj.get("access_networks", ["umts"])),
            credential_tags=tuple(obj.get("credential_tags", [])),
            catalog_path=catalog_path)
    except (KeyError, ValueError, TypeError) as exc:
        raise InvalidConfig(f"bad simulation config: {exc}") from exc
    problems = validate_config(config)
    if problems:
        raise InvalidConfig("; ".join(problems))
    return config


def validate_config(config: SimConfig) -> list[str]:
    problems = []
    if config.record_count < 0:
        problems.append("record_count must be non-negative")
    if config.subscriber_count < 1:
        problems.append("subscriber_count must be at least 1")
    if not config.service_mix or sum(config.service_mix.values()) <= 0:
        problems.append("service mix needs positive total weight")
    if any(w < 0 for w in config.service_mix.values()):
        problems.append("service mix weights must be non-negative")
    for name, rng in (("duration_s", config.duration_s),
                      ("volume_bytes", config.volume_bytes),
                      ("distance_milli_km", config.distance_milli_km)):
        if rng.hi < rng.lo or rng.lo < 0:
            problems.append(f"range {name} must be non-empty and non-negative")
    if config.max_path_length < 1:
        problems.append("max_path_length must be at least 1")
    if not config.operator_pool:
        problems.append("operator pool must be non-empty")
    for key, prob in config.qos_degradation_prob.items():
        if key not in QoSMetrics.PARAMETERS:
            problems.append(f"unknown QoS parameter {key!r}")
        if not (0 <= prob <= 1):
            problems.append(f"degradation probability for {key} must be in [0, 1]")
    if not (0 <= config.content_access_probability <= 1):
        problems.append("content_access_probability must be in [0, 1]")
    if not (0 <= config.content_decline_probability <= 1):
        problems.append("content_decline_probability must be in [0, 1]")
    return problems


def load_config(path) -> SimConfig:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as handle:
        return config_from_dict(json.load(handle), base_dir=path.parent)


def _degrade_qos(rng: SplitMix64, baseline: QoSMetrics,
                 probabilities: dict[str, Fraction]) -> QoSMetrics:
    """Derive measured QoS: each parameter independently degrades with its
    configured probability, strictly worse than the baseline. Bandwidth
    factors stay in [50%, 90%] so the min <= avg <= peak ordering survives
    any combination (the baseline tiers are at least 2x apart)."""
    values = {
        "peak_bw_bps": baseline.peak_bw_bps,
        "avg_bw_bps": baseline.avg_bw_bps,
        "min_bw_bps": baseline.min_bw_bps,
        "max_delay_ms": baseline.max_delay_ms,
        "jitter_ms": baseline.jitter_ms,
        "reliability_pct": baseline.reliability_pct,
    }
    for key in ("peak_bw_bps", "avg_bw_bps", "min_bw_bps"):
        if rng.chance(probabilities.get(key, Fraction(0))):
            percent = rng.between(50, 90)
            values[key] = values[key] * percent // 100
    for key in ("max_delay_ms", "jitter_ms"):
        if rng.chance(probabilities.get(key, Fraction(0))):
            percent = rng.between(120, 300)
            values[key] = values[key] * percent / 100
    if rng.chance(probabilities.get("reliability_pct", Fraction(0))):
        drop = rng.between(1, 50)
        floor = Decimal(0)
        values["reliability_pct"] = max(floor, values["reliability_pct"] - drop)
    return QoSMetrics(**values)


def simulate(config: SimConfig,
             catalog: Optional[ContentCatalog] = None) -> tuple[
                 list[UsageRecord], list[CredentialSet], list[ServiceContract]]:
    """Generate records, subscriber credential fixtures and the content
    contracts negotiated along the way. Identical configs yield identical
    output, element for element."""
    rng = SplitMix64(config.seed)
    year, month = (int(x) for x in config.period.split("-"))
    period_start = datetime(year, month, 1, tzinfo=timezone.utc)

    subscribers = [f"sub-{i:05d}" for i in range(1, config.subscriber_count + 1)]
    credential_sets = []
    for subscriber_id in subscribers:
        tags = frozenset(
            tag for tag in config.credential_tags if rng.chance(Fraction(1, 2)))
        credential_sets.append(CredentialSet(subscriber_id=subscriber_id,
                                             credentials=tags))
    creds_by_subscriber = {c.subscriber_id: c for c in credential_sets}

    services = sorted(config.service_mix, key=lambda s: s.value)
    weights = [config.service_mix[s] for s in services]
    catalog_items = sorted(catalog.items) if catalog is not None else []

    records: list[UsageRecord] = []
    contracts: list[ServiceContract] = []
    for index in range(config.record_count):
        record_id = f"udr-{index + 1:06d}"
        subscriber_id = subscribers[rng.below(len(subscribers))]
        service = rng.weighted(services, weights)
        mode = (SwitchingMode.CIRCUIT if service in CIRCUIT_SERVICES
                else SwitchingMode.PACKET)

        start_offset = rng.below(27 * 24 * 3600)  # stay inside every month
        duration = rng.between(config.duration_s.lo, config.duration_s.hi)
        start_time = period_start + timedelta(seconds=start_offset)
        end_time = start_time + timedelta(seconds=duration)

        volume = rng.between(config.volume_bytes.lo, config.volume_bytes.hi)
        peak_rate = rng.between(64_000, 10_000_000)

        path_length = rng.between(1, config.max_path_length)
        milli_km = [rng.between(config.distance_milli_km.lo, config.distance_milli_km.hi)
                    for _ in range(path_length)]
        segments = []
        for part in milli_km:
            operator = config.operator_pool[rng.below(len(config.operator_pool))]
            override = None
            if path_length > 1 and rng.chance(Fraction(1, 4)):
                override = Decimal(rng.between(1, 10)).scaleb(-4)  # 0.0001..0.0010
            segments.append(OperatorSegment(
                operator_id=operator,
                distance_km=Decimal(part).scaleb(-3),
                unit_price_override=override))
        distance = Decimal(sum(milli_km)).scaleb(-3)

        content_ref = None
        if (service is ServiceType.DOWNLOAD and catalog is not None and catalog_items
                and rng.chance(config.content_access_probability)):
            item_id = catalog_items[rng.below(len(catalog_items))]
            creds = creds_by_subscriber[subscriber_id]
            try:
                view = resolve_view(catalog, item_id, creds)
            except NoAccessibleView:
                view = None
            if view is not None:
                accept = not rng.chance(config.content_decline_probability)
                contract = negotiate(view, accept, subscriber_id, item_id)
                contracts.append(contract)
                if contract.status is ContractStatus.ACCEPTED:
                    # Only fulfilled negotiations deliver content worth rating.
                    content_ref = ContentRef(item_id=item_id, view_id=view.view_id)

        record = UsageRecord(
            record_id=record_id,
            subscriber_id=subscriber_id,
            service_type=service,
            switching_mode=mode,
            start_time=start_time,
            end_time=end_time,
            volume_bytes=volume,
            peak_rate_bps=peak_rate,
            distance_km=distance,
            location_zone=config.location_zones[rng.below(len(config.location_zones))],
            access_network=config.access_networks[rng.below(len(config.access_networks))],
            content_item=content_ref,
            payment_option=rng.weighted(
                [PaymentOption.POSTPAID, PaymentOption.PREPAID, PaymentOption.THIRD_PARTY],
                [6, 3, 1]),
            operator_path=tuple(segments),
            qos_measured=_degrade_qos(rng, config.qos_baseline,
                                      config.qos_degradation_prob))
        assert not validate_record(record), f"generated invalid record {record_id}"
        records.append(record)

    return records, credential_sets, contracts


def write_simulation(out_dir, records, credential_sets, contracts) -> dict[str, str]:
    """Write udr.jsonl, credentials.jsonl and contracts.jsonl; returns paths."""
    from .content import append_contracts, write_credentials

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    udr_path = out_dir / "udr.jsonl"
    creds_path = out_dir / "credentials.jsonl"
    contracts_path = out_dir / "contracts.jsonl"
    write_udr_file(udr_path, records)
    write_credentials(creds_path, credential_sets)
    contracts_path.write_text("", encoding="utf-8")
    append_contracts(contracts_path, contracts)
    return {"udr": str(udr_path), "credentials": str(creds_path),
            "contracts": str(contracts_path)}
