"""Shared fixtures: record/plan builders and the shipped data files."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone
from decimal import Decimal
from pathlib import Path

import pytest

from ngnbill.records import (ContentRef, OperatorSegment, PaymentOption,
                             QoSMetrics, ServiceType, SwitchingMode,
                             UsageRecord)
from ngnbill.tariff import (DurationRate, Policy, Selector, TariffPlan,
                            VolumeRate, VolumeTier)

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

GOOD_QOS = QoSMetrics(
    peak_bw_bps=8_000_000, avg_bw_bps=4_000_000, min_bw_bps=1_000_000,
    max_delay_ms=Decimal("100"), jitter_ms=Decimal("20"),
    reliability_pct=Decimal("99.0"))


def make_record(**overrides) -> UsageRecord:
    """A valid one-operator voice record; override any field."""
    start = overrides.pop("start_time",
                          datetime(2026, 1, 5, 20, 0, 0, tzinfo=timezone.utc))
    duration = overrides.pop("duration", 60)
    distance = overrides.pop("distance_km", Decimal("100"))
    defaults = dict(
        record_id="udr-000001",
        subscriber_id="sub-00001",
        service_type=ServiceType.VOICE,
        switching_mode=SwitchingMode.CIRCUIT,
        start_time=start,
        end_time=start + timedelta(seconds=duration),
        volume_bytes=0,
        peak_rate_bps=64_000,
        distance_km=distance,
        location_zone="default",
        access_network="umts",
        content_item=None,
        payment_option=PaymentOption.POSTPAID,
        operator_path=(OperatorSegment("op-alpha", distance),),
        qos_measured=GOOD_QOS,
    )
    defaults.update(overrides)
    return UsageRecord(**defaults)


def single_policy_plan(policy: Policy, **plan_overrides) -> TariffPlan:
    defaults = dict(plan_id="test-plan", currency="EUR", policies=(policy,))
    defaults.update(plan_overrides)
    return TariffPlan(**defaults)


def duration_policy(price="0.01", services=None, policy_id="p-duration",
                    margin="0") -> Policy:
    return Policy(
        policy_id=policy_id,
        selector=Selector(service_types=frozenset(services) if services else None),
        strategy=DurationRate(unit_price_per_km_s=Decimal(price)),
        margin=Decimal(margin))


def volume_policy(tiers, policy_id="p-volume", margin="0") -> Policy:
    built = tuple(VolumeTier(up_to_bytes=bound, price_per_mb=Decimal(price))
                  for bound, price in tiers)
    return Policy(
        policy_id=policy_id,
        selector=Selector(),
        strategy=VolumeRate(tiers=built),
        margin=Decimal(margin))


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when == "call" and "test_acceptance" in report.nodeid:
        label = report.nodeid.split("::")[-1]
        verdict = "PASS" if report.passed else "FAIL"
        print(f"\n[acceptance] {label}: {verdict}")


@pytest.fixture(scope="session")
def shipped_plan():
    from ngnbill.tariff import load_plan
    return load_plan(DATA_DIR / "plan.json")


@pytest.fixture(scope="session")
def shipped_catalog():
    from ngnbill.content import load_catalog
    return load_catalog(DATA_DIR / "catalog.json")


@pytest.fixture(scope="session")
def shipped_simconfig():
    from ngnbill.simulate import load_config
    return load_config(DATA_DIR / "simconfig.json")
