"""Policy selection, unit pricing and plan validation."""

from decimal import Decimal

import pytest

from conftest import (duration_policy, make_record, single_policy_plan,
                      volume_policy)

from ngnbill.records import ServiceType, SwitchingMode
from ngnbill.tariff import (FlatRate, NoMatchingPolicy, Policy, Selector,
                            TariffPlan, parse_window, select_policy,
                            unit_price, validate_plan)


def flat_policy(amount="5.00", window=None, policy_id="p-flat",
                services=frozenset({ServiceType.GAMING})) -> Policy:
    return Policy(
        policy_id=policy_id,
        selector=Selector(service_types=services),
        strategy=FlatRate(amount_per_period=Decimal(amount),
                          window=parse_window(window) if window else None))


class TestSelectPolicy:
    def test_first_match_wins(self):
        p1 = duration_policy(services={ServiceType.VOICE}, policy_id="P1")
        p2 = duration_policy(policy_id="P2")  # matches anything
        plan = TariffPlan("t", "EUR", policies=(p1, p2))
        assert select_policy(plan, make_record()).policy_id == "P1"

    def test_window_policy_selected_inside_window(self):
        p1 = flat_policy(window="18:00-22:00", policy_id="P1")
        p2 = flat_policy(policy_id="P2")
        plan = TariffPlan("t", "EUR", policies=(p1, p2))
        record = make_record(service_type=ServiceType.GAMING,
                             switching_mode=SwitchingMode.PACKET)  # starts 20:00
        assert select_policy(plan, record).policy_id == "P1"

    def test_windowed_flat_does_not_match_outside_window(self):
        p1 = flat_policy(window="08:00-12:00", policy_id="P1")
        p2 = flat_policy(policy_id="P2")
        plan = TariffPlan("t", "EUR", policies=(p1, p2))
        record = make_record(service_type=ServiceType.GAMING,
                             switching_mode=SwitchingMode.PACKET)
        assert select_policy(plan, record).policy_id == "P2"

    def test_no_match_raises(self):
        plan = single_policy_plan(duration_policy(services={ServiceType.VOICE}))
        record = make_record(service_type=ServiceType.DOWNLOAD,
                             switching_mode=SwitchingMode.PACKET)
        with pytest.raises(NoMatchingPolicy):
            select_policy(plan, record)

    def test_selection_is_deterministic(self):
        plan = single_policy_plan(duration_policy())
        record = make_record()
        assert select_policy(plan, record) is select_policy(plan, record)

    def test_disjoint_policies_commute(self):
        voice = duration_policy(services={ServiceType.VOICE}, policy_id="PV")
        download = duration_policy(services={ServiceType.DOWNLOAD}, policy_id="PD")
        forward = TariffPlan("t", "EUR", policies=(voice, download))
        backward = TariffPlan("t", "EUR", policies=(download, voice))
        for service in (ServiceType.VOICE, ServiceType.DOWNLOAD):
            mode = (SwitchingMode.CIRCUIT if service is ServiceType.VOICE
                    else SwitchingMode.PACKET)
            record = make_record(service_type=service, switching_mode=mode)
            assert (select_policy(forward, record).policy_id
                    == select_policy(backward, record).policy_id)


class TestUnitPrice:
    def test_duration_price_is_per_km_s_times_distance(self):
        plan = single_policy_plan(duration_policy("0.01"))
        record = make_record(distance_km=Decimal("100"))
        assert unit_price(plan.policies[0], record, plan) == Decimal("1.00")

    def test_location_multiplier_scales(self):
        plan = single_policy_plan(
            duration_policy("0.01"),
            location_multipliers={"city-center": Decimal("1.5")})
        record = make_record(distance_km=Decimal("100"), location_zone="city-center")
        assert unit_price(plan.policies[0], record, plan) == Decimal("1.50")

    def test_flat_price_ignores_modifiers_and_margin(self):
        policy = Policy(
            policy_id="pf", selector=Selector(),
            strategy=FlatRate(amount_per_period=Decimal("5.00")),
            margin=Decimal("0.30"))
        plan = single_policy_plan(
            policy, location_multipliers={"city-center": Decimal("2")})
        record = make_record(location_zone="city-center")
        assert unit_price(policy, record, plan) == Decimal("5.00")

    def test_margin_scales_price(self):
        plan = single_policy_plan(duration_policy("0.01", margin="0.10"))
        record = make_record(distance_km=Decimal("100"))
        assert unit_price(plan.policies[0], record, plan) == Decimal("1.100")

    def test_missing_multiplier_defaults_to_one(self):
        plan = single_policy_plan(duration_policy("0.01"))
        record = make_record(distance_km=Decimal("100"), location_zone="nowhere")
        assert unit_price(plan.policies[0], record, plan) == Decimal("1.00")

    def test_monotone_in_multipliers_and_margin(self):
        record = make_record(distance_km=Decimal("100"))
        prices = []
        for loc, margin in (("1.0", "0"), ("1.2", "0"), ("1.2", "0.1"), ("1.5", "0.25")):
            plan = single_policy_plan(
                duration_policy("0.01", margin=margin),
                location_multipliers={"default": Decimal(loc)})
            prices.append(unit_price(plan.policies[0], record, plan))
        assert prices == sorted(prices)

    def test_volume_marginal_tier_price(self):
        plan = single_policy_plan(volume_policy(
            [(10_000_000, "0.10"), (None, "0.05")]))
        record = make_record(switching_mode=SwitchingMode.PACKET,
                             volume_bytes=25_000_000)
        assert unit_price(plan.policies[0], record, plan) == Decimal("0.05")


class TestValidatePlan:
    def test_shipped_plan_is_ok(self, shipped_plan):
        assert validate_plan(shipped_plan) == []

    def test_identical_selector_shadowing(self):
        p1 = duration_policy(services={ServiceType.VOICE}, policy_id="P1")
        p2 = duration_policy(services={ServiceType.VOICE}, policy_id="P2")
        plan = TariffPlan("t", "EUR", policies=(p1, p2))
        assert any("P2 unreachable" in v for v in validate_plan(plan))

    def test_tier_order_violation(self):
        plan = single_policy_plan(volume_policy(
            [(10_000_000, "0.10"), (5_000_000, "0.05")]))
        violations = validate_plan(plan)
        assert any("tiers not increasing" in v for v in violations)

    def test_last_tier_must_be_unbounded(self):
        plan = single_policy_plan(volume_policy([(10_000_000, "0.10")]))
        assert any("unbounded" in v for v in validate_plan(plan))

    def test_empty_policy_list(self):
        plan = TariffPlan("t", "EUR", policies=())
        assert any("at least one policy" in v for v in validate_plan(plan))

    def test_nonpositive_multiplier(self):
        plan = single_policy_plan(
            duration_policy(), location_multipliers={"x": Decimal("0")})
        assert any("must be positive" in v for v in validate_plan(plan))

    def test_negative_price(self):
        plan = single_policy_plan(duration_policy("-0.01"))
        assert any("non-negative" in v for v in validate_plan(plan))

    def test_window_not_fully_covering_does_not_shadow(self):
        p1 = flat_policy(window="18:00-22:00", policy_id="P1")
        p2 = flat_policy(policy_id="P2")
        plan = TariffPlan("t", "EUR", policies=(p1, p2))
        assert validate_plan(plan) == []


class TestWindow:
    def test_parse_and_contains(self):
        window = parse_window("18:00-22:00")
        assert window.contains(make_record().start_time)  # 20:00

    def test_inclusive_ends(self):
        window = parse_window("18:00-22:00")
        assert window.contains(make_record(
            start_time=make_record().start_time.replace(hour=18, minute=0)).start_time)
        assert window.contains(make_record(
            start_time=make_record().start_time.replace(hour=22, minute=0)).start_time)
        assert not window.contains(make_record(
            start_time=make_record().start_time.replace(hour=22, minute=1)).start_time)

    def test_bad_window_rejected(self):
        with pytest.raises(ValueError):
            parse_window("25:00-26:00")
