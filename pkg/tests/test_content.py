"""Credentialed view resolution and contract negotiation."""

from decimal import Decimal

import pytest

from ngnbill.content import (ContentCatalog, ContentItem, ContractNotAccepted,
                             ContractStatus, CredentialSet, ItemUnknown,
                             NoAccessibleView, View, content_charge, identify,
                             negotiate, resolve_view, validate_catalog)
from ngnbill.tariff import ContentRate, DurationRate, Policy, Selector

JOURNAL = ContentItem(
    item_id="journal",
    views=(
        View("full", frozenset({"member"}), Decimal("2.50")),
        View("abstract", frozenset(), Decimal("0")),
    ))
LOCKED = ContentItem(
    item_id="locked",
    views=(View("secret", frozenset({"clearance"}), Decimal("9.99")),))
CATALOG = ContentCatalog(items={"journal": JOURNAL, "locked": LOCKED})


def creds(*tags, subscriber="sub-1"):
    return CredentialSet(subscriber_id=subscriber, credentials=frozenset(tags))


def content_policy(multiplier="1.0"):
    return Policy(policy_id="pc", selector=Selector(),
                  strategy=ContentRate(surcharge_multiplier=Decimal(multiplier)))


class TestIdentify:
    def test_empty_requirement_always_passes(self):
        assert identify(creds(), frozenset())

    def test_exact_credential(self):
        assert identify(creds("member"), frozenset({"member"}))

    def test_missing_credential(self):
        assert not identify(creds("member"), frozenset({"member", "premium"}))


class TestResolveView:
    def test_nonmember_gets_abstract(self):
        assert resolve_view(CATALOG, "journal", creds()).view_id == "abstract"

    def test_member_gets_full(self):
        assert resolve_view(CATALOG, "journal", creds("member")).view_id == "full"

    def test_unknown_item(self):
        with pytest.raises(ItemUnknown):
            resolve_view(CATALOG, "nope", creds())

    def test_no_accessible_view(self):
        with pytest.raises(NoAccessibleView):
            resolve_view(CATALOG, "locked", creds("member"))

    def test_monotone_access(self):
        """Growing the credential set never loses access to any view."""
        tag_pool = ["member", "premium", "clearance"]
        for item_id in CATALOG.items:
            for mask in range(2 ** len(tag_pool)):
                tags = {t for i, t in enumerate(tag_pool) if mask >> i & 1}
                base = _accessible(item_id, tags)
                for extra in tag_pool:
                    grown = _accessible(item_id, tags | {extra})
                    assert base <= grown


def _accessible(item_id, tags):
    item = CATALOG.items[item_id]
    c = creds(*tags)
    return {v.view_id for v in item.views if identify(c, v.required_credentials)}


class TestNegotiate:
    def test_accept_carries_price(self):
        view = resolve_view(CATALOG, "journal", creds("member"))
        contract = negotiate(view, True, "sub-1", "journal")
        assert contract.status is ContractStatus.ACCEPTED
        assert contract.offered_price == Decimal("2.50")

    def test_decline(self):
        view = resolve_view(CATALOG, "journal", creds("member"))
        contract = negotiate(view, False, "sub-1", "journal")
        assert contract.status is ContractStatus.DECLINED

    def test_accept_free_public_view(self):
        view = resolve_view(CATALOG, "journal", creds())
        contract = negotiate(view, True, "sub-1", "journal")
        assert contract.status is ContractStatus.ACCEPTED
        assert contract.offered_price == Decimal("0")


class TestContentCharge:
    def test_identity_multiplier(self):
        contract = negotiate(JOURNAL.views[0], True, "sub-1", "journal")
        assert content_charge(contract, content_policy("1.0")) == Decimal("2.5000")

    def test_surcharge(self):
        contract = negotiate(JOURNAL.views[0], True, "sub-1", "journal")
        assert content_charge(contract, content_policy("1.2")) == Decimal("3.0000")

    def test_declined_contract_raises(self):
        contract = negotiate(JOURNAL.views[0], False, "sub-1", "journal")
        with pytest.raises(ContractNotAccepted):
            content_charge(contract, content_policy())

    def test_noncontent_policy_defaults_multiplier_to_one(self):
        other = Policy(policy_id="pd", selector=Selector(),
                       strategy=DurationRate(unit_price_per_km_s=Decimal("0.01")))
        contract = negotiate(JOURNAL.views[0], True, "sub-1", "journal")
        assert content_charge(contract, other) == Decimal("2.5000")


def test_catalog_validation():
    dup = ContentItem("dup", views=(
        View("v", frozenset(), Decimal("0")),
        View("v", frozenset({"x"}), Decimal("1")),
    ))
    two_public = ContentItem("pub2", views=(
        View("a", frozenset(), Decimal("0")),
        View("b", frozenset(), Decimal("0")),
    ))
    bad = ContentCatalog(items={"dup": dup, "pub2": two_public})
    violations = validate_catalog(bad)
    assert any("unique" in v for v in violations)
    assert any("at most one public view" in v for v in violations)


def test_shipped_catalog_valid(shipped_catalog):
    assert validate_catalog(shipped_catalog) == []
