"""Content-based billing: catalog, credentialed view resolution, contracts.

One catalog item carries several presentation views of the same data,
each gated by a set of credential tags and carrying its own price. Access
resolution walks the item's views most-privileged-first and returns the
first view whose credential requirements the subscriber meets; a view
with no requirements acts as the public fallback. A resolved view is then
offered to the subscriber; only accepted contracts ever produce a charge.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from typing import Iterable, Mapping

from .money import D, fmt4, q4
from .tariff import ContentRate, Policy, leaf_strategy


class ItemUnknown(Exception):
    pass


class NoAccessibleView(Exception):
    pass


class ContractNotAccepted(Exception):
    pass


@dataclass(frozen=True)
class View:
    view_id: str
    required_credentials: frozenset[str]
    price: Decimal


@dataclass(frozen=True)
class ContentItem:
    item_id: str
    views: tuple[View, ...]  # ordered most-privileged-first


@dataclass(frozen=True)
class ContentCatalog:
    items: Mapping[str, ContentItem]

    def view(self, item_id: str, view_id: str) -> View:
        item = self.items.get(item_id)
        if item is None:
            raise ItemUnknown(f"unknown content item {item_id!r}")
        for view in item.views:
            if view.view_id == view_id:
                return view
        raise ItemUnknown(f"item {item_id!r} has no view {view_id!r}")


class ContractStatus(str, Enum):
    OFFERED = "Offered"
    ACCEPTED = "Accepted"
    DECLINED = "Declined"


@dataclass(frozen=True)
class CredentialSet:
    subscriber_id: str
    credentials: frozenset[str]


@dataclass(frozen=True)
class ServiceContract:
    subscriber_id: str
    item_id: str
    view_id: str
    offered_price: Decimal
    status: ContractStatus


def validate_catalog(catalog: ContentCatalog) -> list[str]:
    violations = []
    for item_id, item in catalog.items.items():
        if not item.views:
            violations.append(f"item {item_id}: needs at least one view")
        view_ids = [view.view_id for view in item.views]
        if len(view_ids) != len(set(view_ids)):
            violations.append(f"item {item_id}: view ids must be unique")
        public = [view for view in item.views if not view.required_credentials]
        if len(public) > 1:
            violations.append(f"item {item_id}: at most one public view allowed")
        if any(view.price < 0 for view in item.views):
            violations.append(f"item {item_id}: view prices must be non-negative")
    return violations


def identify(creds: CredentialSet, required: frozenset[str]) -> bool:
    """True iff the subscriber holds every required credential."""
    return required <= creds.credentials


def resolve_view(catalog: ContentCatalog, item_id: str, creds: CredentialSet) -> View:
    """First view, in the item's declared order, whose requirements the
    subscriber satisfies. A public (requirement-free) view acts as the
    fallback; with none, access is denied."""
    item = catalog.items.get(item_id)
    if item is None:
        raise ItemUnknown(f"unknown content item {item_id!r}")
    for view in item.views:
        if identify(creds, view.required_credentials):
            return view
    raise NoAccessibleView(
        f"subscriber {creds.subscriber_id} cannot access any view of {item_id}")


def negotiate(view: View, accept: bool, subscriber_id: str, item_id: str) -> ServiceContract:
    """Offer the resolved view at its price; the subscriber's decision
    fixes the contract status. Only accepted contracts are chargeable."""
    return ServiceContract(
        subscriber_id=subscriber_id,
        item_id=item_id,
        view_id=view.view_id,
        offered_price=view.price,
        status=ContractStatus.ACCEPTED if accept else ContractStatus.DECLINED)


def content_charge(contract: ServiceContract, policy: Policy) -> Decimal:
    """Charge for a fulfilled content access: the contract price times the
    policy's content surcharge (1 when the policy is not content-rated)."""
    if contract.status is not ContractStatus.ACCEPTED:
        raise ContractNotAccepted(
            f"contract for {contract.item_id}/{contract.view_id} is {contract.status.value}")
    strategy = leaf_strategy(policy.strategy)
    multiplier = (strategy.surcharge_multiplier
                  if isinstance(strategy, ContentRate) else Decimal(1))
    return q4(contract.offered_price * multiplier)


# --- files ------------------------------------------------------------------

def catalog_from_dict(obj: dict) -> ContentCatalog:
    items = {}
    for item_obj in obj["items"]:
        views = tuple(
            View(view_id=view["view_id"],
                 required_credentials=frozenset(view.get("required_credentials", [])),
                 price=D(view["price"]))
            for view in item_obj["views"])
        items[item_obj["item_id"]] = ContentItem(item_id=item_obj["item_id"], views=views)
    return ContentCatalog(items=items)


def load_catalog(path) -> ContentCatalog:
    with open(path, "r", encoding="utf-8") as handle:
        return catalog_from_dict(json.load(handle))


def contract_to_dict(contract: ServiceContract) -> dict:
    return {
        "subscriber_id": contract.subscriber_id,
        "item_id": contract.item_id,
        "view_id": contract.view_id,
        "offered_price": fmt4(contract.offered_price),
        "status": contract.status.value,
    }


def append_contracts(path, contracts: Iterable[ServiceContract]) -> None:
    """Append to the contracts ledger (newline-delimited, append-only)."""
    with open(path, "a", encoding="utf-8") as handle:
        for contract in contracts:
            handle.write(json.dumps(contract_to_dict(contract),
                                    separators=(",", ":")) + "\n")


def load_contracts(path) -> list[ServiceContract]:
    contracts = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            obj = json.loads(line)
            contracts.append(ServiceContract(
                subscriber_id=obj["subscriber_id"],
                item_id=obj["item_id"],
                view_id=obj["view_id"],
                offered_price=D(obj["offered_price"]),
                status=ContractStatus(obj["status"])))
    return contracts


def load_credentials(path) -> dict[str, CredentialSet]:
    out = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            obj = json.loads(line)
            out[obj["subscriber_id"]] = CredentialSet(
                subscriber_id=obj["subscriber_id"],
                credentials=frozenset(obj.get("credentials", [])))
    return out


def write_credentials(path, credential_sets: Iterable[CredentialSet]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for creds in credential_sets:
            handle.write(json.dumps(
                {"subscriber_id": creds.subscriber_id,
                 "credentials": sorted(creds.credentials)},
                separators=(",", ":")) + "\n")
