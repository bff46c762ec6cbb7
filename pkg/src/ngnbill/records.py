"""Usage-record data model and UDR stream parsing.

A usage detail record (UDR) is one rated unit of service consumption as
delivered by the accounting/mediation layer. Records carry usage only;
prices come exclusively from the tariff plan.

The on-disk format is UTF-8 JSON Lines, one record object per line, with
RFC 3339 second-precision UTC timestamps and distances as decimal strings.
Rejected lines are reported, never fatal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import IO, Iterable, Iterator, Optional, Union

from .money import D

DISTANCE_TOLERANCE_KM = Decimal("0.000001")


class ServiceType(str, Enum):
    VOICE = "Voice"
    MESSAGING = "Messaging"
    VIDEO_CONFERENCE = "VideoConference"
    GAMING = "Gaming"
    INFO_RETRIEVAL = "InfoRetrieval"
    STREAMING = "Streaming"
    DOWNLOAD = "Download"
    SPEECH_SERVICE = "SpeechService"


class SwitchingMode(str, Enum):
    CIRCUIT = "Circuit"
    PACKET = "Packet"


class PaymentOption(str, Enum):
    PREPAID = "Prepaid"
    POSTPAID = "Postpaid"
    THIRD_PARTY = "ThirdParty"


@dataclass(frozen=True)
class QoSMetrics:
    """Delivered or contracted service-quality parameter set."""

    peak_bw_bps: int
    avg_bw_bps: int
    min_bw_bps: int
    max_delay_ms: Decimal
    jitter_ms: Decimal
    reliability_pct: Decimal

    # Field names double as rebate-rule parameter names.
    PARAMETERS = ("peak_bw_bps", "avg_bw_bps", "min_bw_bps",
                  "max_delay_ms", "jitter_ms", "reliability_pct")


@dataclass(frozen=True)
class OperatorSegment:
    """One operator's leg of the delivery path."""

    operator_id: str
    distance_km: Decimal
    unit_price_override: Optional[Decimal] = None  # money per km per second


@dataclass(frozen=True)
class ContentRef:
    item_id: str
    view_id: str


@dataclass(frozen=True)
class UsageRecord:
    record_id: str
    subscriber_id: str
    service_type: ServiceType
    switching_mode: SwitchingMode
    start_time: datetime
    end_time: datetime
    volume_bytes: int
    peak_rate_bps: int
    distance_km: Decimal
    location_zone: str
    access_network: str
    content_item: Optional[ContentRef]
    payment_option: PaymentOption
    operator_path: tuple[OperatorSegment, ...]
    qos_measured: QoSMetrics

    @property
    def duration_s(self) -> int:
        """Session duration in whole seconds."""
        return int((self.end_time - self.start_time).total_seconds())


@dataclass(frozen=True)
class RejectReport:
    line_number: int
    field: str
    reason: str


def validate_record(record: UsageRecord) -> list[str]:
    """Return every violated invariant; an empty list means valid."""
    violations = []
    if record.end_time < record.start_time:
        violations.append("duration must be non-negative (end_time < start_time)")
    if record.volume_bytes < 0:
        violations.append("volume_bytes must be non-negative")
    if record.peak_rate_bps < 0:
        violations.append("peak_rate_bps must be non-negative")
    if record.distance_km < 0:
        violations.append("distance_km must be non-negative")
    if not record.operator_path:
        violations.append("operator_path must be non-empty")
    else:
        for seg in record.operator_path:
            if seg.distance_km < 0:
                violations.append(
                    f"segment distance for {seg.operator_id} must be non-negative")
        span = sum((seg.distance_km for seg in record.operator_path), Decimal(0))
        if abs(span - record.distance_km) > DISTANCE_TOLERANCE_KM:
            violations.append(
                "segment distance sum does not match distance_km "
                f"({span} vs {record.distance_km})")
    q = record.qos_measured
    if not (q.min_bw_bps <= q.avg_bw_bps <= q.peak_bw_bps):
        violations.append("QoS bandwidth ordering must satisfy min <= avg <= peak")
    if q.min_bw_bps < 0:
        violations.append("QoS bandwidths must be non-negative")
    if q.max_delay_ms < 0 or q.jitter_ms < 0:
        violations.append("QoS delay and jitter must be non-negative")
    if not (0 <= q.reliability_pct <= 100):
        violations.append("reliability range must be within [0, 100]")
    return violations


# --- timestamps -----------------------------------------------------------

def parse_timestamp(text: str) -> datetime:
    """Parse an RFC 3339 timestamp, normalizing to UTC second precision."""
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        raise ValueError("timestamp must carry a UTC offset")
    return dt.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


# --- serialization --------------------------------------------------------

def record_to_dict(record: UsageRecord) -> dict:
    qos = record.qos_measured
    return {
        "record_id": record.record_id,
        "subscriber_id": record.subscriber_id,
        "service_type": record.service_type.value,
        "switching_mode": record.switching_mode.value,
        "start_time": format_timestamp(record.start_time),
        "end_time": format_timestamp(record.end_time),
        "volume_bytes": record.volume_bytes,
        "peak_rate_bps": record.peak_rate_bps,
        "distance_km": str(record.distance_km),
        "location_zone": record.location_zone,
        "access_network": record.access_network,
        "content_item": (
            {"item_id": record.content_item.item_id,
             "view_id": record.content_item.view_id}
            if record.content_item else None),
        "payment_option": record.payment_option.value,
        "operator_path": [
            {"operator_id": seg.operator_id,
             "distance_km": str(seg.distance_km),
             "unit_price_override": (
                 str(seg.unit_price_override)
                 if seg.unit_price_override is not None else None)}
            for seg in record.operator_path],
        "qos_measured": {
            "peak_bw_bps": qos.peak_bw_bps,
            "avg_bw_bps": qos.avg_bw_bps,
            "min_bw_bps": qos.min_bw_bps,
            "max_delay_ms": str(qos.max_delay_ms),
            "jitter_ms": str(qos.jitter_ms),
            "reliability_pct": str(qos.reliability_pct),
        },
    }


def serialize_record(record: UsageRecord) -> str:
    return json.dumps(record_to_dict(record), separators=(",", ":"))


def _require(obj: dict, key: str):
    if key not in obj:
        raise KeyError(f"missing field '{key}'")
    return obj[key]


def _decimal_field(obj: dict, key: str) -> Decimal:
    raw = _require(obj, key)
    if isinstance(raw, float):
        raise ValueError(f"field '{key}' must be a decimal string, not a float")
    try:
        return D(raw)
    except (InvalidOperation, TypeError) as exc:
        raise ValueError(f"field '{key}' is not a valid decimal: {raw!r}") from exc


def _int_field(obj: dict, key: str) -> int:
    raw = _require(obj, key)
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ValueError(f"field '{key}' must be an integer")
    return raw


def qos_from_dict(obj: dict) -> QoSMetrics:
    return QoSMetrics(
        peak_bw_bps=_int_field(obj, "peak_bw_bps"),
        avg_bw_bps=_int_field(obj, "avg_bw_bps"),
        min_bw_bps=_int_field(obj, "min_bw_bps"),
        max_delay_ms=_decimal_field(obj, "max_delay_ms"),
        jitter_ms=_decimal_field(obj, "jitter_ms"),
        reliability_pct=_decimal_field(obj, "reliability_pct"),
    )


def record_from_dict(obj: dict) -> UsageRecord:
    content = obj.get("content_item")
    segments = []
    for seg in _require(obj, "operator_path"):
        override = seg.get("unit_price_override")
        segments.append(OperatorSegment(
            operator_id=str(_require(seg, "operator_id")),
            distance_km=_decimal_field(seg, "distance_km"),
            unit_price_override=D(override) if override is not None else None,
        ))
    return UsageRecord(
        record_id=str(_require(obj, "record_id")),
        subscriber_id=str(_require(obj, "subscriber_id")),
        service_type=ServiceType(_require(obj, "service_type")),
        switching_mode=SwitchingMode(_require(obj, "switching_mode")),
        start_time=parse_timestamp(_require(obj, "start_time")),
        end_time=parse_timestamp(_require(obj, "end_time")),
        volume_bytes=_int_field(obj, "volume_bytes"),
        peak_rate_bps=_int_field(obj, "peak_rate_bps"),
        distance_km=_decimal_field(obj, "distance_km"),
        location_zone=str(_require(obj, "location_zone")),
        access_network=str(_require(obj, "access_network")),
        content_item=(
            ContentRef(item_id=str(_require(content, "item_id")),
                       view_id=str(_require(content, "view_id")))
            if content is not None else None),
        payment_option=PaymentOption(_require(obj, "payment_option")),
        operator_path=tuple(segments),
        qos_measured=qos_from_dict(_require(obj, "qos_measured")),
    )


# --- stream parsing -------------------------------------------------------

def iter_udr_lines(
    lines: Iterable[str],
) -> Iterator[tuple[int, Optional[UsageRecord], Optional[RejectReport]]]:
    """Yield (line_number, record, reject) per non-blank line; exactly one
    of record/reject is set. Never raises on bad input lines."""
    for line_number, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            continue
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            yield line_number, None, RejectReport(line_number, "line", f"invalid JSON: {exc.msg}")
            continue
        if not isinstance(obj, dict):
            yield line_number, None, RejectReport(line_number, "line", "record must be a JSON object")
            continue
        try:
            record = record_from_dict(obj)
        except (KeyError, ValueError, TypeError, InvalidOperation) as exc:
            field_name = _offending_field(exc)
            yield line_number, None, RejectReport(line_number, field_name, str(exc))
            continue
        violations = validate_record(record)
        if violations:
            yield line_number, None, RejectReport(line_number, "record", "; ".join(violations))
            continue
        yield line_number, record, None


def _offending_field(exc: Exception) -> str:
    if isinstance(exc, ValueError) and not isinstance(exc, InvalidOperation):
        message = str(exc)
        for enum_cls, name in ((ServiceType, "service_type"),
                               (SwitchingMode, "switching_mode"),
                               (PaymentOption, "payment_option")):
            if enum_cls.__name__ in message:
                return name
        if message.startswith("field '"):
            return message.split("'")[1]
        if "timestamp" in message or "isoformat" in message.lower():
            return "timestamp"
    if isinstance(exc, KeyError):
        return str(exc).strip("\"'").replace("missing field ", "").strip("'")
    return "record"


def parse_udr_stream(
    lines: Union[Iterable[str], IO[str]],
) -> tuple[list[UsageRecord], list[RejectReport]]:
    """Parse a UDR line stream. Every non-blank line yields either a
    validated record or a reject report; order is preserved."""
    records: list[UsageRecord] = []
    rejects: list[RejectReport] = []
    for _, record, reject in iter_udr_lines(lines):
        if record is not None:
            records.append(record)
        else:
            rejects.append(reject)
    return records, rejects


def load_udr_file(path) -> tuple[list[UsageRecord], list[RejectReport]]:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_udr_stream(handle)


def write_udr_file(path, records: Iterable[UsageRecord]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(serialize_record(record) + "\n")


def write_rejects_file(path, rejects: Iterable[RejectReport]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for reject in rejects:
            handle.write(json.dumps(
                {"line_number": reject.line_number,
                 "field": reject.field,
                 "reason": reject.reason},
                separators=(",", ":")) + "\n")
