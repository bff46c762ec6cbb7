"""Record parsing, validation and round-trip identity."""

import json
from decimal import Decimal

from conftest import GOOD_QOS, make_record

from ngnbill.records import (OperatorSegment, QoSMetrics, parse_udr_stream,
                             record_from_dict, record_to_dict,
                             serialize_record, validate_record)


def as_line(record, **patch) -> str:
    obj = record_to_dict(record)
    obj.update(patch)
    return json.dumps(obj)


def test_wellformed_voice_line_parses():
    line = serialize_record(make_record())
    recs, rejects = parse_udr_stream([line])
    assert len(recs) == 1 and not rejects


def test_end_before_start_is_rejected():
    bad = as_line(make_record(), end_time="2026-01-05T19:00:00Z")
    recs, rejects = parse_udr_stream([bad])
    assert not recs
    assert len(rejects) == 1
    assert "non-negative" in rejects[0].reason and rejects[0].line_number == 1


def test_unknown_service_rejected_midstream():
    lines = [
        serialize_record(make_record(record_id="a")),
        as_line(make_record(record_id="b"), service_type="Teleportation"),
        serialize_record(make_record(record_id="c")),
    ]
    recs, rejects = parse_udr_stream(lines)
    assert [r.record_id for r in recs] == ["a", "c"]
    assert len(rejects) == 1
    assert rejects[0].line_number == 2
    assert rejects[0].field == "service_type"


def test_malformed_json_rejected_not_fatal():
    recs, rejects = parse_udr_stream(["{not json", serialize_record(make_record())])
    assert len(recs) == 1 and len(rejects) == 1


def test_counts_reconcile_for_any_stream():
    lines = [serialize_record(make_record(record_id=f"r{i}")) for i in range(5)]
    lines[1] = "garbage"
    lines[3] = as_line(make_record(), volume_bytes=-1)
    recs, rejects = parse_udr_stream(lines)
    assert len(recs) + len(rejects) == 5


def test_validate_ok_record():
    assert validate_record(make_record()) == []


def test_validate_segment_sum_mismatch():
    record = make_record(operator_path=(
        OperatorSegment("op-a", Decimal("50")),
        OperatorSegment("op-b", Decimal("51")),
    ))
    violations = validate_record(record)
    assert any("segment distance sum" in v for v in violations)


def test_validate_reliability_range():
    bad_qos = QoSMetrics(
        peak_bw_bps=GOOD_QOS.peak_bw_bps, avg_bw_bps=GOOD_QOS.avg_bw_bps,
        min_bw_bps=GOOD_QOS.min_bw_bps, max_delay_ms=GOOD_QOS.max_delay_ms,
        jitter_ms=GOOD_QOS.jitter_ms, reliability_pct=Decimal("150"))
    violations = validate_record(make_record(qos_measured=bad_qos))
    assert any("reliability range" in v for v in violations)


def test_validate_bandwidth_ordering():
    bad_qos = QoSMetrics(
        peak_bw_bps=1_000, avg_bw_bps=2_000, min_bw_bps=3_000,
        max_delay_ms=Decimal("1"), jitter_ms=Decimal("1"),
        reliability_pct=Decimal("99"))
    violations = validate_record(make_record(qos_measured=bad_qos))
    assert any("min <= avg <= peak" in v for v in violations)


def test_roundtrip_identity():
    original = make_record(
        distance_km=Decimal("12.345"),
        operator_path=(OperatorSegment("op-a", Decimal("10.000"), Decimal("0.0150")),
                       OperatorSegment("op-b", Decimal("2.345"))),
        volume_bytes=123456)
    restored = record_from_dict(json.loads(serialize_record(original)))
    assert restored == original


def test_roundtrip_with_content_item():
    from ngnbill.records import ContentRef
    original = make_record(content_item=ContentRef("journal-netsci", "abstract"))
    restored = record_from_dict(json.loads(serialize_record(original)))
    assert restored == original


def test_blank_lines_are_skipped():
    recs, rejects = parse_udr_stream(["", serialize_record(make_record()), "   "])
    assert len(recs) == 1 and not rejects


def test_float_distance_rejected():
    bad = as_line(make_record())
    obj = json.loads(bad)
    obj["distance_km"] = 1.5  # JSON number, not a decimal string
    recs, rejects = parse_udr_stream([json.dumps(obj)])
    assert not recs and len(rejects) == 1
    assert "decimal string" in rejects[0].reason
