"""Batch front door: validate, simulate, rate, bill, settle.

Every command is a pure file-to-file transform: re-running on the same
inputs overwrites the outputs with identical bytes. Exit codes: 0 on
success, 1 on a domain failure (nothing rated, validation violations),
2 when a required input cannot be read or parsed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import billing, content, rating, records, settlement, simulate, tariff

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_INPUT = 2


def _fail_input(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_INPUT


def _load_plan(path: str):
    try:
        return tariff.load_plan(path)
    except FileNotFoundError:
        return None
    except (json.JSONDecodeError, KeyError, ValueError, TypeError):
        return None


def cmd_validate(args) -> int:
    try:
        plan = tariff.load_plan(args.plan)
    except FileNotFoundError:
        return _fail_input(f"cannot read plan file {args.plan}")
    except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        return _fail_input(f"cannot parse plan file {args.plan}: {exc}")
    violations = tariff.validate_plan(plan)
    for violation in violations:
        print(violation)
    if violations:
        return EXIT_DOMAIN
    print(f"plan {plan.plan_id}: ok")
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        config = simulate.load_config(args.config)
    except FileNotFoundError:
        return _fail_input(f"cannot read config file {args.config}")
    except (json.JSONDecodeError, simulate.InvalidConfig) as exc:
        return _fail_input(f"bad simulation config: {exc}")
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    catalog = None
    if config.catalog_path:
        try:
            catalog = content.load_catalog(config.catalog_path)
        except FileNotFoundError:
            return _fail_input(f"cannot read catalog file {config.catalog_path}")
    generated, credential_sets, contracts = simulate.simulate(config, catalog)
    paths = simulate.write_simulation(Path(args.out), generated, credential_sets, contracts)
    print(f"simulated {len(generated)} records -> {paths['udr']}")
    return EXIT_OK


def cmd_rate(args) -> int:
    try:
        with open(args.input, "r", encoding="utf-8") as handle:
            lines = handle.readlines()
    except FileNotFoundError:
        return _fail_input(f"cannot read UDR file {args.input}")
    plan = _load_plan(args.plan)
    if plan is None:
        return _fail_input(f"cannot read or parse plan file {args.plan}")
    catalog = None
    if args.catalog:
        try:
            catalog = content.load_catalog(args.catalog)
        except (FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
            return _fail_input(f"cannot read catalog file {args.catalog}: {exc}")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    charges = []
    rejects = []
    records_in = 0
    for line_number, record, reject in records.iter_udr_lines(lines):
        records_in += 1
        if reject is not None:
            rejects.append(reject)
            continue
        try:
            charges.append(rating.rate_record(plan, record, catalog))
        except (tariff.NoMatchingPolicy, tariff.StrategyUnsupportedForCircuit,
                rating.ContentItemUnknown) as exc:
            rejects.append(records.RejectReport(line_number, "rating", str(exc)))

    charges_path = out_dir / "charges.jsonl"
    rating.write_charges_file(charges_path, charges)
    rejects_path = out_dir / (Path(args.input).stem + ".rejects")
    records.write_rejects_file(rejects_path, rejects)

    manifest = {
        "input": str(args.input),
        "plan": str(args.plan),
        "catalog": str(args.catalog) if args.catalog else None,
        "out_dir": str(out_dir),
        "period": None,
        "records_in": records_in,
        "rated": len(charges),
        "rejected": len(rejects),
    }
    with open(out_dir / "run_manifest.json", "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2)
        handle.write("\n")

    print(f"rated {len(charges)}/{records_in} records "
          f"({len(rejects)} rejected) -> {charges_path}")
    return EXIT_OK if charges else EXIT_DOMAIN


def _read_charges(path):
    try:
        return rating.read_charges_file(path)
    except FileNotFoundError:
        return None
    except (json.JSONDecodeError, KeyError, ValueError):
        return None


def cmd_bill(args) -> int:
    charges = _read_charges(args.input)
    if charges is None:
        return _fail_input(f"cannot read or parse charges file {args.input}")
    plan = _load_plan(args.plan)
    if plan is None:
        return _fail_input(f"cannot read or parse plan file {args.plan}")
    try:
        period = billing.Period.from_month(args.period)
    except ValueError:
        return _fail_input(f"bad period {args.period!r}, expected YYYY-MM")
    context = frozenset(tag for tag in (args.context or "").split(",") if tag)

    in_period = [c for c in charges if period.contains(c.start_time)]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    subscribers = sorted({c.subscriber_id for c in in_period})
    invoices = []
    for subscriber_id in subscribers:
        own = [c for c in in_period if c.subscriber_id == subscriber_id]
        invoice = billing.aggregate_invoice(subscriber_id, period, own, plan, context)
        billing.write_invoice_files(invoice, out_dir, plan.rounding)
        invoices.append(invoice)

    if invoices and not args.no_figures:
        from .figures import render_billing_figures
        render_billing_figures(invoices, in_period, out_dir / "figures", plan.currency)

    print(f"billed {len(invoices)} subscriber(s) for {args.period} -> {out_dir}")
    return EXIT_OK if invoices else EXIT_DOMAIN


def cmd_settle(args) -> int:
    charges = _read_charges(args.input)
    if charges is None:
        return _fail_input(f"cannot read or parse charges file {args.input}")
    try:
        period = billing.Period.from_month(args.period)
    except ValueError:
        return _fail_input(f"bad period {args.period!r}, expected YYYY-MM")
    in_period = [c for c in charges if period.contains(c.start_time)]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        report = settlement.settle(in_period, period.label())
    except settlement.AllocationMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    report_path = out_dir / f"settlement_{period.label()}.json"
    settlement.write_settlement_report(report, report_path)
    if report.per_operator and not args.no_figures:
        from .figures import render_settlement_figures
        render_settlement_figures(report, out_dir / "figures")
    print(f"settled {len(in_period)} charge(s), total {report.grand_total} -> {report_path}")
    return EXIT_OK if in_period else EXIT_DOMAIN


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ngnbill",
        description="Convergent rating and billing engine (batch pipeline).")
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a tariff plan file")
    p_validate.add_argument("--plan", required=True)
    p_validate.set_defaults(func=cmd_validate)

    p_sim = sub.add_parser("simulate", help="generate a seeded synthetic UDR corpus")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_sim.set_defaults(func=cmd_simulate)

    p_rate = sub.add_parser("rate", help="rate a UDR file against a plan")
    p_rate.add_argument("--in", dest="input", required=True)
    p_rate.add_argument("--plan", required=True)
    p_rate.add_argument("--catalog", default=None)
    p_rate.add_argument("--out", required=True)
    p_rate.set_defaults(func=cmd_rate)

    p_bill = sub.add_parser("bill", help="aggregate invoices from rated charges")
    p_bill.add_argument("--in", dest="input", required=True)
    p_bill.add_argument("--plan", required=True)
    p_bill.add_argument("--period", required=True, metavar="YYYY-MM")
    p_bill.add_argument("--out", required=True)
    p_bill.add_argument("--context", default="",
                        help="comma-separated invoice context tags (bundle triggers)")
    p_bill.add_argument("--no-figures", action="store_true")
    p_bill.set_defaults(func=cmd_bill)

    p_settle = sub.add_parser("settle", help="aggregate operator settlement")
    p_settle.add_argument("--in", dest="input", required=True)
    p_settle.add_argument("--period", required=True, metavar="YYYY-MM")
    p_settle.add_argument("--out", required=True)
    p_settle.add_argument("--no-figures", action="store_true")
    p_settle.set_defaults(func=cmd_settle)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
