"""Command-line entry point: ``escape-sim run|prove|verify|fixtures``.

Exit codes: 0 success, 1 assertion or verification failure, 2 parse or
schema error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .encoding import as_address, as_word, bytes_to_int, to_hex
from .errors import EscapeSimError, InvalidProof, ParseError, SchemaViolation
from .scenario import ScenarioRunner, fixtures_dir, list_fixtures, load_scenario, run_scenario
from .state import ProofBundle, StateSnapshot

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_BAD_INPUT = 2


def _read_json(path: str):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def cmd_run(args) -> int:
    runner = ScenarioRunner(load_scenario(args.scenario), args.t_override)
    report = runner.run()
    text = report.dumps()
    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text)
    if args.snapshot:
        snap = runner.proof_snapshot("latest")
        Path(args.snapshot).write_text(json.dumps(snap.to_json(), sort_keys=True, indent=2) + "\n")
    for line in report.failures:
        print(f"FAIL {line}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_prove(args) -> int:
    try:
        snapshot = StateSnapshot.from_json(_read_json(args.snapshot))
        address = as_address(args.address)
        slots = [as_word(s) for s in args.slot]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad prove input: {exc}") from None
    bundle = snapshot.get_proof(address, slots)
    sys.stdout.write(json.dumps(bundle.to_json(), indent=2) + "\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        root = as_word(args.root)
        bundle = ProofBundle.from_json(_read_json(args.bundle))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad verify input: {exc}") from None
    try:
        verified = bundle.verify(root)
    except InvalidProof as exc:
        print(f"account {to_hex(bundle.address)}: InvalidProof ({exc})")
        return EXIT_FAILED
    if verified.account is None:
        print(f"account {to_hex(bundle.address)}: Absent")
    else:
        acct = verified.account
        print(f"account {to_hex(bundle.address)}: Included nonce={acct.nonce} balance={acct.balance}")
    for slot, value in verified.slots.items():
        shown = "Absent" if value is None else f"Included {bytes_to_int(value)}"
        print(f"  slot {to_hex(slot)}: {shown}")
    return EXIT_OK


def cmd_fixtures(args) -> int:
    paths = list_fixtures()
    if args.what == "list":
        print(f"# {fixtures_dir()}")
        for path in paths:
            print(path.stem)
        return EXIT_OK
    status = EXIT_OK
    for path in paths:
        report = run_scenario(load_scenario(path))
        print(f"{'PASS' if report.passed else 'FAIL'} {path.stem}")
        for line in report.failures:
            print(f"     {line}")
        if not report.passed:
            status = EXIT_FAILED
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="escape-sim", description="Rollup escape-hatch simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file and emit its report")
    run.add_argument("scenario")
    run.add_argument("--report", help="write the report here instead of stdout")
    run.add_argument("--t-override", type=int, dest="t_override", help="override the escape delay T")
    run.add_argument("--snapshot", help="also write the world snapshot at the latest valid root")
    run.set_defaults(func=cmd_run)

    prove = sub.add_parser("prove", help="emit an eth_getProof-style bundle from a world snapshot")
    prove.add_argument("snapshot")
    prove.add_argument("address")
    prove.add_argument("--slot", action="append", default=[], help="32-octet storage key (repeatable)")
    prove.set_defaults(func=cmd_prove)

    verify = sub.add_parser("verify", help="verify a proof bundle against a state root")
    verify.add_argument("root")
    verify.add_argument("bundle")
    verify.set_defaults(func=cmd_verify)

    fixtures = sub.add_parser("fixtures", help="list or run the bundled fixtures")
    fixtures.add_argument("what", choices=["list", "run-all"])
    fixtures.set_defaults(func=cmd_fixtures)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, SchemaViolation, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except EscapeSimError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
