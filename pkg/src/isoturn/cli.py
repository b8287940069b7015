"""Command-line driver: encode survey extracts, run turnover, run simulations.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .evidence import ORDERINGS, ThresholdConfig
from .ingest import (
    DEFAULT_RULES,
    EncodingRules,
    IngestError,
    complete_cases,
    encode_record,
    read_canonical,
    read_raw,
    synthetic_survey,
    write_canonical,
)
from .lattice import Strategy, as_profile
from .simulation import (
    MonotonicityError,
    compare_strategies,
    estimate_fwer,
    load_spec,
    write_rows_csv,
)
from .special import IncompleteBetaError
from .turnover import TurnoverConfig, run_turnover

log = logging.getLogger("isoturn")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _count(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isoturn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="log progress to stderr (repeat for debug output)")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("encode", help="encode a raw survey extract into the canonical CSV")
    p.add_argument("--input", required=True, type=Path, help="raw survey file (delimited with header, or fixed-width)")
    p.add_argument("--rules", type=Path, help="JSON encoding rules (default: built-in BRFSS 2023 rules)")
    p.add_argument("--layout", type=Path, help="JSON column layout; makes --input a fixed-width file")
    p.add_argument("--output", required=True, type=Path, help="canonical CSV to write")

    p = sub.add_parser("turnover", help="screen on one group, validate on the other, both ways")
    p.add_argument("--data", required=True, type=Path, help="canonical CSV")
    p.add_argument("--c", type=float, required=True, help="odds multiplier defining tau")
    p.add_argument("--p0", type=float, required=True, help="baseline outcome probability defining tau")
    p.add_argument("--alpha", type=float, default=0.05, help="overall FWER level, split evenly between directions (default 0.05)")
    p.add_argument("--kappa", type=float, default=0.025, help="screening p-value cutoff (default 0.025)")
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default=Strategy.PGUIDED.value,
                   help="parent selection for the polyforest (default pguided)")
    p.add_argument("--seed", type=int, default=0, help="seed for tie-breaking in parent selection (default 0)")
    p.add_argument("--hypotheses", type=Path,
                   help="profiles (one per line, or a JSON list) validated on red in place of blue screening")
    p.add_argument("--ordering", choices=ORDERINGS, default="nearest", help="neighbour ordering (default nearest)")
    p.add_argument("--report", required=True, type=Path, help="report JSON to write; traces go next to it")
    p.add_argument("--threads", type=_positive_int, default=1, help="worker threads for p-value sweeps (default 1)")

    p = sub.add_parser("simulate", help="Monte-Carlo FWER, power or strategy comparison")
    p.add_argument("--model", required=True, type=Path, help="JSON model file")
    p.add_argument("--mode", choices=("fwer", "power", "strategies"), required=True, help="what to estimate")
    p.add_argument("--replicates", type=_count, required=True, help="number of simulated datasets")
    p.add_argument("--seed", type=int, default=0, help="root seed (default 0)")
    p.add_argument("--n", type=_positive_int, help="observations per dataset (default: from the model file)")
    p.add_argument("--out", required=True, type=Path, help="CSV to write")
    p.add_argument("--threads", type=_positive_int, default=1, help="concurrent replicates (default 1)")

    p = sub.add_parser("fixture", help="write a synthetic, codebook-valid raw survey file")
    p.add_argument("--n", type=_positive_int, default=1000, help="number of respondents (default 1000)")
    p.add_argument("--seed", type=int, default=0, help="seed (default 0)")
    p.add_argument("--rules", type=Path, help="JSON encoding rules (default: built-in)")
    p.add_argument("--output", required=True, type=Path, help="raw CSV to write")
    return parser


def _rules(path) -> EncodingRules:
    if path is None:
        return DEFAULT_RULES
    try:
        return EncodingRules.load(path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot load rules {path}: {exc}") from exc


def cmd_encode(args) -> int:
    rules = _rules(args.rules)
    try:
        records = [encode_record(r, rules) for r in read_raw(args.input, rules, layout=args.layout)]
    except OSError as exc:
        raise DataError(str(exc)) from exc
    data, reasons = complete_cases(records)
    write_canonical(data, args.output)
    summary = ", ".join(f"{k}={v}" for k, v in reasons.items())
    print(f"read {len(records)} records, kept {len(data)}; excluded: {summary}", file=sys.stderr)
    return EXIT_OK


def _read_hypotheses(path: Path, dimension: int) -> list:
    text = path.read_text().strip()
    items = json.loads(text) if text.startswith("[") else [line.strip() for line in text.splitlines()
                                                             if line.strip() and not line.startswith("#")]
    profiles = [as_profile(str(x), dimension) for x in items]
    if len({x.value for x in profiles}) != len(profiles):
        raise ValueError("duplicate profiles in hypotheses file")
    return profiles


def cmd_turnover(args) -> int:
    try:
        thresholds = ThresholdConfig(c=args.c, p0=args.p0, alpha=args.alpha, kappa=args.kappa)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    try:
        data = read_canonical(args.data)
    except OSError as exc:
        raise DataError(str(exc)) from exc
    hypotheses = None
    if args.hypotheses is not None:
        try:
            hypotheses = _read_hypotheses(args.hypotheses, data.dimension)
        except (OSError, ValueError) as exc:
            raise DataError(f"{args.hypotheses}: {exc}") from exc
    config = TurnoverConfig(thresholds, Strategy(args.strategy), args.seed,
                            external_hypotheses=hypotheses, ordering=args.ordering, threads=args.threads)
    report = run_turnover(data, None, config)

    stem = args.report.with_suffix("") if args.report.suffix == ".json" else args.report
    refs = {}
    for name, result in report.directions.items():
        trace_path = stem.parent / f"{stem.name}.{name}.trace.jsonl"
        trace_path.write_text(result.rejections.trace_jsonl())
        refs[name] = {"path": trace_path.name, "entries": len(result.rejections.trace)}
    args.report.write_text(report.to_json(refs) + "\n")
    log.info("%d replicable, %d global-null profiles", len(report.replicable), len(report.global_null))
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        spec = load_spec(args.model)
    except MonotonicityError as exc:
        raise DataError(f"{args.model}: {exc} (cover pair {exc.lower} < {exc.upper})") from exc
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{args.model}: {exc}") from exc
    n = args.n or spec.n
    model, th, cands = spec.model, spec.thresholds, spec.candidates
    rows = []
    if args.replicates > 0:
        if args.mode == "fwer":
            strategy = spec.strategies[0] if spec.strategies else None
            try:
                rows = [estimate_fwer(model, spec.pipeline, args.replicates, args.seed, n, th, strategy,
                                      cands, workers=args.threads)]
            except ValueError as exc:
                raise DataError(f"{args.model}: {exc}") from exc
        else:
            if args.mode == "power":
                strategies = spec.strategies[:1] or (Strategy.PGUIDED,)
            else:
                strategies = spec.strategies or tuple(Strategy)
            rows = compare_strategies(model, strategies, args.replicates, args.seed, n, th, cands,
                                      workers=args.threads)
    write_rows_csv(rows, args.out)
    return EXIT_OK


def cmd_fixture(args) -> int:
    rules = _rules(args.rules)
    rows, _ = synthetic_survey(args.n, args.seed, rules)
    with open(args.output, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(dict.fromkeys(rules.variables)), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return EXIT_OK


COMMANDS = {"encode": cmd_encode, "turnover": cmd_turnover, "simulate": cmd_simulate, "fixture": cmd_fixture}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"isoturn {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, IngestError) as exc:
        print(f"isoturn {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, IncompleteBetaError) as exc:
        print(f"isoturn {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"isoturn {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
