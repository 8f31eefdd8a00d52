"""Command-line front end.

    lossest select  --input data.csv --response y --strategy exhaustive --criterion cp --out report.tsv
    lossest cp-plot --input data.csv --response y --out cpplot.tsv
    lossest verify  [--config suite.cfg] --out verify.tsv [--seed 1234]

Exit codes: 0 success, 2 parse/config error, 3 rank deficiency,
4 dimension error, 5 failed (or underpowered) verification.
"""

from __future__ import annotations

import argparse
import csv
import sys
import warnings
from pathlib import Path

import numpy as np

from . import suite as suite_mod
from .canonical import RegressionData
from .criteria import CRITERIA
from .errors import ConfigError, DimensionError, ParseError, RankDeficient, UnderpoweredRun
from .selection import SubsetEvaluator, best, cp_plot, search
from .verify import MIN_REPLICATIONS

EXIT_OK, EXIT_PARSE, EXIT_RANK, EXIT_DIMENSION, EXIT_VERIFY = 0, 2, 3, 4, 5
INTERCEPT = "(intercept)"
NA = "NA"


def fmt(x) -> str:
    """17 significant digits: round-trips every double exactly."""
    if x is None:
        return NA
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def read_csv(path, response: str, intercept: bool = True, columns: list[str] | None = None) -> RegressionData:
    """Load a header-first CSV; every non-response column is a predictor unless ``columns`` is given."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty input", 1)
    header = [h.strip() for h in rows[0]]
    responses = [r.strip() for r in response.split(",")]
    for r in responses:
        if r not in header:
            raise ParseError(f"response column {r!r} not in header", 1)
    preds = columns if columns else [h for h in header if h not in responses]
    for c in preds:
        if c not in header:
            raise ParseError(f"column {c!r} not in header", 1)
    values = []
    for i, row in enumerate(rows[1:], start=2):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", i)
        rec = []
        for j, cell in enumerate(row, start=1):
            try:
                rec.append(float(cell))
            except ValueError:
                raise ParseError(f"non-numeric cell {cell!r}", i, j) from None
            if not np.isfinite(rec[-1]):
                raise ParseError(f"non-finite cell {cell!r}", i, j)
        values.append(rec)
    if not values:
        raise ParseError("no data rows", 2)
    table = np.array(values)
    idx = {h: k for k, h in enumerate(header)}
    X = table[:, [idx[c] for c in preds]] if preds else np.empty((len(values), 0))
    Y = table[:, [idx[r] for r in responses]]
    names = list(preds)
    if intercept:
        X = np.hstack([np.ones((X.shape[0], 1)), X])
        names = [INTERCEPT] + names
    return RegressionData(X, Y, tuple(names))


SELECT_COLUMNS = ["subset", "k", "df", "rss", "sigma2_hat", "cp", "aic", "delta0", "delta0_inv", "selected"]


def _subset_label(data: RegressionData, subset) -> str:
    return ",".join(data.names[j] for j in subset) if subset else "-"


def select_rows(data, strategy="exhaustive", criterion="cp", sigma2_divisor="n-p"):
    ev = SubsetEvaluator(data, sigma2_divisor)
    rows = search(ev, strategy, criterion)
    return rows, best(rows, criterion)


def write_select(path, data, rows, chosen) -> None:
    lines = ["\t".join(SELECT_COLUMNS)]
    for r in rows:
        rep = r.report
        lines.append("\t".join([
            _subset_label(data, r.subset), str(r.size), fmt(rep.df), fmt(rep.rss), fmt(rep.sigma2_hat),
            fmt(rep.cp), fmt(rep.aic), fmt(rep.delta0), fmt(rep.delta0_inv), "1" if r is chosen else "0",
        ]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_cp_plot(path, data, rows) -> None:
    lines = ["k\tcp\tsubset"]
    for r in cp_plot(rows):
        lines.append(f"{r.size}\t{fmt(r.report.cp)}\t{_subset_label(data, r.subset)}")
    Path(path).write_text("\n".join(lines) + "\n")


VERIFY_COLUMNS = ["check", "identity", "lhs", "rhs", "lhs_se", "rhs_se", "diff_se", "z", "replications", "paired", "status"]


def write_verify(path, specs, reports, threshold) -> bool:
    lines = ["\t".join(VERIFY_COLUMNS)]
    ok = True
    for spec, rep in zip(specs, reports):
        if spec.replications < MIN_REPLICATIONS:
            status = "underpowered"
            ok = False
        elif rep.passed(threshold):
            status = "pass"
        else:
            status = "fail"
            ok = False
        lines.append("\t".join([
            spec.name, spec.kind, fmt(rep.lhs_mean), fmt(rep.rhs_mean), fmt(rep.lhs_se), fmt(rep.rhs_se),
            fmt(rep.diff_se), fmt(rep.z_score), str(rep.replications), "1" if rep.paired else "0", status,
        ]))
    Path(path).write_text("\n".join(lines) + "\n")
    return ok


def read_tsv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="CSV file with a header row")
    p.add_argument("--response", required=True, help="response column name")
    p.add_argument("--columns", help="comma-separated predictor columns (default: all others)")
    p.add_argument("--intercept", action=argparse.BooleanOptionalAction, default=True,
                   help="prepend a ones column counted in p (default: on)")
    p.add_argument("--strategy", choices=["exhaustive", "forward", "backward"], default="exhaustive")
    p.add_argument("--criterion", choices=list(CRITERIA), default="cp")
    p.add_argument("--sigma2-divisor", choices=["n-p", "n-p-2"], default="n-p")
    p.add_argument("--seed", type=int, default=0, help="unused by deterministic searches; recorded for reproducibility")
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lossest", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    _data_args(sub.add_parser("select", help="score submodels and mark the argmin"))
    _data_args(sub.add_parser("cp-plot", help="best Cp per subset size"))
    v = sub.add_parser("verify", help="run the Monte Carlo verification suite")
    v.add_argument("--config", help="suite file (default: built-in suite)")
    v.add_argument("--out", required=True)
    v.add_argument("--seed", type=int, help="override the suite seed")
    v.add_argument("--replications", type=int, help="override every check's replication count")
    v.add_argument("--only", help="comma-separated check names to run")
    v.add_argument("--workers", type=int, default=1)
    return parser


def _load_data(args) -> RegressionData:
    cols = [c.strip() for c in args.columns.split(",")] if args.columns else None
    return read_csv(args.input, args.response, args.intercept, cols)


def cmd_select(args) -> int:
    data = _load_data(args)
    rows, chosen = select_rows(data, args.strategy, args.criterion, args.sigma2_divisor)
    write_select(args.out, data, rows, chosen)
    print(f"selected {_subset_label(data, chosen.subset)} by {args.criterion}; {len(rows)} rows -> {args.out}")
    return EXIT_OK


def cmd_cp_plot(args) -> int:
    data = _load_data(args)
    rows, _ = select_rows(data, args.strategy, "cp", args.sigma2_divisor)
    write_cp_plot(args.out, data, rows)
    print(f"cp-plot data -> {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from None
        suite = suite_mod.load_suite(text)
    else:
        suite = suite_mod.default_suite()
    specs = suite.checks
    if args.only:
        wanted = {s.strip() for s in args.only.split(",")}
        specs = [s for s in specs if s.name in wanted]
        if not specs:
            raise ConfigError(f"no checks named {sorted(wanted)}")
    if args.replications is not None:
        specs = [suite_mod.CheckSpec(s.name, s.kind, {**s.params, "replications": str(args.replications)})
                 for s in specs]
    low = [s.name for s in specs if s.replications < MIN_REPLICATIONS]
    if low:
        msg = f"{len(low)} check(s) below {MIN_REPLICATIONS} replications: {', '.join(low)}"
        warnings.warn(msg, UnderpoweredRun, stacklevel=1)
        print(f"UnderpoweredRun: {msg}", file=sys.stderr)
    seed = suite.seed if args.seed is None else args.seed
    reports = []
    for s in specs:
        rep = suite_mod.run_check(s, seed, args.workers)
        reports.append(rep)
        print(f"{'PASS' if rep.passed(suite.z_threshold) else 'FAIL'}  {s.name:<55} z={rep.z_score:+.3f}")
    ok = write_verify(args.out, specs, reports, suite.z_threshold)
    return EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {"select": cmd_select, "cp-plot": cmd_cp_plot, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ParseError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except RankDeficient as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RANK
    except DimensionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
