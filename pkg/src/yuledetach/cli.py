"""Command-line interface.

Every subcommand prints either one JSON document or a TSV table (header
plus one row per record) on stdout. Floats are written with 10 significant
digits and infinite moments as the string ``inf``.

Exit status is 0 on success, 2 on usage errors and 3 when the input or
parameters are rejected or a fit fails.
"""

from __future__ import annotations

import argparse
import contextlib
import itertools
import json
import math
import sys
from typing import Sequence

import numpy as np

from . import estimation, model, simulator
from .errors import YuleError
from .model import ModelParams

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN = 0, 2, 3


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".10g")
    if v is None:
        return ""
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return _fmt(v)
        return float(format(v, ".10g"))
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


def _emit(out, fmt: str, records: list[dict], meta: dict | None = None) -> None:
    if fmt == "json":
        doc = dict(meta or {})
        doc["records"] = records
        out.write(json.dumps(_json_value(doc), indent=2) + "\n")
        return
    sep = "," if fmt == "csv" else "\t"
    if not records:
        return
    keys = list(records[0])
    out.write(sep.join(keys) + "\n")
    for r in records:
        out.write(sep.join(_fmt(r[k]) for k in keys) + "\n")


def _emit_object(out, fmt: str, obj: dict) -> None:
    if fmt == "json":
        out.write(json.dumps(_json_value(obj), indent=2) + "\n")
    else:
        _emit(out, fmt, [obj])


def _param_grid(args) -> list[ModelParams]:
    betas = args.beta
    mus = args.mu if args.mu is not None else [0.0]
    grid = []
    if args.delta is not None:
        for b, d, m in itertools.product(betas, args.delta, mus):
            grid.append(ModelParams.from_delta(b, d, m))
    else:
        for b, lam, m in itertools.product(betas, args.lam, mus):
            grid.append(ModelParams(b, lam, m))
    return grid


def _single_params(args) -> ModelParams:
    grid = _param_grid(args)
    if len(grid) != 1:
        raise argparse.ArgumentTypeError("this subcommand takes a single parameter set")
    return grid[0]


def _param_columns(p: ModelParams) -> dict:
    return {"beta": p.beta, "lambda": p.lam, "mu": p.mu}


# ---------------------------------------------------------------------------
# subcommands


def _cmd_pmf(args, out):
    grid = _param_grid(args)
    n = np.arange(args.n_max + 1)
    records = []
    for p in grid:
        probs = model.pmf(n, p)
        for k, v in zip(n, probs):
            row = _param_columns(p) if len(grid) > 1 else {}
            row.update({"n": int(k), "pmf": float(v)})
            records.append(row)
    meta = {"command": "pmf"}
    if len(grid) == 1:
        meta.update(_param_columns(grid[0]))
        meta["regime"] = grid[0].regime.value
        meta["tail_mass"] = model.tail_mass(args.n_max, grid[0])
    _emit(out, args.format, records, meta)


def _cmd_moments(args, out):
    records = []
    for p in _param_grid(args):
        row = _param_columns(p)
        row.update({"regime": p.regime.value, "mean": model.mean(p), "variance": model.variance(p),
                    "p_zero": model.pmf_zero(p)})
        records.append(row)
    _emit(out, args.format, records, {"command": "moments"})


def _cmd_pgf(args, out):
    grid = _param_grid(args)
    records = []
    for p in grid:
        for u in args.u:
            row = _param_columns(p) if len(grid) > 1 else {}
            row.update({"u": u, "pgf": model.pgf(u, p)})
            records.append(row)
    _emit(out, args.format, records, {"command": "pgf"})


def _cmd_simulate(args, out):
    p = _single_params(args)
    cfg = simulator.SimConfig(p, max_time=args.t_max, max_pages=args.max_pages, seed=args.seed,
                              worker_count=args.workers, max_events=args.max_events)
    snaps = simulator.simulate_replicates(cfg, args.replicates)
    records = []
    for i, snap in enumerate(snaps):
        if args.output:
            base = args.output if args.replicates == 1 else f"{args.output}.{i}"
            simulator.write_event_log(snap, f"{base}.events.csv")
            simulator.write_snapshot_csv(snap, f"{base}.snapshot.csv")
        records.append({
            "replicate": i, "time": snap.time, "pages": snap.page_count,
            "events": len(snap.event_time), "absorbed": int(np.sum(snap.inlinks == 0)),
            "at_least_10": int(np.sum(snap.inlinks >= 10)),
            "max_inlinks": int(snap.inlinks.max()),
        })
    _emit(out, args.format, records, {"command": "simulate", **_param_columns(p), "seed": args.seed})


def _cmd_sample(args, out):
    p = _single_params(args)
    draws = simulator.sample_limit_degree(p, args.count, seed=args.seed, workers=args.workers)
    overflow = int(np.sum(draws == simulator.OVERFLOW))
    kept = draws[draws != simulator.OVERFLOW]
    n, c = np.unique(kept, return_counts=True)
    records = [{"n": int(a), "count": int(b)} for a, b in zip(n, c)]
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            _emit(fh, args.format, records, {"command": "sample", "overflow": overflow})
        return
    _emit(out, args.format, records, {"command": "sample", **_param_columns(p),
                                      "count": args.count, "seed": args.seed, "overflow": overflow})


def _cmd_fit(args, out):
    hist = estimation.DegreeHistogram.from_csv(args.input)
    if args.method == "regression":
        if args.n_min is None:
            raise argparse.ArgumentTypeError("--n-min is required for --method regression")
        res = estimation.tail_regression(hist, args.n_min, args.n_max, lambda_scale=args.lambda_scale)
    else:
        res = estimation.fit_mle(hist, include_zero=args.include_zero, lambda_scale=args.lambda_scale)
    _emit_object(out, args.format, res.to_dict())


def _cmd_tail(args, out):
    grid = _param_grid(args)
    records = []
    meta = {"command": "tail"}
    for p in grid:
        if p.delta <= 0:
            raise model.DomainError("tail asymptotics need lambda > mu")
        s = p.beta / p.delta
        x = p.mu / p.delta
        intercept = estimation._intercept_model(s, x)
        ns = np.unique(np.geomspace(max(args.n_min or 1, 1), args.n_max, args.points).astype(np.int64))
        probs = model.pmf(ns, p)
        for k, v in zip(ns, probs):
            row = _param_columns(p) if len(grid) > 1 else {}
            dom = model.tail_dominant(int(k), p.beta, p.delta, p.mu)
            row.update({"n": int(k), "log_n": math.log(k), "pmf": float(v),
                        "log_pmf": math.log(v) if v > 0 else -math.inf,
                        "dominant": dom, "line": -(1.0 + s) * math.log(k) + intercept})
            records.append(row)
        if len(grid) == 1:
            meta.update({"slope": -(1.0 + s), "intercept": intercept, **_param_columns(p)})
    _emit(out, args.format, records, meta)


def _cmd_compare(args, out):
    grid = _param_grid(args)
    n = np.arange(1, args.n_max + 1)
    records = []
    for p in grid:
        if p.delta <= 0:
            raise model.DomainError("compare-yule needs lambda > mu")
        gen = model.pmf(n, p)
        yule = model.yule_simon_pmf(n, p.beta, p.delta)
        for k, g, y in zip(n, gen, yule):
            row = _param_columns(p) if len(grid) > 1 else {}
            row.update({"n": int(k), "pmf": float(g), "yule_pmf": float(y),
                        "ratio": model.tail_ratio(int(k), p.beta, p.delta, p.mu),
                        "ratio_asymptotic": model.tail_ratio_asymptotic(int(k), p.beta, p.delta, p.mu)})
            records.append(row)
    _emit(out, args.format, records, {"command": "compare-yule"})


def _cmd_gof(args, out):
    p = _single_params(args)
    hist = estimation.DegreeHistogram.from_csv(args.input)
    rep = estimation.goodness_of_fit(hist, p, include_zero=args.include_zero)
    obj = rep.to_dict()
    obj.update(_param_columns(p))
    _emit_object(out, args.format, obj)


# ---------------------------------------------------------------------------
# parser


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {v}")
    return v


def _real(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text!r}")
    return v


def _add_params(p, grid: bool = True):
    nargs = "+" if grid else None

    def wrap(v):
        return v if grid else [v]

    p.add_argument("--beta", type=_real, nargs=nargs, required=True, help="page rate constant")
    rates = p.add_mutually_exclusive_group(required=True)
    rates.add_argument("--lambda", dest="lam", type=_real, nargs=nargs, help="in-link birth rate")
    rates.add_argument("--delta", type=_real, nargs=nargs, help="lambda - mu, instead of --lambda")
    p.add_argument("--mu", type=_real, nargs=nargs, default=None, help="in-link death rate (default 0)")
    p.set_defaults(_wrap=wrap)


def _add_format(p, choices=("json", "tsv")):
    p.add_argument("--format", choices=choices, default="tsv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="yuledetach",
        description="Generalized Yule model with in-link detachment.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("pmf", help="limit pmf P(N = n) for n = 0..n-max")
    _add_params(p)
    p.add_argument("--n-max", type=_positive_int, required=True)
    _add_format(p)
    p.set_defaults(func=_cmd_pmf)

    p = sub.add_parser("moments", help="mean, variance and P(N = 0)")
    _add_params(p)
    _add_format(p)
    p.set_defaults(func=_cmd_moments)

    p = sub.add_parser("pgf", help="probability generating function")
    _add_params(p)
    p.add_argument("--u", type=_real, nargs="+", required=True)
    _add_format(p)
    p.set_defaults(func=_cmd_pgf)

    p = sub.add_parser("simulate", help="simulate the network, write event log and snapshot")
    _add_params(p, grid=False)
    stop = p.add_mutually_exclusive_group(required=True)
    stop.add_argument("--t-max", type=_real)
    stop.add_argument("--max-pages", type=_positive_int)
    p.add_argument("--replicates", type=_positive_int, default=1)
    p.add_argument("--max-events", type=_positive_int, default=10_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--output", help="file prefix for <prefix>.events.csv and <prefix>.snapshot.csv")
    _add_format(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sample", help="draw from the limit law by simulation")
    _add_params(p, grid=False)
    p.add_argument("--count", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--output", help="write the histogram here instead of stdout")
    _add_format(p, ("json", "tsv", "csv"))
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("fit", help="fit a histogram CSV (header n,count)")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=("regression", "mle"), default="mle")
    p.add_argument("--n-min", type=_positive_int)
    p.add_argument("--n-max", type=_positive_int)
    p.add_argument("--include-zero", action="store_true")
    p.add_argument("--lambda-scale", type=_real, default=1.0)
    _add_format(p)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("tail", help="log-log tail and its asymptotic regression line")
    _add_params(p)
    p.add_argument("--n-min", type=_positive_int, default=1)
    p.add_argument("--n-max", type=_positive_int, required=True)
    p.add_argument("--points", type=_positive_int, default=50)
    _add_format(p)
    p.set_defaults(func=_cmd_tail)

    p = sub.add_parser("compare-yule", help="ratio of the pmf to the Yule law at (beta, delta)")
    _add_params(p)
    p.add_argument("--n-max", type=_positive_int, required=True)
    _add_format(p)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("gof", help="chi-square goodness of fit of a histogram CSV")
    _add_params(p, grid=False)
    p.add_argument("--input", required=True)
    p.add_argument("--include-zero", action="store_true")
    _add_format(p)
    p.set_defaults(func=_cmd_gof)
    return parser


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        # argparse writes usage and help to the process streams
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for name in ("beta", "lam", "delta", "mu"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(args, name, args._wrap(v))
    if getattr(args, "n_max", None) is not None and args.command in ("tail", "compare-yule") \
            and args.n_max < 1:
        parser.print_usage(stderr)
        stderr.write(f"{parser.prog}: error: --n-max must be >= 1\n")
        return EXIT_USAGE
    try:
        args.func(args, stdout)
    except argparse.ArgumentTypeError as exc:
        parser.print_usage(stderr)
        stderr.write(f"{parser.prog}: error: {exc}\n")
        return EXIT_USAGE
    except YuleError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_DOMAIN
    except OSError as exc:
        stderr.write(f"error: cannot write output: {exc}\n")
        return EXIT_DOMAIN
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
