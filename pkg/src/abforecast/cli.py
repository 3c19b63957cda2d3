"""Command-line interface.

Subcommands: ``fit``, ``predict``, ``days-to``, ``simulate``, ``benchmark``.
Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
The default seed is read from ``ABFORECAST_SEED`` (0 when unset).
"""

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager

from .benchmark import DEFAULT_TAUS, run_model_suite, run_zipf_suite, write_results
from .calibrate import FitConfig, FitError, FittedParams, fit_curve, fit_mml
from .dataio import (
    ActivityPanel,
    DataError,
    read_table,
    stats_from_panel,
    write_aggregate_csv,
    write_long_csv,
)
from .forecast import forecast_report
from .horizon import AUTO, HorizonConfig, SaturationError, days_to_report
from .posterior import HyperParams, build_posterior, posterior_from_counts
from .simulate import ZipfConfig, simulate_be, simulate_nb, simulate_tg, simulate_zipf
from .specfun import DomainError

__all__ = ["main", "build_parser", "UsageError"]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
SEED_ENV = "ABFORECAST_SEED"


class UsageError(ValueError):
    pass


def _default_seed():
    raw = os.environ.get(SEED_ENV, "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _d_up(text):
    if text.lower() == AUTO:
        return AUTO
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("d-up must be a positive integer or 'auto'")
    return value


def _csv_list(kind):
    def parse(text):
        try:
            return [kind(x) for x in text.split(",") if x.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list {text!r}") from None
    return parse


def build_parser():
    p = argparse.ArgumentParser(prog="abforecast", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="estimate hyperparameters from pilot data")
    f.add_argument("input")
    f.add_argument("--model", required=True, type=str.lower, choices=["be", "tg", "nb"])
    f.add_argument("--fit", type=str.lower, choices=["mml", "curve"],
                   help="default: mml for per-user input, curve for aggregate input")
    f.add_argument("--d0", type=int, default=1, help="curve-fit anchor day")
    f.add_argument("--population", type=int, default=32)
    f.add_argument("--max-gens", type=int, default=300)
    f.add_argument("--seed", type=int)
    f.add_argument("--output")

    pr = sub.add_parser("predict", help="forecast new users and total triggers")
    pr.add_argument("input")
    pr.add_argument("--params", required=True)
    pr.add_argument("--d1", type=int, default=14)
    pr.add_argument("--level", type=float, default=0.95)
    pr.add_argument("--pilot-days", type=int, help="use only the first days of the input")
    pr.add_argument("--output")

    d = sub.add_parser("days-to", help="days until the experiment reaches M users")
    d.add_argument("input")
    d.add_argument("--params", required=True)
    d.add_argument("--target", type=int, required=True, dest="M")
    d.add_argument("--method", default="posterior", type=str.lower,
                   choices=["posterior", "inversion"])
    d.add_argument("--draws", type=int, default=1000)
    d.add_argument("--d-up", type=_d_up, default=AUTO)
    d.add_argument("--level", type=float, default=0.95)
    d.add_argument("--pilot-days", type=int)
    d.add_argument("--seed", type=int)
    d.add_argument("--output")

    s = sub.add_parser("simulate", help="simulate activity data as CSV")
    grp = s.add_mutually_exclusive_group(required=True)
    grp.add_argument("--model", type=str.lower, choices=["be", "tg", "nb"])
    grp.add_argument("--zipf", action="store_true")
    s.add_argument("--alpha", type=float, default=0.5)
    s.add_argument("--c", type=float, default=30.0)
    s.add_argument("--beta", type=float, default=2.0)
    s.add_argument("--r", type=float, default=1.0)
    s.add_argument("--tau", type=float, default=0.8)
    s.add_argument("--n-users", type=int, default=100_000)
    s.add_argument("--days", type=int, required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--output")

    b = sub.add_parser("benchmark", help="replicated accuracy benchmark")
    b.add_argument("--suite", default="zipf", choices=["zipf", "model"])
    b.add_argument("--taus", type=_csv_list(float), default=list(DEFAULT_TAUS))
    b.add_argument("--reps", type=int, default=20)
    b.add_argument("--d0", type=int, default=10)
    b.add_argument("--d1", type=int, default=50)
    b.add_argument("--methods", type=_csv_list(str.lower))
    b.add_argument("--n-users", type=int, default=100_000)
    b.add_argument("--model", type=str.lower, default="nb", choices=["be", "tg", "nb"])
    b.add_argument("--alpha", type=float, default=0.5)
    b.add_argument("--c", type=float, default=30.0)
    b.add_argument("--beta", type=float, default=2.0)
    b.add_argument("--r", type=float, default=5.0)
    b.add_argument("--fit", default="mml", type=str.lower, choices=["mml", "curve"])
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--seed", type=int)
    b.add_argument("--output")
    return p


@contextmanager
def _sink(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _emit_json(doc, path):
    with _sink(path) as out:
        out.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _load_params(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return FittedParams.from_json(fh.read())
    except (KeyError, ValueError, TypeError) as exc:
        raise DataError(f"{path}: invalid parameter file ({exc})") from None


def _load_posterior(args, params):
    data = read_table(args.input)
    if args.pilot_days is not None:
        data = data.truncate(args.pilot_days)
    model = params.model
    if isinstance(data, ActivityPanel):
        return build_posterior(stats_from_panel(data, model), params.hyper)
    totals = data.total_triggers_per_day
    T = int(totals.sum()) if totals is not None else None
    return posterior_from_counts(model, params.hyper, data.D0, data.N, T)


def cmd_fit(args):
    data = read_table(args.input)
    model = args.model.upper()
    per_user = isinstance(data, ActivityPanel)
    if args.fit is None:
        args.fit = "mml" if per_user else "curve"
    config = FitConfig(method=args.fit.upper(), d0=args.d0, seed=args.seed,
                       de_population=args.population, de_max_gens=args.max_gens)
    if args.fit == "mml":
        if not per_user:
            raise UsageError("marginal likelihood requires per-user data")
        fitted = fit_mml(stats_from_panel(data, model), config)
    else:
        series = data.to_series() if per_user else data
        fitted = fit_curve(series, model, config)
    _emit_json(fitted.to_dict(), args.output)


def cmd_predict(args):
    if args.d1 < 0:
        raise UsageError("--d1 must be nonnegative")
    if not 0.0 < args.level < 1.0:
        raise UsageError("--level must lie in (0, 1)")
    post = _load_posterior(args, _load_params(args.params))
    _emit_json(forecast_report(post, args.d1, args.level), args.output)


def cmd_days_to(args):
    if not 0.0 < args.level < 1.0:
        raise UsageError("--level must lie in (0, 1)")
    post = _load_posterior(args, _load_params(args.params))
    if args.M < post.N:
        raise UsageError(f"--target {args.M} is below the observed user count {post.N}")
    cfg = HorizonConfig(args.M, D_up=args.d_up, K=args.draws, Q=args.draws,
                        epsilon=round(1.0 - args.level, 12), seed=args.seed)
    try:
        doc = days_to_report(post, cfg, args.method, args.level)
    except SaturationError as exc:
        _emit_json({"error": "saturation", "message": str(exc), "M": args.M}, args.output)
        raise
    _emit_json(doc, args.output)


def cmd_simulate(args):
    if args.days < 1:
        raise UsageError("--days must be at least 1")
    if args.zipf:
        data = simulate_zipf(ZipfConfig(args.tau, args.n_users, args.days), seed=args.seed)
    else:
        model = args.model.upper()
        hyper = HyperParams(args.alpha, args.c, args.beta, args.r).for_model(model)
        sampler = {"BE": simulate_be, "TG": simulate_tg, "NB": simulate_nb}[model]
        data = sampler(hyper, args.days, seed=args.seed)
    with _sink(args.output) as out:
        if isinstance(data, ActivityPanel):
            write_long_csv(data, out)
        else:
            write_aggregate_csv(data, out)


def cmd_benchmark(args):
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    pool = ProcessPoolExecutor(args.workers) if args.workers > 1 else None
    map_fn = pool.map if pool else map
    try:
        if args.suite == "zipf":
            methods = args.methods or ["nb", "gt", "j1", "j4"]
            rows = run_zipf_suite(args.taus, args.reps, args.d0, args.d1, args.n_users,
                                  methods, args.seed, args.fit, map_fn)
            name = "tau"
        else:
            model = args.model.upper()
            hyper = HyperParams(args.alpha, args.c, args.beta,
                                args.r if model == "NB" else 1.0)
            methods = args.methods or ([model.lower()] if model == "TG"
                                       else [model.lower(), "gt", "j1"])
            rows = run_model_suite(model, hyper, args.reps, args.d0, args.d1,
                                   methods, args.seed, args.fit, map_fn)
            name = "model"
    finally:
        if pool:
            pool.shutdown()
    with _sink(args.output) as out:
        write_results(rows, out, name)


COMMANDS = {
    "fit": cmd_fit,
    "predict": cmd_predict,
    "days-to": cmd_days_to,
    "simulate": cmd_simulate,
    "benchmark": cmd_benchmark,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = _default_seed()
        COMMANDS[args.command](args)
    except (UsageError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FitError, SaturationError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
