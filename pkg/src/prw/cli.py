"""Command line front end: ``prw <subcommand> [flags]`` or ``python -m prw``."""

import argparse
import json
import sys
from dataclasses import replace

from .exceptions import InvalidInputError
from .harness import ExperimentConfig, ResultTable, fit_rate, run_experiment


def _ints(text):
    return [int(x) for x in text.split(",") if x]


def _floats(text):
    return [float(x) for x in text.split(",") if x]


def _common(p):
    p.add_argument("--config", help="JSON file with ExperimentConfig keys; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--n-grid", type=_ints, help="comma separated sample sizes")
    p.add_argument("--out", help="CSV path; a JSON summary is written next to it")


def _fit_flags(p):
    p.add_argument("--outer-iters", type=int)
    p.add_argument("--outer-lr", type=float)
    p.add_argument("--inner-lr", type=float)
    p.add_argument("--K", type=int, dest="K", help="Monte Carlo / grid points")
    p.add_argument("--mixture", type=int, choices=(8, 12, 25), dest="mixture_kind")
    p.add_argument("--reference-n", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prw", description="Projection robust Wasserstein experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convergence", help="IPRW / PRW between hypercube samples as n grows")
    _common(p)
    p.add_argument("--d", type=_ints, help="comma separated dimensions")
    p.add_argument("--v", type=_floats, help="comma separated half-widths")
    p.add_argument("--k", type=_ints, help="comma separated projection dimensions")
    p.add_argument("--n-proj", type=int)
    p.add_argument("--max-iter", type=int, help="RSGAN iterations")
    p.add_argument("--metrics", type=lambda s: s.split(","), help="subset of iprw,prw,w2")
    p.add_argument("--w2", action="store_true", help="also record the full W_2 distance")

    p = sub.add_parser("consistency", help="MPRW / MEPRW fit error as n grows")
    _common(p)
    _fit_flags(p)
    p.add_argument("--estimators", type=lambda s: s.split(","), help="subset of mprw,meprw")

    p = sub.add_parser("meprw-vs-mprw", help="MEPRW against MPRW as model samples grow")
    _common(p)
    _fit_flags(p)
    p.add_argument("--m-grid", type=_ints)

    p = sub.add_parser("clt", help="spread of the MPRW variance estimate")
    _common(p)
    _fit_flags(p)
    p.add_argument("--kde-points", type=int)

    p = sub.add_parser("ecs-consistency", help="MEPRW location fits of an ECS model")
    _common(p)
    _fit_flags(p)
    p.add_argument("--alpha", type=float)

    p = sub.add_parser("rate-fit", help="log-log slope of a metric against n")
    p.add_argument("--in", dest="inp", required=True, help="CSV written by an experiment")
    p.add_argument("--metric", required=True)
    p.add_argument("--params", help="restrict to one parameter tuple")

    p = sub.add_parser("selftest", help="sandwich / translation / k=d invariant suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="optional CSV of the measured values")
    return parser


_FIT_KEYS = ("outer_iters", "outer_lr", "inner_lr", "K")


def config_from_args(args) -> ExperimentConfig:
    raw = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInputError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise InvalidInputError("config file must hold a JSON object")
    raw["experiment"] = args.command
    for key in ("seed", "runs", "n_grid", "out", "n_proj", "metrics", "estimators", "m_grid",
                "kde_points", "alpha", "mixture_kind", "reference_n"):
        val = getattr(args, key, None)
        if val is not None:
            raw[key] = val
    if getattr(args, "k", None) is not None:
        raw["k"] = args.k
    if getattr(args, "d", None) is not None or getattr(args, "v", None) is not None:
        old = raw.get("dv_pairs") or [(10, 1.0)]
        ds = args.d if args.d is not None else sorted({d for d, _ in old})
        vs = args.v if args.v is not None else sorted({v for _, v in old})
        raw["dv_pairs"] = [(d, v) for d in ds for v in vs]
    config = ExperimentConfig.from_dict(raw)
    fit_over = {k: getattr(args, k) for k in _FIT_KEYS if getattr(args, k, None) is not None}
    if fit_over:
        config.fit = replace(config.fit, **fit_over)
    if getattr(args, "max_iter", None) is not None:
        config.rsgan = replace(config.rsgan, max_iter=args.max_iter)
    if getattr(args, "w2", False) and "w2" not in config.metrics:
        config.metrics = list(config.metrics) + ["w2"]
    return config


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "rate-fit":
            rate = fit_rate(ResultTable.from_csv(args.inp), args.metric, args.params)
            print(f"slope={rate.slope:.6g} intercept={rate.intercept:.6g} r2={rate.r2:.6g}")
            return 0
        if args.command == "selftest":
            from .selftest import run_selftest

            ok, results, table = run_selftest(args.seed)
            for name, passed in results:
                print(f"{'PASS' if passed else 'FAIL'} {name}")
            if args.out:
                table.to_csv(args.out)
            return 0 if ok else 1
        config = config_from_args(args)
        table = run_experiment(config)
        if config.out:
            json_path = table.write(config.out, config)
            print(f"{config.experiment}: {len(table.rows)} rows -> {config.out}, {json_path}")
        else:
            sys.stdout.write(table.to_csv())
            print(f"{config.experiment}: {len(table.rows)} rows", file=sys.stderr)
        return 0
    except (InvalidInputError, OSError) as exc:
        print(f"prw {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"prw {args.command}: experiment failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
