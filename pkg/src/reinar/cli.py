"""Command-line front end.

Verbs: ``simulate``, ``estimate``, ``calibrate``, ``fit-eval``, ``pipeline``.
Exit codes: 0 success (non-convergence is flagged in the output, not an
error), 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings

from . import io as rio
from .cluster import baseline_states, renes_states, search_C, search_dp
from .configs import COMBO_NAMES
from .experiment import DEFAULT_DP_RANGE, DEFAULT_N, ExperimentConfig, reference_config, run_pipeline
from .likelihood import cml_fit, predict, rms
from .model import InfeasibleParameters
from .preestimate import build_features
from .sampling import simulate

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    return [int(v) if v.is_integer() else v for v in vals]


def load_config(args) -> ExperimentConfig:
    """Config from ``--config`` (experiment or bare model document) or ``--combo``."""
    overrides = {}
    seeds = getattr(args, "seed", None)
    if seeds is not None:
        overrides["seeds"] = [seeds]
    if args.order_rule is not None:
        overrides["order_rule"] = args.order_rule
    if args.config and args.combo:
        raise UsageError("give either --config or --combo, not both")
    if args.combo:
        cfg = reference_config(args.combo, args.variant or "max", **overrides)
    elif args.config:
        doc = rio.read_json(args.config)
        if "model" not in doc:
            doc = {"model": doc}
        cfg = ExperimentConfig.from_dict(doc)
        if args.variant is not None and args.variant != cfg.model.variant:
            raise UsageError(f"--variant {args.variant} conflicts with the config's variant {cfg.model.variant}")
        for k, v in overrides.items():
            setattr(cfg, k, v)
    else:
        raise UsageError("one of --config or --combo is required")
    return cfg


def cmd_simulate(args) -> int:
    cfg = load_config(args)
    if cfg.env is None:
        raise UsageError("simulation needs p_vec and p_mat in the config")
    n = args.N if args.N is not None else (cfg.N or DEFAULT_N)
    sim = simulate(cfg.model, cfg.env, n, int(cfg.seeds[0]), cfg.order_rule)
    rio.write_sim(args.out, sim)
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = load_config(args)
    d = rio.read_series(args.series)
    x = d["x"]
    seed = int(cfg.seeds[0])
    out = rio.ensure_dir(args.out)
    if args.method == "kmeans":
        z_hat = baseline_states(x, cfg.model.r, seed=seed, n_init=cfg.kmeans_n_init)
    else:
        pre = build_features(x, cfg.renes, cfg.p_max)
        rio.write_preestimates(out / "preestimates.csv", pre)
        z_hat = renes_states(x, cfg.renes, cfg.model.r, cfg.p_max, seed=seed, n_init=cfg.kmeans_n_init)
    rio.write_states(out / "states.csv", z_hat)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = load_config(args)
    d = rio.read_series(args.series)
    if "z" not in d and "P" not in d:
        raise rio.DataError(f"{args.series}: calibration needs a truth column z and/or P")
    out = rio.ensure_dir(args.out)
    renes = cfg.renes
    if "P" in d:
        lo, hi = args.dp_range or cfg.dp_range
        res = search_dp(d["x"], d["P"], range(lo, hi + 1), cfg.p_max)
        rio.write_dp_table(out / "dp_table.csv", res)
        renes = renes.with_dp(res.best_dp)
    if "z" in d:
        default = list(range(1, 11))
        grid = [args.C_m or default, args.C_a or default, args.C_p or default]
        if cfg.C_grid is not None and not (args.C_m or args.C_a or args.C_p):
            grid = cfg.C_grid
        res = search_C(d["x"], d["z"], renes, cfg.model.r, cfg.p_max, grid=grid,
                       seed=int(cfg.seeds[0]), n_init=cfg.kmeans_n_init)
        rio.write_C_table(out / "C_table.csv", res)
        renes = renes.with_C(*res.best_C)
    rio.write_text(out / "renes.json", rio.dumps_json(renes.to_dict()))
    return EXIT_OK


def cmd_fit_eval(args) -> int:
    cfg = load_config(args)
    x = rio.read_series(args.series)["x"]
    z_hat = rio.read_states(args.states)
    if z_hat.shape != x.shape:
        raise rio.DataError(f"{args.states}: {z_hat.shape[0]} states for {x.shape[0]} observations")
    if z_hat.max() > cfg.model.r:
        raise rio.DataError(f"{args.states}: state {z_hat.max()} exceeds r={cfg.model.r}")
    out = rio.ensure_dir(args.out)
    fit = cml_fit(x, z_hat, cfg.model.variant, cfg.model.P, cfg.order_rule, seed=int(cfg.seeds[0]),
                  restarts=cfg.restarts, maxfev=cfg.maxfev)
    pred = predict(x, z_hat, fit.params, cfg.order_rule)
    fit.rms = rms(x, pred)
    rio.write_text(out / "fit.json", rio.dumps_json(rio.fit_to_dict(fit)))
    rio.write_predictions(out / "predictions.csv", x, z_hat, pred)
    if not fit.converged:
        print("warning: CML fit did not converge; best restart reported", file=sys.stderr)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = load_config(args)
    if args.series is not None:
        cfg.series = args.series
    if args.no_fit:
        cfg.fit = False
    report = run_pipeline(cfg)
    text = report.to_json()
    if args.out == "-":
        sys.stdout.write(text)
    else:
        rio.write_text(args.out, text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="reinar", description="Random-environment geometric INAR experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def common(sp, series=False):
        sp.add_argument("--config", help="experiment or model JSON document")
        sp.add_argument("--combo", choices=COMBO_NAMES, help="use a bundled reference parameter set")
        sp.add_argument("--seed", type=int, help="overrides the config's seeds with a single seed")
        sp.add_argument("--variant", choices=("max", "one"))
        sp.add_argument("--order-rule", dest="order_rule", choices=("min", "literal_max"))
        if series:
            sp.add_argument("--series", required=True, help="series CSV with columns t,x[,z[,P]]")

    sp = sub.add_parser("simulate", help="simulate a series to CSV")
    common(sp)
    sp.add_argument("--N", type=int, help=f"series length (default {DEFAULT_N})")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", help="estimate environment states")
    common(sp, series=True)
    sp.add_argument("--method", choices=("renes", "kmeans"), default="renes")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("calibrate", help="search d_p and coordinate weights against truth columns")
    common(sp, series=True)
    sp.add_argument("--dp-range", dest="dp_range", type=int, nargs=2, metavar=("LO", "HI"),
                    help=f"inclusive d_p range (default {DEFAULT_DP_RANGE[0]} {DEFAULT_DP_RANGE[1]})")
    sp.add_argument("--C-m", dest="C_m", type=_float_list, help="comma-separated candidates")
    sp.add_argument("--C-a", dest="C_a", type=_float_list)
    sp.add_argument("--C-p", dest="C_p", type=_float_list)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("fit-eval", help="CML fit given states, predictions and RMS")
    common(sp, series=True)
    sp.add_argument("--states", required=True, help="states CSV with column z_hat")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_fit_eval)

    sp = sub.add_parser("pipeline", help="run the seeded experiment and write a report")
    common(sp)
    sp.add_argument("--series", help="run on an observed series instead of simulating")
    sp.add_argument("--no-fit", dest="no_fit", action="store_true", help="skip CML fits")
    sp.add_argument("--out", default="-", help="report path ('-' for stdout)")
    sp.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", RuntimeWarning)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"reinar {args.verb}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (rio.DataError, InfeasibleParameters, ValueError, OSError, KeyError) as exc:
        print(f"reinar {args.verb}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
