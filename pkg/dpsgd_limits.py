#!/usr/bin/env python3
"""
DP-SGD Limits - Master CLI
Separation bounds, trade-off curves, adversary simulation and toy DP-SGD
runs from one entry point. Tables go to stdout (or --out) as CSV, logs go to
stderr.

Exit codes: 0 success, 1 a domain or numerical error, 2 bad arguments.
"""

import argparse
import logging
import math
import os
import sys
from dataclasses import replace

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import numpy as np

from models import bounds, tradeoff
from simulation import adversary_sim, dpsgd_toy
from utils.csv_io import write_csv

__version__ = "0.1.0"

logger = logging.getLogger("dpsgd_limits")

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'

DEFAULT_M_LIST = "1000,3000,10000,30000,100000,300000,1000000,3000000,5000000"
DEFAULT_N = 100_000_000


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )


def _int_value(text: str) -> int:
    """Integer option that also accepts exponent notation (1e6)."""
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: '{text}'")
    if not value.is_integer():
        raise argparse.ArgumentTypeError(f"not an integer: '{text}'")
    return int(value)


def _int_list(text: str) -> list:
    items = [item.strip() for item in text.split(",") if item.strip()]
    if not items:
        raise argparse.ArgumentTypeError("empty list")
    return [_int_value(item) for item in items]


def _float_list(text: str) -> list:
    items = [item.strip() for item in text.split(",") if item.strip()]
    if not items:
        raise argparse.ArgumentTypeError("empty list")
    try:
        return [float(item) for item in items]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: '{text}'")


def _sigma_value(text: str):
    """'auto' or a nonnegative real."""
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"sigma must be a number or 'auto', got '{text}'")


def _resolve_sigma(value, M: int) -> float:
    if value == "auto":
        sigma = bounds.sigma_threshold(M)
        logger.info(f"sigma=auto resolved to sigma_threshold({M}) = {sigma!r}")
        return sigma
    return float(value)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--verbose", action="store_true", help="Debug logging")


def _add_curve_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kind", required=True,
                        choices=["random", "gaussian", "epsdelta", "sub", "poissonmix"])
    parser.add_argument("--mu", type=float, help="gaussian: mu")
    parser.add_argument("--eps", type=float, help="epsdelta: epsilon")
    parser.add_argument("--delta", type=float, default=0.0, help="epsdelta: delta")
    parser.add_argument("--m", type=_int_value, help="sub/poissonmix: rounds per epoch")
    parser.add_argument("--sigma", type=_sigma_value, help="sub/poissonmix: noise multiplier or 'auto'")
    parser.add_argument("--p", type=float, help="poissonmix: mixing weight (default (1-q)^M)")
    parser.add_argument("--q", type=float, help="poissonmix: sampling rate for the default p (default 1/M)")


def _require(parser: argparse.ArgumentParser, opts, *names: str) -> None:
    missing = [f"--{name}" for name in names if getattr(opts, name) is None]
    if missing:
        parser.error(f"--kind {opts.kind} needs {', '.join(missing)}")


def _build_curve(parser: argparse.ArgumentParser, opts) -> tradeoff.TradeoffCurve:
    if opts.kind == "random":
        return tradeoff.random_guess()
    if opts.kind == "gaussian":
        _require(parser, opts, "mu")
        return tradeoff.gaussian(opts.mu)
    if opts.kind == "epsdelta":
        _require(parser, opts, "eps")
        return tradeoff.eps_delta(opts.eps, opts.delta)

    _require(parser, opts, "m", "sigma")
    base = tradeoff.sub_shuffled(opts.m, _resolve_sigma(opts.sigma, opts.m))
    if opts.kind == "sub":
        return base

    p = opts.p
    if p is None:
        q = opts.q if opts.q is not None else 1.0 / opts.m
        p = bounds.poisson_mixing_weight(q, opts.m)
        logger.info(f"Mixing weight p=(1-q)^M={p!r} (q={q!r})")
    return tradeoff.poisson_mixture(base, p)


def cmd_bounds(args=None):
    parser = argparse.ArgumentParser(
        prog="dpsgd_limits.py bounds",
        description="Minimum-epsilon table for one epoch at delta = 1/N (or --delta)",
    )
    parser.add_argument("--m-list", type=_int_list, default=_int_list(DEFAULT_M_LIST),
                        help="Comma-separated rounds per epoch")
    parser.add_argument("--n", type=_int_value, default=DEFAULT_N, help="Dataset size (delta = 1/N)")
    parser.add_argument("--delta", type=float, help="Override delta (default 1/N)")
    parser.add_argument("--rounded", action="store_true", help="Round to the published precision")
    parser.add_argument("--out", help="CSV path (default stdout)")
    _add_common(parser)

    opts = parser.parse_args(args)
    _setup_logging(opts.verbose)
    logger.info(f"bounds: M={opts.m_list} N={opts.n} delta={opts.delta} rounded={opts.rounded}")

    table = bounds.bounds_frame(bounds.bounds_table(opts.m_list, opts.n, opts.delta))
    if opts.rounded:
        table = bounds.round_for_display(table)
    write_csv(table, "bounds", opts.out)


def cmd_curve(args=None):
    parser = argparse.ArgumentParser(
        prog="dpsgd_limits.py curve",
        description="Sample a trade-off curve on an evenly spaced alpha grid",
    )
    _add_curve_options(parser)
    parser.add_argument("--points", type=_int_value, default=1001)
    parser.add_argument("--out", help="CSV path (default stdout)")
    _add_common(parser)

    opts = parser.parse_args(args)
    _setup_logging(opts.verbose)

    curve = _build_curve(parser, opts)
    logger.info(f"curve: {curve.describe()} points={opts.points}")
    write_csv(tradeoff.sample_curve(curve, opts.points), "curve", opts.out)


def cmd_separation(args=None):
    parser = argparse.ArgumentParser(
        prog="dpsgd_limits.py separation",
        description="Global separation of a trade-off curve",
    )
    _add_curve_options(parser)
    parser.add_argument("--method", default="auto", choices=["auto", "fixed_point", "maximization"])
    _add_common(parser)

    opts = parser.parse_args(args)
    _setup_logging(opts.verbose)

    curve = _build_curve(parser, opts)
    logger.info(f"separation: {curve.describe()} method={opts.method}")
    result = tradeoff.global_separation(curve, method=opts.method)

    print(f"kappa={float(result.kappa)!r}")
    print(f"alpha={float(result.attaining_alpha)!r}")
    print(f"method={result.method}")


def cmd_simulate(args=None):
    parser = argparse.ArgumentParser(
        prog="dpsgd_limits.py simulate",
        description="Monte Carlo trade-off points of the max or likelihood-ratio test",
    )
    parser.add_argument("--scheme", required=True, choices=["shuffled", "poisson"])
    parser.add_argument("--m", type=_int_value, required=True)
    parser.add_argument("--sigma", type=_sigma_value, required=True)
    parser.add_argument("--q", type=float, help="Poisson sampling rate (default 1/M)")
    parser.add_argument("--test", default="max", choices=["max", "np"])
    parser.add_argument("--trials", type=_int_value, default=100_000)
    parser.add_argument("--thresholds", type=_int_value, default=adversary_sim.DEFAULT_THRESHOLD_COUNT,
                        help="Number of quantile thresholds")
    parser.add_argument("--seed", type=_int_value, default=0)
    parser.add_argument("--threads", type=_int_value, default=1)
    parser.add_argument("--out", help="CSV path (default stdout)")
    _add_common(parser)

    opts = parser.parse_args(args)
    _setup_logging(opts.verbose)

    sigma = _resolve_sigma(opts.sigma, opts.m)
    q = None
    if opts.scheme == "poisson":
        q = opts.q if opts.q is not None else 1.0 / opts.m
    model = adversary_sim.ObservationModel(scheme=opts.scheme, M=opts.m, sigma=sigma, q=q)
    logger.info(
        f"simulate: scheme={opts.scheme} M={opts.m} sigma={sigma!r} q={q} test={opts.test} "
        f"trials={opts.trials} thresholds={opts.thresholds} seed={opts.seed} threads={opts.threads}"
    )

    h0_stats, h1_stats = adversary_sim.simulate_statistics(
        model, opts.test, opts.trials, opts.seed, opts.threads
    )
    levels = adversary_sim.default_thresholds(h0_stats, h1_stats, opts.thresholds)
    points = adversary_sim.tradeoff_points(h0_stats, h1_stats, levels)
    logger.info(f"Empirical separation: {adversary_sim.estimate_separation(points):.6f}")

    write_csv(adversary_sim.points_frame(points), "tradeoff", opts.out)


def cmd_train_toy(args=None):
    parser = argparse.ArgumentParser(
        prog="dpsgd_limits.py train-toy",
        description="One epoch of DP-SGD on the synthetic two-blob task",
    )
    parser.add_argument("--sampler", default="shuffle", choices=["shuffle", "poisson"])
    parser.add_argument("--batch", type=_int_value, default=64)
    parser.add_argument("--sigma", type=_sigma_value, default="auto")
    parser.add_argument("--clip", type=float, default=1.0)
    parser.add_argument("--lr", type=float, default=0.5)
    parser.add_argument("--n", type=_int_value, default=dpsgd_toy.DEFAULT_N)
    parser.add_argument("--d", type=_int_value, default=dpsgd_toy.DEFAULT_DIM)
    parser.add_argument("--separation", type=float, default=dpsgd_toy.DEFAULT_SEPARATION,
                        help="Distance between the blob centres")
    parser.add_argument("--ghost", action="store_true", help="Zero out the target record")
    parser.add_argument("--seed", type=_int_value, default=0)
    parser.add_argument("--out", help="Run log CSV path (default stdout)")
    parser.add_argument("--metrics-out", help="Metrics CSV path (default stdout, after the run log)")
    parser.add_argument("--plan-out", help="Debug dump of the private run's batch plan as CSV")
    _add_common(parser)

    opts = parser.parse_args(args)
    _setup_logging(opts.verbose)

    dataset = dpsgd_toy.make_synthetic_dataset(opts.n, opts.d, opts.separation, opts.seed)
    config = dpsgd_toy.TrainConfig(
        batch_size=opts.batch,
        clip=opts.clip,
        sigma=0.0,
        learning_rate=opts.lr,
        sampler=opts.sampler,
        seed=opts.seed,
        ghost=opts.ghost,
    )
    n_train = dpsgd_toy.train_size(dataset.n, config.holdout)
    M = config.rounds(n_train)
    config = replace(config, sigma=_resolve_sigma(opts.sigma, M))
    logger.info(
        f"train-toy: sampler={config.sampler} n={dataset.n} d={dataset.d} b={config.batch_size} "
        f"M={M} sigma={config.sigma!r} C={config.clip} lr={config.learning_rate} "
        f"ghost={config.ghost} seed={config.seed}"
    )

    clean = dpsgd_toy.train(dataset, replace(config, sigma=0.0))
    private = dpsgd_toy.train(dataset, config)

    write_csv(dpsgd_toy.run_log_frame(private.records), "run_log", opts.out)
    metrics = dpsgd_toy.metrics_frame(clean.accuracy, private.accuracy, config.sigma, M, config.clip)
    if opts.metrics_out is None and opts.out is None:
        # Both tables share stdout, separated by a blank line
        print()
    write_csv(metrics, "metrics", opts.metrics_out)
    if opts.plan_out:
        write_csv(private.plan.to_frame(), "batch_plan", opts.plan_out)
        logger.info(f"Batch plan written to {opts.plan_out}")
    logger.info(f"✅ accuracy clean={clean.accuracy:.4f} dp={private.accuracy:.4f}")


def cmd_mugdp(args=None):
    parser = argparse.ArgumentParser(
        prog="dpsgd_limits.py mugdp",
        description="Asymptotic mu-GDP parameter, its separation and the tail bounds",
    )
    parser.add_argument("--m", type=_int_value, help="Rounds per epoch")
    parser.add_argument("--e", type=float, default=1.0, help="Epoch budget")
    parser.add_argument("--sigma", type=_sigma_value, help="Noise multiplier or 'auto'")
    parser.add_argument("--tail", action="store_true", help="Also print the tail lower bound")
    parser.add_argument("--instantiation", action="store_true",
                        help="Also print the explicit bound at sigma = s/sqrt(ln M)")
    parser.add_argument("--s", type=_float_list, help="Scale(s) s of sigma = s/sqrt(ln M)")
    parser.add_argument("--sweep-m", action="store_true", help="Write the sweep over M as CSV")
    parser.add_argument("--m-min", type=_int_value, default=10)
    parser.add_argument("--m-max", type=_int_value, default=10_000_000)
    parser.add_argument("--points", type=_int_value, default=25, help="Log-spaced values of M")
    parser.add_argument("--out", help="Sweep CSV path (default stdout)")
    _add_common(parser)

    opts = parser.parse_args(args)
    _setup_logging(opts.verbose)

    if opts.sweep_m:
        s_values = opts.s or [0.5, 1.0 / math.sqrt(2.0)]
        if opts.m_min < 2 or opts.m_max < opts.m_min or opts.points < 1:
            parser.error(
                f"sweep needs 2 <= m-min <= m-max and points >= 1, got "
                f"{opts.m_min}, {opts.m_max}, {opts.points}"
            )
        M_values = np.unique(np.round(np.geomspace(opts.m_min, opts.m_max, opts.points)).astype(np.int64))
        logger.info(f"mugdp sweep: s={s_values} M in [{opts.m_min}, {opts.m_max}] ({len(M_values)} values) E={opts.e}")
        write_csv(bounds.appendix_f_sweep(M_values, s_values, opts.e), "sweep", opts.out)
        return

    if opts.m is None:
        parser.error("needs --m (or --sweep-m)")
    if opts.instantiation and not opts.s:
        parser.error("--instantiation needs --s")

    if opts.sigma is None and opts.s:
        sigma = opts.s[0] / math.sqrt(math.log(opts.m))
    elif opts.sigma is None:
        parser.error("needs --sigma (or --s)")
    else:
        sigma = _resolve_sigma(opts.sigma, opts.m)
    logger.info(f"mugdp: M={opts.m} E={opts.e} sigma={sigma!r}")

    mu = bounds.mu_gdp_asymptotic(opts.m, opts.e, sigma)
    print(f"mu={float(mu)!r}")
    print(f"kappa_mugdp={float(bounds.gaussian_separation(mu))!r}")
    if opts.tail:
        print(f"tail_lower={float(bounds.sep_tail_lower(mu))!r}")
    if opts.instantiation:
        print(f"explicit_bound={float(bounds.appendix_f_instantiation(opts.m, opts.s[0]))!r}")


def cmd_sigma_table(args=None):
    parser = argparse.ArgumentParser(
        prog="dpsgd_limits.py sigma-table",
        description="sigma_threshold(floor(N / batch)) for a reference training set",
    )
    parser.add_argument("--dataset", required=True, choices=sorted(bounds.REFERENCE_DATASETS))
    parser.add_argument("--batch", type=_int_list, default=[128, 256, 512])
    parser.add_argument("--out", help="CSV path (default stdout)")
    _add_common(parser)

    opts = parser.parse_args(args)
    _setup_logging(opts.verbose)
    logger.info(f"sigma-table: dataset={opts.dataset} N={bounds.REFERENCE_DATASETS[opts.dataset]} batch={opts.batch}")

    write_csv(bounds.experiment_sigma_column(opts.dataset, opts.batch), "sigma_table", opts.out)


COMMANDS = {
    "bounds": cmd_bounds,
    "curve": cmd_curve,
    "separation": cmd_separation,
    "simulate": cmd_simulate,
    "train-toy": cmd_train_toy,
    "mugdp": cmd_mugdp,
    "sigma-table": cmd_sigma_table,
}


def print_usage(stream=None):
    stream = stream or sys.stdout
    print("usage: dpsgd_limits.py [--version] <command> [options]", file=stream)
    print(file=stream)
    print("Commands:", file=stream)
    print("  bounds       - Minimum-epsilon table (kappa and eps_min per M)", file=stream)
    print("  curve        - Sample a trade-off curve as CSV", file=stream)
    print("  separation   - Global separation kappa of a curve", file=stream)
    print("  simulate     - Monte Carlo trade-off points of the adversary's test", file=stream)
    print("  train-toy    - One epoch of toy DP-SGD, run log and accuracies", file=stream)
    print("  mugdp        - Asymptotic mu-GDP parameter and tail bounds", file=stream)
    print("  sigma-table  - Noise threshold per batch size of a reference dataset", file=stream)
    print(file=stream)
    print("Run 'dpsgd_limits.py <command> --help' for the options of a command.", file=stream)


def run(argv=None) -> int:
    """Dispatch one command; returns the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)

    if not argv:
        print_usage(sys.stderr)
        return 2
    if argv[0] in ("-h", "--help", "help"):
        print_usage()
        return 0
    if argv[0] == "--version":
        print(f"dpsgd_limits {__version__}")
        return 0

    command = argv[0].lower()
    if command not in COMMANDS:
        print(f"Unknown command: {command}", file=sys.stderr)
        print_usage(sys.stderr)
        return 2

    try:
        COMMANDS[command](argv[1:])
    except SystemExit as exc:
        # argparse exits 2 on bad options and 0 after --help
        return exc.code if isinstance(exc.code, int) else 2
    except (ValueError, ArithmeticError) as exc:
        logger.error(f"❌ {command} failed: {exc}")
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
