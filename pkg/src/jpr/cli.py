"""``jpr`` command line: fit, forecast, region, evaluate, simulate.

Exit status: 0 on success, 2 on usage or configuration errors, 1 when a
computation fails (the message names the failing operation).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .bootstrap import SCHEMES, BootstrapSpec
from .errors import ConfigError, JPRError
from .forecasters import ForecasterSpec
from .harness import SyntheticSpec, emit_report, generate_synthetic, load_config, read_series_csv, report_csv, rolling_eval, write_series_csv
from .regions import METHODS, SIDES, bootstrap_prediction_errors, build_region, write_region_csv
from .rng import RandomSource

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def default_threads() -> int:
    env = os.environ.get("JPR_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"JPR_THREADS must be a positive integer, got {env!r}") from None
        if n < 1:
            raise UsageError(f"JPR_THREADS must be a positive integer, got {env!r}")
        return n
    return os.cpu_count() or 1


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return n


def _prob(text: str) -> float:
    p = float(text)
    if not 0 < p < 1:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {text}")
    return p


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", metavar="CSV", help="series CSV with header 'value' or 't,value' (default: the default synthetic series)")
    p.add_argument("--fill-missing", action="store_true", help="impute blank/NaN values by the mean of their neighbours")


def _add_forecaster(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("forecaster")
    g.add_argument("--model", choices=("ar", "auto", "ses", "holt", "hw"), default="ar", help="point forecaster (default: ar)")
    g.add_argument("--p", type=int, default=1, help="AR order (default: 1)")
    g.add_argument("--d", type=int, default=0, help="simple differences (default: 0)")
    g.add_argument("--D", type=int, default=0, help="seasonal differences (default: 0)")
    g.add_argument("--period", type=_positive, default=None, help="seasonal period for hw and D > 0 (default: none; hw uses 12)")
    g.add_argument("--fit-method", choices=("ols", "yule_walker"), default="ols", help="AR estimator (default: ols)")
    g.add_argument("--p-max", type=int, default=5, help="largest order tried by --model auto (default: 5)")
    g.add_argument("--criterion", choices=("aic", "bic"), default="aic", help="order selection criterion (default: aic)")
    g.add_argument("--smoothing-alpha", type=_prob, default=None, help="level smoothing; omit to grid-search (default: auto)")
    g.add_argument("--smoothing-beta", type=_prob, default=None, help="trend smoothing; omit to grid-search (default: auto)")
    g.add_argument("--smoothing-gamma", type=_prob, default=None, help="seasonal smoothing; omit to grid-search (default: auto)")


def _add_bootstrap(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("bootstrap")
    g.add_argument("--bootstrap", choices=SCHEMES, default="model", help="resampling scheme (default: model)")
    g.add_argument("--block-len", type=_positive, default=None, help="block length (default: round(T^(1/3)))")
    g.add_argument("--outer-block", type=_positive, default=None, help="block_of_blocks outer length (required for that scheme)")
    g.add_argument("--inner-block", type=_positive, default=None, help="block_of_blocks inner length (required for that scheme)")
    g.add_argument("--mean-block", type=float, default=None, help="stationary mean block length (default: round(T^(1/3)))")
    g.add_argument("--sieve-order", type=int, default=None, help="sieve AR order (default: AIC choice)")
    g.add_argument("--noise-sd", type=float, default=0.0, help="Gaussian jitter added to block replicates (default: 0)")
    g.add_argument("--bootstrap-period", type=_positive, default=None, help="period for the decomposed scheme (required for that scheme)")
    g.add_argument("--inner-scheme", choices=("moving", "stationary"), default="moving", help="remainder resampler for decomposed (default: moving)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jpr", description="Joint prediction regions for time-series path forecasts.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("fit", help="fit a forecaster and print its fit report")
    p.set_defaults(parser=p)
    _add_input(p)
    _add_forecaster(p)

    p = sub.add_parser("forecast", help="write the path forecast as 'h,point' CSV")
    p.set_defaults(parser=p)
    _add_input(p)
    _add_forecaster(p)
    p.add_argument("--H", type=_positive, default=6, help="forecast horizon (default: 6)")
    p.add_argument("--output", default="-", help="output CSV path, '-' for stdout (default: -)")

    p = sub.add_parser("region", help="build a joint prediction region")
    p.set_defaults(parser=p)
    _add_input(p)
    p.add_argument("--method", choices=METHODS, default="kfwe", help="region method (default: kfwe)")
    p.add_argument("--alpha", type=_prob, required=True, help="joint error level (required)")
    p.add_argument("--k", type=_positive, default=1, help="tolerated misses + 1 (default: 1)")
    p.add_argument("--H", type=_positive, default=6, help="forecast horizon (default: 6)")
    p.add_argument("--B", type=int, default=1000, help="bootstrap replicates, at least 100 (default: 1000)")
    p.add_argument("--sigma", choices=("shared", "double"), default="shared", help="replicate sigma mode (default: shared)")
    p.add_argument("--B-inner", type=_positive, default=100, help="inner replicates for --sigma double (default: 100)")
    p.add_argument("--sided", choices=SIDES, default="two", help="kfwe region shape (default: two)")
    p.add_argument("--scheffe-T", type=_positive, default=1, help="covariance scale divisor for scheffe (default: 1)")
    p.add_argument("--seed", type=int, default=0, help="master random seed (default: 0)")
    p.add_argument("--threads", type=_positive, default=None, help="worker threads (default: $JPR_THREADS or CPU count)")
    p.add_argument("--output", default="-", help="output CSV path, '-' for stdout (default: -)")
    _add_forecaster(p)
    _add_bootstrap(p)

    p = sub.add_parser("evaluate", help="run the rolling-window evaluation from a config file")
    p.set_defaults(parser=p)
    p.add_argument("config", help="config file of 'key = value' lines")
    p.add_argument("--seed", type=int, default=None, help="override the config seed (config or flag must set one)")
    p.add_argument("--B", type=int, default=None, help="override the config B (config or flag must set one)")
    p.add_argument("--threads", type=_positive, default=None, help="worker threads (default: $JPR_THREADS or CPU count)")
    p.add_argument("--output", default="-", help="report CSV path, '-' for stdout (default: -)")

    p = sub.add_parser("simulate", help="write a synthetic seasonal series as 't,value' CSV")
    p.set_defaults(parser=p)
    d = SyntheticSpec()
    p.add_argument("--length", type=_positive, default=d.length, help=f"number of observations (default: {d.length})")
    p.add_argument("--period", type=_positive, default=d.period, help=f"season length (default: {d.period})")
    p.add_argument("--baseline", type=float, default=d.baseline, help=f"level at t = 0 (default: {d.baseline})")
    p.add_argument("--slope", type=float, default=d.slope, help=f"trend per step (default: {d.slope})")
    p.add_argument("--amplitude", type=float, default=d.amplitude, help=f"seasonal amplitude (default: {d.amplitude})")
    p.add_argument("--noise-sd", type=float, default=d.noise_sd, help=f"Gaussian noise sd (default: {d.noise_sd})")
    p.add_argument("--seed", type=int, default=d.seed, help=f"random seed (default: {d.seed})")
    p.add_argument("--output", default="-", help="output CSV path, '-' for stdout (default: -)")
    return parser


def _series(args):
    if args.input:
        return read_series_csv(args.input, args.fill_missing)
    return generate_synthetic()


def _specs(args, with_bootstrap: bool):
    """Validate flag combinations up front so they fail as usage errors."""
    try:
        return _forecaster(args), (_bootstrap(args) if with_bootstrap else None)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _forecaster(args) -> ForecasterSpec:
    return ForecasterSpec(
        model=args.model,
        p=args.p,
        d=args.d,
        D=args.D,
        period=args.period,
        method=args.fit_method,
        alpha=args.smoothing_alpha,
        beta=args.smoothing_beta,
        gamma=args.smoothing_gamma,
        p_max=args.p_max,
        criterion=args.criterion,
    )


def _bootstrap(args) -> BootstrapSpec:
    return BootstrapSpec(
        scheme=args.bootstrap,
        block_len=args.block_len,
        outer_block=args.outer_block,
        inner_block=args.inner_block,
        mean_block=args.mean_block,
        sieve_order=args.sieve_order,
        smoothing_noise_sd=args.noise_sd,
        period=args.bootstrap_period,
        inner_scheme=args.inner_scheme,
    )


def _write(text: str, path: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="\n")


def cmd_fit(args) -> None:
    forecaster = _specs(args, False)[0]
    model, report = forecaster.fit_with_report(_series(args))
    lines = [f"model = {args.model}"]
    for name in ("p", "d", "D", "alpha", "beta", "gamma", "intercept", "sigma"):
        val = getattr(model, name, None)
        if val is not None:
            lines.append(f"{name} = {val:.10g}" if isinstance(val, float) else f"{name} = {val}")
    coef = getattr(model, "coefficients", None)
    if coef is not None and len(coef):
        lines.append("coefficients = " + ",".join(f"{c:.10g}" for c in coef))
    sys.stdout.write("\n".join(lines + report.lines()) + "\n")


def cmd_forecast(args) -> None:
    model = _specs(args, False)[0].fit(_series(args))
    point = model.forecast(args.H).point
    rows = ["h,point"] + [f"{h + 1},{float(v)!r}" for h, v in enumerate(point)]
    _write("\n".join(rows) + "\n", args.output)


def cmd_region(args) -> None:
    if args.B < 100:
        raise UsageError(f"--B must be at least 100, got {args.B}")
    if args.k > args.H:
        raise UsageError(f"--k must not exceed --H ({args.k} > {args.H})")
    if args.sided != "two" and args.method != "kfwe":
        raise UsageError("--sided applies only to --method kfwe")
    forecaster, bootstrap = _specs(args, True)
    threads = args.threads or default_threads()
    boot = bootstrap_prediction_errors(
        _series(args), forecaster, bootstrap, args.H, args.B, RandomSource(args.seed), args.sigma, args.B_inner, threads
    )
    region = build_region(args.method, boot, args.H, args.alpha, args.k, args.sided, args.scheffe_T)
    write_region_csv(region, boot.path, args.output)


def cmd_evaluate(args) -> None:
    path = Path(args.config)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from None
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.B is not None:
        overrides["B"] = str(args.B)
    try:
        setup = load_config(text, overrides, base_dir=path.parent)
    except (ConfigError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    series = setup.load_series()
    report = rolling_eval(series, setup.config, threads=args.threads or default_threads())
    if args.output == "-":
        sys.stdout.write(report_csv(report))
    else:
        emit_report(report, args.output)


def cmd_simulate(args) -> None:
    try:
        spec = SyntheticSpec(args.length, args.period, args.baseline, args.slope, args.amplitude, args.noise_sd, args.seed)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    y = generate_synthetic(spec)
    if args.output == "-":
        sys.stdout.write("t,value\n" + "".join(f"{t},{float(v)!r}\n" for t, v in enumerate(y)))
    else:
        write_series_csv(y, args.output)


COMMANDS = {
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "region": cmd_region,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        args.parser.print_usage(sys.stderr)
        print(f"jpr {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except JPRError as exc:
        print(f"jpr {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ValueError, OSError) as exc:
        print(f"jpr {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
