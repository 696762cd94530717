"""Command-line interface: fit, predict, assess, bound, plan, coverage, compare."""

import argparse
import logging
import sys
from typing import List, Optional

import pandas as pd
from pydantic import ValidationError

from .assessment import (
    default_grid,
    plugin_ece,
    validity_conditional,
    validity_marginal,
)
from .calibrators import CalibratorKind, fit_calibrator
from .data import SyntheticSpec, load_scored_csv, load_scores
from .errors import CalibrationError, DataError, InvalidConfigurationError
from .experiments import COVERAGE_VARIANTS, load_comparison_config, run_comparison, run_coverage
from .guarantees import (
    GuaranteeVariant,
    bound_curve,
    guarantee,
    required_n,
    suggest_bins,
    ums_required_n,
)
from .model import SeededRng, bin_counts, load_model, predict_many, save_model
from .reporting import (
    save_comparison_svgs,
    save_validity_svg,
    write_bound_curve_csv,
    write_comparison,
    write_curve_csv,
    write_jumps_csv,
)
from .settings import CalibrationConfig

logger = logging.getLogger(__name__)

BOUND_ALIASES = {
    "umd": GuaranteeVariant.UMD_CONDITIONAL.value,
    "umd-original": GuaranteeVariant.UMD_ORIGINAL_CONDITIONAL.value,
}
UMS_SAMPLE_SIZE = ("ums-appendix", "ums-sample-size")


def _g(value: float) -> str:
    return f"{value:.6g}"


def _seed(args) -> int:
    return CalibrationConfig.DEFAULT_SEED if args.seed is None else args.seed


def cli_fit(args) -> int:
    data = load_scored_csv(args.data, args.label_column)
    scaled = load_scores(args.scaled_scores) if args.scaled_scores else None
    model = fit_calibrator(
        args.calibrator,
        data,
        args.B,
        rng=SeededRng(_seed(args)),
        delta=args.delta,
        split_fraction=args.split_fraction,
        scaled_scores=scaled,
    )
    save_model(model, args.out)

    print(f"n={data.n}")
    print(f"B={model.B}")
    print("counts=" + " ".join(str(int(c)) for c in bin_counts(model, data.scores)))
    print(f"   Model saved: {args.out}")
    return 0


def cli_predict(args) -> int:
    model = load_model(args.model)
    scores = load_scores(args.scores)
    predictions = predict_many(model, scores, SeededRng(_seed(args)))
    frame = pd.DataFrame({"score": scores, "prediction": predictions})
    text = frame.to_csv(index=False, float_format="%.17g", lineterminator="\n")
    if args.out:
        try:
            with open(args.out, "w") as handle:
                handle.write(text)
        except OSError as e:
            raise DataError(f"cannot write {args.out}: {e}") from e
        print(f"   Predictions saved: {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cli_assess(args) -> int:
    model = load_model(args.model)
    test = load_scored_csv(args.test, args.label_column)
    grid = default_grid(args.grid_size)
    rng = SeededRng(_seed(args))

    # identical query draws for every estimate of a randomized model
    marginal = validity_marginal(model, test, grid, rng.derive(1))
    conditional = validity_conditional(model, test, grid, rng.derive(1))
    ece_l1 = plugin_ece(model, test, 1.0, rng.derive(1))
    ece_l2 = plugin_ece(model, test, 2.0, rng.derive(1))

    prefix = args.out_prefix
    write_curve_csv(marginal, f"{prefix}_marginal.csv")
    write_curve_csv(conditional, f"{prefix}_conditional.csv")
    write_jumps_csv(marginal, f"{prefix}_marginal_jumps.csv")
    if args.svg:
        save_validity_svg(
            {"marginal": marginal, "conditional": conditional},
            f"{prefix}_validity.svg",
        )

    print(f"ece_l1={_g(ece_l1)}")
    print(f"ece_l2={_g(ece_l2)}")
    return 0


def cli_bound(args) -> int:
    if args.variant in UMS_SAMPLE_SIZE:
        if args.epsilon is None:
            raise InvalidConfigurationError(f"{args.variant} needs --epsilon")
        result = ums_required_n(args.epsilon, args.alpha, args.B, args.c)
        print(f"variant={args.variant}")
        print(f"epsilon={_g(args.epsilon)}")
        print(f"alpha={_g(args.alpha)}")
        print(f"B={args.B}")
        print(f"N_min={result.N_min}")
        print(f"n_split1={result.n_split1}")
        print(f"n_split2={result.n_split2}")
        print(f"n_total={result.n_total}")
        return 0

    variant = GuaranteeVariant(BOUND_ALIASES.get(args.variant, args.variant))
    if args.epsilon is not None:
        n = required_n(args.epsilon, args.alpha, args.B, variant, args.delta)
        print(f"variant={variant.value}")
        print(f"epsilon={_g(args.epsilon)}")
        print(f"B={args.B}")
        print(f"n={n}")
        return 0

    if args.n is None:
        raise InvalidConfigurationError("bound needs --n (or --epsilon to solve for n)")
    for line in guarantee(variant, args.n, args.B, args.alpha, args.delta).as_lines():
        print(line)
    return 0


def cli_plan(args) -> int:
    B_max = args.B_max if args.B_max is not None else min(args.n // 2, 100)
    points = bound_curve(args.n, args.alpha, range(args.B_min, B_max + 1))
    text = write_bound_curve_csv(points, args.out)
    if args.out:
        print(f"   Plan saved: {args.out}")
    else:
        sys.stdout.write(text)
    if args.target is not None:
        best = suggest_bins(args.n, args.alpha, args.target)
        if best is None:
            print(f"no B meets epsilon <= {_g(args.target)} at n={args.n}", file=sys.stderr)
        else:
            print(f"suggested B={best} for epsilon <= {_g(args.target)}", file=sys.stderr)
    return 0


def cli_coverage(args) -> int:
    spec = SyntheticSpec(
        score_family=args.score_family,
        score_a=args.score_a,
        score_b=args.score_b,
        regression=args.regression,
        regression_param=args.regression_param,
        regression_shift=args.regression_shift,
        breakpoints=tuple(args.breakpoints),
        levels=tuple(args.levels),
    )
    report = run_coverage(
        spec,
        args.variant,
        args.n,
        args.B,
        args.alpha,
        delta=args.delta,
        trials=args.trials,
        seed=_seed(args),
        threads=args.threads,
    )
    print(f"variant={report.variant.value}")
    print(f"trials={report.trials}")
    print(f"epsilon={_g(report.epsilon)}")
    print(f"failures={report.failures}")
    print(f"failure_rate={_g(report.failure_rate)}")
    print(f"ci_lower={_g(report.ci_lower)}")
    print(f"ci_upper={_g(report.ci_upper)}")
    print(f"marginal_epsilon={_g(report.marginal_epsilon)}")
    print(f"mean_marginal_failure_mass={_g(report.mean_marginal_failure_mass)}")
    print(f"mean_ece_l2={_g(report.mean_ece_l2)}")
    print(f"ece_bound={_g(report.ece_bound)}")
    return 0


def cli_compare(args) -> int:
    config = load_comparison_config(args.config)
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    report = run_comparison(config, threads=args.threads)

    written = write_comparison(report, args.out_prefix)
    if args.svg:
        written.extend(save_comparison_svgs(report, args.out_prefix))

    print("method,n,runs,ece_mean,ece_stderr")
    for result in report.results:
        print(
            f"{result.method.value},{result.n},{result.runs},"
            f"{_g(result.ece_mean)},{_g(result.ece_stderr)}"
        )
    print(f"   {len(written)} files written with prefix {args.out_prefix}")
    return 0


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0.0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="binning-calibration",
        description="Post-hoc binning calibration with distribution-free guarantees",
    )
    parser.add_argument("--seed", type=int, default=None,
                        help=f"random seed (default: BINNING_SEED={CalibrationConfig.DEFAULT_SEED})")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for experiments (default: available cores)")
    parser.add_argument("--log-level", default=CalibrationConfig.LOG_LEVEL,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        type=str.upper)
    sub = parser.add_subparsers(dest="command", required=True)

    calibrators = [kind.value for kind in CalibratorKind]

    fit = sub.add_parser("fit", help="fit a calibrator on a score,label CSV")
    fit.add_argument("--calibrator", choices=calibrators, default=CalibratorKind.UMD.value)
    fit.add_argument("--data", required=True, help="CSV with score and label columns")
    fit.add_argument("--B", type=int, default=CalibrationConfig.DEFAULT_BINS)
    fit.add_argument("--out", required=True, help="model file to write")
    fit.add_argument("--delta", type=_positive_float, default=CalibrationConfig.DEFAULT_DELTA)
    fit.add_argument("--split-fraction", type=float, default=CalibrationConfig.DEFAULT_SPLIT_FRACTION)
    fit.add_argument("--scaled-scores", default=None,
                     help="CSV with a score column of scaled scores (scaling-binning)")
    fit.add_argument("--label-column", default="label")
    fit.set_defaults(handler=cli_fit)

    predict = sub.add_parser("predict", help="apply a fitted model to a score CSV")
    predict.add_argument("--model", required=True)
    predict.add_argument("--scores", required=True, help="CSV with a score column")
    predict.add_argument("--out", default=None, help="output CSV (default: stdout)")
    predict.set_defaults(handler=cli_predict)

    assess = sub.add_parser("assess", help="validity curves and plugin ECE on a test CSV")
    assess.add_argument("--model", required=True)
    assess.add_argument("--test", required=True, help="CSV with score and label columns")
    assess.add_argument("--grid-size", type=int, default=CalibrationConfig.GRID_SIZE)
    assess.add_argument("--out-prefix", required=True)
    assess.add_argument("--svg", action="store_true", help="also write a validity plot")
    assess.add_argument("--label-column", default="label")
    assess.set_defaults(handler=cli_assess)

    bound = sub.add_parser("bound", help="evaluate a guarantee formula")
    bound.add_argument(
        "--variant",
        required=True,
        choices=[*BOUND_ALIASES, *(v.value for v in GuaranteeVariant), *UMS_SAMPLE_SIZE],
    )
    bound.add_argument("--n", type=int, default=None)
    bound.add_argument("--B", type=int, default=CalibrationConfig.DEFAULT_BINS)
    bound.add_argument("--alpha", type=float, default=CalibrationConfig.DEFAULT_ALPHA)
    bound.add_argument("--delta", type=float, default=0.0)
    bound.add_argument("--epsilon", type=float, default=None,
                       help="solve for the smallest n achieving this epsilon")
    bound.add_argument("--c", type=_positive_float, default=100.0,
                       help="constant of the bin-mass lemma (ums-appendix)")
    bound.set_defaults(handler=cli_bound)

    plan = sub.add_parser("plan", help="epsilon as a function of B for fixed n")
    plan.add_argument("--n", type=int, required=True)
    plan.add_argument("--alpha", type=float, default=CalibrationConfig.DEFAULT_ALPHA)
    plan.add_argument("--B-min", type=int, default=1)
    plan.add_argument("--B-max", type=int, default=None)
    plan.add_argument("--target", type=float, default=None,
                      help="report the largest B whose epsilon meets this target")
    plan.add_argument("--out", default=None, help="output CSV (default: stdout)")
    plan.set_defaults(handler=cli_plan)

    coverage = sub.add_parser("coverage", help="Monte-Carlo check of the conditional guarantee")
    coverage.add_argument("--variant", choices=[k.value for k in COVERAGE_VARIANTS],
                          default=CalibratorKind.UMD.value)
    coverage.add_argument("--n", type=int, required=True)
    coverage.add_argument("--B", type=int, default=CalibrationConfig.DEFAULT_BINS)
    coverage.add_argument("--alpha", type=float, default=CalibrationConfig.DEFAULT_ALPHA)
    coverage.add_argument("--delta", type=_positive_float, default=CalibrationConfig.DEFAULT_DELTA)
    coverage.add_argument("--trials", type=int, default=100)
    coverage.add_argument("--score-family", choices=["uniform", "beta"], default="uniform")
    coverage.add_argument("--score-a", type=_positive_float, default=1.0)
    coverage.add_argument("--score-b", type=_positive_float, default=1.0)
    coverage.add_argument(
        "--regression",
        choices=["identity", "power", "logistic-warp", "piecewise-constant", "constant"],
        default="identity",
    )
    coverage.add_argument("--regression-param", type=float, default=1.0)
    coverage.add_argument("--regression-shift", type=float, default=0.0)
    coverage.add_argument("--breakpoints", type=float, nargs="*", default=[],
                          help="jump locations of a piecewise-constant regression")
    coverage.add_argument("--levels", type=float, nargs="*", default=[],
                          help="values of a piecewise-constant regression, one more than breakpoints")
    coverage.set_defaults(handler=cli_coverage)

    compare = sub.add_parser("compare", help="compare calibrators on repeated splits")
    compare.add_argument("config", help="INI file describing the comparison")
    compare.add_argument("--out-prefix", required=True)
    compare.add_argument("--svg", action="store_true", help="also write validity plots")
    compare.set_defaults(handler=cli_compare)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv``, run the subcommand and map library errors to exit codes."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if not CalibrationConfig.validate_config():
        return InvalidConfigurationError.exit_code
    try:
        return args.handler(args)
    except CalibrationError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        print(f"ERROR: {e.errors()[0]['msg']}", file=sys.stderr)
        return InvalidConfigurationError.exit_code
