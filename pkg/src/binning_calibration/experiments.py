"""Monte-Carlo coverage checks and the method-comparison harness.

Coverage trials fit a calibrator on synthetic data and compare every fitted
bias with the true bin mean, integrated from the known regression function
over the fitted bin. The comparison harness runs the scorer pipeline
(standardize, logistic regression, Platt scaling) once, then calibrates and
assesses every method on repeated calibration/test subsamples.
"""

import configparser
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .assessment import (
    AggregatedCurve,
    ValidityCurve,
    aggregate_curves,
    default_grid,
    plugin_ece,
    theoretical_validity_curve,
    validity_conditional,
    validity_marginal,
)
from .calibrators import CalibratorKind, fit_calibrator
from .data import (
    FeatureDataset,
    SplitPlan,
    SyntheticSpec,
    bin_mass,
    load_csv,
    split_and_subsample,
    standardize,
    synthesize,
    synthesize_features,
    true_bin_mean,
)
from .errors import CalibrationError, DataError, InvalidConfigurationError
from .guarantees import check_bins, clopper_pearson, ece_expectation_bound, eps_randomized, eps_umd, eps_umd_original
from .model import BinningModel, Dataset, SeededRng
from .scalers import LinearScorer, SigmoidScaler, fit_logistic, fit_platt
from .settings import CalibrationConfig

logger = logging.getLogger(__name__)

COVERAGE_VARIANTS = (
    CalibratorKind.UMD,
    CalibratorKind.UMD_ORIGINAL,
    CalibratorKind.UMD_RANDOMIZED,
)


def _workers(threads: Optional[int]) -> int:
    return threads if threads and threads > 0 else CalibrationConfig.resolved_threads()


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values) if values else 0.0


class CoverageReport(BaseModel):
    """Outcome of repeated fits checked against the true bin means."""

    model_config = ConfigDict(frozen=True)

    trials: int
    variant: CalibratorKind
    n: int
    B: int
    alpha: float
    delta: float
    epsilon: float
    marginal_epsilon: float
    max_deviations: Tuple[float, ...] = ()
    failures: int = 0
    ci_lower: float = 0.0
    ci_upper: float = 1.0
    marginal_failure_masses: Tuple[float, ...] = ()
    ece_l2: Tuple[float, ...] = ()
    ece_bound: float

    @model_validator(mode="after")
    def _check(self):
        if not 0 <= self.failures <= self.trials:
            raise ValueError("failure count must lie in [0, trials]")
        if any(d < 0.0 for d in self.max_deviations):
            raise ValueError("deviations must be nonnegative")
        return self

    @property
    def failure_rate(self) -> float:
        return self.failures / self.trials if self.trials else 0.0

    @property
    def mean_marginal_failure_mass(self) -> float:
        return _mean(self.marginal_failure_masses)

    @property
    def mean_ece_l2(self) -> float:
        return _mean(self.ece_l2)


@dataclass(frozen=True)
class TrialOutcome:
    max_deviation: float
    marginal_failure_mass: float
    ece_l2: float


def oracle_deviations(spec: SyntheticSpec, model: BinningModel) -> Tuple[np.ndarray, np.ndarray]:
    """|Pi_b - bias_b| and the probability mass of every bin with positive mass."""
    deviations, masses = [], []
    for b in range(model.B):
        lo, hi = model.edges[b], model.edges[b + 1]
        if hi <= lo:
            continue
        mass = bin_mass(spec, lo, hi)
        if mass <= 0.0:
            continue
        deviations.append(abs(true_bin_mean(spec, lo, hi) - model.biases[b]))
        masses.append(mass)
    return np.array(deviations), np.array(masses)


def _coverage_trial(
    spec: SyntheticSpec,
    variant: CalibratorKind,
    n: int,
    B: int,
    delta: float,
    marginal_epsilon: float,
    rng: SeededRng,
) -> TrialOutcome:
    data = synthesize(spec, n, rng)
    model = fit_calibrator(variant, data, B, rng=rng, delta=delta)
    deviations, masses = oracle_deviations(spec, model)
    return TrialOutcome(
        max_deviation=float(deviations.max()),
        marginal_failure_mass=math.fsum(masses[deviations > marginal_epsilon]),
        ece_l2=math.sqrt(math.fsum(masses * deviations**2)),
    )


def coverage_epsilon(variant, n: int, B: int, alpha: float, delta: float) -> float:
    variant = CalibratorKind(variant)
    if variant is CalibratorKind.UMD:
        return eps_umd(n, B, alpha)
    if variant is CalibratorKind.UMD_ORIGINAL:
        return eps_umd_original(n, B, alpha)
    if variant is CalibratorKind.UMD_RANDOMIZED:
        return eps_randomized(n, B, alpha, delta, "conditional")
    raise InvalidConfigurationError(f"no coverage guarantee for {variant.value}")


def run_coverage(
    spec: SyntheticSpec,
    variant,
    n: int,
    B: int,
    alpha: float,
    delta: float = CalibrationConfig.DEFAULT_DELTA,
    trials: int = 100,
    seed: int = 0,
    threads: Optional[int] = None,
) -> CoverageReport:
    """Empirical conditional-calibration failure frequency at the variant's guaranteed eps."""
    variant = CalibratorKind(variant)
    check_bins(n, B)
    epsilon = coverage_epsilon(variant, n, B, alpha, delta)
    trial_delta = delta if variant is CalibratorKind.UMD_RANDOMIZED else 0.0
    marginal_epsilon = eps_randomized(n, B, alpha, trial_delta, "marginal")
    ece_bound = ece_expectation_bound(n, B, trial_delta)

    if trials <= 0:
        return CoverageReport(
            trials=0, variant=variant, n=n, B=B, alpha=alpha, delta=delta,
            epsilon=epsilon, marginal_epsilon=marginal_epsilon, ece_bound=ece_bound,
        )

    rngs = SeededRng(seed).spawn(trials)
    logger.info("Running %d %s coverage trials (n=%d, B=%d)", trials, variant.value, n, B)
    with ThreadPoolExecutor(max_workers=_workers(threads)) as pool:
        outcomes = list(
            pool.map(
                lambda rng: _coverage_trial(spec, variant, n, B, delta, marginal_epsilon, rng),
                rngs,
            )
        )

    failures = sum(1 for o in outcomes if o.max_deviation > epsilon)
    lower, upper = clopper_pearson(failures, trials)
    return CoverageReport(
        trials=trials,
        variant=variant,
        n=n,
        B=B,
        alpha=alpha,
        delta=delta,
        epsilon=epsilon,
        marginal_epsilon=marginal_epsilon,
        max_deviations=tuple(o.max_deviation for o in outcomes),
        failures=failures,
        ci_lower=lower,
        ci_upper=upper,
        marginal_failure_masses=tuple(o.marginal_failure_mass for o in outcomes),
        ece_l2=tuple(o.ece_l2 for o in outcomes),
        ece_bound=ece_bound,
    )


# ---------------------------------------------------------------------------
# Method comparison
# ---------------------------------------------------------------------------


class MethodConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: CalibratorKind
    split_fraction: float = Field(default=CalibrationConfig.DEFAULT_SPLIT_FRACTION, gt=0.0, lt=1.0)
    delta: float = Field(default=CalibrationConfig.DEFAULT_DELTA, gt=0.0)


class ComparisonConfig(BaseModel):
    """Declarative description of one comparison run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    source: Literal["synthetic", "csv"] = "synthetic"
    csv_path: Optional[str] = None
    label_column: str = "label"
    synthetic: SyntheticSpec = SyntheticSpec()
    synthetic_rows: int = Field(default=30000, gt=0)
    noise_features: int = Field(default=2, ge=0)

    train_size: int = Field(default=10000, gt=0)
    scaler_size: int = Field(default=5000, gt=0)
    pool_size: int = Field(default=15000, gt=0)
    test_size: int = Field(default=5000, gt=0)

    n_values: Tuple[int, ...] = (1000,)
    bins: int = Field(default=CalibrationConfig.DEFAULT_BINS, ge=1)
    repetitions: int = Field(default=100, ge=1)
    grid_size: int = Field(default=CalibrationConfig.GRID_SIZE, ge=2)
    alpha: float = Field(default=CalibrationConfig.DEFAULT_ALPHA, gt=0.0, lt=1.0)
    seed: int = Field(default=CalibrationConfig.DEFAULT_SEED, ge=0)
    methods: Tuple[MethodConfig, ...] = (MethodConfig(kind=CalibratorKind.UMD),)

    @field_validator("n_values", mode="before")
    @classmethod
    def _parse_n_values(cls, value):
        if isinstance(value, str):
            return tuple(int(token) for token in value.replace(",", " ").split())
        return value

    @model_validator(mode="after")
    def _check(self):
        if self.source == "csv" and not self.csv_path:
            raise ValueError("a csv source needs csv_path")
        if not self.n_values:
            raise ValueError("need at least one calibration size")
        if not self.methods:
            raise ValueError("need at least one method")
        return self

    def plan_for(self, n: int) -> SplitPlan:
        return SplitPlan(
            train_size=self.train_size,
            scaler_size=self.scaler_size,
            pool_size=self.pool_size,
            calibration_size=n,
            test_size=self.test_size,
            repetitions=self.repetitions,
            seed=self.seed,
        )


_SPEC_KEYS = {
    "score_family", "score_a", "score_b", "regression", "regression_param",
    "regression_shift", "breakpoints", "levels", "seed",
}


def _tuple_of_floats(text: str) -> Tuple[float, ...]:
    return tuple(float(token) for token in text.replace(",", " ").split())


def load_comparison_config(path: Union[str, Path]) -> ComparisonConfig:
    """Read an INI file with [experiment], [split], [synthetic], [csv] and [method.<kind>] sections."""
    path = Path(path)
    parser = configparser.ConfigParser()
    try:
        with path.open() as handle:
            parser.read_file(handle)
    except OSError as e:
        raise DataError(f"cannot read config {path}: {e}") from e
    except configparser.Error as e:
        raise DataError(f"malformed config {path}: {e}") from e

    fields: Dict[str, object] = {}
    if parser.has_section("experiment"):
        fields.update(parser.items("experiment"))
    if parser.has_section("split"):
        fields.update(parser.items("split"))
    if parser.has_section("csv"):
        section = dict(parser.items("csv"))
        if "path" in section:
            fields["csv_path"] = section.pop("path")
        fields.update(section)
    if parser.has_section("synthetic"):
        section = dict(parser.items("synthetic"))
        if "rows" in section:
            fields["synthetic_rows"] = section.pop("rows")
        if "noise_features" in section:
            fields["noise_features"] = section.pop("noise_features")
        unknown = set(section) - _SPEC_KEYS
        if unknown:
            raise DataError(f"{path}: unknown [synthetic] keys {sorted(unknown)}")
        for key in ("breakpoints", "levels"):
            if key in section:
                section[key] = _tuple_of_floats(section[key])
        fields["synthetic"] = section

    methods = []
    for name in parser.sections():
        if name.startswith("method."):
            methods.append({"kind": name[len("method."):], **dict(parser.items(name))})
    if methods:
        fields["methods"] = methods

    try:
        return ComparisonConfig(**fields)
    except ValidationError as e:
        raise InvalidConfigurationError(f"{path}: {e}") from e


@dataclass(frozen=True)
class ScoringPipeline:
    """Logistic scorer followed by a Platt scaler."""

    scorer: LinearScorer
    scaler: SigmoidScaler

    def score(self, features: np.ndarray) -> np.ndarray:
        return self.scaler.apply(self.scorer.apply(features))

    def scored(self, data: FeatureDataset) -> Dataset:
        return Dataset(scores=self.score(data.features), labels=data.labels)


def fit_scoring_pipeline(train: FeatureDataset, scaler_split: FeatureDataset) -> ScoringPipeline:
    scorer = fit_logistic(train.features, train.labels)
    scaler = fit_platt(scorer.apply(scaler_split.features), scaler_split.labels)
    return ScoringPipeline(scorer=scorer, scaler=scaler)


@dataclass(frozen=True)
class MethodResult:
    method: CalibratorKind
    n: int
    marginal: Optional[AggregatedCurve]
    conditional: Optional[AggregatedCurve]
    ece_mean: float
    ece_stderr: float
    runs: int
    errors: Tuple[str, ...] = ()


class ComparisonReport(BaseModel):
    """Aggregated validity curves per (method, n) plus the guaranteed curve per n."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: np.ndarray
    bins: int
    alpha: float
    results: Tuple[MethodResult, ...]
    theoretical: Dict[int, ValidityCurve]

    def result(self, method, n: int) -> MethodResult:
        method = CalibratorKind(method)
        for entry in self.results:
            if entry.method is method and entry.n == n:
                return entry
        raise KeyError(f"no result for {method.value} at n={n}")


@dataclass(frozen=True)
class _RunOutcome:
    marginal: Optional[ValidityCurve]
    conditional: Optional[ValidityCurve]
    ece: Optional[float]
    error: Optional[str]


def _assess_method(
    method: MethodConfig,
    calibration: Dataset,
    test: Dataset,
    bins: int,
    grid: np.ndarray,
    rng: SeededRng,
) -> _RunOutcome:
    try:
        model = fit_calibrator(
            method.kind,
            calibration,
            bins,
            rng=rng.derive(0),
            delta=method.delta,
            split_fraction=method.split_fraction,
        )
        # the same query draws for every estimate of a randomized model
        return _RunOutcome(
            marginal=validity_marginal(model, test, grid, rng.derive(1)),
            conditional=validity_conditional(model, test, grid, rng.derive(1)),
            ece=plugin_ece(model, test, 1.0, rng.derive(1)),
            error=None,
        )
    except CalibrationError as e:
        return _RunOutcome(None, None, None, f"{type(e).__name__}: {e}")


def _summarize(method: CalibratorKind, n: int, outcomes: List[_RunOutcome]) -> MethodResult:
    good = [o for o in outcomes if o.error is None]
    errors = tuple(o.error for o in outcomes if o.error is not None)
    if errors:
        logger.warning("%s at n=%d failed in %d of %d runs", method.value, n, len(errors), len(outcomes))
    if not good:
        return MethodResult(method, n, None, None, float("nan"), float("nan"), 0, errors)
    eces = [o.ece for o in good]
    mean = _mean(eces)
    stderr = 0.0
    if len(eces) > 1:
        stderr = float(np.std(eces, ddof=1) / math.sqrt(len(eces)))
    return MethodResult(
        method=method,
        n=n,
        marginal=aggregate_curves([o.marginal for o in good]),
        conditional=aggregate_curves([o.conditional for o in good]),
        ece_mean=mean,
        ece_stderr=stderr,
        runs=len(good),
        errors=errors,
    )


def _source_data(config: ComparisonConfig) -> FeatureDataset:
    if config.source == "csv":
        return load_csv(config.csv_path, config.label_column)
    return synthesize_features(config.synthetic, config.synthetic_rows, config.noise_features)


def run_comparison(config: ComparisonConfig, threads: Optional[int] = None) -> ComparisonReport:
    """Validity curves and plugin l1-ECE for every configured method and calibration size."""
    data, _ = standardize(_source_data(config))
    grid = default_grid(config.grid_size)
    master = SeededRng(config.seed)

    pipeline = None
    results: List[MethodResult] = []
    theoretical: Dict[int, ValidityCurve] = {}

    for n in config.n_values:
        rounds = list(split_and_subsample(data, config.plan_for(n)))
        if pipeline is None:
            logger.info("Fitting scorer on %d rows and Platt scaler on %d rows",
                        rounds[0].train.n, rounds[0].scaler.n)
            pipeline = fit_scoring_pipeline(rounds[0].train, rounds[0].scaler)

        def run(split_round):
            calibration = pipeline.scored(split_round.calibration)
            test = pipeline.scored(split_round.test)
            return [
                _assess_method(
                    method, calibration, test, config.bins, grid,
                    master.derive(n, split_round.repetition, index),
                )
                for index, method in enumerate(config.methods)
            ]

        with ThreadPoolExecutor(max_workers=_workers(threads)) as pool:
            per_round = list(pool.map(run, rounds))

        for index, method in enumerate(config.methods):
            results.append(_summarize(method.kind, n, [outcomes[index] for outcomes in per_round]))

        if n >= 2 * config.bins:
            theoretical[n] = theoretical_validity_curve(n, config.bins, grid, CalibrationConfig.DEFAULT_DELTA)

    return ComparisonReport(
        grid=grid,
        bins=config.bins,
        alpha=config.alpha,
        results=tuple(results),
        theoretical=theoretical,
    )
