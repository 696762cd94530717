"""Data ingestion, standardization, split protocol and synthetic ground truth."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import integrate, stats
from scipy.special import expit, logit

from .errors import DataError, InvalidConfigurationError
from .model import Dataset, SeededRng

logger = logging.getLogger(__name__)

# quadrature tolerance for oracle bin means
_QUAD_TOL = 1e-10


class FeatureDataset(BaseModel):
    """Feature matrix with binary labels, before scoring."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    features: np.ndarray
    labels: np.ndarray
    columns: Tuple[str, ...] = ()

    @field_validator("features", mode="before")
    @classmethod
    def _coerce_features(cls, value):
        features = np.array(value, dtype=float)
        if features.ndim != 2:
            raise ValueError("features must be a two-dimensional matrix")
        if not np.all(np.isfinite(features)):
            raise ValueError("features must be finite")
        features.setflags(write=False)
        return features

    @field_validator("labels", mode="before")
    @classmethod
    def _coerce_labels(cls, value):
        labels = np.array(value)
        if labels.ndim != 1 or not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be a vector of 0/1 values")
        labels = labels.astype(np.int64)
        labels.setflags(write=False)
        return labels

    @model_validator(mode="after")
    def _check_rows(self):
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels"
            )
        return self

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    def subset(self, indices: np.ndarray) -> "FeatureDataset":
        return FeatureDataset(
            features=self.features[indices], labels=self.labels[indices], columns=self.columns
        )


def _read_frame(path: Union[str, Path]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        raise DataError(f"{path} is empty") from e
    except pd.errors.ParserError as e:
        raise DataError(f"{path}: malformed row ({e})") from e
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    if frame.shape[0] == 0:
        raise DataError(f"{path} has a header but no rows")
    return frame


def _numeric_column(frame: pd.DataFrame, column: str, path) -> np.ndarray:
    values = pd.to_numeric(frame[column].str.strip(), errors="coerce")
    array = values.to_numpy(dtype=float, na_value=np.nan)
    bad = np.flatnonzero(~np.isfinite(array))
    if bad.size:
        row = int(bad[0])
        # header is line 1
        raise DataError(
            f"{path}: line {row + 2}: non-numeric value {frame[column].iloc[row]!r} in column {column!r}"
        )
    return array


def _label_column(frame: pd.DataFrame, column: str, path) -> np.ndarray:
    if column not in frame.columns:
        raise DataError(f"{path}: no label column {column!r}")
    labels = _numeric_column(frame, column, path)
    bad = np.flatnonzero((labels != 0.0) & (labels != 1.0))
    if bad.size:
        row = int(bad[0])
        raise DataError(
            f"{path}: line {row + 2}: label {frame[column].iloc[row]!r} is not 0 or 1"
        )
    return labels.astype(np.int64)


def load_csv(path: Union[str, Path], label_column: str = "label") -> FeatureDataset:
    """Read a comma-separated file with a header; every non-label column is a feature."""
    frame = _read_frame(path)
    labels = _label_column(frame, label_column, path)
    feature_columns = [c for c in frame.columns if c != label_column]
    if not feature_columns:
        raise DataError(f"{path}: no feature columns besides {label_column!r}")
    features = np.column_stack([_numeric_column(frame, c, path) for c in feature_columns])
    logger.info("Loaded %d rows with %d features from %s", len(labels), len(feature_columns), path)
    return FeatureDataset(features=features, labels=labels, columns=tuple(feature_columns))


def load_scored_csv(path: Union[str, Path], label_column: str = "label") -> Dataset:
    """Read a ``score,label`` file."""
    frame = _read_frame(path)
    if "score" not in frame.columns:
        raise DataError(f"{path}: no 'score' column")
    scores = _numeric_column(frame, "score", path)
    out_of_range = np.flatnonzero((scores < 0.0) | (scores > 1.0))
    if out_of_range.size:
        row = int(out_of_range[0])
        raise DataError(f"{path}: line {row + 2}: score {scores[row]!r} outside [0, 1]")
    labels = _label_column(frame, label_column, path)
    return Dataset(scores=scores, labels=labels)


def load_scores(path: Union[str, Path]) -> np.ndarray:
    """Read the ``score`` column of a file that may have no labels."""
    frame = _read_frame(path)
    if "score" not in frame.columns:
        raise DataError(f"{path}: no 'score' column")
    return _numeric_column(frame, "score", path)


@dataclass(frozen=True)
class Standardizer:
    """Per-column z-scoring fitted on one dataset and reusable on others."""

    mean: np.ndarray
    scale: np.ndarray
    constant_columns: Tuple[int, ...]

    def apply(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=float) - self.mean) / self.scale

    def inverse(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=float) * self.scale + self.mean


def standardize(data: FeatureDataset) -> Tuple[FeatureDataset, Standardizer]:
    """Mean 0 and population standard deviation 1 per column.

    Zero-variance columns pass through unscaled and unshifted, and are listed
    in ``constant_columns``.
    """
    if data.n < 2:
        raise InvalidConfigurationError("standardization needs at least 2 rows")
    mean = data.features.mean(axis=0)
    std = data.features.std(axis=0)
    constant = np.flatnonzero(std == 0.0)
    if constant.size:
        logger.warning("Columns %s have zero variance and are left unscaled", constant.tolist())
    mean = np.where(std == 0.0, 0.0, mean)
    scale = np.where(std == 0.0, 1.0, std)
    transform = Standardizer(mean=mean, scale=scale, constant_columns=tuple(int(c) for c in constant))
    scaled = FeatureDataset(
        features=transform.apply(data.features), labels=data.labels, columns=data.columns
    )
    return scaled, transform


class SplitPlan(BaseModel):
    """Sizes for the scorer/scaler/calibration-pool splits and the per-repetition subsamples."""

    model_config = ConfigDict(frozen=True)

    train_size: int = Field(gt=0)
    scaler_size: int = Field(gt=0)
    pool_size: int = Field(gt=0)
    calibration_size: int = Field(gt=0)
    test_size: int = Field(gt=0)
    repetitions: int = Field(ge=1)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check(self):
        if self.calibration_size + self.test_size > self.pool_size:
            raise ValueError(
                f"calibration ({self.calibration_size}) + test ({self.test_size}) "
                f"exceeds the pool ({self.pool_size})"
            )
        return self

    @property
    def total(self) -> int:
        return self.train_size + self.scaler_size + self.pool_size


@dataclass(frozen=True)
class SplitRound:
    repetition: int
    train: FeatureDataset
    scaler: FeatureDataset
    calibration: FeatureDataset
    test: FeatureDataset


def split_and_subsample(data: FeatureDataset, plan: SplitPlan) -> Iterator[SplitRound]:
    """Split once into train / scaler / pool, then subsample calibration and test sets from the pool.

    Repetition r draws from a stream determined by (plan.seed, r) alone, so
    any repetition can be reproduced on its own.
    """
    if plan.total > data.n:
        raise InvalidConfigurationError(
            f"split plan needs {plan.total} rows but the data has {data.n}"
        )
    master = SeededRng(plan.seed)
    order = master.permutation(data.n)
    train = data.subset(order[: plan.train_size])
    scaler = data.subset(order[plan.train_size : plan.train_size + plan.scaler_size])
    pool = order[plan.train_size + plan.scaler_size : plan.total]

    for repetition in range(plan.repetitions):
        rng = master.derive(repetition)
        chosen = rng.choice(pool, plan.calibration_size + plan.test_size)
        yield SplitRound(
            repetition=repetition,
            train=train,
            scaler=scaler,
            calibration=data.subset(chosen[: plan.calibration_size]),
            test=data.subset(chosen[plan.calibration_size :]),
        )


class SyntheticSpec(BaseModel):
    """Score density plus true regression function eta(s) = E[Y | S = s].

    Score families: ``uniform`` on [0, 1] and ``beta`` with parameters
    (score_a, score_b). Regression families:

    - ``identity``: eta(s) = s
    - ``power``: eta(s) = s ** regression_param
    - ``logistic-warp``: eta(s) = expit(regression_param * logit(s) + regression_shift)
    - ``piecewise-constant``: eta jumps at ``breakpoints`` through ``levels``
    - ``constant``: eta(s) = regression_param
    """

    model_config = ConfigDict(frozen=True)

    score_family: Literal["uniform", "beta"] = "uniform"
    score_a: float = Field(default=1.0, gt=0.0)
    score_b: float = Field(default=1.0, gt=0.0)
    regression: Literal["identity", "power", "logistic-warp", "piecewise-constant", "constant"] = "identity"
    regression_param: float = 1.0
    regression_shift: float = 0.0
    breakpoints: Tuple[float, ...] = ()
    levels: Tuple[float, ...] = ()
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check(self):
        if self.regression == "power" and self.regression_param <= 0.0:
            raise ValueError("power regression needs a positive exponent")
        if self.regression == "constant" and not 0.0 <= self.regression_param <= 1.0:
            raise ValueError("constant regression value must lie in [0, 1]")
        if self.regression == "piecewise-constant":
            if len(self.levels) != len(self.breakpoints) + 1:
                raise ValueError("need one more level than breakpoints")
            if list(self.breakpoints) != sorted(self.breakpoints):
                raise ValueError("breakpoints must be sorted")
            if any(not 0.0 <= level <= 1.0 for level in self.levels):
                raise ValueError("levels must lie in [0, 1]")
        return self


def regression_function(spec: SyntheticSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized eta for ``spec``."""
    if spec.regression == "identity":
        return lambda s: np.asarray(s, dtype=float)
    if spec.regression == "power":
        return lambda s: np.asarray(s, dtype=float) ** spec.regression_param
    if spec.regression == "constant":
        return lambda s: np.full(np.shape(s), spec.regression_param, dtype=float)
    if spec.regression == "logistic-warp":

        def warp(s):
            with np.errstate(divide="ignore"):
                return expit(spec.regression_param * logit(np.asarray(s, dtype=float)) + spec.regression_shift)

        return warp

    breakpoints = np.asarray(spec.breakpoints)
    levels = np.asarray(spec.levels)
    return lambda s: levels[np.searchsorted(breakpoints, s, side="right")]


def _score_distribution(spec: SyntheticSpec):
    if spec.score_family == "uniform":
        return stats.uniform()
    return stats.beta(spec.score_a, spec.score_b)


def _draw_scores(spec: SyntheticSpec, n: int, rng: SeededRng) -> np.ndarray:
    if spec.score_family == "uniform":
        return rng.generator.uniform(0.0, 1.0, n)
    return rng.generator.beta(spec.score_a, spec.score_b, n)


def synthesize(spec: SyntheticSpec, n: int, rng: Optional[SeededRng] = None) -> Dataset:
    """n scores from the score density of ``spec`` with labels ~ Bernoulli(eta(score))."""
    if n < 1:
        raise InvalidConfigurationError(f"need at least one sample, got n={n}")
    rng = rng or SeededRng(spec.seed)
    scores = _draw_scores(spec, n, rng)
    eta = regression_function(spec)(scores)
    labels = (rng.uniform(n) < eta).astype(np.int64)
    return Dataset(scores=scores, labels=labels)


def synthesize_features(
    spec: SyntheticSpec, n: int, noise_features: int = 2, rng: Optional[SeededRng] = None
) -> FeatureDataset:
    """Feature-level synthetic data: the logit of the synthetic score plus Gaussian noise columns."""
    rng = rng or SeededRng(spec.seed)
    scored = synthesize(spec, n, rng)
    clipped = np.clip(scored.scores, 1e-12, 1.0 - 1e-12)
    columns = [logit(clipped)]
    columns.extend(rng.generator.standard_normal(n) for _ in range(noise_features))
    names = ("score_logit", *(f"noise_{i}" for i in range(noise_features)))
    return FeatureDataset(features=np.column_stack(columns), labels=scored.labels, columns=names)


def bin_mass(spec: SyntheticSpec, lo: float, hi: float) -> float:
    """Probability that the score falls in [lo, hi]."""
    dist = _score_distribution(spec)
    return float(dist.cdf(hi) - dist.cdf(lo))


def true_bin_mean(spec: SyntheticSpec, lo: float, hi: float) -> float:
    """E[Y | lo <= S <= hi] by adaptive quadrature."""
    if not 0.0 <= lo < hi <= 1.0:
        raise InvalidConfigurationError(f"need 0 <= lo < hi <= 1, got [{lo}, {hi}]")
    mass = bin_mass(spec, lo, hi)
    if mass <= 0.0:
        raise InvalidConfigurationError(f"interval [{lo}, {hi}] has zero probability mass")

    eta = regression_function(spec)
    dist = _score_distribution(spec)
    if spec.regression == "constant":
        return float(spec.regression_param)

    def integrand(s: float) -> float:
        return float(eta(np.array([s]))[0] * dist.pdf(s))

    points = [p for p in spec.breakpoints if lo < p < hi] or None
    numerator, _ = integrate.quad(
        integrand, lo, hi, epsabs=_QUAD_TOL * mass, epsrel=_QUAD_TOL, points=points, limit=200
    )
    return float(min(1.0, max(0.0, numerator / mass)))
