"""Calibration assessment: plugin ECE, exact discrete ECE and validity plots.

A validity curve is the right-continuous step function
eps -> fraction of test points whose prediction deviates from the empirical
label mean of its prediction value by at most eps. Curves keep their exact
jump points next to the display grid, so the area under a curve (and the
identity plugin l1-ECE = 1 - AUC) does not depend on the grid.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from .errors import InvalidConfigurationError
from .model import BinningModel, Dataset, SeededRng, predict_many
from .settings import CalibrationConfig

logger = logging.getLogger(__name__)


def default_grid(size: int = CalibrationConfig.GRID_SIZE) -> np.ndarray:
    if size < 2:
        raise InvalidConfigurationError(f"grid needs at least 2 points, got {size}")
    return np.linspace(0.0, 1.0, size)


class DiscretePredictorDistribution(BaseModel):
    """Law of a predictor with finitely many outputs.

    Each atom is (prediction r, mass Pr(h(X) = r), conditional mean E[Y | h(X) = r]).
    """

    model_config = ConfigDict(frozen=True)

    atoms: Tuple[Tuple[float, float, float], ...]

    @field_validator("atoms")
    @classmethod
    def _check_atoms(cls, atoms):
        if not atoms:
            raise ValueError("need at least one atom")
        for r, mass, mean in atoms:
            for name, value in (("prediction", r), ("mass", mass), ("mean", mean)):
                if not 0.0 <= value <= 1.0:
                    raise ValueError(f"{name} {value!r} outside [0, 1]")
        if abs(math.fsum(mass for _, mass, _ in atoms) - 1.0) > 1e-12:
            raise ValueError("masses must sum to 1")
        predictions = [r for r, _, _ in atoms]
        if len(set(predictions)) != len(predictions):
            raise ValueError("predictions must be distinct")
        return atoms

    @classmethod
    def from_arrays(cls, predictions, masses, means) -> "DiscretePredictorDistribution":
        return cls(
            atoms=tuple(
                (float(r), float(p), float(m)) for r, p, m in zip(predictions, masses, means)
            )
        )


class ValidityCurve(BaseModel):
    """A validity step function sampled on ``grid``.

    ``jump_points`` lists every distinct deviation with the mass it adds.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: np.ndarray
    values: np.ndarray
    jump_points: Tuple[Tuple[float, float], ...]
    kind: Literal["marginal", "conditional", "theoretical"] = "marginal"

    @model_validator(mode="after")
    def _check(self):
        if self.grid.shape != self.values.shape:
            raise ValueError("grid and values differ in length")
        if np.any(np.diff(self.grid) <= 0.0):
            raise ValueError("grid must be increasing")
        if np.any(np.diff(self.values) < 0.0):
            raise ValueError("validity values must be nondecreasing")
        if np.any((self.values < 0.0) | (self.values > 1.0)):
            raise ValueError("validity values must lie in [0, 1]")
        return self


class AggregatedCurve(BaseModel):
    """Mean validity and standard error of the mean over several runs."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    runs: int

    def value_at(self, epsilon: float) -> float:
        """Mean validity at the largest grid point not above ``epsilon``."""
        index = int(np.searchsorted(self.grid, epsilon, side="right")) - 1
        return float(self.mean[max(index, 0)])


@dataclass(frozen=True)
class PredictionGroup:
    """Test points sharing one prediction value."""

    prediction: float
    mean_label: float
    count: int

    @property
    def deviation(self) -> float:
        return abs(self.mean_label - self.prediction)


def empirical_bin_means(
    model: BinningModel, test: Dataset, rng: Optional[SeededRng] = None
) -> List[PredictionGroup]:
    """Empirical E[Y | h(X) = r] for every prediction value r attained on ``test``.

    Points are grouped by prediction value, so bins with identical biases
    pool together.
    """
    predictions = predict_many(model, test.scores, rng)
    values, inverse, counts = np.unique(predictions, return_inverse=True, return_counts=True)
    sums = np.bincount(inverse, weights=test.labels.astype(float), minlength=values.shape[0])
    return [
        PredictionGroup(prediction=float(r), mean_label=float(s / c), count=int(c))
        for r, s, c in zip(values, sums, counts)
    ]


def _step_values(jumps: Sequence[Tuple[float, int]], total: int, grid: np.ndarray) -> np.ndarray:
    deviations = np.array([d for d, _ in jumps])
    counts = np.array([c for _, c in jumps])
    order = np.argsort(deviations)
    cumulative = np.concatenate([[0], np.cumsum(counts[order])])
    reached = np.searchsorted(deviations[order], grid, side="right")
    return cumulative[reached] / total


def _deviation_counts(groups: Sequence[PredictionGroup]) -> List[Tuple[float, int]]:
    merged = {}
    for group in groups:
        merged[group.deviation] = merged.get(group.deviation, 0) + group.count
    return sorted(merged.items())


def validity_marginal(
    model: BinningModel,
    test: Dataset,
    grid: Optional[np.ndarray] = None,
    rng: Optional[SeededRng] = None,
) -> ValidityCurve:
    """Fraction of test points whose prediction's empirical deviation is at most eps."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    jumps = _deviation_counts(empirical_bin_means(model, test, rng))
    return ValidityCurve(
        grid=grid,
        values=_step_values(jumps, test.n, grid),
        jump_points=tuple((d, c / test.n) for d, c in jumps),
        kind="marginal",
    )


def validity_conditional(
    model: BinningModel,
    test: Dataset,
    grid: Optional[np.ndarray] = None,
    rng: Optional[SeededRng] = None,
) -> ValidityCurve:
    """1 where the largest deviation over attained prediction values is at most eps, else 0.

    Prediction values with no test points are left out of the maximum.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    worst = max(group.deviation for group in empirical_bin_means(model, test, rng))
    return ValidityCurve(
        grid=grid,
        values=(grid >= worst).astype(float),
        jump_points=((worst, 1.0),),
        kind="conditional",
    )


def validity_from_distribution(
    dist: DiscretePredictorDistribution, grid: Optional[np.ndarray] = None
) -> ValidityCurve:
    """Exact validity curve of a known discrete predictor."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    merged = {}
    for r, mass, mean in dist.atoms:
        deviation = abs(mean - r)
        merged[deviation] = merged.get(deviation, 0.0) + mass
    jumps = sorted(merged.items())
    deviations = np.array([d for d, _ in jumps])
    cumulative = np.concatenate([[0.0], np.cumsum([m for _, m in jumps])])
    values = np.minimum(cumulative[np.searchsorted(deviations, grid, side="right")], 1.0)
    return ValidityCurve(grid=grid, values=values, jump_points=tuple(jumps), kind="marginal")


def curve_auc(curve: ValidityCurve) -> float:
    """Exact area under the step function on [0, 1], taken from the jump points."""
    if curve.kind == "theoretical":
        raise InvalidConfigurationError("theoretical curves carry no jump points")
    return math.fsum(mass * (1.0 - deviation) for deviation, mass in curve.jump_points if deviation <= 1.0)


def plugin_ece(
    model: BinningModel, test: Dataset, p: float = 1.0, rng: Optional[SeededRng] = None
) -> float:
    """Plugin lp-ECE with the test set standing in for the data distribution."""
    if p < 1.0:
        raise InvalidConfigurationError(f"p must be at least 1, got {p}")
    groups = empirical_bin_means(model, test, rng)
    total = math.fsum(group.count / test.n * group.deviation**p for group in groups)
    return total ** (1.0 / p)


def ece_discrete(dist: DiscretePredictorDistribution, p: float = 1.0) -> float:
    """Exact lp-ECE of a discrete predictor."""
    if p < 1.0:
        raise InvalidConfigurationError(f"p must be at least 1, got {p}")
    total = math.fsum(mass * abs(mean - r) ** p for r, mass, mean in dist.atoms)
    return total ** (1.0 / p)


def max_deviation(dist: DiscretePredictorDistribution) -> float:
    """Largest deviation over atoms with positive mass (the p -> infinity limit)."""
    return max(abs(mean - r) for r, mass, mean in dist.atoms if mass > 0.0)


def aggregate_curves(curves: Sequence[ValidityCurve]) -> AggregatedCurve:
    """Per-grid-point mean and standard error (ddof=1 std / sqrt(runs)); one run has zero error."""
    if not curves:
        raise InvalidConfigurationError("nothing to aggregate")
    grid = curves[0].grid
    for curve in curves[1:]:
        if not np.array_equal(curve.grid, grid):
            raise InvalidConfigurationError("curves do not share a grid")
    stacked = np.vstack([curve.values for curve in curves])
    runs = stacked.shape[0]
    mean = np.mean(stacked, axis=0)
    if runs > 1:
        stderr = np.std(stacked, axis=0, ddof=1) / math.sqrt(runs)
    else:
        stderr = np.zeros_like(mean)
    return AggregatedCurve(grid=grid, mean=mean, stderr=stderr, runs=runs)


def theoretical_validity_curve(
    n: int, B: int, grid: Optional[np.ndarray] = None, delta: float = 0.0
) -> ValidityCurve:
    """Guaranteed validity level 1 - alpha at every eps, with alpha solving eps = eps_2(n, B, alpha) + delta.

    Sweeping alpha over (0, 1) traces the step "0 until eps_2, then 1 - alpha".
    """
    from .guarantees import check_bins

    check_bins(n, B)
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    m = n // B
    slack = np.clip(grid - delta, 0.0, None)
    alpha = 2.0 * B * np.exp(-2.0 * (m - 1) * slack**2)
    values = np.clip(1.0 - alpha, 0.0, 1.0)
    values = np.maximum.accumulate(values)
    return ValidityCurve(grid=grid, values=values, jump_points=(), kind="theoretical")
