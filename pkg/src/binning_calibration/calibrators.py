"""Fit procedures for every binning calibrator.

All fits return a :class:`~.model.BinningModel`. Uniform-mass variants place
edges at order statistics of the calibration scores, following the index
rule A_b = ceil(b (n + 1) / B).
"""

import logging
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import FitError, InvalidConfigurationError
from .model import BinningModel, Dataset, SeededRng, assign_bins
from .settings import CalibrationConfig

logger = logging.getLogger(__name__)


class CalibratorKind(str, Enum):
    UMD = "umd"
    UMD_ORIGINAL = "umd-original"
    UMD_RANDOMIZED = "umd-randomized"
    UMS = "ums"
    FIXED_WIDTH = "fixed-width"
    ISOTONIC = "isotonic"
    SCALING_BINNING = "scaling-binning"


class EdgeIndexArray(BaseModel):
    """1-based order-statistic positions (A_0, ..., A_B) with A_0 = 0, A_B = n + 1."""

    model_config = ConfigDict(frozen=True)

    n: int
    B: int
    indices: Tuple[int, ...]

    @model_validator(mode="after")
    def _check(self):
        if len(self.indices) != self.B + 1:
            raise ValueError("need B+1 indices")
        if self.indices[0] != 0 or self.indices[-1] != self.n + 1:
            raise ValueError("indices must start at 0 and end at n+1")
        return self


class RandomizationParams(BaseModel):
    """Perturbation size and the stream supplying U_i and V_b."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    delta: float = Field(default=CalibrationConfig.DEFAULT_DELTA, gt=0.0)
    rng: SeededRng


def uniform_mass_edges(n: int, B: int) -> EdgeIndexArray:
    if B < 1:
        raise InvalidConfigurationError(f"need at least one bin, got B={B}")
    if n < 2 * B:
        raise InvalidConfigurationError(
            f"uniform-mass binning requires n ≥ 2B (n={n}, B={B})"
        )
    # ceil(b(n+1)/B) in exact integer arithmetic
    inner = [-(-b * (n + 1) // B) for b in range(1, B)]
    return EdgeIndexArray(n=n, B=B, indices=(0, *inner, n + 1))


def _uniform_mass_fit(
    scores: np.ndarray,
    values: np.ndarray,
    B: int,
    include_boundary: bool,
) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    """Edges at S_(A_b) and per-bin means of ``values`` at sorted positions l+1 .. u-1.

    With ``include_boundary`` the mean of bins b < B also takes the value at
    position u.
    """
    n = scores.shape[0]
    A = uniform_mass_edges(n, B).indices
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    sorted_values = values[order]

    edges = [0.0]
    edges.extend(float(sorted_scores[A[b] - 1]) for b in range(1, B))
    edges.append(1.0)

    biases = []
    for b in range(1, B + 1):
        lo, hi = A[b - 1], A[b]
        stop = hi if include_boundary and b < B else hi - 1
        # 1-based positions lo+1 .. stop are 0-based slice [lo, stop)
        if stop - lo < 1:
            raise InvalidConfigurationError(f"bin {b} has no samples to average")
        biases.append(float(np.mean(sorted_values[lo:stop])))
    return tuple(edges), tuple(biases)


def fit_umd(data: Dataset, B: int) -> BinningModel:
    """Uniform-mass binning without sample splitting.

    Scores are assumed tie-free; route tied scores through
    :func:`perturb_scores` first.
    """
    edges, biases = _uniform_mass_fit(data.scores, data.labels.astype(float), B, False)
    return BinningModel(edges=edges, biases=biases)


def fit_umd_original(data: Dataset, B: int) -> BinningModel:
    """As :func:`fit_umd`, but bins b < B also average the boundary label Y_(u)."""
    edges, biases = _uniform_mass_fit(data.scores, data.labels.astype(float), B, True)
    return BinningModel(edges=edges, biases=biases)


def _draw_distinct(base: np.ndarray, delta: float, rng: SeededRng, what: str) -> np.ndarray:
    """(base + delta * u) / (1 + delta), redrawing u wherever outputs collide."""
    u = rng.uniform(base.shape[0])
    out = (base + delta * u) / (1.0 + delta)
    for _ in range(100):
        _, first = np.unique(out, return_index=True)
        if first.shape[0] == out.shape[0]:
            return out
        collided = np.setdiff1d(np.arange(out.shape[0]), first)
        u[collided] = rng.uniform(collided.shape[0])
        out[collided] = (base[collided] + delta * u[collided]) / (1.0 + delta)
    raise FitError(f"delta={delta!r} is too small to separate the {what}")


def perturb_scores(data: Dataset, params: RandomizationParams) -> Dataset:
    """Replace every score s with (s + delta * u) / (1 + delta), u ~ Uniform[0, 1]."""
    perturbed = _draw_distinct(data.scores, params.delta, params.rng, "scores")
    return data.with_scores(perturbed)


def ensure_tie_free(data: Dataset, params: RandomizationParams) -> Dataset:
    """Perturb only when two scores coincide."""
    if np.unique(data.scores).shape[0] == data.n:
        return data
    logger.debug("Breaking score ties with delta=%g", params.delta)
    return perturb_scores(data, params)


def fit_randomized_umd(data: Dataset, B: int, params: RandomizationParams) -> BinningModel:
    """Randomized UMD: perturbed scores, then perturbed biases.

    The biases are pairwise distinct and each lies within delta of the
    un-randomized estimate. Queries on the returned model are perturbed too.
    """
    uniform_mass_edges(data.n, B)
    perturbed = perturb_scores(data, params)
    edges, biases = _uniform_mass_fit(
        perturbed.scores, perturbed.labels.astype(float), B, False
    )
    randomized = _draw_distinct(np.asarray(biases), params.delta, params.rng, "biases")
    return BinningModel(
        edges=edges,
        biases=tuple(float(b) for b in randomized),
        query_delta=params.delta,
    )


def fit_ums(
    data: Dataset,
    B: int,
    split_fraction: float = CalibrationConfig.DEFAULT_SPLIT_FRACTION,
    rng: Optional[SeededRng] = None,
) -> BinningModel:
    """Uniform-mass binning with sample splitting.

    ceil(split_fraction * n) randomly chosen points define the edges; the
    remaining points estimate the biases.
    """
    if not 0.0 < split_fraction < 1.0:
        raise InvalidConfigurationError(
            f"split_fraction must lie in (0, 1), got {split_fraction}"
        )
    rng = rng or SeededRng(CalibrationConfig.DEFAULT_SEED)
    n1 = int(np.ceil(split_fraction * data.n))
    if n1 >= data.n:
        raise InvalidConfigurationError(
            f"split_fraction={split_fraction} leaves no points for bias estimation"
        )
    order = rng.permutation(data.n)
    first, second = data.subset(order[:n1]), data.subset(order[n1:])

    A = uniform_mass_edges(first.n, B).indices
    sorted_scores = np.sort(first.scores, kind="stable")
    edges = (0.0, *(float(sorted_scores[A[b] - 1]) for b in range(1, B)), 1.0)

    partial = BinningModel(edges=edges, biases=(0.0,) * B)
    bins = assign_bins(partial, second.scores) - 1
    counts = np.bincount(bins, minlength=B)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise FitError(f"bin {int(empty[0]) + 1} received no second-split points")
    sums = np.bincount(bins, weights=second.labels.astype(float), minlength=B)
    return BinningModel(edges=edges, biases=tuple(float(x) for x in sums / counts))


def fit_fixed_width(data: Dataset, B: int) -> BinningModel:
    """B bins of width 1/B; empty bins predict their midpoint (2b - 1) / 2B."""
    if B < 1:
        raise InvalidConfigurationError(f"need at least one bin, got B={B}")
    edges = tuple(float(e) for e in np.linspace(0.0, 1.0, B + 1))
    partial = BinningModel(edges=edges, biases=(0.0,) * B)
    bins = assign_bins(partial, data.scores) - 1
    counts = np.bincount(bins, minlength=B)
    sums = np.bincount(bins, weights=data.labels.astype(float), minlength=B)

    biases = []
    for b in range(B):
        if counts[b] > 0:
            biases.append(float(sums[b] / counts[b]))
        else:
            biases.append((2 * (b + 1) - 1) / (2 * B))
    return BinningModel(edges=edges, biases=tuple(biases))


def pool_adjacent_violators(values: Sequence[float], weights: Sequence[float]):
    """Blocks (start, stop, mean, weight) of the weighted isotonic fit.

    Adjacent blocks with equal means are merged, so block means are
    strictly increasing.
    """
    blocks = []
    for index, (value, weight) in enumerate(zip(values, weights)):
        start, mean, total = index, float(value), float(weight)
        while blocks and blocks[-1][2] >= mean:
            prev_start, _, prev_mean, prev_total = blocks.pop()
            mean = (prev_mean * prev_total + mean * total) / (prev_total + total)
            total += prev_total
            start = prev_start
        blocks.append((start, index + 1, mean, total))
    return blocks


def fit_isotonic(data: Dataset) -> BinningModel:
    """Isotonic regression of labels on scores; level sets become bins."""
    order = np.argsort(data.scores, kind="stable")
    scores = data.scores[order]
    labels = data.labels[order].astype(float)

    # tied scores share one value
    unique_scores, first, counts = np.unique(scores, return_index=True, return_counts=True)
    sums = np.add.reduceat(labels, first)
    blocks = pool_adjacent_violators(sums / counts, counts)

    edges = [0.0]
    for (_, stop, _, _), (start, _, _, _) in zip(blocks, blocks[1:]):
        edges.append(float((unique_scores[stop - 1] + unique_scores[start]) / 2.0))
    edges.append(1.0)
    biases = tuple(min(1.0, max(0.0, block[2])) for block in blocks)
    return BinningModel(edges=tuple(edges), biases=biases)


def fit_scaling_binning(data: Dataset, scaled_scores, B: int) -> BinningModel:
    """UMD edges on the raw scores; biases average the scaled scores instead of labels."""
    scaled = np.asarray(scaled_scores, dtype=float)
    if scaled.shape != data.scores.shape:
        raise InvalidConfigurationError(
            f"{scaled.shape[0]} scaled scores for {data.n} samples"
        )
    if np.any(scaled < 0.0) or np.any(scaled > 1.0):
        raise InvalidConfigurationError("scaled scores must lie in [0, 1]")
    edges, biases = _uniform_mass_fit(data.scores, scaled, B, False)
    return BinningModel(edges=edges, biases=biases)


def fit_calibrator(
    kind,
    data: Dataset,
    B: int,
    rng: Optional[SeededRng] = None,
    delta: float = CalibrationConfig.DEFAULT_DELTA,
    split_fraction: float = CalibrationConfig.DEFAULT_SPLIT_FRACTION,
    scaled_scores=None,
) -> BinningModel:
    """Fit the calibrator named by ``kind``.

    UMD variants break score ties first. Scaling-binning without
    ``scaled_scores`` fits a Platt scaler on ``data`` itself.
    """
    kind = CalibratorKind(kind)
    rng = rng or SeededRng(CalibrationConfig.DEFAULT_SEED)
    params = RandomizationParams(delta=delta, rng=rng)
    logger.debug("Fitting %s with B=%d on n=%d", kind.value, B, data.n)

    if kind is CalibratorKind.UMD:
        return fit_umd(ensure_tie_free(data, params), B)
    if kind is CalibratorKind.UMD_ORIGINAL:
        return fit_umd_original(ensure_tie_free(data, params), B)
    if kind is CalibratorKind.UMD_RANDOMIZED:
        return fit_randomized_umd(data, B, params)
    if kind is CalibratorKind.UMS:
        return fit_ums(data, B, split_fraction, rng)
    if kind is CalibratorKind.FIXED_WIDTH:
        return fit_fixed_width(data, B)
    if kind is CalibratorKind.ISOTONIC:
        return fit_isotonic(data)

    if scaled_scores is None:
        from .scalers import fit_platt

        scaler = fit_platt(data.scores, data.labels)
        scaled_scores = scaler.apply(data.scores)
    tie_free = ensure_tie_free(data, params)
    return fit_scaling_binning(tie_free, scaled_scores, B)
