"""Domain types for calibrators and the prediction path shared by every binning method."""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import DataError

logger = logging.getLogger(__name__)


class ScoredSample(BaseModel):
    """A score in [0, 1] paired with a binary label."""

    model_config = ConfigDict(frozen=True)

    score: float = Field(ge=0.0, le=1.0)
    label: int = Field(ge=0, le=1)


class SeededRng:
    """Reproducible random stream.

    Two instances built from the same seed produce the same draws. Child
    streams derived with ``derive``/``spawn`` are independent of each other
    and of the parent.
    """

    def __init__(self, seed: Optional[Union[int, np.random.SeedSequence]] = None):
        if isinstance(seed, np.random.SeedSequence):
            self._sequence = seed
        else:
            self._sequence = np.random.SeedSequence(seed)
        self.generator = np.random.Generator(np.random.PCG64(self._sequence))

    @property
    def seed(self):
        return self._sequence.entropy

    def uniform(self, size: Optional[int] = None):
        return self.generator.uniform(0.0, 1.0, size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def choice(self, pool: np.ndarray, size: int) -> np.ndarray:
        return self.generator.choice(pool, size=size, replace=False)

    def spawn(self, count: int) -> List["SeededRng"]:
        return [SeededRng(child) for child in self._sequence.spawn(count)]

    def derive(self, *keys: int) -> "SeededRng":
        """Stream determined by this seed and ``keys`` only, not by draws made so far."""
        return SeededRng(
            np.random.SeedSequence(
                self._sequence.entropy,
                spawn_key=(*self._sequence.spawn_key, *keys),
            )
        )


def _frozen_array(values, dtype) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


class Dataset(BaseModel):
    """Scored calibration or test data stored column-wise."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    scores: np.ndarray
    labels: np.ndarray

    @field_validator("scores", mode="before")
    @classmethod
    def _coerce_scores(cls, value):
        scores = np.asarray(value, dtype=float)
        if scores.ndim != 1:
            raise ValueError("scores must be one-dimensional")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        if np.any(scores < 0.0) or np.any(scores > 1.0):
            raise ValueError("scores must lie in [0, 1]")
        return _frozen_array(scores, float)

    @field_validator("labels", mode="before")
    @classmethod
    def _coerce_labels(cls, value):
        labels = np.asarray(value)
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be 0 or 1")
        return _frozen_array(labels, np.int64)

    @model_validator(mode="after")
    def _check_lengths(self):
        if self.scores.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.scores.shape[0]} scores but {self.labels.shape[0]} labels"
            )
        if self.scores.shape[0] < 1:
            raise ValueError("a dataset needs at least one sample")
        return self

    @classmethod
    def from_samples(cls, samples: Sequence[ScoredSample]) -> "Dataset":
        return cls(
            scores=[sample.score for sample in samples],
            labels=[sample.label for sample in samples],
        )

    @property
    def n(self) -> int:
        return int(self.scores.shape[0])

    @property
    def samples(self) -> List[ScoredSample]:
        return [
            ScoredSample(score=float(s), label=int(y))
            for s, y in zip(self.scores, self.labels)
        ]

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(scores=self.scores[indices], labels=self.labels[indices])

    def with_scores(self, scores: np.ndarray) -> "Dataset":
        return Dataset(scores=scores, labels=self.labels)


class BinningModel(BaseModel):
    """Bin edges (e_0, ..., e_B) with one bias per bin.

    Bin b covers [e_{b-1}, e_b); the last bin is closed at 1. ``query_delta``
    is non-zero only for randomized fits, whose queries are perturbed the
    same way the calibration scores were.
    """

    model_config = ConfigDict(frozen=True)

    edges: Tuple[float, ...]
    biases: Tuple[float, ...]
    query_delta: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def _check_invariants(self):
        if len(self.biases) < 1:
            raise ValueError("a model needs at least one bin")
        if len(self.edges) != len(self.biases) + 1:
            raise ValueError(
                f"{len(self.edges)} edges for {len(self.biases)} bins, expected B+1"
            )
        if self.edges[0] != 0.0 or self.edges[-1] != 1.0:
            raise ValueError("first edge must be 0 and last edge must be 1")
        if any(b < a for a, b in zip(self.edges, self.edges[1:])):
            raise ValueError("edges must be nondecreasing")
        if any(not 0.0 <= bias <= 1.0 for bias in self.biases):
            raise ValueError("biases must lie in [0, 1]")
        return self

    @property
    def B(self) -> int:
        return len(self.biases)

    @property
    def is_randomized(self) -> bool:
        return self.query_delta > 0.0


def _check_scores(scores: np.ndarray) -> None:
    if not np.all(np.isfinite(scores)) or np.any(scores < 0.0) or np.any(scores > 1.0):
        bad = scores[~((scores >= 0.0) & (scores <= 1.0))]
        raise DataError(f"score {bad[0]!r} outside [0, 1]")


def assign_bins(model: BinningModel, scores) -> np.ndarray:
    """1-based bin index of every score."""
    scores = np.asarray(scores, dtype=float)
    _check_scores(scores)
    edges = np.asarray(model.edges)
    # number of edges <= score; the last bin is closed at 1
    bins = np.searchsorted(edges, scores, side="right")
    return np.minimum(bins, model.B)


def assign_bin(model: BinningModel, score: float) -> int:
    """The unique b with e_{b-1} <= score < e_b (score 1 maps to bin B)."""
    return int(assign_bins(model, np.array([score]))[0])


def perturb_query(scores: np.ndarray, delta: float, rng: "SeededRng") -> np.ndarray:
    """Apply s -> (s + delta * u) / (1 + delta) with fresh uniform draws."""
    u = rng.uniform(scores.shape[0])
    return (scores + delta * u) / (1.0 + delta)


def predict_many(model: BinningModel, scores, rng: Optional[SeededRng] = None) -> np.ndarray:
    """Predictions for many scores.

    Randomized models perturb each query score before binning and therefore
    need ``rng``.
    """
    scores = np.asarray(scores, dtype=float)
    _check_scores(scores)
    if model.is_randomized:
        if rng is None:
            raise ValueError("a randomized model needs an rng to perturb queries")
        scores = perturb_query(scores, model.query_delta, rng)
    biases = np.asarray(model.biases)
    return biases[assign_bins(model, scores) - 1]


def predict(model: BinningModel, score: float, rng: Optional[SeededRng] = None) -> float:
    """biases[assign_bin(model, score)]."""
    return float(predict_many(model, np.array([score]), rng)[0])


def bin_counts(model: BinningModel, scores) -> np.ndarray:
    """Number of scores falling in each of the B bins."""
    return np.bincount(assign_bins(model, scores) - 1, minlength=model.B)


# Plain-text persistence: B, edges, biases, optional "delta <value>".


def format_model(model: BinningModel) -> str:
    lines = [
        str(model.B),
        " ".join(repr(float(e)) for e in model.edges),
        " ".join(repr(float(b)) for b in model.biases),
    ]
    if model.is_randomized:
        lines.append(f"delta {model.query_delta!r}")
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> BinningModel:
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if len(lines) not in (3, 4):
        raise DataError(f"model file must have 3 or 4 lines, found {len(lines)}")
    try:
        B = int(lines[0])
        edges = tuple(float(token) for token in lines[1].split())
        biases = tuple(float(token) for token in lines[2].split())
        delta = 0.0
        if len(lines) == 4:
            tag, value = lines[3].split()
            if tag != "delta":
                raise ValueError(f"unknown tag {tag!r}")
            delta = float(value)
    except ValueError as e:
        raise DataError(f"malformed model file: {e}") from e
    if len(biases) != B:
        raise DataError(f"model file declares B={B} but lists {len(biases)} biases")
    try:
        return BinningModel(edges=edges, biases=biases, query_delta=delta)
    except ValueError as e:
        raise DataError(f"invalid model: {e}") from e


def save_model(model: BinningModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        path.write_text(format_model(model))
    except OSError as e:
        raise DataError(f"cannot write model file {path}: {e}") from e
    logger.info("Model with %d bins written to %s", model.B, path)
    return path


def load_model(path: Union[str, Path]) -> BinningModel:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise DataError(f"cannot read model file {path}: {e}") from e
    return parse_model(text)
