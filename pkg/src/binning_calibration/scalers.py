"""Logistic-regression scorers and Platt scaling.

Both are fit by unregularized maximum likelihood with damped Newton steps.
When the curvature is not usable the step falls back to the gradient.
"""

import logging
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.special import expit, log_expit

from .errors import DataError, InvalidConfigurationError

logger = logging.getLogger(__name__)

# weights beyond this magnitude are treated as diverging
_DIVERGENCE_LIMIT = 1e8

# relative slack for log-likelihood comparisons near the optimum
_ROUNDING = 1e-14


class LinearScorer(BaseModel):
    """sigmoid(w . x + b)."""

    model_config = ConfigDict(frozen=True)

    weights: Tuple[float, ...]
    intercept: float
    converged: bool = True
    iterations: int = 0
    log_likelihood_trace: Tuple[float, ...] = ()

    def apply(self, features) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=float))
        if features.shape[1] != len(self.weights):
            raise InvalidConfigurationError(
                f"scorer expects {len(self.weights)} features, got {features.shape[1]}"
            )
        return expit(features @ np.asarray(self.weights) + self.intercept)


class SigmoidScaler(BaseModel):
    """sigmoid(a * s + b) of a score s."""

    model_config = ConfigDict(frozen=True)

    a: float
    b: float
    converged: bool = True
    iterations: int = 0
    log_likelihood_trace: Tuple[float, ...] = ()

    def apply(self, scores) -> np.ndarray:
        return expit(self.a * np.asarray(scores, dtype=float) + self.b)


def _design(features: np.ndarray) -> np.ndarray:
    return np.hstack([features, np.ones((features.shape[0], 1))])


def log_likelihood(params: np.ndarray, design: np.ndarray, labels: np.ndarray) -> float:
    """Bernoulli log-likelihood; ``params`` holds the weights then the intercept."""
    z = design @ params
    return float(np.sum(labels * log_expit(z) + (1.0 - labels) * log_expit(-z)))


def log_likelihood_gradient(
    params: np.ndarray, design: np.ndarray, labels: np.ndarray
) -> np.ndarray:
    return design.T @ (labels - expit(design @ params))


def _is_separated(params: np.ndarray, design: np.ndarray, labels: np.ndarray) -> bool:
    margins = (2.0 * labels - 1.0) * (design @ params)
    return bool(np.all(margins > 0.0))


def _validate(features: np.ndarray, labels: np.ndarray) -> None:
    if features.ndim != 2:
        raise DataError("features must be a two-dimensional matrix")
    if features.shape[0] != labels.shape[0]:
        raise DataError(f"{features.shape[0]} rows but {labels.shape[0]} labels")
    if features.shape[0] == 0:
        raise DataError("cannot fit on an empty dataset")
    if not np.all(np.isfinite(features)):
        raise DataError("features must be finite")
    if not np.all((labels == 0) | (labels == 1)):
        raise DataError("labels must be 0 or 1")


def fit_logistic(
    features,
    labels,
    max_iters: int = 100,
    tol: float = 1e-8,
) -> LinearScorer:
    """Maximum-likelihood logistic regression.

    Stops when the gradient's infinity norm is at most ``tol`` or after
    ``max_iters`` iterations. The training log-likelihood never decreases
    between iterations beyond floating-point rounding. ``converged`` is
    false for separable data, where the maximizer does not exist.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=float)
    _validate(features, labels)

    design = _design(features)
    params = np.zeros(design.shape[1])
    current = log_likelihood(params, design, labels)
    trace = [current]
    one_class = labels.min() == labels.max()
    converged = False
    iterations = 0

    for iterations in range(1, max_iters + 1):
        gradient = log_likelihood_gradient(params, design, labels)
        if np.max(np.abs(gradient)) <= tol:
            converged = True
            iterations -= 1
            break

        p = expit(design @ params)
        curvature = design.T @ (design * (p * (1.0 - p))[:, None])
        try:
            direction = np.linalg.solve(curvature, gradient)
            if not np.all(np.isfinite(direction)) or gradient @ direction <= 0.0:
                direction = gradient
        except np.linalg.LinAlgError:
            direction = gradient

        step = 1.0
        while step > 1e-12:
            candidate = params + step * direction
            if np.all(np.isfinite(candidate)):
                value = log_likelihood(candidate, design, labels)
                if value >= current - _ROUNDING * abs(current):
                    break
            step /= 2.0
        else:
            logger.debug("Line search made no progress at iteration %d", iterations)
            trace.append(current)
            break

        params, current = candidate, value
        trace.append(current)
        if np.max(np.abs(params)) > _DIVERGENCE_LIMIT:
            logger.debug("Weights diverging at iteration %d", iterations)
            break
    else:
        gradient = log_likelihood_gradient(params, design, labels)
        converged = bool(np.max(np.abs(gradient)) <= tol)

    if converged and (one_class or _is_separated(params, design, labels)):
        converged = False
    if not converged:
        logger.warning(
            "Logistic fit did not converge after %d iterations (separable data?)",
            iterations,
        )

    return LinearScorer(
        weights=tuple(float(w) for w in params[:-1]),
        intercept=float(params[-1]),
        converged=converged,
        iterations=iterations,
        log_likelihood_trace=tuple(trace),
    )


def fit_platt(scores, labels, max_iters: int = 100, tol: float = 1e-8) -> SigmoidScaler:
    """One-feature logistic regression on the score itself."""
    scores = np.asarray(scores, dtype=float)
    scorer = fit_logistic(scores[:, None], labels, max_iters=max_iters, tol=tol)
    return SigmoidScaler(
        a=scorer.weights[0],
        b=scorer.intercept,
        converged=scorer.converged,
        iterations=scorer.iterations,
        log_likelihood_trace=scorer.log_likelihood_trace,
    )


# Plain-text persistence: kind tag, then coefficients.


def format_scorer(scorer: Union[LinearScorer, SigmoidScaler]) -> str:
    if isinstance(scorer, LinearScorer):
        return "\n".join(
            [
                "logistic",
                " ".join(repr(w) for w in scorer.weights),
                repr(scorer.intercept),
            ]
        ) + "\n"
    return f"platt\n{scorer.a!r} {scorer.b!r}\n"


def parse_scorer(text: str) -> Union[LinearScorer, SigmoidScaler]:
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines:
        raise DataError("empty scorer file")
    try:
        if lines[0] == "logistic" and len(lines) == 3:
            return LinearScorer(
                weights=tuple(float(t) for t in lines[1].split()),
                intercept=float(lines[2]),
            )
        if lines[0] == "platt" and len(lines) == 2:
            a, b = (float(t) for t in lines[1].split())
            return SigmoidScaler(a=a, b=b)
    except ValueError as e:
        raise DataError(f"malformed scorer file: {e}") from e
    raise DataError(f"unknown scorer format starting with {lines[0]!r}")


def save_scorer(scorer: Union[LinearScorer, SigmoidScaler], path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        path.write_text(format_scorer(scorer))
    except OSError as e:
        raise DataError(f"cannot write scorer file {path}: {e}") from e
    return path


def load_scorer(path: Union[str, Path]) -> Union[LinearScorer, SigmoidScaler]:
    path = Path(path)
    try:
        return parse_scorer(path.read_text())
    except OSError as e:
        raise DataError(f"cannot read scorer file {path}: {e}") from e
