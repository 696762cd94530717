"""Closed-form distribution-free guarantees for uniform-mass binning.

Every formula uses the natural logarithm. With m = floor(n / B) calibration
points per bin, the conditional guarantee of UMD is

    eps = sqrt(log(2B / alpha) / (2 (m - 1)))

and the variants below add the boundary-label term 1/m, a randomization
slack delta, or drop the union bound over bins for the marginal statement.
"""

import logging
import math
from enum import Enum
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import stats

from .errors import InvalidConfigurationError

logger = logging.getLogger(__name__)


class GuaranteeVariant(str, Enum):
    UMD_CONDITIONAL = "umd-conditional"
    UMD_ORIGINAL_CONDITIONAL = "umd-original-conditional"
    RANDOMIZED_MARGINAL = "randomized-marginal"
    RANDOMIZED_CONDITIONAL = "randomized-conditional"
    ECE_EXPECTATION = "ece-expectation"


class GuaranteeResult(BaseModel):
    """One evaluated bound."""

    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(gt=0.0)
    n: int
    B: int
    alpha: Optional[float] = None
    delta: float = Field(default=0.0, ge=0.0)
    variant: GuaranteeVariant

    @model_validator(mode="after")
    def _check(self):
        if self.n < 2 * self.B:
            raise ValueError("n must be at least 2B")
        if self.alpha is not None and not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        return self

    def as_lines(self) -> List[str]:
        alpha = "" if self.alpha is None else f"{self.alpha:.6g}"
        return [
            f"variant={self.variant.value}",
            f"n={self.n}",
            f"B={self.B}",
            f"alpha={alpha}",
            f"delta={self.delta:.6g}",
            f"epsilon={self.epsilon:.6g}",
        ]


class UmsSampleComplexity(NamedTuple):
    n_total: int
    n_split1: int
    n_split2: int
    N_min: int


def check_bins(n: int, B: int) -> None:
    if B < 1:
        raise InvalidConfigurationError(f"need at least one bin, got B={B}")
    if n < 2 * B:
        raise InvalidConfigurationError(f"the guarantee requires n ≥ 2B (n={n}, B={B})")


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise InvalidConfigurationError(f"alpha must lie in (0, 1), got {alpha}")


def _width(n: int, B: int, numerator: float) -> float:
    return math.sqrt(math.log(numerator) / (2.0 * (n // B - 1)))


def eps_umd(n: int, B: int, alpha: float) -> float:
    """Conditional-calibration width of UMD."""
    check_bins(n, B)
    _check_alpha(alpha)
    return _width(n, B, 2.0 * B / alpha)


def eps_umd_original(n: int, B: int, alpha: float) -> float:
    """Width for the variant that keeps the boundary label: eps_umd + 1/floor(n/B)."""
    return eps_umd(n, B, alpha) + 1.0 / (n // B)


def eps_randomized(n: int, B: int, alpha: float, delta: float = 0.0, mode: str = "marginal") -> float:
    """Randomized-UMD widths: log(2/alpha) for marginal, log(2B/alpha) for conditional, plus delta."""
    check_bins(n, B)
    _check_alpha(alpha)
    if delta < 0.0:
        raise InvalidConfigurationError(f"delta must be nonnegative, got {delta}")
    if mode == "marginal":
        return _width(n, B, 2.0 / alpha) + delta
    if mode == "conditional":
        return _width(n, B, 2.0 * B / alpha) + delta
    raise InvalidConfigurationError(f"mode must be 'marginal' or 'conditional', got {mode!r}")


def ece_expectation_bound(n: int, B: int, delta: float = 0.0) -> float:
    """Bound on the expected lp-ECE (p in [1, 2]) of randomized UMD: sqrt(B / 2n) + delta."""
    check_bins(n, B)
    return math.sqrt(B / (2.0 * n)) + delta


def hoeffding_halfwidth(m: int, t: float) -> float:
    """Two-sided Hoeffding half-width for a mean of m values in [0, 1] at failure level t."""
    if m < 1:
        raise InvalidConfigurationError(f"need at least one sample, got m={m}")
    if not 0.0 < t < 1.0:
        raise InvalidConfigurationError(f"failure level must lie in (0, 1), got {t}")
    return math.sqrt(math.log(2.0 / t) / (2.0 * m))


def epsilon_for(
    variant, n: int, B: int, alpha: Optional[float] = None, delta: float = 0.0
) -> float:
    variant = GuaranteeVariant(variant)
    if variant is GuaranteeVariant.UMD_CONDITIONAL:
        return eps_umd(n, B, alpha)
    if variant is GuaranteeVariant.UMD_ORIGINAL_CONDITIONAL:
        return eps_umd_original(n, B, alpha)
    if variant is GuaranteeVariant.RANDOMIZED_MARGINAL:
        return eps_randomized(n, B, alpha, delta, "marginal")
    if variant is GuaranteeVariant.RANDOMIZED_CONDITIONAL:
        return eps_randomized(n, B, alpha, delta, "conditional")
    return ece_expectation_bound(n, B, delta)


def guarantee(
    variant, n: int, B: int, alpha: Optional[float] = None, delta: float = 0.0
) -> GuaranteeResult:
    variant = GuaranteeVariant(variant)
    epsilon = epsilon_for(variant, n, B, alpha, delta)
    return GuaranteeResult(
        epsilon=epsilon,
        n=n,
        B=B,
        alpha=None if variant is GuaranteeVariant.ECE_EXPECTATION else alpha,
        delta=delta,
        variant=variant,
    )


def _smallest_n(width: Callable[[int], float], target: float, lower: int) -> int:
    """Smallest n >= lower with width(n) <= target; width is nonincreasing in n."""
    if width(lower) <= target:
        return lower
    upper = 2 * lower
    while width(upper) > target:
        upper *= 2
    low, high = lower, upper  # width(low) > target >= width(high)
    while high - low > 1:
        middle = (low + high) // 2
        if width(middle) <= target:
            high = middle
        else:
            low = middle
    # floor(n / B) makes the width flat between multiples of B; confirm by scanning down
    while high - 1 >= lower and width(high - 1) <= target:
        high -= 1
    return high


def required_n(
    epsilon: float,
    alpha: Optional[float],
    B: int,
    variant,
    delta: float = 0.0,
) -> int:
    """Smallest n >= 2B whose bound for ``variant`` is at most ``epsilon``."""
    variant = GuaranteeVariant(variant)
    if B < 1:
        raise InvalidConfigurationError(f"need at least one bin, got B={B}")
    if variant is not GuaranteeVariant.ECE_EXPECTATION:
        _check_alpha(alpha)
    floor_term = delta if variant in (
        GuaranteeVariant.RANDOMIZED_MARGINAL,
        GuaranteeVariant.RANDOMIZED_CONDITIONAL,
        GuaranteeVariant.ECE_EXPECTATION,
    ) else 0.0
    if epsilon <= floor_term:
        raise InvalidConfigurationError(
            f"epsilon={epsilon} is not achievable: it must exceed delta={floor_term}"
        )
    return _smallest_n(lambda n: epsilon_for(variant, n, B, alpha, delta), epsilon, 2 * B)


def bound_curve(n: int, alpha: float, B_range: Sequence[int]) -> List[Tuple[int, float]]:
    """eps_umd(n, B, alpha) for every B in ``B_range`` with n >= 2B; other B are skipped."""
    curve = []
    for B in B_range:
        if B < 1 or n < 2 * B:
            logger.info("Skipping B=%d: infeasible for n=%d", B, n)
            continue
        curve.append((B, eps_umd(n, B, alpha)))
    return curve


def suggest_bins(n: int, alpha: float, target_epsilon: float) -> Optional[int]:
    """Largest B whose conditional width meets ``target_epsilon``; None if even B=1 fails."""
    best = None
    for B, epsilon in bound_curve(n, alpha, range(1, n // 2 + 1)):
        if epsilon <= target_epsilon:
            best = B
    return best


def ums_required_n(
    epsilon: float, alpha: float, B: int, c: float = 100.0
) -> UmsSampleComplexity:
    """Sample size behind the Hoeffding version of the sample-splitting guarantee.

    Half the failure budget goes to the per-bin Hoeffding bound, which needs
    N_min points in the smallest bin. The other half is split evenly between
    the bin-mass lemma (first split of c B log(10B / (alpha/4)) points) and
    the bin-count concentration on the second split, where n' must satisfy
    n'/2B - sqrt(n' log(2B / (alpha/4)) / 2) >= N_min. Each stage rounds up.
    """
    _check_alpha(alpha)
    if B < 1:
        raise InvalidConfigurationError(f"need at least one bin, got B={B}")
    if epsilon <= 0.0 or c <= 0.0:
        raise InvalidConfigurationError("epsilon and c must be positive")

    N_min = math.ceil(math.log(2.0 * B / (alpha / 2.0)) / (2.0 * epsilon**2))
    n_split1 = math.ceil(c * B * math.log(10.0 * B / (alpha / 4.0)))

    log_term = math.log(2.0 * B / (alpha / 4.0))

    def slack(n_prime: int) -> float:
        return n_prime / (2.0 * B) - math.sqrt(n_prime * log_term / 2.0)

    # slack(n') grows once sqrt(n') exceeds B sqrt(2 log_term)/2; solve the quadratic in sqrt(n')
    a = 1.0 / (2.0 * B)
    b = math.sqrt(log_term / 2.0)
    root = (b + math.sqrt(b * b + 4.0 * a * N_min)) / (2.0 * a)
    n_split2 = max(1, math.ceil(root**2) - 2)
    while slack(n_split2) < N_min:
        n_split2 += 1

    return UmsSampleComplexity(
        n_total=n_split1 + n_split2,
        n_split1=n_split1,
        n_split2=n_split2,
        N_min=N_min,
    )


def clopper_pearson(failures: int, trials: int, confidence: float = 0.99) -> Tuple[float, float]:
    """Exact two-sided binomial confidence interval for a failure rate."""
    if trials == 0:
        return 0.0, 1.0
    tail = (1.0 - confidence) / 2.0
    lower = 0.0 if failures == 0 else float(stats.beta.ppf(tail, failures, trials - failures + 1))
    upper = 1.0 if failures == trials else float(stats.beta.ppf(1.0 - tail, failures + 1, trials - failures))
    return lower, upper
