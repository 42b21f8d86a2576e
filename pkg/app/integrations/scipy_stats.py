import logging
import math
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from app.core.config import settings
from app.core.errors import ModelValidationError
from app.schemas.limits import KSResult, TwoSampleKSResult

logger = logging.getLogger(__name__)


def uniform_cdf(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0.0, 1.0)


def exponential_cdf(x: np.ndarray) -> np.ndarray:
    return -np.expm1(-np.maximum(x, 0.0))


def ks_critical_95(n: int) -> float:
    return settings.KS_CRITICAL_COEFF / math.sqrt(n)


def ks_statistic(sample: Sequence[float], cdf: Callable[[np.ndarray], np.ndarray]) -> KSResult:
    """
    One-sample KS distance sup |ECDF - cdf|, checked on both sides of every step.

    Args:
        sample: Observations
        cdf: Vectorized distribution function

    Returns:
        KSResult with the 95% critical value 1.358 / sqrt(n) and the exact p-value

    Raises:
        ModelValidationError: on an empty sample
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n == 0:
        raise ModelValidationError("KS statistic requires a nonempty sample")
    F = cdf(x)
    i = np.arange(1, n + 1, dtype=float)
    d_plus = float(np.max(i / n - F))
    d_minus = float(np.max(F - (i - 1.0) / n))
    D = max(d_plus, d_minus)
    critical = ks_critical_95(n)
    p_value = float(stats.kstwo.sf(D, n))
    return KSResult(D=D, n=n, critical_95=critical, p_value=p_value, passed=D <= critical)


def ks_two_sample(first: Sequence[float], second: Sequence[float]) -> TwoSampleKSResult:
    """Two-sample KS distance through scipy.stats.ks_2samp."""
    if len(first) == 0 or len(second) == 0:
        raise ModelValidationError("two-sample KS requires nonempty samples")
    result = stats.ks_2samp(np.asarray(first, dtype=float), np.asarray(second, dtype=float))
    return TwoSampleKSResult(D=float(result.statistic), n1=len(first), n2=len(second), p_value=float(result.pvalue))


def empirical_cdf(sample: Sequence[float]) -> Callable[[np.ndarray], np.ndarray]:
    """Right-continuous ECDF of the sample."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size

    def cdf(points: np.ndarray) -> np.ndarray:
        return np.searchsorted(x, np.asarray(points, dtype=float), side="right") / n

    return cdf
