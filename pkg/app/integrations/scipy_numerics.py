import logging
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from app.core.config import settings
from app.core.errors import InversionError

logger = logging.getLogger(__name__)

_EPS = float(np.finfo(float).eps)


def bracketed_root(fn: Callable[[float], float], lo: float, hi: float, label: str = "root") -> float:
    """
    Root of a monotone increasing function on [lo, hi] by Brent's method.

    An endpoint already on the wrong side of zero (rounding noise at a tight
    bracket) is returned as is.

    Raises:
        InversionError: if the iteration cap is reached before the tolerance.
    """
    f_lo = fn(lo)
    if f_lo >= 0.0:
        return lo
    f_hi = fn(hi)
    if f_hi <= 0.0:
        return hi

    root, result = brentq(
        fn,
        lo,
        hi,
        xtol=1e-300,
        rtol=max(settings.INVERSION_RTOL, 4.0 * _EPS),
        maxiter=settings.INVERSION_MAX_ITER,
        full_output=True,
        disp=False,
    )
    if not result.converged:
        width = (root - lo) if fn(root) > 0.0 else (hi - root)
        logger.error(f"Error inverting {label}: {result.flag}")
        raise InversionError(f"{label} inversion did not converge", bracket_width=abs(width), iterations=result.iterations)
    return float(root)


def log_weighted_power_sum(log_weights: np.ndarray, powers: np.ndarray, log_base: float) -> float:
    """log sum_k w_k * base^k given log w_k and log base."""
    with np.errstate(invalid="ignore"):
        terms = log_weights + powers * log_base
    # 0 * -inf is nan for the k = 0 term
    terms = np.where(powers == 0, log_weights, terms)
    return float(logsumexp(terms))
