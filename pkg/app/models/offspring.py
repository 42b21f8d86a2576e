import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.errors import AssumptionViolation

logger = logging.getLogger(__name__)


class LawFamily(str, Enum):
    SIBUYA = "sibuya"
    FINITE = "finite"


@dataclass(frozen=True)
class OffspringLaw:
    """
    An offspring distribution on the positive integers.

    SIBUYA laws have pgf 1 - (1 - s)^alpha with alpha in (0, 1); FINITE laws
    carry an explicit pmf indexed from 0. Instances are immutable and safe to
    share between workers.
    """

    family: LawFamily
    alpha: Optional[float] = None
    weights: Tuple[float, ...] = ()
    strict: bool = field(default=True, compare=False)

    def __post_init__(self):
        if self.family == LawFamily.SIBUYA:
            if self.alpha is None or not (0.0 < self.alpha < 1.0):
                raise AssumptionViolation(f"alpha must lie strictly inside (0, 1), got {self.alpha}")
            return

        p = np.asarray(self.weights, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise AssumptionViolation("weights must be a nonempty list")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise AssumptionViolation("weights must be finite and nonnegative")
        if abs(p.sum() - 1.0) > settings.PMF_SUM_TOL:
            raise AssumptionViolation(f"weights must sum to 1, got {p.sum():.17g}")
        if p[0] > 0:
            if self.strict:
                raise AssumptionViolation(f"A1 violated: p_0 = {p[0]:.6g} > 0")
            logger.warning(f"Relaxed law admitted with p_0 = {p[0]:.6g}; limit theorems do not apply")
        if p.size > 1 and p[1] == 1.0:
            if self.strict:
                raise AssumptionViolation("p_1=1: degenerate law f(s) = s is excluded")
            logger.warning("Relaxed law admitted with p_1 = 1 (f(s) = s)")

        support = np.nonzero(p)[0]
        object.__setattr__(self, "_p", p)
        object.__setattr__(self, "_support", support)
        object.__setattr__(self, "_support_weights", p[support])
        object.__setattr__(self, "_log_support_weights", np.log(p[support]))
        object.__setattr__(self, "_cdf", np.cumsum(p))

    @classmethod
    def sibuya(cls, alpha: float) -> "OffspringLaw":
        return cls(LawFamily.SIBUYA, alpha=float(alpha))

    @classmethod
    def finite(cls, weights: Sequence[float], strict: Optional[bool] = None) -> "OffspringLaw":
        if strict is None:
            strict = settings.ENFORCE_ASSUMPTIONS
        return cls(LawFamily.FINITE, weights=tuple(float(w) for w in weights), strict=strict)

    @classmethod
    def from_params(cls, params: Dict[str, Any], strict: Optional[bool] = None) -> "OffspringLaw":
        if params.get("family") == LawFamily.SIBUYA.value:
            return cls.sibuya(params["alpha"])
        return cls.finite(params["weights"], strict=strict)

    def to_params(self) -> Dict[str, Any]:
        if self.family == LawFamily.SIBUYA:
            return {"family": self.family.value, "alpha": self.alpha}
        return {"family": self.family.value, "weights": list(self.weights)}

    @property
    def is_sibuya(self) -> bool:
        return self.family == LawFamily.SIBUYA

    @property
    def stable_index(self) -> Optional[float]:
        """Index of the one-sided stable law attracting large sums, if any."""
        return self.alpha if self.is_sibuya else None

    @property
    def support(self) -> np.ndarray:
        return self._support

    @property
    def support_weights(self) -> np.ndarray:
        return self._support_weights

    @property
    def log_support_weights(self) -> np.ndarray:
        return self._log_support_weights

    @property
    def cdf(self) -> np.ndarray:
        return self._cdf

    @property
    def p0(self) -> float:
        return 0.0 if self.is_sibuya else float(self._p[0])

    @property
    def min_offspring(self) -> int:
        """Smallest k with p_k > 0 among k >= 1."""
        if self.is_sibuya:
            return 1
        positive = self._support[self._support > 0]
        return int(positive[0]) if positive.size else 0

    def p_at(self, k: int) -> float:
        if self.is_sibuya:
            if k < 1:
                return 0.0
            return math.exp(math.log(self.alpha) + _log_sibuya_ratio(self.alpha, k))
        return float(self._p[k]) if k < self._p.size else 0.0

    def mean(self) -> float:
        """m(xi_0); +inf for Sibuya laws."""
        if self.is_sibuya:
            return math.inf
        return float(np.dot(self._support, self._support_weights))

    def satisfies_a1(self) -> bool:
        return self.p0 == 0.0


def _log_sibuya_ratio(alpha: float, k: int) -> float:
    # p_k / p_1 = prod_{j=1}^{k-1} (j - alpha) / (j + 1)
    j = np.arange(1, k, dtype=float)
    return float(np.sum(np.log(j - alpha) - np.log(j + 1.0)))
