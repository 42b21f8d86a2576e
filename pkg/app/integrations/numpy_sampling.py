import logging
import math
import threading
from dataclasses import dataclass
from typing import List

import numpy as np
from cachetools import LRUCache, cached
from scipy.special import gammaln

from app.core.config import settings
from app.core.logspace import int_from_log
from app.models.offspring import OffspringLaw

logger = logging.getLogger(__name__)

_MIN_TABLE = 1024
# Tail-stage draws below this log size are converted through float ceil; above it through int_from_log.
_EXACT_FLOAT_LOG = 36.0

_table_cache = LRUCache(maxsize=settings.SIBUYA_TABLE_CACHE_SIZE)
_table_lock = threading.Lock()


@cached(cache=_table_cache, lock=_table_lock)
def sibuya_log_tail_table(alpha: float, size: int) -> np.ndarray:
    """
    log P(X > n) for n = 0..size under the Sibuya law.

    Built from the recurrence p_{k+1} = p_k (k - alpha) / (k + 1), which gives
    P(X > n) = prod_{k=1}^{n} (1 - alpha / k).
    """
    k = np.arange(1, size + 1, dtype=float)
    table = np.empty(size + 1)
    table[0] = 0.0
    np.cumsum(np.log1p(-alpha / k), out=table[1:])
    table.setflags(write=False)
    return table


def _table_size_for(alpha: float, min_log_u: float, cap: int) -> int:
    # log P(X > n) ~ -alpha log n - gammaln(1 - alpha)
    log_n = -(min_log_u + gammaln(1.0 - alpha)) / alpha
    if log_n >= math.log(cap):
        return cap
    needed = int(math.exp(log_n)) + 2
    size = _MIN_TABLE
    while size < needed:
        size *= 2
    return min(size, cap)


def _solve_tail(alpha: float, log_u: np.ndarray) -> np.ndarray:
    """Continuous n with log P(X > n) = log u, from the large-n expansion of the tail."""
    level = log_u + gammaln(1.0 - alpha)
    log_n = -level / alpha
    half = 0.5 * alpha * (1.0 - alpha)
    for _ in range(3):
        inv_n = np.exp(-log_n)
        g = -alpha * log_n - half * inv_n - level
        dg = -alpha + half * inv_n
        log_n = log_n - g / dg
    return log_n


@dataclass
class SibuyaDraws:
    """Sibuya draws split by sampling stage: table values and log sizes of tail-stage values."""

    table_values: np.ndarray
    tail_log_values: np.ndarray

    def _tail_ints(self) -> List[int]:
        small = self.tail_log_values < _EXACT_FLOAT_LOG
        ints = [int(v) for v in np.ceil(np.exp(self.tail_log_values[small]))]
        ints.extend(int_from_log(float(v)) for v in self.tail_log_values[~small])
        return ints

    def total(self) -> int:
        return int(self.table_values.sum(dtype=np.int64)) + sum(self._tail_ints())

    def values(self) -> List[int]:
        return [int(v) for v in self.table_values] + self._tail_ints()

    def log_values(self) -> np.ndarray:
        return np.concatenate([np.log(self.table_values.astype(float)), self.tail_log_values])


def draw_sibuya(alpha: float, size: int, rng: np.random.Generator, cap: int = None) -> SibuyaDraws:
    """
    Exact inverse-CDF draws from the Sibuya law.

    The first stage searches a cumulative tail table capped at `cap`; uniforms
    falling beyond the table are resolved from the tail formula.
    """
    cap = cap or settings.SIBUYA_TABLE_CAP
    u = 1.0 - rng.random(size)  # (0, 1]
    log_u = np.log(u)
    if size == 0:
        return SibuyaDraws(np.zeros(0, dtype=np.int64), np.zeros(0))

    table_size = _table_size_for(alpha, float(log_u.min()), cap)
    table = sibuya_log_tail_table(alpha, table_size)
    # X = min{n >= 1 : log P(X > n) <= log u}
    idx = np.searchsorted(-table[1:], -log_u, side="left") + 1
    in_table = idx <= table_size
    tail_log = _solve_tail(alpha, log_u[~in_table])
    tail_log = np.maximum(tail_log, math.log(table_size + 1))
    return SibuyaDraws(idx[in_table].astype(np.int64), tail_log)


def sum_offspring(law: OffspringLaw, count: int, rng: np.random.Generator, cap: int = None) -> int:
    """Exact sum of `count` independent offspring draws."""
    if law.is_sibuya:
        return draw_sibuya(law.alpha, count, rng, cap).total()
    counts = rng.multinomial(count, law.support_weights)
    return int(np.dot(counts.astype(object), law.support.astype(object)))


def draw_offspring(law: OffspringLaw, size: int, rng: np.random.Generator, cap: int = None) -> List[int]:
    """Individual offspring draws, in draw order for finite laws."""
    if law.is_sibuya:
        return draw_sibuya(law.alpha, size, rng, cap).values()
    idx = np.searchsorted(law.cdf, rng.random(size), side="right")
    return [int(k) for k in np.minimum(idx, law.cdf.size - 1)]


def sample_log_positive_stable(alpha: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """
    log of one-sided alpha-stable variates with Laplace transform exp(-lambda^alpha).

    Uses the uniform/exponential trigonometric construction
    S = sin(aU) sin((1-a)U)^{(1-a)/a} / (sin(U)^{1/a} E^{(1-a)/a}).
    """
    u = math.pi * (1.0 - rng.random(size))  # (0, pi]
    e = np.maximum(rng.standard_exponential(size), np.finfo(float).tiny)
    ratio = (1.0 - alpha) / alpha
    return (
        np.log(np.sin(alpha * u))
        + ratio * np.log(np.sin((1.0 - alpha) * u))
        - np.log(np.sin(u)) / alpha
        - ratio * np.log(e)
    )
