import logging
import math
from typing import List, Union

import numpy as np

from app.core.errors import BranchingError, CompositionError, DomainError, UnboundedDerivativeError
from app.core.logspace import ComplementCoord, TailScalar, log_one_minus_exp_neg, neg_log_one_minus, safe_exp
from app.integrations.scipy_numerics import bracketed_root, log_weighted_power_sum
from app.models.environment import Environment
from app.models.offspring import OffspringLaw

logger = logging.getLogger(__name__)

LOG_HALF = -math.log(2.0)
_LOG_LOG_TWO = math.log(math.log(2.0))
# Leading-term regimes of k and h: beyond these log s the first correction is below double precision.
_SIBUYA_ASYMPTOTIC_LOG_S = math.log(36.0)
_FINITE_ASYMPTOTIC_LOG_S = 30.0
# 1 - f(1 - u) = m u to double precision below this log u
_SERIES_LOG_U = -700.0


def _log1m_exp(log_a: float) -> float:
    """log(1 - e^{log_a}) for log_a <= 0."""
    if log_a >= 0.0:
        return -math.inf
    if log_a > LOG_HALF:
        return math.log(-math.expm1(log_a))
    return math.log1p(-math.exp(log_a))


def _check_unit(value: float, name: str, allow_one: bool = True) -> None:
    upper_ok = value <= 1.0 if allow_one else value < 1.0
    if not (0.0 <= value and upper_ok):
        bound = "]" if allow_one else ")"
        raise DomainError(f"{name} must lie in [0, 1{bound}, got {value}")


def _leading_term(law: OffspringLaw):
    """(m0, log p_{m0}) for the smallest positive offspring count."""
    if law.is_sibuya:
        return 1, math.log(law.alpha)
    m0 = law.min_offspring
    return m0, math.log(law.p_at(m0))


class PgfService:
    """
    Probability generating function algebra for offspring laws and environments.

    Arguments that approach 1 are carried in complement coordinate and the
    scales s of k / h in log coordinate, so n-fold compositions neither
    underflow nor cancel.
    """

    # --- single-law evaluation -------------------------------------------------

    def eval_f(self, law: OffspringLaw, s: float) -> float:
        """
        Evaluate f(s) = sum_k p_k s^k.

        Args:
            law: Offspring law
            s: Argument in [0, 1]

        Returns:
            f(s) in [0, 1]
        """
        _check_unit(s, "s")
        if s == 1.0:
            return 1.0
        if law.is_sibuya:
            return -math.expm1(law.alpha * math.log1p(-s))
        return float(np.dot(law.support_weights, s ** law.support))

    def log_eval_f(self, law: OffspringLaw, log_x: float) -> float:
        """log f(e^{log_x}), valid for arguments that underflow a double."""
        if log_x > 0.0:
            raise DomainError(f"log argument must be <= 0, got {log_x}")
        if log_x == 0.0:
            return 0.0
        if law.is_sibuya:
            if log_x < -36.0:
                return math.log(law.alpha) + log_x + math.log1p(0.5 * (1.0 - law.alpha) * safe_exp(log_x))
            return math.log(-math.expm1(law.alpha * _log1m_exp(log_x)))
        return log_weighted_power_sum(law.log_support_weights, law.support, log_x)

    def eval_f_complement(self, law: OffspringLaw, u: ComplementCoord) -> ComplementCoord:
        """
        Evaluate 1 - f(1 - u) without cancellation.

        Args:
            law: Offspring law
            u: Complement coordinate of the argument

        Returns:
            Complement coordinate of f(1 - u)
        """
        if law.is_sibuya:
            return ComplementCoord(law.alpha * u.log_u)
        return ComplementCoord(min(0.0, self._finite_log_complement(law, u.log_u)))

    def eval_f_prime(self, law: OffspringLaw, s: float) -> float:
        """
        Evaluate f'(s).

        Raises:
            UnboundedDerivativeError: for Sibuya laws at s = 1 or where the value overflows
        """
        _check_unit(s, "s")
        if law.is_sibuya:
            if s >= 1.0:
                raise UnboundedDerivativeError(f"f'(1-) is infinite for Sibuya alpha={law.alpha}")
            value = law.alpha * safe_exp((law.alpha - 1.0) * math.log1p(-s))
            if math.isinf(value):
                raise UnboundedDerivativeError(f"f'({s!r}) overflows for Sibuya alpha={law.alpha}")
            return value
        if s == 1.0:
            return law.mean()
        k = law.support[law.support > 0]
        w = law.support_weights[law.support > 0]
        return float(np.dot(k * w, s ** (k - 1)))

    def log_eval_f_prime_complement(self, law: OffspringLaw, u: ComplementCoord) -> float:
        """log f'(1 - u); +inf for Sibuya laws at u = 0."""
        if law.is_sibuya:
            if u.log_u == -math.inf:
                return math.inf
            return math.log(law.alpha) + (law.alpha - 1.0) * u.log_u
        positive = law.support > 0
        k = law.support[positive]
        log_w = np.log(k.astype(float)) + law.log_support_weights[positive]
        return log_weighted_power_sum(log_w, k - 1, _log1m_exp(u.log_u))

    # --- inversion ---------------------------------------------------------------

    def invert_f(self, law: OffspringLaw, x: float) -> float:
        """
        Solve f(s) = x for s.

        Args:
            law: Offspring law
            x: Value in [0, 1)

        Returns:
            s in [0, 1)

        Raises:
            DomainError: if x is outside [0, 1) or below p_0 for a relaxed law
            InversionError: if bracketing does not converge
        """
        _check_unit(x, "x")
        if x == 1.0:
            return 1.0
        if x == 0.0:
            if law.p0 > 0.0:
                raise DomainError(f"f(s) = 0 has no solution when p_0 = {law.p0}")
            return 0.0
        if law.is_sibuya:
            return -math.expm1(math.log1p(-x) / law.alpha)
        if x >= 0.5 or law.p0 > 0.0:
            log_u = self._invert_complement(law, math.log1p(-x))
            return -math.expm1(log_u)
        return math.exp(self._invert_log(law, math.log(x)))

    def invert_f_complement(self, law: OffspringLaw, v: ComplementCoord) -> ComplementCoord:
        """Complement coordinate of f^{-1}(1 - v)."""
        return ComplementCoord(min(0.0, self._invert_complement(law, v.log_u)))

    # --- k and h -------------------------------------------------------------------

    def eval_k(self, law: OffspringLaw, s: TailScalar) -> TailScalar:
        """
        Evaluate k(s) = -log f(e^{-s}).

        Args:
            law: Offspring law
            s: Positive scale in log coordinate

        Returns:
            k(s) in log coordinate
        """
        log_s = self._check_scale(s)
        if math.isinf(log_s):
            return s
        m0, log_p = _leading_term(law)
        if log_s > (_SIBUYA_ASYMPTOTIC_LOG_S if law.is_sibuya else _FINITE_ASYMPTOTIC_LOG_S):
            # k(s) = m0 s - log p_{m0} + O(e^{-s})
            return TailScalar(log_s + math.log(m0) + math.log1p(-log_p / (m0 * safe_exp(log_s))))

        if log_s < _LOG_LOG_TWO:
            log_v = self.eval_f_complement(law, ComplementCoord(log_one_minus_exp_neg(log_s))).log_u
            if log_v <= LOG_HALF:
                return TailScalar(neg_log_one_minus(log_v))
        log_f = self.log_eval_f(law, -math.exp(log_s))
        return TailScalar(math.log(-log_f))

    def eval_h(self, law: OffspringLaw, s: TailScalar) -> TailScalar:
        """
        Evaluate h(s) = -log f^{-1}(e^{-s}), the inverse of k.

        Args:
            law: Offspring law
            s: Positive scale in log coordinate

        Returns:
            h(s) in log coordinate

        Raises:
            InversionError: if the inner inversion does not converge
        """
        log_s = self._check_scale(s)
        if math.isinf(log_s):
            return s
        m0, log_p = _leading_term(law)
        if log_s > (_SIBUYA_ASYMPTOTIC_LOG_S if law.is_sibuya else _FINITE_ASYMPTOTIC_LOG_S):
            # h(s) = (s + log p_{m0}) / m0 + O(e^{-s / m0})
            return TailScalar(log_s - math.log(m0) + math.log1p(log_p / safe_exp(log_s)))

        if law.is_sibuya:
            return TailScalar(neg_log_one_minus(log_one_minus_exp_neg(log_s) / law.alpha))

        # f^{-1}(e^{-s}) <= 1/2 exactly when e^{-s} <= f(1/2)
        if law.p0 == 0.0 and -math.exp(log_s) <= self.log_eval_f(law, LOG_HALF):
            log_y = self._invert_log(law, -math.exp(log_s))
            return TailScalar(math.log(-log_y))
        log_u = self._invert_complement(law, log_one_minus_exp_neg(log_s))
        return TailScalar(neg_log_one_minus(log_u))

    # --- compositions ----------------------------------------------------------

    def compose_k_n(self, env: Environment, n: int, s: TailScalar) -> TailScalar:
        """k_n(env, s) = k_{xi_0}(k_{xi_1}(... k_{xi_{n-1}}(s)))."""
        self._check_n(n)
        value = s
        for i in reversed(range(n)):
            try:
                value = self.eval_k(env.law_at(i), value)
            except CompositionError:
                raise
            except BranchingError as e:
                logger.error(f"Error composing k at index {i}: {str(e)}")
                raise CompositionError(i, e) from e
        return value

    def h_path(self, env: Environment, n: int, s: TailScalar, stop_on_underflow: bool = False) -> List[TailScalar]:
        """
        [h_0(env, s), ..., h_n(env, s)] with h_0 = s.

        With stop_on_underflow the path ends at the last h whose log is finite, so it
        may be shorter than n + 1; otherwise the step after an underflow raises CompositionError.
        """
        self._check_n(n)
        path = [s]
        for i in range(n):
            try:
                value = self.eval_h(env.law_at(i), path[-1])
            except BranchingError as e:
                logger.error(f"Error composing h at index {i}: {str(e)}")
                raise CompositionError(i, e) from e
            if stop_on_underflow and not math.isfinite(value.log_value):
                logger.debug(f"h underflowed at environment index {i}")
                break
            path.append(value)
        return path

    def compose_h_n(self, env: Environment, n: int, s: TailScalar) -> TailScalar:
        """h_n(env, s) = h_{xi_{n-1}}(... h_{xi_0}(s)); h_{xi_0} is applied first."""
        return self.h_path(env, n, s)[-1]

    def compose_f_n(self, env: Environment, n: int, x: Union[float, ComplementCoord]) -> ComplementCoord:
        """
        f_n(env, x) = f_{xi_0}(... f_{xi_{n-1}}(x)), the quenched pgf of Z_n.

        Args:
            env: Environment
            n: Number of generations
            x: Argument as a plain real or complement coordinate

        Returns:
            Complement coordinate of f_n(env, x)
        """
        self._check_n(n)
        u = x if isinstance(x, ComplementCoord) else ComplementCoord.from_x(x)
        for i in reversed(range(n)):
            u = self.eval_f_complement(env.law_at(i), u)
        return u

    def compose_f_inverse_n(self, env: Environment, n: int, x: Union[float, ComplementCoord]) -> ComplementCoord:
        """f_n^{(-1)}(env, x) = f_{xi_{n-1}}^{-1}(... f_{xi_0}^{-1}(x)), in complement coordinate."""
        self._check_n(n)
        u = x if isinstance(x, ComplementCoord) else ComplementCoord.from_x(x)
        for i in range(n):
            try:
                u = self.invert_f_complement(env.law_at(i), u)
            except BranchingError as e:
                raise CompositionError(i, e) from e
        return u

    # --- defect ratio and regularity kernel ----------------------------------------

    def estimate_log_d(self, env: Environment, s: TailScalar, n_max: int) -> List[float]:
        """log h_{n+1}(env, s) - log h_n(shift(env, 1), s) for n = 1..n_max."""
        if n_max < 1:
            raise DomainError(f"n_max must be >= 1, got {n_max}")
        path = self.h_path(env, n_max + 1, s)
        shifted = self.h_path(env.shift(1), n_max, s)
        return [path[n + 1].log_value - shifted[n].log_value for n in range(1, n_max + 1)]

    def estimate_d(self, env: Environment, s: TailScalar, n_max: int) -> List[float]:
        """
        Ratio estimates h_{n+1}(env, s) / h_n(shift(env, 1), s) for n = 1..n_max.

        The caller inspects the trend; the limit is the defect ratio d(env, s).
        """
        return [safe_exp(r) for r in self.estimate_log_d(env, s, n_max)]

    def eval_Q(self, law: OffspringLaw, s: float) -> float:
        """
        Evaluate Q(s) = f'(s)(1 - s) / (1 - f(s)).

        Args:
            law: Offspring law
            s: Argument in [0, 1)

        Returns:
            Q(s) in [0, 1]; alpha for Sibuya laws
        """
        _check_unit(s, "s", allow_one=False)
        if law.is_sibuya:
            return law.alpha
        if s <= 0.5:
            q = self.eval_f_prime(law, s) * (1.0 - s) / (1.0 - self.eval_f(law, s))
            return min(q, 1.0)
        return self.eval_Q_complement(law, ComplementCoord.from_x(s))

    def eval_Q_complement(self, law: OffspringLaw, u: ComplementCoord) -> float:
        """Q(1 - u) evaluated from complement coordinates; the u -> 0 limit is 1 for finite laws."""
        if law.is_sibuya:
            return law.alpha
        if u.log_u == -math.inf:
            return 1.0
        log_v = self.eval_f_complement(law, u).log_u
        log_q = self.log_eval_f_prime_complement(law, u) + u.log_u - log_v
        return min(safe_exp(log_q), 1.0)

    # --- internals -------------------------------------------------------------------

    @staticmethod
    def _check_scale(s: TailScalar) -> float:
        if s.log_value == -math.inf or math.isnan(s.log_value):
            raise DomainError(f"scale must be positive, got log value {s.log_value}")
        return s.log_value

    @staticmethod
    def _check_n(n: int) -> None:
        if n < 0:
            raise DomainError(f"composition length must be >= 0, got {n}")

    @staticmethod
    def _finite_log_complement(law: OffspringLaw, log_u: float) -> float:
        """log(1 - f(1 - u)) = log sum_{k>=1} p_k (1 - (1 - u)^k)."""
        if log_u == -math.inf:
            return -math.inf
        if log_u < _SERIES_LOG_U:
            return math.log(law.mean()) + log_u
        positive = law.support > 0
        log_x = _log1m_exp(log_u)
        with np.errstate(invalid="ignore"):
            terms = -np.expm1(law.support[positive] * log_x)
        total = float(np.dot(law.support_weights[positive], terms))
        return math.log(total) if total > 0.0 else -math.inf

    def _invert_complement(self, law: OffspringLaw, log_v: float) -> float:
        """log u with 1 - f(1 - u) = v, given log v."""
        if law.is_sibuya:
            return log_v / law.alpha
        if log_v == -math.inf:
            return -math.inf
        if log_v >= 0.0:
            return 0.0

        def gap(log_u: float) -> float:
            return self._finite_log_complement(law, log_u) - log_v

        # u <= 1 - f(1 - u) <= m u under A1
        log_m = math.log(law.mean())
        lo = log_v - max(log_m, 0.0)
        hi = log_v
        if gap(hi) < 0.0:
            hi = 0.0
            if gap(hi) < 0.0:
                raise DomainError(f"1 - f(1 - u) = {math.exp(log_v)!r} is unreachable for this law")
        return bracketed_root(gap, lo, hi, label="complement pgf")

    def _invert_log(self, law: OffspringLaw, log_x: float) -> float:
        """log y with f(y) = x, given log x; requires p_0 = 0."""
        m0, log_p = _leading_term(law)

        def gap(log_y: float) -> float:
            return self.log_eval_f(law, log_y) - log_x

        # x <= y under A1 and p_{m0} y^{m0} <= x
        lo = log_x
        hi = min(0.0, (log_x - log_p) / m0)
        return bracketed_root(gap, lo, hi, label="log pgf")
