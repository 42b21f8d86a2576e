"""Log-coordinate scalars.

h_n(s) shrinks like (1 - e^{-s})^{prod 1/alpha_i} and population sizes grow
double-exponentially, so both live as natural logs and are converted to plain
floats only at report boundaries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

_TINY_LOG = -20.0
# exp() is exact-to-rounding and finite on this window
_EXP_LO, _EXP_HI = -745.0, 709.0


def log_one_minus_exp_neg(log_s: float) -> float:
    """Return log(1 - e^{-s}) given log s."""
    if log_s == -math.inf:
        return -math.inf
    if log_s < _TINY_LOG:
        s = math.exp(log_s)
        return log_s + math.log1p(-0.5 * s)
    if log_s > 0.0:
        s = safe_exp(log_s)
        return math.log1p(-safe_exp(-s))
    return math.log(-math.expm1(-math.exp(log_s)))


def neg_log_one_minus(log_u: float) -> float:
    """Return log(-log(1 - u)) given log u with u in [0, 1]."""
    if log_u >= 0.0:
        return math.inf
    if log_u == -math.inf:
        return -math.inf
    if log_u < _TINY_LOG:
        return log_u + math.log1p(0.5 * math.exp(log_u))
    if log_u > -0.5:
        # 1 - u computed without cancellation
        return math.log(-math.log(-math.expm1(log_u)))
    return math.log(-math.log1p(-math.exp(log_u)))


def safe_exp(log_value: float) -> float:
    """exp() that saturates to 0 / inf instead of raising."""
    if log_value < _EXP_LO:
        return 0.0
    if log_value > _EXP_HI:
        return math.inf
    return math.exp(log_value)


@dataclass(frozen=True, order=True)
class TailScalar:
    """A positive quantity stored as its natural log (-inf encodes 0, +inf encodes inf)."""

    log_value: float

    @classmethod
    def from_float(cls, value: float) -> "TailScalar":
        if value < 0:
            raise ValueError(f"TailScalar requires a nonnegative value, got {value}")
        return cls(math.log(value) if value > 0 else -math.inf)

    def to_float(self) -> float:
        return safe_exp(self.log_value)

    def is_zero(self) -> bool:
        return self.log_value == -math.inf


@dataclass(frozen=True)
class ComplementCoord:
    """Represents x in [0, 1] through u = 1 - x, stored as log u <= 0."""

    log_u: float

    def __post_init__(self):
        if self.log_u > 0.0:
            raise ValueError(f"complement coordinate requires log u <= 0, got {self.log_u}")

    @classmethod
    def from_x(cls, x: float) -> "ComplementCoord":
        if x >= 1.0:
            return cls(-math.inf)
        return cls(min(0.0, math.log1p(-x)))

    @classmethod
    def from_u(cls, u: TailScalar) -> "ComplementCoord":
        return cls(min(0.0, u.log_value))

    @classmethod
    def from_exp_neg(cls, s: TailScalar) -> "ComplementCoord":
        """Complement of x = e^{-s}."""
        return cls(min(0.0, log_one_minus_exp_neg(s.log_value)))

    @property
    def u(self) -> TailScalar:
        return TailScalar(self.log_u)

    def to_x(self) -> float:
        """1 - u as a plain float."""
        return -math.expm1(self.log_u) if self.log_u > -math.inf else 1.0

    def to_neg_log_x(self) -> TailScalar:
        """-log(1 - u), the s with e^{-s} = x."""
        return TailScalar(neg_log_one_minus(self.log_u))


def log_of_int(value: int) -> float:
    """Natural log of a positive Python int of any size."""
    if value <= 0:
        return -math.inf
    bits = value.bit_length()
    if bits < 1000:
        return math.log(value)
    shift = bits - 64
    return math.log(value >> shift) + shift * math.log(2.0)


def int_from_log(log_value: float) -> int:
    """Nearest integer (float resolution) to exp(log_value), exact for small values."""
    if log_value < 700.0:
        return max(1, int(round(math.exp(log_value))))
    log2 = log_value / math.log(2.0)
    exponent = int(math.floor(log2)) - 52
    mantissa = int(round(2.0 ** (log2 - exponent)))
    return mantissa << exponent
