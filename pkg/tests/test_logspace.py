import math

import pytest

from app.core.logspace import (
    ComplementCoord,
    TailScalar,
    int_from_log,
    log_of_int,
    log_one_minus_exp_neg,
    neg_log_one_minus,
    safe_exp,
)


def test_log_one_minus_exp_neg_moderate():
    assert log_one_minus_exp_neg(0.0) == pytest.approx(math.log(1.0 - math.exp(-1.0)), rel=1e-15)
    assert log_one_minus_exp_neg(math.log(3.0)) == pytest.approx(math.log1p(-math.exp(-3.0)), rel=1e-15)


def test_log_one_minus_exp_neg_tiny_s_stays_in_log_coordinate():
    # 1 - e^{-s} = s - s^2/2 + ...
    assert log_one_minus_exp_neg(-50.0) == pytest.approx(-50.0, abs=1e-20)
    assert log_one_minus_exp_neg(-1e6) == -1e6


def test_log_one_minus_exp_neg_huge_s():
    assert log_one_minus_exp_neg(math.log(1000.0)) == pytest.approx(0.0, abs=1e-300)
    assert log_one_minus_exp_neg(-math.inf) == -math.inf


def test_neg_log_one_minus():
    assert neg_log_one_minus(math.log(0.5)) == pytest.approx(math.log(math.log(2.0)), rel=1e-15)
    assert neg_log_one_minus(-800.0) == pytest.approx(-800.0)
    assert neg_log_one_minus(0.0) == math.inf
    assert neg_log_one_minus(-math.inf) == -math.inf


def test_neg_log_one_minus_near_one():
    log_u = math.log1p(-1e-12)
    assert neg_log_one_minus(log_u) == pytest.approx(math.log(-math.log(1e-12)), rel=1e-9)


def test_safe_exp_saturates():
    assert safe_exp(-1000.0) == 0.0
    assert safe_exp(1000.0) == math.inf
    assert safe_exp(0.0) == 1.0


def test_big_integer_logs():
    assert log_of_int(2**2000) == pytest.approx(2000 * math.log(2.0), rel=1e-14)
    assert log_of_int(0) == -math.inf
    assert int_from_log(math.log(12345)) == 12345
    big = int_from_log(5000.0)
    assert log_of_int(big) == pytest.approx(5000.0, rel=1e-14)


def test_tail_scalar_conversions():
    assert TailScalar.from_float(2.0).log_value == pytest.approx(math.log(2.0))
    assert TailScalar.from_float(8.0).to_float() == pytest.approx(8.0)
    assert TailScalar(1e6).to_float() == math.inf
    assert TailScalar.from_float(2.0) < TailScalar.from_float(3.0)
    assert TailScalar.from_float(0.0).is_zero()
    with pytest.raises(ValueError):
        TailScalar.from_float(-1.0)


def test_complement_coord():
    assert ComplementCoord.from_x(1.0).log_u == -math.inf
    assert ComplementCoord.from_x(0.25).to_x() == pytest.approx(0.25)
    s = TailScalar.from_float(3.0)
    assert ComplementCoord.from_exp_neg(s).to_neg_log_x().to_float() == pytest.approx(3.0, rel=1e-14)
    with pytest.raises(ValueError):
        ComplementCoord(0.5)
