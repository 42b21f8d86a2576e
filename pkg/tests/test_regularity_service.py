import math

import pytest

from app.core.errors import ModelValidationError
from app.schemas.environment import EnvironmentModelSpec
from app.schemas.regularity import RegularityConfig, Verdict
from app.services.regularity_service import TREND_STABILIZED, TREND_TO_ZERO, RegularityService


@pytest.fixture
def regularity():
    return RegularityService()


def test_q_log_products_nonincreasing(regularity, example_env):
    trace = regularity.q_log_products(example_env, 1.0, 50)
    assert len(trace.partial_sums) == 50
    assert all(b <= a for a, b in zip(trace.partial_sums, trace.partial_sums[1:]))
    # Q is alpha for every Sibuya law
    alphas = example_env.alphas(50)
    assert trace.partial_sums[-1] == pytest.approx(sum(math.log(a) for a in alphas), rel=1e-12)


def test_q_log_products_empty_depth(regularity, example_env):
    assert regularity.q_log_products(example_env, 1.0, 0).partial_sums == []


def test_sibuya_point_is_regular(regularity, example_env):
    verdict = regularity.classify_point(example_env, 1.0)
    assert verdict.verdict == Verdict.REGULAR
    assert verdict.evidence.log_q_products[-1] <= -40.0
    assert all(t.trend == TREND_TO_ZERO for t in verdict.evidence.ratio_trends)


def test_square_law_point_is_irregular(regularity, square_env):
    verdict = regularity.classify_point(square_env, 1.0, RegularityConfig(n_max=60))
    assert verdict.verdict == Verdict.IRREGULAR
    assert any(t.trend == TREND_STABILIZED for t in verdict.evidence.ratio_trends)
    # the product of Q converges, so it alone never proves regularity
    assert verdict.evidence.log_q_products[-1] > -40.0


def test_shallow_depth_is_inconclusive(regularity, example_env):
    verdict = regularity.classify_point(example_env, 1.0, RegularityConfig(n_max=5))
    assert verdict.verdict == Verdict.INCONCLUSIVE


def test_non_positive_point_rejected(regularity, example_env):
    with pytest.raises(ModelValidationError):
        regularity.classify_point(example_env, 0.0)


def test_classify_process(regularity, example_env, square_env):
    config = RegularityConfig(n_max=80)
    assert regularity.classify_process(example_env, [0.5, 1.0, 2.0], config).verdict == Verdict.REGULAR
    assert regularity.classify_process(square_env, [0.5, 1.0], config).verdict == Verdict.IRREGULAR
    with pytest.raises(ModelValidationError):
        regularity.classify_process(example_env, [], config)


def test_sufficient_criterion_sibuya(regularity, example_model):
    report = regularity.check_sufficient_criterion(example_model, 5, RegularityConfig(sup_grid_size=50))
    assert report.holds
    assert report.frequency == 1.0
    assert 0.2 <= report.c_estimate <= 0.7


def test_sufficient_criterion_square_law_fails(regularity, environment_service):
    model = environment_service.build_model(
        EnvironmentModelSpec(kind="finite_mixture", laws=[{"family": "finite", "weights": [0.0, 0.0, 1.0]}])
    )
    report = regularity.check_sufficient_criterion(model, 2, RegularityConfig(sup_grid_size=50))
    assert not report.holds
    assert report.c_estimate is None


def test_find_regular_point(regularity, example_env):
    search = regularity.find_regular_point(example_env, 1.0, RegularityConfig(n_max=80))
    assert search.found
    lo, hi = search.interval
    assert lo <= search.point <= hi


def test_regular_point_missing_for_square_law(regularity, square_env):
    search = regularity.find_regular_point(square_env, 1.0, RegularityConfig(n_max=40, search_depth=1))
    assert not search.found
    assert search.reason


def test_shift_consistency(regularity, example_env):
    report = regularity.check_shift_consistency(example_env, 1.0, 3, RegularityConfig(n_max=80))
    assert report.consistent
    assert report.verdict == Verdict.REGULAR
    assert report.shifted_verdict == Verdict.REGULAR


def test_small_alpha_point_survives_underflow(regularity, environment_service):
    model = environment_service.build_model(
        EnvironmentModelSpec(kind="sibuya", alpha_min=0.01, alpha_max=0.02, base_seed=1)
    )
    env = environment_service.sample_environment(model, 0)
    verdict = regularity.classify_point(env, 1.0)
    # prod 1/alpha_i passes 1e308 well before the default depth
    assert verdict.evidence.underflow_index is not None
    assert verdict.evidence.underflow_index < RegularityConfig().n_max
    assert len(verdict.evidence.log_q_products) == verdict.evidence.underflow_index
    assert verdict.verdict == Verdict.REGULAR
    assert all(t.trend == TREND_TO_ZERO for t in verdict.evidence.ratio_trends)


def test_small_alpha_process_verdict(regularity, environment_service):
    model = environment_service.build_model(
        EnvironmentModelSpec(kind="sibuya", alpha_min=0.01, alpha_max=0.02, base_seed=1)
    )
    env = environment_service.sample_environment(model, 0)
    result = regularity.classify_process(env, [0.5, 1.0, 2.0])
    assert result.verdict in (Verdict.REGULAR, Verdict.INCONCLUSIVE)
