import math

import pytest

from app.core.errors import ModelValidationError, UnsupportedLawError
from app.models.environment import Environment
from app.schemas.environment import EnvironmentModelSpec
from app.schemas.limits import NormalizationScheme
from app.schemas.population import SimulationConfig
from app.services.environment_service import EnvironmentService
from app.services.limit_service import LimitService, log_U


@pytest.fixture
def limits():
    return LimitService()


@pytest.fixture
def example_scheme():
    return NormalizationScheme()


def test_log_U_matches_definition():
    log_scheme = NormalizationScheme(U="log")
    loglog_scheme = NormalizationScheme(U="loglog")
    assert log_U(log_scheme, math.log(3.0)) == pytest.approx(math.log(math.log(4.0)), rel=1e-14)
    assert log_U(loglog_scheme, math.log(3.0)) == pytest.approx(math.log(math.log1p(math.log(4.0))), rel=1e-14)
    assert log_U(log_scheme, -50.0) == -50.0
    assert log_U(log_scheme, 1e6) == pytest.approx(math.log(1e6), rel=1e-14)
    assert log_U(log_scheme, -math.inf) == -math.inf


def test_scheme_parameter_validation():
    with pytest.raises(ValueError):
        NormalizationScheme(c_rule="double_exponential")
    with pytest.raises(ValueError):
        NormalizationScheme(c_rule="inverse_h", s0=-1.0)


def test_simulate_replicates_requires_minimum(limits, example_model):
    with pytest.raises(ModelValidationError):
        limits.simulate_replicates(example_model, 99)


def test_quantile_G(limits):
    assert limits.quantile_G("exponential", 1.0 - math.exp(-1.0)) == pytest.approx(1.0, rel=1e-14)
    assert limits.quantile_G("exponential", 0.0) == 0.0
    assert limits.quantile_G("exponential", 1.0) == math.inf
    sample = [4.0, 1.0, 3.0, 2.0]
    assert limits.quantile_G(sample, 0.5) == 2.0
    assert limits.quantile_G(sample, 0.51) == 3.0
    assert limits.quantile_G(sample, 0.0) == 0.0
    with pytest.raises(ModelValidationError):
        limits.quantile_G("gamma", 0.5)
    with pytest.raises(ModelValidationError):
        limits.quantile_G(sample, 1.5)


def test_alpha_ratio_product_is_first_alpha(limits, example_env, example_scheme):
    ratios = limits.compute_alpha_ratio(example_env, example_scheme, 20)
    alpha0 = example_env.law_at(0).alpha
    assert all(r == pytest.approx(alpha0, rel=1e-12) for r in ratios)


def test_alpha_ratio_product_needs_stable_index(limits, square_env, example_scheme):
    with pytest.raises(UnsupportedLawError):
        limits.compute_alpha_ratio(square_env, example_scheme, 5)


def test_alpha_ratio_constant_rule(limits, square_env):
    assert limits.compute_alpha_ratio(square_env, NormalizationScheme(c_rule="constant"), 5) == [1.0] * 5


def test_G_identity(limits, example_env, example_scheme):
    report = limits.check_G_identity(example_env, example_scheme, 1.0, 30)
    assert report.G_value == pytest.approx(-math.log1p(-math.exp(-1.0)), rel=1e-14)
    assert report.H_residual <= 1e-8
    assert report.alpha_residual <= 1e-12


def test_compute_H_converges(limits, example_env, example_scheme):
    profile = limits.compute_H(example_env, example_scheme, 0.5, 30)
    assert len(profile) == 30
    assert profile[-1] == pytest.approx(-math.log1p(-math.exp(-0.5)), rel=1e-8)


def test_functional_equation_analytic(limits, example_model):
    report = limits.verify_functional_equation(example_model, environments=5)
    assert report.mode == "analytic"
    assert len(report.u_grid) == 50
    assert report.u_grid[0] == pytest.approx(0.1)
    assert report.max_residual <= 1e-12


def test_functional_equation_needs_stable_index(limits, environment_service):
    model = environment_service.build_model(
        EnvironmentModelSpec(kind="finite_mixture", laws=[{"family": "finite", "weights": [0.0, 0.5, 0.5]}])
    )
    with pytest.raises(UnsupportedLawError):
        limits.verify_functional_equation(model, environments=1)


@pytest.mark.parametrize(
    "scheme, case",
    [
        (NormalizationScheme(), "b"),
        (NormalizationScheme(c_rule="constant"), "b"),
        (NormalizationScheme(c_rule="double_exponential", K=2.0), "a"),
    ],
)
def test_growth_taxonomy(limits, example_env, scheme, case):
    diagnosis = limits.diagnose_growth_case(example_env, scheme, [0.5, 1.0, 2.0], 30)
    assert diagnosis.case == case
    assert diagnosis.s_r is None


def test_growth_taxonomy_split_at_s0(limits, example_env):
    scheme = NormalizationScheme(c_rule="inverse_h", s0=1.0)
    diagnosis = limits.diagnose_growth_case(example_env, scheme, [2.0, 0.5, 1.0], 30)
    assert diagnosis.case == "c"
    assert diagnosis.s_r == 1.0
    assert [e.trend for e in diagnosis.evidence] == ["zero", "one", "infinity"]


def test_w_atoms_square_law(limits, square_env, log2):
    report = limits.estimate_W_atoms(square_env, log2, 20, 6)
    # W_n = 2^n h_n(s) = s exactly, inside the dead band
    assert report.frac_ambiguous == 1.0
    assert report.frac_zero == 0.0
    assert report.mean_X == pytest.approx(0.5, rel=1e-9)
    assert report.expected_mean_X == pytest.approx(0.5)


def test_w_atoms_sibuya(limits, example_env, log2):
    report = limits.estimate_W_atoms(example_env, log2, 200, 8)
    assert report.frac_zero + report.frac_infinity + report.frac_ambiguous == pytest.approx(1.0)
    assert report.replicates == 200
    assert 0.0 <= report.mean_X <= 1.0


def test_martingale_mean_exact_stepping(limits, example_env, log2):
    report = limits.estimate_martingale_mean(example_env, log2, 4000, 6, exact_budget=10**4)
    assert report.replicates == 4000
    assert report.stopped > 0
    assert report.se_X > 0.0
    assert abs(report.mean_X - 0.5) <= 3.5 * report.se_X


def test_martingale_mean_square_law_is_exact(limits, square_env, log2):
    # Z_n = 2^n and h_n = s / 2^n, so every replicate, stopped or not, gives e^{-s}
    report = limits.estimate_martingale_mean(square_env, log2, 20, 6, exact_budget=10)
    assert report.stopped == 20
    assert report.mean_X == pytest.approx(0.5, rel=1e-8)
    assert report.se_X <= 1e-9


def test_martingale_mean_rejects_bad_arguments(limits, example_env):
    with pytest.raises(ModelValidationError):
        limits.estimate_martingale_mean(example_env, 0.0, 10, 3)
    with pytest.raises(ModelValidationError):
        limits.estimate_martingale_mean(example_env, 1.0, 1, 3)


def test_w_atoms_rejects_bad_arguments(limits, example_env):
    with pytest.raises(ModelValidationError):
        limits.estimate_W_atoms(example_env, 0.0, 10, 3)
    with pytest.raises(ModelValidationError):
        limits.estimate_W_atoms(example_env, 1.0, 0, 3)


def test_ks_statistic_exact_quantiles(limits):
    n = 200
    sample = [(i + 0.5) / n for i in range(n)]
    result = limits.ks_statistic(sample, lambda x: x)
    assert result.D == pytest.approx(0.5 / n)
    assert result.passed
    assert result.critical_95 == pytest.approx(1.358 / math.sqrt(n))

def test_ks_statistic_three_point_sample(limits):
    result = limits.ks_statistic([0.1, 0.4, 0.7], lambda x: x)
    assert result.D == pytest.approx(0.3, abs=1e-12)
    assert result.n == 3


def test_functional_equation_empirical(limits, example_model):
    sim = SimulationConfig(n_max=8, n_min=2, y_tolerance=1e-3)
    report = limits.verify_functional_equation(
        example_model,
        F_spec="empirical",
        u_grid=[0.2 * k for k in range(1, 11)],
        environments=1,
        replicates=200,
        sim=sim,
    )
    assert report.mode == "empirical"
    assert report.replicates == 200
    assert len(report.per_environment) == 1
    assert 0.0 < report.max_residual <= 0.25



class TestLimitPipeline:
    """One shared run of 100 short replicates on the Sibuya model."""

    @pytest.fixture(scope="class")
    def model(self):
        return EnvironmentService().build_model(
            EnvironmentModelSpec(kind="sibuya", alpha_min=0.2, alpha_max=0.7, base_seed=42)
        )

    @pytest.fixture(scope="class")
    def run(self, model):
        sim = SimulationConfig(n_max=8, n_min=2, y_tolerance=1e-3)
        return LimitService().run_limit_pipeline(model, NormalizationScheme(), 100, sim, [0.5, 1.0], 30)

    def test_outcomes(self, run):
        _, outcomes = run
        assert [o.replicate for o in outcomes] == list(range(100))
        for o in outcomes:
            assert 0.0 < o.Y < 1.0
            assert o.T == pytest.approx(-math.log(o.Y))
            assert o.final_n <= 8
            assert o.mode in ("exact", "log_approx", "truncated")

    def test_report(self, run, model):
        report, outcomes = run
        used = [o for o in outcomes if o.stabilized]
        assert report.complete
        assert len(report.y_samples) == len(used)
        assert report.modes.trajectories == 100
        assert [c.x for c in report.coverage] == [0.25, 0.5, 0.75]
        assert report.functional_eq_residual <= 1e-12
        assert sorted(report.h_profile) == ["0.5", "1.0"]
        alpha0 = Environment.create(model, 0).law_at(0).alpha
        assert report.alpha_ratio[-1] == pytest.approx(alpha0, rel=1e-12)
        assert report.taxonomy[0].case == "b"
        if used:
            assert report.ks_uniform.n == len(used)
            assert report.ks_uniform.D < 0.3
            assert report.ks_exponential is not None

    def test_report_is_reproducible_from_outcomes(self, run, model):
        report, outcomes = run
        again = LimitService().assemble_limit_report(model, NormalizationScheme(), outcomes, [0.5, 1.0], 30)
        assert again == report

    def test_normalized_sample(self, run, model):
        _, outcomes = run
        sample = LimitService().normalized_limit_sample(model, NormalizationScheme(), 100, outcomes=outcomes)
        assert sample.used == sum(1 for o in outcomes if o.stabilized)
        assert all(v >= 0.0 for v in sample.samples)
        assert all(v > 0.0 for v in sample.exp_transform)

    def test_y_distribution_report(self, run, model):
        _, outcomes = run
        report = LimitService().estimate_Y_distribution(model, 100, outcomes=outcomes)
        assert report.replicates == 100
        assert report.used + report.unstabilized == 100
        for point in report.coverage:
            assert 0.0 <= point.fraction <= 1.0


class TestYUniformity:
    """Y-limit of the Sibuya model against Uniform(0, 1) at the default stabilization policy."""

    REPLICATES = 500

    @pytest.fixture(scope="class")
    def report(self):
        model = EnvironmentService().build_model(
            EnvironmentModelSpec(kind="sibuya", alpha_min=0.2, alpha_max=0.7, base_seed=42)
        )
        return LimitService().estimate_Y_distribution(model, self.REPLICATES, SimulationConfig(), workers=4)

    def test_most_replicates_stabilize(self, report):
        assert report.used >= 0.95 * self.REPLICATES

    def test_ks_against_uniform(self, report):
        # 99.9% quantile of sqrt(n) D is about 1.95
        assert report.ks_uniform.n == report.used
        assert report.ks_uniform.D <= 1.95 / math.sqrt(report.used)

    def test_quantile_coverage(self, report):
        for point in report.coverage:
            assert abs(point.fraction - point.x) <= 4 * point.se
