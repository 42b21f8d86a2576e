import math

import pytest
from pydantic import ValidationError

from app.core.errors import ModelValidationError
from app.models.environment import Environment, ModelKind
from app.models.offspring import OffspringLaw
from app.schemas.environment import EnvironmentModelSpec, ProbeSpec


def _finite_spec(laws, probs=None, **kwargs):
    return EnvironmentModelSpec(
        kind="finite_mixture",
        laws=[{"family": "finite", "weights": w} for w in laws],
        probs=probs,
        **kwargs,
    )


def test_build_sibuya_model(example_model):
    assert example_model.kind == ModelKind.SIBUYA_UNIFORM
    assert example_model.base_seed == 42


def test_sampled_alphas_within_bounds(environment_service, example_model):
    for r in range(20):
        env = environment_service.sample_environment(example_model, r)
        for alpha in env.alphas(10):
            assert 0.2 <= alpha <= 0.7


def test_environment_is_a_function_of_seed_and_index(environment_service, example_model):
    first = environment_service.sample_environment(example_model, 3).alphas(15)
    again = environment_service.sample_environment(example_model, 3).alphas(15)
    other = environment_service.sample_environment(example_model, 4).alphas(15)
    assert first == again
    assert first != other


def test_lazy_extension_does_not_depend_on_access_order(environment_service, example_model):
    forward = environment_service.sample_environment(example_model, 0)
    backward = environment_service.sample_environment(example_model, 0)
    ahead = backward.law_at(9)
    assert forward.alphas(10)[9] == ahead.alpha


def test_shift(environment_service, example_env):
    shifted = environment_service.shift(example_env, 2)
    assert shifted.law_at(0) == example_env.law_at(2)
    assert shifted.shift(3).law_at(0) == example_env.law_at(5)
    with pytest.raises(ModelValidationError):
        environment_service.shift(example_env, -1)


def test_negative_replicate_index_rejected(environment_service, example_model):
    with pytest.raises(ModelValidationError):
        environment_service.sample_environment(example_model, -1)


def test_finite_mixture_rejects_positive_p0(environment_service):
    with pytest.raises(ModelValidationError, match="A1 violated"):
        environment_service.build_model(_finite_spec([[0.1, 0.9]]))


def test_finite_mixture_rejects_identity_law(environment_service):
    with pytest.raises(ModelValidationError, match="p_1=1"):
        environment_service.build_model(_finite_spec([[0.0, 1.0]]))


def test_relaxed_mixture_is_admitted(environment_service):
    model = environment_service.build_model(_finite_spec([[0.1, 0.9]], relax_assumptions=True))
    assert model.laws[0].p0 == pytest.approx(0.1)


def test_spec_validation_messages():
    with pytest.raises(ValidationError, match="alpha must be < 1"):
        EnvironmentModelSpec(kind="sibuya", alpha_min=0.2, alpha_max=1.0)
    with pytest.raises(ValidationError, match="alpha_min must be <= alpha_max"):
        EnvironmentModelSpec(kind="sibuya", alpha_min=0.6, alpha_max=0.3)
    with pytest.raises(ValidationError, match="probs must be nonnegative and sum to 1"):
        _finite_spec([[0.0, 0.5, 0.5], [0.0, 0.0, 1.0]], probs=[0.7, 0.7])


def test_mixture_probs_default_to_uniform():
    spec = _finite_spec([[0.0, 0.5, 0.5], [0.0, 0.0, 1.0]])
    assert spec.probs == [0.5, 0.5]


def test_validate_assumptions_sibuya_consistent(environment_service, example_model):
    report = environment_service.validate_assumptions(example_model, ProbeSpec(replicates=3))
    assert report.a1_pass
    assert report.verdict == "consistent"
    assert all(p.max_final_ratio <= 1e-6 for p in report.probes)


def test_validate_assumptions_square_law_inconsistent(environment_service):
    model = environment_service.build_model(_finite_spec([[0.0, 0.0, 1.0]]))
    report = environment_service.validate_assumptions(model, ProbeSpec(replicates=2))
    assert report.verdict == "inconsistent"
    assert report.probes[0].median_final_ratio == pytest.approx(0.5, abs=1e-9)


def test_validate_assumptions_empty_grid_inconclusive(environment_service, example_model):
    report = environment_service.validate_assumptions(example_model, ProbeSpec(s_grid=[]))
    assert report.verdict == "inconclusive"


def test_annealed_log_mean(environment_service, example_model):
    report = environment_service.annealed_log_mean_probe(example_model, 5)
    assert report.mean_log_m == math.inf
    assert report.infinite_mean_fraction == 1.0

    square = environment_service.build_model(_finite_spec([[0.0, 0.0, 1.0]]))
    assert environment_service.annealed_log_mean_probe(square, 3).mean_log_m == pytest.approx(math.log(2.0))


def test_record_replays(environment_service, example_model):
    env = environment_service.sample_environment(example_model, 7)
    record = environment_service.to_record(env, 12)
    assert len(record.realized) == 12
    replayed = environment_service.replay_record(record)
    assert replayed.alphas(12) == env.alphas(12)


def test_tampered_record_fails_replay(environment_service, example_model):
    record = environment_service.to_record(environment_service.sample_environment(example_model, 7), 3)
    record.realized[1] = {"family": "sibuya", "alpha": 0.5}
    with pytest.raises(ModelValidationError, match="realized\\[1\\]"):
        environment_service.replay_record(record)


def test_constant_environment(square_law):
    env = Environment.constant(square_law)
    assert all(law == square_law for law in env.laws(5))
    assert env.model.to_params()["laws"] == [OffspringLaw.finite([0.0, 0.0, 1.0]).to_params()]
