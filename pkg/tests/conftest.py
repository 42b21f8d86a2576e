import math

import pytest

from app.core.storage import run_store
from app.models.environment import Environment
from app.models.offspring import OffspringLaw
from app.schemas.environment import EnvironmentModelSpec
from app.services.environment_service import EnvironmentService
from app.services.pgf_service import PgfService
from app.services.population_service import PopulationService


@pytest.fixture
def pgf():
    return PgfService()


@pytest.fixture
def environment_service():
    return EnvironmentService()


@pytest.fixture
def population():
    return PopulationService()


@pytest.fixture
def sibuya_half():
    return OffspringLaw.sibuya(0.5)


@pytest.fixture
def square_law():
    """f(s) = s^2: every particle has exactly two children."""
    return OffspringLaw.finite([0.0, 0.0, 1.0])


@pytest.fixture
def mixed_law():
    return OffspringLaw.finite([0.0, 0.5, 0.3, 0.2])


@pytest.fixture
def example_model(environment_service):
    spec = EnvironmentModelSpec(kind="sibuya", alpha_min=0.2, alpha_max=0.7, base_seed=42)
    return environment_service.build_model(spec)


@pytest.fixture
def example_env(example_model):
    return Environment.create(example_model, 0)


@pytest.fixture
def square_env(square_law):
    return Environment.constant(square_law)


@pytest.fixture
def run_dir(tmp_path):
    root = tmp_path / "run"
    run_store.configure(str(root))
    return root


@pytest.fixture
def log2():
    return math.log(2.0)
