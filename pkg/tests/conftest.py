"""
Общие фикстуры для тестов.
Этот файл автоматически подхватывается pytest.
"""
import numpy as np
import pytest

from src.deformation import Beltrami, load_family
from src.exterior import LieModel, load_model
from src.metric import MetricContext
from src.utils import shipped_files

MODELS = shipped_files("models")
FAMILIES = shipped_files("families")


def load(name: str) -> LieModel:
    return load_model(MODELS[name])


@pytest.fixture(scope="session")
def torus1() -> LieModel:
    return load("torus1")


@pytest.fixture(scope="session")
def torus2() -> LieModel:
    return load("torus2")


@pytest.fixture(scope="session")
def iwasawa() -> LieModel:
    return load("iwasawa")


@pytest.fixture(scope="session")
def kodaira_thurston() -> LieModel:
    return load("kodaira_thurston")


@pytest.fixture(scope="session")
def torus1_metric(torus1: LieModel) -> MetricContext:
    return MetricContext(torus1)


@pytest.fixture(scope="session")
def torus2_metric(torus2: LieModel) -> MetricContext:
    return MetricContext(torus2)


@pytest.fixture(scope="session")
def iwasawa_metric(iwasawa: LieModel) -> MetricContext:
    return MetricContext(iwasawa)


@pytest.fixture(scope="session")
def kt_metric(kodaira_thurston: LieModel) -> MetricContext:
    return MetricContext(kodaira_thurston)


@pytest.fixture(scope="session")
def torus1_family(torus1: LieModel) -> Beltrami:
    return load_family(FAMILIES["torus1"], torus1)


@pytest.fixture(scope="session")
def torus2_family(torus2: LieModel) -> Beltrami:
    return load_family(FAMILIES["torus2"], torus2)


@pytest.fixture(scope="session")
def iwasawa_family(iwasawa: LieModel) -> Beltrami:
    return load_family(FAMILIES["iwasawa"], iwasawa)


@pytest.fixture(scope="session")
def kt_family(kodaira_thurston: LieModel) -> Beltrami:
    return load_family(FAMILIES["kodaira_thurston"], kodaira_thurston)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(42)
