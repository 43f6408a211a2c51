import numpy as np
import pytest
from hypothesis import settings

from orthowave import basis1d, operator

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")

_ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def generators():
    return basis1d.default_generators()


@pytest.fixture(scope="session")
def basis_factory(generators):
    cache = {}

    def make(k):
        if k not in cache:
            cache[k] = basis1d.build_basis(generators, k)
        return cache[k]

    return make


@pytest.fixture(scope="session")
def matrices_factory(basis_factory):
    cache = {}

    def make(k):
        if k not in cache:
            b = basis_factory(k)
            cache[k] = operator.one_dim_matrices(b, tuple(basis1d.level_sizes(k)))
        return cache[k]

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one line per acceptance criterion for the terminal summary."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
