import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from catsqueeze import states as st

settings.register_profile("default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def random_state(rng: np.random.Generator, n_max: int, dim: int, mixed: bool | None = None) -> st.DensityMatrix:
    """Random pure or rank-2 state supported on ``|0>..|n_max>``, embedded at ``dim``."""
    if mixed is None:
        mixed = bool(rng.random() < 0.3)
    rank = 2 if mixed else 1
    vecs = rng.normal(size=(rank, n_max + 1)) + 1j * rng.normal(size=(rank, n_max + 1))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    weights = rng.dirichlet(np.ones(rank))
    rho = np.zeros((dim, dim), dtype=complex)
    for w, v in zip(weights, vecs):
        rho[: n_max + 1, : n_max + 1] += w * np.outer(v, v.conj())
    return st.DensityMatrix(rho)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def cat21():
    return st.cat(math.sqrt(2.1), "even", 60)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
