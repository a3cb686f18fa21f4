import numpy as np
import pytest

from cascade_vqa.fem_grid import GridSpec, assemble, default_boundary, solve_classical
from cascade_vqa.vqa import CostContext

_SYSTEMS = {}


def default_system(qubits):
    """Assembled + solved default problem, cached across the whole session."""
    if qubits not in _SYSTEMS:
        system = assemble(GridSpec(qubits), default_boundary())
        solve_classical(system)
        _SYSTEMS[qubits] = system
    return _SYSTEMS[qubits]


@pytest.fixture(scope="session")
def system6():
    return default_system(6)


@pytest.fixture(scope="session")
def system9():
    return default_system(9)


@pytest.fixture(scope="session")
def system12():
    return default_system(12)


@pytest.fixture(scope="session")
def ctx6(system6):
    return CostContext.from_system(system6)


def random_unit_state(rng, dim, real=False):
    psi = rng.standard_normal(dim)
    if not real:
        psi = psi + 1j * rng.standard_normal(dim)
    return psi / np.linalg.norm(psi)
