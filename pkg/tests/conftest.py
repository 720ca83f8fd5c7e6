import numpy as np
import pytest

from metastab.lindblad import build_full_lindbladian
from metastab.pauli import X, Z, diagonalize, ising_chain, single_qubit, single_qubit_jump_set, zz_x
from metastab.spectral import FilterParams


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def qubit_lind():
    """H = Z with the single jump X at beta = 1."""
    return build_full_lindbladian(diagonalize(single_qubit()), [X], FilterParams(1.0))


@pytest.fixture(scope="session")
def zzx_lind():
    """Two-qubit ZZ + 0.4 X_0 with every single-qubit Pauli jump at beta = 1."""
    h = zz_x(2)
    jumps = [p.to_matrix() for p in single_qubit_jump_set(2, range(2))]
    return build_full_lindbladian(diagonalize(h), jumps, FilterParams(1.0))


@pytest.fixture(scope="session")
def chain3():
    return ising_chain(3, g=0.5)


@pytest.fixture(scope="session")
def chain3_lind(chain3):
    jumps = [p.to_matrix() for p in single_qubit_jump_set(3, range(3))]
    return build_full_lindbladian(diagonalize(chain3), jumps, FilterParams(1.0))


def random_full_rank(dim, rng):
    G = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    s = G @ G.conj().T + 0.05 * np.eye(dim)
    return s / np.trace(s).real


__all__ = ["random_full_rank", "Z"]
