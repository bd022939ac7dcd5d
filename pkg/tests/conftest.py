import numpy as np
import pytest


def random_density(n_qubits: int, rng: np.random.Generator) -> np.ndarray:
    """Random full-rank density matrix from a Ginibre draw."""
    dim = 2**n_qubits
    A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = A @ A.conj().T
    return rho / np.trace(rho)


def random_pure(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
