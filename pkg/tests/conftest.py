from __future__ import annotations

import numpy as np
import pytest

from app.lindblad.lattice import chain
from app.lindblad.opspace import make_local_basis


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def pauli():
    return make_local_basis("pauli")


@pytest.fixture(scope="session")
def bx():
    return make_local_basis("bx")


@pytest.fixture(scope="session")
def bx_prime():
    return make_local_basis("bx_prime")


@pytest.fixture(scope="session")
def bz():
    return make_local_basis("bz")


@pytest.fixture
def single_site():
    return chain(1)


def random_density_matrix(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_operator(rng: np.random.Generator, dim: int) -> np.ndarray:
    return rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch, tmp_path):
    # keep CLI runs from writing into the project tree or reading a developer .env
    monkeypatch.setenv("LINDBLAD_LOG_PATH", str(tmp_path / "logs" / "run.log"))
    monkeypatch.setenv("LINDBLAD_OUTPUT_DIR", str(tmp_path / "data"))
    for name in ("LINDBLAD_TOL", "LINDBLAD_ZERO_TOL", "LINDBLAD_THREADS", "LINDBLAD_DENSE_LIMIT", "LINDBLAD_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
