from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Mapping, Sequence

import numpy as np

from app.lindblad.errors import DimensionError, ModelError

# Computational basis: index 0 = |up>, index 1 = |down>, sigma^z |up> = +|up>.
IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
P_UP = np.array([[1, 0], [0, 0]], dtype=complex)
P_DOWN = np.array([[0, 0], [0, 1]], dtype=complex)

KET_RIGHT = np.array([1, 1], dtype=complex) / np.sqrt(2.0)
KET_LEFT = np.array([1, -1], dtype=complex) / np.sqrt(2.0)
P_RIGHT = np.outer(KET_RIGHT, KET_RIGHT.conj())
P_LEFT = np.outer(KET_LEFT, KET_LEFT.conj())
# |right><left|: flips a left-polarized spin into the +x direction.
SIGMA_X_PLUS = np.outer(KET_RIGHT, KET_LEFT.conj())

PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}


def kron_all(factors: Sequence[np.ndarray]) -> np.ndarray:
    if not factors:
        return np.ones((1, 1), dtype=complex)
    return reduce(np.kron, factors)


def place_operator(matrix: np.ndarray, support: Sequence[int], target: Sequence[int]) -> np.ndarray:
    """Re-express ``matrix`` (kron order = ``support``) on the sorted superset ``target``."""
    support = tuple(support)
    target = tuple(target)
    missing = [s for s in support if s not in target]
    if missing:
        raise DimensionError(f"sites {missing} are not part of the target support {target}")

    extra = [s for s in target if s not in support]
    full = np.kron(np.asarray(matrix, dtype=complex), np.eye(2 ** len(extra), dtype=complex))
    order = list(support) + extra
    n = len(target)
    if n == 0:
        return full
    perm = [order.index(site) for site in target]
    tensor = full.reshape((2,) * (2 * n))
    tensor = tensor.transpose(perm + [p + n for p in perm])
    return tensor.reshape(2**n, 2**n)


@dataclass(frozen=True, eq=False)
class SpinOperator:
    """Operator acting on a few lattice sites; ``matrix`` factors follow ``support`` order."""

    support: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        support = tuple(int(s) for s in self.support)
        if len(set(support)) != len(support):
            raise ModelError(f"repeated site in support {support}")
        if any(s < 0 for s in support):
            raise ModelError(f"negative site index in support {support}")

        matrix = np.array(self.matrix, dtype=complex)
        dim = 2 ** len(support)
        if matrix.shape != (dim, dim):
            raise DimensionError(f"operator on {len(support)} sites must be {dim}x{dim}, got {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ModelError("operator has non-finite entries")

        if support != tuple(sorted(support)):
            matrix = place_operator(matrix, support, sorted(support))
            support = tuple(sorted(support))
        matrix.flags.writeable = False
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def on_site(cls, site: int, op: np.ndarray) -> SpinOperator:
        return cls((site,), op)

    @classmethod
    def product(cls, factors: Mapping[int, np.ndarray]) -> SpinOperator:
        sites = sorted(factors)
        return cls(tuple(sites), kron_all([np.asarray(factors[s], dtype=complex) for s in sites]))

    @property
    def n_sites(self) -> int:
        return len(self.support)

    def expand(self, support: Sequence[int]) -> SpinOperator:
        target = tuple(sorted(set(support) | set(self.support)))
        return SpinOperator(target, place_operator(self.matrix, self.support, target))

    def embed(self, n_sites: int) -> np.ndarray:
        if self.support and max(self.support) >= n_sites:
            raise ModelError(f"support {self.support} exceeds {n_sites} sites")
        return place_operator(self.matrix, self.support, range(n_sites))

    def dagger(self) -> SpinOperator:
        return SpinOperator(self.support, self.matrix.conj().T)

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0) <= tol)

    def __add__(self, other: SpinOperator) -> SpinOperator:
        if not isinstance(other, SpinOperator):
            return NotImplemented
        target = tuple(sorted(set(self.support) | set(other.support)))
        return SpinOperator(
            target,
            place_operator(self.matrix, self.support, target) + place_operator(other.matrix, other.support, target),
        )

    def __sub__(self, other: SpinOperator) -> SpinOperator:
        return self + (-1.0) * other

    def __mul__(self, scalar: complex) -> SpinOperator:
        if isinstance(scalar, SpinOperator):
            return NotImplemented
        return SpinOperator(self.support, complex(scalar) * self.matrix)

    __rmul__ = __mul__

    def __matmul__(self, other: SpinOperator) -> SpinOperator:
        if not isinstance(other, SpinOperator):
            return NotImplemented
        target = tuple(sorted(set(self.support) | set(other.support)))
        left = place_operator(self.matrix, self.support, target)
        right = place_operator(other.matrix, other.support, target)
        return SpinOperator(target, left @ right)

    def __repr__(self) -> str:
        return f"SpinOperator(support={self.support})"
