"""
Single-site operator bases, their biorthonormal duals, product labels and gradings.

A basis is a pair of frames: right elements A_n, in which operators are expanded, and
left elements B_m with Tr(B_m^dagger A_n) = delta_mn, which read coefficients off.
Product labels over N sites are little-endian in the linear index (site 0 varies
fastest), while site 0 is the most significant factor of Hilbert-space Kronecker
products.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
import scipy.linalg

from app.lindblad.errors import BasisDegenerateError, GradingError, IllConditionedBasisWarning
from app.lindblad.operators import P_DOWN, P_RIGHT, P_UP, IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
CONDITION_LIMIT = 1e8


class BasisKind(str, Enum):
    PAULI = "pauli"
    BX = "bx"
    BX_PRIME = "bx_prime"
    BZ = "bz"
    CUSTOM = "custom"


class GradingRule(str, Enum):
    PARTICLE_XYZ = "particle_xyz"
    NYNZ = "nynz"
    KETBRA_UPDOWN = "ketbra_updown"


def vec(op: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(op).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape((dim, dim), order="F")


def _as_frame(ops: Sequence[np.ndarray]) -> np.ndarray:
    arr = np.array(ops, dtype=complex)
    if arr.shape != (4, 2, 2):
        raise BasisDegenerateError(f"a local basis needs four 2x2 operators, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise BasisDegenerateError("basis operators must have finite entries")
    return arr


def _frame_matrix(ops: np.ndarray) -> np.ndarray:
    # columns are vec(op_n)
    return np.stack([vec(op) for op in ops], axis=1)


def dual_basis(right: Sequence[np.ndarray], *, condition_limit: float = CONDITION_LIMIT) -> np.ndarray:
    """Left duals of ``right`` from the inverse Gram matrix G_mn = Tr(A_m^dagger A_n)."""
    ops = _as_frame(right)
    frame = _frame_matrix(ops)
    if np.linalg.matrix_rank(frame) < 4:
        raise BasisDegenerateError("right operators are linearly dependent; Gram matrix is singular")

    gram = frame.conj().T @ frame
    cond = float(np.linalg.cond(gram))
    if not np.isfinite(cond):
        raise BasisDegenerateError("Gram matrix is singular")
    if cond > condition_limit:
        logger.warning("ill-conditioned local basis: cond(G)=%.3e", cond)
        warnings.warn(
            f"Gram matrix condition number {cond:.3e} exceeds {condition_limit:.1e}",
            IllConditionedBasisWarning,
            stacklevel=2,
        )

    left_frame = frame @ scipy.linalg.inv(gram)
    return np.stack([left_frame[:, m].reshape((2, 2), order="F") for m in range(4)])


@dataclass(frozen=True, eq=False)
class LocalBasis:
    name: str
    right: np.ndarray
    left: np.ndarray
    letters: tuple[str, ...] = ("0", "1", "2", "3")

    def __post_init__(self) -> None:
        right = _as_frame(self.right)
        left = _as_frame(self.left)
        right.flags.writeable = False
        left.flags.writeable = False
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "left", left)
        if len(self.letters) != 4:
            raise ValueError("a local basis needs four letter names")

    def right_frame(self) -> np.ndarray:
        return _frame_matrix(self.right)

    def left_frame(self) -> np.ndarray:
        return _frame_matrix(self.left)

    def overlaps(self) -> np.ndarray:
        """Matrix of Tr(left[m]^dagger right[n])."""
        return self.left_frame().conj().T @ self.right_frame()

    def to_dict(self) -> dict:
        return {"name": self.name, "letters": list(self.letters)}


_BUILTIN_RIGHT = {
    BasisKind.PAULI: ((IDENTITY, SIGMA_Z, SIGMA_X, SIGMA_Y), ("1", "z", "x", "y")),
    BasisKind.BX: ((P_RIGHT, SIGMA_X, SIGMA_Z, SIGMA_Y), ("0", "x", "z", "y")),
    BasisKind.BX_PRIME: ((P_RIGHT, SIGMA_X, 2**0.25 * SIGMA_Z, SIGMA_Y), ("0", "x", "z", "y")),
    BasisKind.BZ: (
        (P_DOWN, P_UP, np.array([[0, 1], [0, 0]], dtype=complex), np.array([[0, 0], [1, 0]], dtype=complex)),
        ("dd", "uu", "ud", "du"),
    ),
}


def make_local_basis(
    kind: BasisKind | str,
    right: Sequence[np.ndarray] | None = None,
    *,
    name: str | None = None,
    condition_limit: float = CONDITION_LIMIT,
) -> LocalBasis:
    kind = BasisKind(kind)
    if kind is BasisKind.CUSTOM:
        if right is None:
            raise BasisDegenerateError("custom basis requires four right operators")
        ops = _as_frame(right)
        letters = ("0", "1", "2", "3")
    else:
        if right is not None:
            raise ValueError(f"basis {kind.value!r} is fixed; right operators are only accepted for custom")
        raw, letters = _BUILTIN_RIGHT[kind]
        ops = _as_frame(raw)
    left = dual_basis(ops, condition_limit=condition_limit)
    return LocalBasis(name=name or kind.value, right=ops, left=left, letters=letters)


def biorthonormality_defect(basis: LocalBasis) -> float:
    return float(np.max(np.abs(basis.overlaps() - np.eye(4))))


def check_biorthonormality(basis: LocalBasis, tol: float = 1e-12) -> bool:
    return biorthonormality_defect(basis) <= tol


@dataclass(frozen=True)
class ProductLabel:
    letters: tuple[int, ...]

    def __post_init__(self) -> None:
        letters = tuple(int(a) for a in self.letters)
        if any(a < 0 or a > 3 for a in letters):
            raise GradingError(f"label letters must lie in 0..3, got {letters}")
        object.__setattr__(self, "letters", letters)

    @property
    def n_sites(self) -> int:
        return len(self.letters)

    @property
    def index(self) -> int:
        return encode_label(self.letters)

    @classmethod
    def from_index(cls, index: int, n_sites: int) -> ProductLabel:
        return cls(decode_label(index, n_sites))

    def render(self, basis: LocalBasis) -> str:
        return "".join(basis.letters[a] for a in self.letters)


def encode_label(letters: Sequence[int]) -> int:
    index = 0
    for pos, a in enumerate(letters):
        a = int(a)
        if a < 0 or a > 3:
            raise GradingError(f"letter {a} outside 0..3")
        index += a * 4**pos
    return index


def decode_label(index: int, n_sites: int) -> tuple[int, ...]:
    if index < 0 or index >= 4**n_sites:
        raise GradingError(f"index {index} outside [0, 4^{n_sites})")
    return tuple((index // 4**pos) % 4 for pos in range(n_sites))


def label_digits(n_sites: int) -> np.ndarray:
    """All labels as a (4^N, N) integer array, row = linear index."""
    idx = np.arange(4**n_sites, dtype=np.int64)
    powers = 4 ** np.arange(n_sites, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % 4


@dataclass(frozen=True)
class GradeKey:
    total: int
    parities: tuple[int, int, int] | None = None
    aux: tuple[int, int] | None = None
    sector: int | None = None

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "parities": list(self.parities) if self.parities is not None else None,
            "aux": list(self.aux) if self.aux is not None else None,
            "sector": self.sector,
        }


# (N_k, N_b) per bz letter: |dn><dn|, |up><up|, |up><dn|, |dn><up|
_KETBRA_COUNTS = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], dtype=np.int64)

_RULE_BASES = {
    GradingRule.PARTICLE_XYZ: {BasisKind.BX, BasisKind.BX_PRIME, BasisKind.PAULI, BasisKind.CUSTOM},
    GradingRule.NYNZ: {BasisKind.PAULI},
    GradingRule.KETBRA_UPDOWN: {BasisKind.BZ},
}


def check_rule_compatible(basis: LocalBasis, rule: GradingRule | str) -> GradingRule:
    rule = GradingRule(rule)
    try:
        kind = BasisKind(basis.name)
    except ValueError:
        kind = BasisKind.CUSTOM
    if kind not in _RULE_BASES[rule]:
        raise GradingError(f"grading {rule.value!r} is not defined for basis {basis.name!r}")
    return rule


def grade_arrays(digits: np.ndarray, rule: GradingRule | str) -> dict[str, np.ndarray]:
    """Vectorized grading of a (labels, N) digit array."""
    rule = GradingRule(rule)
    digits = np.asarray(digits, dtype=np.int64)
    if digits.size and (digits.min() < 0 or digits.max() > 3):
        raise GradingError("label letters must lie in 0..3")
    rows = digits.shape[0]
    zeros = np.zeros(rows, dtype=np.int64)

    if rule is GradingRule.PARTICLE_XYZ:
        n_x = np.sum(digits == 1, axis=1)
        n_z = np.sum(digits == 2, axis=1)
        n_y = np.sum(digits == 3, axis=1)
        p_x, p_y, p_z = n_x % 2, n_y % 2, n_z % 2
        return {
            "total": n_x + n_y + n_z,
            "parities": np.stack([p_x, p_y, p_z], axis=1),
            "aux": np.stack([zeros, zeros], axis=1),
            "sector": p_x + 2 * p_y + 4 * p_z,
        }
    if rule is GradingRule.NYNZ:
        # pauli letters: 1 = z, 3 = y
        n_z = np.sum(digits == 1, axis=1)
        n_y = np.sum(digits == 3, axis=1)
        non_identity = np.any(digits != 0, axis=1).astype(np.int64)
        return {
            "total": n_y + n_z,
            "parities": np.zeros((rows, 3), dtype=np.int64),
            "aux": np.stack([n_y, n_z], axis=1),
            "sector": non_identity,
        }

    counts = _KETBRA_COUNTS[digits].sum(axis=1) if digits.shape[1] else np.zeros((rows, 2), dtype=np.int64)
    return {
        "total": counts[:, 0] + counts[:, 1],
        "parities": np.zeros((rows, 3), dtype=np.int64),
        "aux": counts,
        "sector": counts[:, 0],
    }


def grade(label: ProductLabel | Sequence[int], rule: GradingRule | str) -> GradeKey:
    letters = label.letters if isinstance(label, ProductLabel) else tuple(label)
    arrays = grade_arrays(np.array([letters], dtype=np.int64).reshape(1, len(letters)), rule)
    return GradeKey(
        total=int(arrays["total"][0]),
        parities=tuple(int(p) for p in arrays["parities"][0]),  # type: ignore[arg-type]
        aux=tuple(int(a) for a in arrays["aux"][0]),  # type: ignore[arg-type]
        sector=int(arrays["sector"][0]),
    )


def product_frames(basis: LocalBasis, n_sites: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Right and left frame matrices of the N-site product basis.

    Column ``n`` is vec of the product operator with label index ``n``.
    """
    right = np.ones((1, 1, 1), dtype=complex)
    left = np.ones((1, 1, 1), dtype=complex)
    for _ in range(n_sites):
        right = _grow(right, basis.right)
        left = _grow(left, basis.left)
    labels = right.shape[0]
    # vec(op) column-stacked == row-major flatten of op^T
    right_frame = right.transpose(0, 2, 1).reshape(labels, -1).T
    left_frame = left.transpose(0, 2, 1).reshape(labels, -1).T
    return right_frame, left_frame


def _grow(ops: np.ndarray, local: np.ndarray) -> np.ndarray:
    # new site is the most significant label digit and the least significant kron factor
    labels, dim, _ = ops.shape
    grown = np.einsum("oij,akl->aoikjl", ops, local)
    return grown.reshape(4 * labels, 2 * dim, 2 * dim)


def site_traces(basis: LocalBasis) -> np.ndarray:
    return np.array([np.trace(op) for op in basis.right])


def trace_row(basis: LocalBasis, n_sites: int) -> np.ndarray:
    """Row t with t_n = Tr(A_n); trace preservation means t @ M = 0."""
    row = np.ones(1, dtype=complex)
    local = site_traces(basis)
    for _ in range(n_sites):
        # little-endian: the new site is the slow index
        row = np.kron(local, row)
    return row
