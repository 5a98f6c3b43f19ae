"""
Superoperator assembly in product operator bases.

Matrix elements follow M_mn = <<B_m| L(A_n)>>, rows indexed by left (dual) elements.
Each term is turned into a small 4^s x 4^s matrix on its own support and scattered
into the 4^N x 4^N matrix; identities on the remaining sites are identities in
biorthonormal coordinates, so no full-size Kronecker product is ever formed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence, Union

import numpy as np
import scipy.sparse as sp

from app.lindblad.errors import DimensionError, ModelError
from app.lindblad.lattice import Lattice
from app.lindblad.operators import SpinOperator
from app.lindblad.opspace import DEFAULT_TOL, LocalBasis, product_frames, unvec, vec

logger = logging.getLogger(__name__)

# entries below this are floating-point noise of the local change of basis
ZERO_CUTOFF = 1e-14


@dataclass(frozen=True)
class HamiltonianTerm:
    coefficient: float
    operator: SpinOperator
    label: str = ""

    @property
    def support(self) -> tuple[int, ...]:
        return self.operator.support


@dataclass(frozen=True)
class LindbladTerm:
    rate: float
    operator: SpinOperator
    label: str = ""

    @property
    def support(self) -> tuple[int, ...]:
        return self.operator.support


Term = Union[HamiltonianTerm, LindbladTerm]


class TermSource(Protocol):
    def terms(self, lattice: Lattice) -> list[Term]: ...


Model = Union[TermSource, Sequence[Term]]


def model_terms(model: Model, lattice: Lattice) -> list[Term]:
    if hasattr(model, "terms"):
        return list(model.terms(lattice))  # type: ignore[union-attr]
    return list(model)  # type: ignore[arg-type]


def validate_terms(terms: Iterable[Term], lattice: Lattice, tol: float = DEFAULT_TOL) -> list[Term]:
    checked: list[Term] = []
    for term in terms:
        if term.support and max(term.support) >= lattice.n_sites:
            raise ModelError(f"term {term.label or term} has support {term.support} outside {lattice.n_sites} sites")
        if isinstance(term, LindbladTerm):
            if not np.isfinite(term.rate) or term.rate < 0:
                raise ModelError(f"negative or non-finite rate {term.rate} in term {term.label!r}")
        elif isinstance(term, HamiltonianTerm):
            if not np.isfinite(term.coefficient) or abs(np.imag(term.coefficient)) > 0:
                raise ModelError(f"Hamiltonian coefficient must be real, got {term.coefficient}")
            if not term.operator.is_hermitian(tol):
                raise ModelError(f"Hamiltonian term {term.label!r} is not Hermitian")
        else:
            raise ModelError(f"unknown term type {type(term).__name__}")
        checked.append(term)
    return checked


def local_superoperator(term: Term, *, adjoint: bool = False) -> np.ndarray:
    """Natural (column-stacked) matrix of a single term on its own support."""
    op = np.asarray(term.operator.matrix, dtype=complex)
    dim = op.shape[0]
    eye = np.eye(dim, dtype=complex)
    if isinstance(term, HamiltonianTerm):
        h = float(np.real(term.coefficient)) * op
        sup = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    else:
        ldl = op.conj().T @ op
        sup = term.rate * (np.kron(op.conj(), op) - 0.5 * np.kron(eye, ldl) - 0.5 * np.kron(ldl.T, eye))
    return sup.conj().T if adjoint else sup


@dataclass(frozen=True, eq=False)
class SuperMatrix:
    entries: sp.csr_matrix
    basis: LocalBasis
    lattice: Lattice
    adjoint: bool = False

    def __post_init__(self) -> None:
        entries = sp.csr_matrix(self.entries, dtype=complex)
        dim = 4**self.lattice.n_sites
        if entries.shape != (dim, dim):
            raise DimensionError(f"superoperator on {self.lattice.n_sites} sites must be {dim}x{dim}")
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def n_sites(self) -> int:
        return self.lattice.n_sites

    def dense(self, limit: int | None = None) -> np.ndarray:
        if limit is not None and self.dim > limit:
            raise DimensionError(
                f"dimension {self.dim} exceeds the dense limit {limit}; analyse diagonal blocks instead"
            )
        return self.entries.toarray()

    def frames(self) -> tuple[np.ndarray, np.ndarray]:
        return product_frames(self.basis, self.n_sites)

    def to_natural(self) -> np.ndarray:
        right, left = self.frames()
        return right @ (self.entries @ left.conj().T)

    def act(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        hdim = 2**self.n_sites
        if rho.shape != (hdim, hdim):
            raise DimensionError(f"operator must be {hdim}x{hdim}, got {rho.shape}")
        right, left = self.frames()
        coeffs = left.conj().T @ vec(rho)
        return unvec(right @ (self.entries @ coeffs), hdim)

    def __add__(self, other: SuperMatrix) -> SuperMatrix:
        if not isinstance(other, SuperMatrix):
            return NotImplemented
        if other.basis is not self.basis and other.basis.name != self.basis.name:
            raise DimensionError("cannot add superoperators expressed in different bases")
        if other.lattice.n_sites != self.lattice.n_sites:
            raise DimensionError("cannot add superoperators on different lattices")
        return SuperMatrix(self.entries + other.entries, self.basis, self.lattice, self.adjoint)

    def __mul__(self, scalar: float) -> SuperMatrix:
        return SuperMatrix(self.entries * scalar, self.basis, self.lattice, self.adjoint)

    __rmul__ = __mul__


def _support_offsets(support: Sequence[int]) -> np.ndarray:
    s = len(support)
    local = np.arange(4**s, dtype=np.int64)
    offsets = np.zeros(4**s, dtype=np.int64)
    for k, site in enumerate(support):
        offsets += ((local // 4**k) % 4) * 4 ** int(site)
    return offsets


def _base_indices(n_sites: int, support: Sequence[int]) -> np.ndarray:
    idx = np.arange(4**n_sites, dtype=np.int64)
    mask = np.ones(idx.shape, dtype=bool)
    for site in support:
        mask &= (idx // 4 ** int(site)) % 4 == 0
    return idx[mask]


def _scatter(local: np.ndarray, support: Sequence[int], n_sites: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    scale = max(float(np.max(np.abs(local), initial=0.0)), 1.0)
    r, c = np.nonzero(np.abs(local) > ZERO_CUTOFF * scale)
    if r.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0, dtype=complex)
    offsets = _support_offsets(support)
    base = _base_indices(n_sites, support)
    rows = (base[:, None] + offsets[r][None, :]).ravel()
    cols = (base[:, None] + offsets[c][None, :]).ravel()
    data = np.broadcast_to(local[r, c][None, :], (base.size, r.size)).ravel()
    return rows, cols, data


def _assemble(model: Model, lattice: Lattice, basis: LocalBasis, *, tol: float, adjoint: bool) -> SuperMatrix:
    terms = validate_terms(model_terms(model, lattice), lattice, tol)
    n = lattice.n_sites
    dim = 4**n

    frames: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    data: list[np.ndarray] = []
    for term in terms:
        s = len(term.support)
        if s not in frames:
            frames[s] = product_frames(basis, s)
        right, left = frames[s]
        local = left.conj().T @ local_superoperator(term, adjoint=adjoint) @ right
        r, c, d = _scatter(local, term.support, n)
        rows.append(r)
        cols.append(c)
        data.append(d)

    if rows:
        matrix = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
        ).tocsr()
        matrix.sum_duplicates()
    else:
        matrix = sp.csr_matrix((dim, dim), dtype=complex)
    logger.debug(
        "assembled %s superoperator: sites=%d basis=%s terms=%d nnz=%d",
        "adjoint" if adjoint else "forward",
        n,
        basis.name,
        len(terms),
        matrix.nnz,
    )
    return SuperMatrix(matrix, basis, lattice, adjoint)


def assemble(model: Model, lattice: Lattice, basis: LocalBasis, *, tol: float = DEFAULT_TOL) -> SuperMatrix:
    return _assemble(model, lattice, basis, tol=tol, adjoint=False)


def assemble_adjoint(model: Model, lattice: Lattice, basis: LocalBasis, *, tol: float = DEFAULT_TOL) -> SuperMatrix:
    return _assemble(model, lattice, basis, tol=tol, adjoint=True)


def apply(
    model: Model,
    lattice: Lattice,
    rho: np.ndarray,
    *,
    adjoint: bool = False,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """L(rho) (or L^dagger(rho)) straight from the Hilbert-space definition."""
    n = lattice.n_sites
    hdim = 2**n
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (hdim, hdim):
        raise DimensionError(f"operator must be {hdim}x{hdim} for {n} sites, got {rho.shape}")

    out = np.zeros_like(rho)
    for term in validate_terms(model_terms(model, lattice), lattice, tol):
        op = term.operator.embed(n)
        if isinstance(term, HamiltonianTerm):
            h = float(np.real(term.coefficient)) * op
            comm = h @ rho - rho @ h
            out += 1j * comm if adjoint else -1j * comm
        else:
            ldl = op.conj().T @ op
            jump = op.conj().T @ rho @ op if adjoint else op @ rho @ op.conj().T
            out += term.rate * (jump - 0.5 * (ldl @ rho + rho @ ldl))
    return out


def effective_matrix(
    model: Model,
    lattice: Lattice,
    left_ops: Sequence[np.ndarray],
    right_ops: Sequence[np.ndarray],
) -> np.ndarray:
    """Entry (m, n) = Tr(left_ops[m]^dagger L(right_ops[n]))."""
    if not left_ops or not right_ops:
        raise DimensionError("effective_matrix needs nonempty operator lists")
    hdim = 2**lattice.n_sites
    for op in list(left_ops) + list(right_ops):
        if np.shape(op) != (hdim, hdim):
            raise DimensionError(f"operators must be {hdim}x{hdim}, got {np.shape(op)}")

    terms = model_terms(model, lattice)
    images = np.stack([vec(apply(terms, lattice, a)) for a in right_ops], axis=1)
    lefts = np.stack([vec(b) for b in left_ops], axis=1)
    return lefts.conj().T @ images
