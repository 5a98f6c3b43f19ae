"""
Spectra, gaps and eigenvalue bounds of Liouvillians and of their diagonal blocks.

Eigenvalue lists are sorted by descending real part, ties by ascending |Im|.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from app.lindblad.blockstruct import (
    Block,
    BlockPartition,
    Symmetry,
    extract_diagonal_blocks,
    hermiticity_check,
    verify_block_triangular,
)
from app.lindblad.errors import DimensionError, NotPositiveDefiniteError, StructureError
from app.lindblad.lattice import Boundary, Geometry, Lattice
from app.lindblad.liouville import SuperMatrix
from app.lindblad.opspace import DEFAULT_TOL

logger = logging.getLogger(__name__)

ZERO_TOL = 1e-9
DENSE_LIMIT = 4**6


def sort_spectrum(values: Iterable[complex]) -> np.ndarray:
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=complex).ravel()
    order = np.lexsort((np.abs(arr.imag), -arr.real))
    return arr[order]


def _small_eigenvalues(m: np.ndarray) -> np.ndarray:
    if m.shape[0] == 1:
        return m[0:1, 0].astype(complex)
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    half_trace = 0.5 * (a + d)
    root = np.sqrt(complex(0.25 * (a - d) ** 2 + b * c))
    return np.array([half_trace + root, half_trace - root], dtype=complex)


def eigenvalues(
    matrix: np.ndarray,
    *,
    dense_limit: int | None = DENSE_LIMIT,
    hermitian: bool | None = None,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """
    Full spectrum of a dense square matrix.

    ``hermitian=None`` decides from the matrix itself; Hermitian input goes to the
    symmetric solver, everything else to the Schur-based general solver.
    """
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"eigenvalues needs a square matrix, got shape {m.shape}")
    n = m.shape[0]
    if dense_limit is not None and n > dense_limit:
        raise DimensionError(f"dimension {n} exceeds the dense limit {dense_limit}; split into diagonal blocks first")
    if n == 0:
        return np.zeros(0, dtype=complex)
    if n <= 2:
        return sort_spectrum(_small_eigenvalues(m))

    if hermitian is None:
        hermitian = hermiticity_check(m, tol).symmetry is Symmetry.HERMITIAN
    if hermitian:
        values = scipy.linalg.eigvalsh(m).astype(complex)
    else:
        values = scipy.linalg.eigvals(m, overwrite_a=False, check_finite=True)
    return sort_spectrum(values)


def spectral_gap(spectrum: Sequence[complex] | np.ndarray, tol: float = ZERO_TOL) -> tuple[float | None, int]:
    values = np.asarray(spectrum, dtype=complex)
    steady = int(np.sum((np.abs(values.real) <= tol) & (np.abs(values.imag) <= tol)))
    decaying = values.real[values.real < -tol]
    gap = float(-decaying.max()) if decaying.size else None
    return gap, steady


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    eigenvalues: np.ndarray
    gap: float | None
    steady_dim: int
    max_imag: float
    max_real: float

    def to_dict(self, with_eigenvalues: bool = True) -> dict:
        out: dict = {
            "gap": self.gap,
            "steady_dim": self.steady_dim,
            "max_imag": self.max_imag,
            "max_real": self.max_real,
            "size": int(self.eigenvalues.size),
        }
        if with_eigenvalues:
            out["eigenvalues"] = [[float(v.real), float(v.imag)] for v in self.eigenvalues]
        return out


def analyze_spectrum(values: Sequence[complex] | np.ndarray, tol: float = ZERO_TOL) -> SpectrumResult:
    ordered = sort_spectrum(values)
    gap, steady = spectral_gap(ordered, tol)
    return SpectrumResult(
        eigenvalues=ordered,
        gap=gap,
        steady_dim=steady,
        max_imag=float(np.max(np.abs(ordered.imag), initial=0.0)),
        max_real=float(np.max(ordered.real, initial=-np.inf)) if ordered.size else 0.0,
    )


def full_spectrum(
    matrix: SuperMatrix,
    *,
    dense_limit: int | None = DENSE_LIMIT,
    tol: float = ZERO_TOL,
) -> SpectrumResult:
    values = eigenvalues(matrix.dense(dense_limit), dense_limit=dense_limit)
    logger.debug("dense spectrum: dim=%d", matrix.dim)
    return analyze_spectrum(values, tol)


@dataclass(frozen=True, eq=False)
class BlockSpectrum:
    block: Block
    symmetry: Symmetry
    eigenvalues: np.ndarray


def _solve_block(block: Block, tol: float, dense_limit: int | None) -> BlockSpectrum:
    report = hermiticity_check(block, tol)
    values = eigenvalues(
        block.matrix,
        dense_limit=dense_limit,
        hermitian=report.symmetry is Symmetry.HERMITIAN,
    )
    return BlockSpectrum(block, report.symmetry, values)


def block_spectra(
    blocks: Sequence[Block],
    *,
    tol: float = DEFAULT_TOL,
    dense_limit: int | None = DENSE_LIMIT,
    threads: int = 1,
) -> list[BlockSpectrum]:
    if threads <= 1 or len(blocks) <= 1:
        return [_solve_block(b, tol, dense_limit) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda b: _solve_block(b, tol, dense_limit), blocks))


def blockwise_spectrum(
    matrix: SuperMatrix,
    partition: BlockPartition,
    *,
    tol: float = DEFAULT_TOL,
    zero_tol: float = ZERO_TOL,
    dense_limit: int | None = DENSE_LIMIT,
    threads: int = 1,
) -> tuple[SpectrumResult, list[BlockSpectrum]]:
    blocks = extract_diagonal_blocks(matrix, partition, tol=tol)
    solved = block_spectra(blocks, tol=tol, dense_limit=dense_limit, threads=threads)
    merged = np.concatenate([s.eigenvalues for s in solved]) if solved else np.zeros(0, dtype=complex)
    return analyze_spectrum(merged, zero_tol), solved


# ---------------------------------------------------------------- bounds


class BoundMethod(str, Enum):
    HERMITIAN_COMPONENT = "hermitian_component"
    GERSHGORIN_ROWS = "gershgorin_rows"
    GERSHGORIN_COLS = "gershgorin_cols"
    SINGULAR_VALUE = "singular_value"


@dataclass(frozen=True)
class BoundReport:
    method: BoundMethod
    upper: float | None
    lower: float | None
    certificate: dict = field(default_factory=dict)
    rigorous: bool = True
    caveat: str = ""

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "upper": self.upper,
            "lower": self.lower,
            "certificate": self.certificate,
            "rigorous": self.rigorous,
            "caveat": self.caveat,
        }


def _square(block: Block | np.ndarray) -> np.ndarray:
    m = np.asarray(block.matrix if isinstance(block, Block) else block, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise DimensionError(f"bounds need a nonempty square block, got shape {m.shape}")
    return m


def hermitian_component_bounds(block: Block | np.ndarray) -> BoundReport:
    """Re(lambda) of every eigenvalue lies between the extreme eigenvalues of (M + M^dagger)/2."""
    m = _square(block)
    mu = scipy.linalg.eigvalsh(0.5 * (m + m.conj().T))
    mu_min, mu_max = float(mu[0]), float(mu[-1])
    return BoundReport(
        BoundMethod.HERMITIAN_COMPONENT,
        upper=mu_max,
        lower=mu_min,
        certificate={"mu_min": mu_min, "mu_max": mu_max},
    )


def gershgorin_bound(block: Block | np.ndarray, mode: str = "rows") -> BoundReport:
    m = _square(block)
    if mode not in ("rows", "cols"):
        raise ValueError(f"mode must be 'rows' or 'cols', got {mode!r}")
    centers = np.diag(m)
    absolute = np.abs(m)
    off = absolute.sum(axis=1 if mode == "rows" else 0) - np.abs(centers)
    radii = np.maximum(off, 0.0)
    return BoundReport(
        BoundMethod.GERSHGORIN_ROWS if mode == "rows" else BoundMethod.GERSHGORIN_COLS,
        upper=float(np.max(centers.real + radii)),
        lower=float(np.min(centers.real - radii)),
        certificate={
            "centers": [[float(c.real), float(c.imag)] for c in centers],
            "radii": [float(r) for r in radii],
        },
    )


def smallest_singular_value(block: Block | np.ndarray, tol: float = DEFAULT_TOL) -> BoundReport:
    m = _square(block)
    nu = float(scipy.linalg.svdvals(m).min())
    known_real = hermiticity_check(m, tol).symmetry is Symmetry.HERMITIAN
    caveat = "" if known_real else "upper bound only: extremal eigenvalue not known to be real"
    return BoundReport(
        BoundMethod.SINGULAR_VALUE,
        upper=None,
        lower=None,
        certificate={"nu": nu},
        rigorous=known_real,
        caveat=caveat,
    )


def block_bounds(block: Block | np.ndarray, tol: float = DEFAULT_TOL) -> list[BoundReport]:
    return [
        hermitian_component_bounds(block),
        gershgorin_bound(block, "rows"),
        gershgorin_bound(block, "cols"),
        smallest_singular_value(block, tol),
    ]


# ---------------------------------------------------------------- Weyl ordering


@dataclass(frozen=True, eq=False)
class WeylReport:
    holds: bool
    worst_margin: float
    upper_margin: float
    lower_margin: float
    spectrum_1: np.ndarray
    spectrum_2: np.ndarray
    spectrum_sum: np.ndarray

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "worst_margin": self.worst_margin,
            "upper_margin": self.upper_margin,
            "lower_margin": self.lower_margin,
            "size": int(self.spectrum_sum.size),
        }


def _bth_spectrum(matrix: SuperMatrix, partition: BlockPartition, tol: float, what: str) -> np.ndarray:
    report = verify_block_triangular(matrix, partition, tol)
    if not report.is_triangular:
        raise StructureError(f"{what} is not block-triangular (max violation {report.max_violation:.3e})")
    values: list[np.ndarray] = []
    for block in extract_diagonal_blocks(matrix, partition, tol=tol):
        herm = hermiticity_check(block, tol)
        if herm.symmetry is not Symmetry.HERMITIAN:
            raise StructureError(
                f"{what} has a non-Hermitian diagonal block (deviation {herm.hermitian_deviation:.3e}); "
                "complex spectra are not compared"
            )
        values.append(scipy.linalg.eigvalsh(0.5 * (block.matrix + block.matrix.conj().T)))
    return np.sort(np.concatenate(values))[::-1]


def weyl_check(L1: SuperMatrix, L2: SuperMatrix, partition: BlockPartition, tol: float = DEFAULT_TOL) -> WeylReport:
    """
    lambda_k <= lambda_k^(i) and lambda_k >= lambda_k^(i) + min lambda^(j) for the
    descending real spectra of L1, L2 and L1 + L2.
    """
    s1 = _bth_spectrum(L1, partition, tol, "L1")
    s2 = _bth_spectrum(L2, partition, tol, "L2")
    total = _bth_spectrum(L1 + L2, partition, tol, "L1+L2")

    upper = float(min(np.min(s1 - total), np.min(s2 - total)))
    lower = float(min(np.min(total - s1 - s2.min()), np.min(total - s2 - s1.min())))
    worst = min(upper, lower)
    return WeylReport(worst >= -tol, worst, upper, lower, s1, s2, total)


# ---------------------------------------------------------------- detailed balance


def _sqrt_psd(rho: np.ndarray, tol: float) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"state must be square, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise NotPositiveDefiniteError("state is not Hermitian")
    w, v = scipy.linalg.eigh(rho)
    if w.min() <= tol:
        raise NotPositiveDefiniteError(f"state is not positive definite (smallest eigenvalue {w.min():.3e})")
    return (v * np.sqrt(w)) @ v.conj().T


def detailed_balance_residual(matrix: SuperMatrix, rho_beta: np.ndarray, tol: float = DEFAULT_TOL) -> float:
    """max |L G - G L^dagger| with G(X) = rho^1/2 X rho^1/2, in the natural representation."""
    hdim = 2**matrix.n_sites
    if np.shape(rho_beta) != (hdim, hdim):
        raise DimensionError(f"state must be {hdim}x{hdim}, got {np.shape(rho_beta)}")
    root = _sqrt_psd(rho_beta, tol)
    natural = matrix.to_natural()
    g = np.kron(root.T, root)
    return float(np.max(np.abs(natural @ g - g @ natural.conj().T)))


def detailed_balance_check(matrix: SuperMatrix, rho_beta: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    return detailed_balance_residual(matrix, rho_beta, tol) <= tol


# ---------------------------------------------------------------- closed forms


def _momentum(k: float | Sequence[float]) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(k, dtype=float))
    if np.any(arr <= -math.pi - 1e-12) or np.any(arr > math.pi + 1e-12):
        raise ValueError(f"momentum components must lie in (-pi, pi], got {arr.tolist()}")
    return arr


def dispersion_z(k: float | Sequence[float], gamma_x: float, gamma_f: float) -> float:
    k = _momentum(k)
    return float(-gamma_x / 2 - 2 * gamma_f * np.sum(1 - np.cos(k)))


def dispersion_y(k: float | Sequence[float], gamma_x: float, gamma_f: float, gamma_z: float) -> float:
    k = _momentum(k)
    return float(-gamma_x / 2 - 2 * gamma_f * np.sum(1 + np.cos(k)) - 2 * gamma_z)


def dispersion_x(k: float | Sequence[float], gamma_x: float, gamma_f: float, gamma_z: float) -> float:
    k = _momentum(k)
    return float(-gamma_x - 2 * gamma_z - 2 * gamma_f * np.sum(1 + np.cos(k)))


def dispersion_magnon(k: float | Sequence[float], gamma_f: float, gamma_z: float) -> float:
    k = _momentum(k)
    return float(-2 * gamma_z - 2 * gamma_f * np.sum(1 + np.cos(k)))


def momenta(lattice: Lattice) -> np.ndarray:
    """Allowed crystal momenta in (-pi, pi]^d of a periodic chain or cubic lattice."""
    if lattice.geometry not in (Geometry.CHAIN, Geometry.CUBIC) or lattice.boundary is not Boundary.PERIODIC:
        raise ValueError("crystal momenta need a periodic chain or cubic lattice")
    axes = []
    for extent in lattice.shape:
        k = 2 * math.pi * np.arange(extent) / extent
        axes.append(np.where(k > math.pi + 1e-12, k - 2 * math.pi, k))
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def single_site_field_eigs(h_y: float) -> tuple[complex, complex]:
    root = np.sqrt(complex(1 / 16 - 4 * h_y**2))
    return complex(-0.75 + root), complex(-0.75 - root)


def magnetization_law_spectrum(hamiltonian: np.ndarray) -> np.ndarray:
    """-(N_k + N_b)/2 - i(E_k - E_b) over H eigenstates in the N_k and N_b up-spin sectors."""
    h = np.asarray(hamiltonian, dtype=complex)
    dim = h.shape[0]
    n = int(round(math.log2(dim)))
    # computational index bit = 0 means up on that site
    ups = np.array([n - bin(i).count("1") for i in range(dim)])
    sectors: dict[int, np.ndarray] = {}
    for count in range(n + 1):
        idx = np.flatnonzero(ups == count)
        sectors[count] = scipy.linalg.eigvalsh(h[np.ix_(idx, idx)])
    values = [
        -(nk + nb) / 2 - 1j * (ek - eb)
        for nk, ek_list in sectors.items()
        for nb, eb_list in sectors.items()
        for ek in ek_list
        for eb in eb_list
    ]
    return sort_spectrum(values)


def match_spectra(a: Sequence[complex] | np.ndarray, b: Sequence[complex] | np.ndarray) -> float:
    """Largest deviation between two eigenvalue multisets under an optimal pairing."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.size != b.size:
        raise DimensionError(f"multisets differ in size: {a.size} vs {b.size}")
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())
