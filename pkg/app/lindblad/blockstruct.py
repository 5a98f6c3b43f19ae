from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from app.lindblad.errors import DimensionError, GradingError, StructureError
from app.lindblad.lattice import Lattice
from app.lindblad.liouville import SuperMatrix
from app.lindblad.opspace import (
    DEFAULT_TOL,
    GradeKey,
    GradingRule,
    LocalBasis,
    check_rule_compatible,
    grade_arrays,
    label_digits,
)

logger = logging.getLogger(__name__)


class Orientation(str, Enum):
    LOWER = "lower"
    UPPER = "upper"


DEFAULT_ORIENTATION = {
    GradingRule.PARTICLE_XYZ: Orientation.LOWER,
    GradingRule.NYNZ: Orientation.LOWER,
    GradingRule.KETBRA_UPDOWN: Orientation.UPPER,
}


@dataclass(frozen=True, eq=False)
class BlockPartition:
    """
    Graded order of the product basis.

    ``permutation[p]`` is the original label index sitting at graded position ``p``;
    block ``b`` covers graded positions ``boundaries[b]:boundaries[b + 1]``.
    """

    permutation: np.ndarray
    boundaries: tuple[int, ...]
    orientation: Orientation = Orientation.LOWER
    rule: GradingRule | None = None
    keys: tuple[GradeKey | None, ...] = ()

    def __post_init__(self) -> None:
        perm = np.asarray(self.permutation, dtype=np.int64)
        dim = perm.size
        if not np.array_equal(np.sort(perm), np.arange(dim)):
            raise GradingError("permutation is not a bijection")
        bounds = tuple(int(b) for b in self.boundaries)
        if len(bounds) < 2 or bounds[0] != 0 or bounds[-1] != dim:
            raise GradingError(f"boundaries must start at 0 and end at {dim}, got {bounds}")
        if any(b >= c for b, c in zip(bounds, bounds[1:])):
            raise GradingError(f"boundaries must be strictly ascending, got {bounds}")
        keys = tuple(self.keys) or (None,) * (len(bounds) - 1)
        if len(keys) != len(bounds) - 1:
            raise GradingError("one grade key per block is required")
        perm.flags.writeable = False
        object.__setattr__(self, "permutation", perm)
        object.__setattr__(self, "boundaries", bounds)
        object.__setattr__(self, "orientation", Orientation(self.orientation))
        object.__setattr__(self, "keys", keys)

    @property
    def dim(self) -> int:
        return int(self.permutation.size)

    @property
    def n_blocks(self) -> int:
        return len(self.boundaries) - 1

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return tuple(c - b for b, c in zip(self.boundaries, self.boundaries[1:]))

    def block_indices(self, block: int) -> np.ndarray:
        return self.permutation[self.boundaries[block] : self.boundaries[block + 1]]

    def block_of(self) -> np.ndarray:
        """Block number of every original label index."""
        out = np.empty(self.dim, dtype=np.int64)
        for b in range(self.n_blocks):
            out[self.block_indices(b)] = b
        return out

    def with_orientation(self, orientation: Orientation | str) -> BlockPartition:
        return BlockPartition(self.permutation, self.boundaries, Orientation(orientation), self.rule, self.keys)

    def to_dict(self) -> dict:
        return {
            "rule": self.rule.value if self.rule else None,
            "orientation": self.orientation.value,
            "boundaries": list(self.boundaries),
            "blocks": [
                {"size": size, "key": key.to_dict() if key is not None else None}
                for size, key in zip(self.block_sizes, self.keys)
            ],
        }


def grade_ordering(
    basis: LocalBasis,
    lattice: Lattice,
    rule: GradingRule | str,
    sector_split: bool = False,
    orientation: Orientation | str | None = None,
) -> BlockPartition:
    rule = check_rule_compatible(basis, rule)
    digits = label_digits(lattice.n_sites)
    graded = grade_arrays(digits, rule)
    total = graded["total"]
    sector = graded["sector"] if sector_split else np.zeros_like(total)

    # lexsort: last key is primary
    sort_keys = tuple(digits[:, k] for k in reversed(range(lattice.n_sites))) + (sector, total)
    perm = np.lexsort(sort_keys)

    sorted_total = total[perm]
    sorted_sector = sector[perm]
    change = np.flatnonzero((np.diff(sorted_total) != 0) | (np.diff(sorted_sector) != 0)) + 1
    bounds = (0, *change.tolist(), perm.size)

    keys: list[GradeKey] = []
    for start in bounds[:-1]:
        first = perm[start]
        if sector_split:
            keys.append(
                GradeKey(
                    total=int(total[first]),
                    parities=tuple(int(p) for p in graded["parities"][first]),  # type: ignore[arg-type]
                    aux=tuple(int(a) for a in graded["aux"][first]),  # type: ignore[arg-type]
                    sector=int(graded["sector"][first]),
                )
            )
        else:
            keys.append(GradeKey(total=int(total[first])))

    chosen = Orientation(orientation) if orientation is not None else DEFAULT_ORIENTATION[rule]
    partition = BlockPartition(perm, bounds, chosen, rule, tuple(keys))
    logger.debug("graded %d labels by %s into %d blocks", perm.size, rule.value, partition.n_blocks)
    return partition


def contiguous_partition(sizes: Sequence[int], orientation: Orientation | str = Orientation.LOWER) -> BlockPartition:
    """Blocks of consecutive label indices in the basis's natural order."""
    sizes = [int(s) for s in sizes]
    if any(s <= 0 for s in sizes):
        raise GradingError(f"block sizes must be positive, got {sizes}")
    bounds = tuple(int(b) for b in np.concatenate([[0], np.cumsum(sizes)]))
    return BlockPartition(np.arange(bounds[-1]), bounds, Orientation(orientation))


@dataclass(frozen=True)
class TriangularityReport:
    is_triangular: bool
    max_violation: float
    violation: tuple[int, int] | None
    orientation: Orientation
    tol: float

    def to_dict(self) -> dict:
        return {
            "is_triangular": self.is_triangular,
            "max_violation": self.max_violation,
            "violation": list(self.violation) if self.violation is not None else None,
            "orientation": self.orientation.value,
            "tol": self.tol,
        }


def _entries(matrix: SuperMatrix | sp.spmatrix | np.ndarray) -> sp.csr_matrix:
    if isinstance(matrix, SuperMatrix):
        return matrix.entries
    return sp.csr_matrix(matrix)


def _forbidden_violation(coo: sp.coo_matrix, block_of: np.ndarray, orientation: Orientation) -> tuple[float, tuple[int, int] | None]:
    row_block = block_of[coo.row]
    col_block = block_of[coo.col]
    if orientation is Orientation.LOWER:
        forbidden = row_block < col_block
    else:
        forbidden = row_block > col_block
    mags = np.abs(coo.data[forbidden])
    if mags.size == 0:
        return 0.0, None
    k = int(np.argmax(mags))
    return float(mags[k]), (int(coo.row[forbidden][k]), int(coo.col[forbidden][k]))


def verify_block_triangular(
    matrix: SuperMatrix | sp.spmatrix | np.ndarray,
    partition: BlockPartition,
    tol: float = DEFAULT_TOL,
    orientation: Orientation | str | None = "partition",
) -> TriangularityReport:
    """
    Check the forbidden triangle of the blocked matrix.

    ``orientation="partition"`` tests the partition's own orientation; ``None`` tests
    both and reports the better one.
    """
    entries = _entries(matrix)
    if entries.shape != (partition.dim, partition.dim):
        raise DimensionError(f"matrix shape {entries.shape} does not match partition dimension {partition.dim}")

    if orientation == "partition":
        candidates = [partition.orientation]
    elif orientation is None:
        candidates = [partition.orientation] + [o for o in Orientation if o is not partition.orientation]
    else:
        candidates = [Orientation(orientation)]

    coo = entries.tocoo()
    block_of = partition.block_of()
    reports = []
    for candidate in candidates:
        worst, where = _forbidden_violation(coo, block_of, candidate)
        reports.append(TriangularityReport(worst <= tol, worst, where, candidate, tol))
    return min(reports, key=lambda r: r.max_violation)


@dataclass(frozen=True, eq=False)
class Block:
    key: GradeKey | None
    indices: np.ndarray
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return int(self.indices.size)


def extract_diagonal_blocks(
    matrix: SuperMatrix | sp.spmatrix | np.ndarray,
    partition: BlockPartition,
    *,
    tol: float = DEFAULT_TOL,
    override: bool = False,
) -> list[Block]:
    entries = _entries(matrix)
    if not override:
        report = verify_block_triangular(entries, partition, tol)
        if not report.is_triangular:
            raise StructureError(
                f"matrix is not {report.orientation.value} block-triangular: "
                f"|M{report.violation}| = {report.max_violation:.3e} > {tol:.1e}"
            )
    blocks = []
    for b in range(partition.n_blocks):
        idx = partition.block_indices(b)
        dense = entries[idx][:, idx].toarray()
        blocks.append(Block(partition.keys[b], np.array(idx), dense))
    return blocks


def split_connected(block: Block, tol: float = DEFAULT_TOL) -> list[Block]:
    """Split a block into the connected components of its nonzero pattern."""
    pattern = sp.csr_matrix(np.abs(block.matrix) > tol)
    n_comp, labels = connected_components(pattern, directed=True, connection="weak")
    if n_comp == 1:
        return [block]
    parts = []
    for c in range(n_comp):
        local = np.flatnonzero(labels == c)
        parts.append(Block(block.key, block.indices[local], block.matrix[np.ix_(local, local)]))
    return parts


class Symmetry(str, Enum):
    HERMITIAN = "hermitian"
    ANTI_HERMITIAN = "anti_hermitian"
    NEITHER = "neither"


@dataclass(frozen=True)
class HermiticityReport:
    symmetry: Symmetry
    deviation: float
    hermitian_deviation: float
    anti_hermitian_deviation: float

    def to_dict(self) -> dict:
        return {
            "symmetry": self.symmetry.value,
            "deviation": self.deviation,
            "hermitian_deviation": self.hermitian_deviation,
            "anti_hermitian_deviation": self.anti_hermitian_deviation,
        }


def hermiticity_check(block: Block | np.ndarray, tol: float = DEFAULT_TOL) -> HermiticityReport:
    m = np.asarray(block.matrix if isinstance(block, Block) else block)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"block must be square, got {m.shape}")
    herm = float(np.max(np.abs(m - m.conj().T), initial=0.0))
    anti = float(np.max(np.abs(m + m.conj().T), initial=0.0))
    if herm <= tol:
        symmetry = Symmetry.HERMITIAN
    elif anti <= tol:
        symmetry = Symmetry.ANTI_HERMITIAN
    else:
        symmetry = Symmetry.NEITHER
    return HermiticityReport(symmetry, min(herm, anti), herm, anti)
