from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from app.lindblad.errors import ModelError


class Boundary(str, Enum):
    OPEN = "open"
    PERIODIC = "periodic"


class Geometry(str, Enum):
    CHAIN = "chain"
    CUBIC = "cubic"
    STAR = "star"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Lattice:
    n_sites: int
    bonds: tuple[tuple[int, int], ...] = ()
    dimension: int = 1
    geometry: Geometry = Geometry.CHAIN
    boundary: Boundary = Boundary.OPEN
    shape: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.n_sites < 1:
            raise ModelError(f"a lattice needs at least one site, got {self.n_sites}")
        if self.dimension < 1:
            raise ModelError(f"dimension must be positive, got {self.dimension}")
        bonds = tuple((int(i), int(j)) for i, j in self.bonds)
        for i, j in bonds:
            if not (0 <= i < self.n_sites and 0 <= j < self.n_sites):
                raise ModelError(f"bond ({i}, {j}) has an endpoint outside 0..{self.n_sites - 1}")
            if i == j:
                raise ModelError(f"self-bond on site {i}")
        object.__setattr__(self, "bonds", bonds)
        object.__setattr__(self, "geometry", Geometry(self.geometry))
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape) or (self.n_sites,))

    @property
    def sites(self) -> range:
        return range(self.n_sites)

    def coordination(self, site: int) -> int:
        return sum(1 for i, j in self.bonds if site in (i, j))

    def max_coordination(self) -> int:
        return max((self.coordination(s) for s in self.sites), default=0)

    def positions(self) -> np.ndarray:
        """Integer coordinates of every site, shape (N, d); row-major over ``shape``."""
        if self.geometry not in (Geometry.CHAIN, Geometry.CUBIC):
            raise ModelError(f"{self.geometry.value} lattice has no coordinates")
        return np.array(list(itertools.product(*[range(s) for s in self.shape])), dtype=float).reshape(
            self.n_sites, len(self.shape)
        )

    def to_dict(self) -> dict:
        return {
            "sites": self.n_sites,
            "dimension": self.dimension,
            "geometry": self.geometry.value,
            "boundary": self.boundary.value,
            "shape": list(self.shape),
            "bonds": [list(b) for b in self.bonds],
        }


def _unique_bonds(pairs: Iterable[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    seen: set[frozenset[int]] = set()
    out: list[tuple[int, int]] = []
    for i, j in pairs:
        key = frozenset((i, j))
        if i == j or key in seen:
            continue
        seen.add(key)
        out.append((i, j))
    return tuple(out)


def chain(n_sites: int, boundary: Boundary | str = Boundary.PERIODIC) -> Lattice:
    boundary = Boundary(boundary)
    pairs = [(i, i + 1) for i in range(n_sites - 1)]
    if boundary is Boundary.PERIODIC and n_sites > 2:
        pairs.append((n_sites - 1, 0))
    return Lattice(n_sites, _unique_bonds(pairs), 1, Geometry.CHAIN, boundary, (n_sites,))


def cubic(shape: Sequence[int], boundary: Boundary | str = Boundary.PERIODIC) -> Lattice:
    shape = tuple(int(s) for s in shape)
    if not shape or any(s < 1 for s in shape):
        raise ModelError(f"invalid cubic shape {shape}")
    boundary = Boundary(boundary)
    strides = [int(np.prod(shape[a + 1 :])) for a in range(len(shape))]
    n_sites = int(np.prod(shape))
    pairs: list[tuple[int, int]] = []
    for coord in itertools.product(*[range(s) for s in shape]):
        site = sum(c * st for c, st in zip(coord, strides))
        for axis, extent in enumerate(shape):
            nxt = coord[axis] + 1
            if nxt >= extent:
                if boundary is not Boundary.PERIODIC or extent <= 2:
                    continue
                nxt = 0
            other = site + (nxt - coord[axis]) * strides[axis]
            pairs.append((site, other))
    geometry = Geometry.CHAIN if len(shape) == 1 else Geometry.CUBIC
    return Lattice(n_sites, _unique_bonds(pairs), len(shape), geometry, boundary, shape)


def star(n_leaves: int) -> Lattice:
    """Hub site 0 bonded to ``n_leaves`` outer sites."""
    pairs = [(0, leaf) for leaf in range(1, n_leaves + 1)]
    return Lattice(n_leaves + 1, tuple(pairs), 1, Geometry.STAR, Boundary.OPEN)


def graph(n_sites: int, bonds: Iterable[Sequence[int]]) -> Lattice:
    pairs = [(int(b[0]), int(b[1])) for b in bonds]
    for i, j in pairs:
        if i == j:
            raise ModelError(f"self-bond on site {i}")
    return Lattice(n_sites, _unique_bonds(pairs), 1, Geometry.CUSTOM, Boundary.OPEN)
