"""
Built-in Lindblad models on spin-1/2 lattices.

Every constructor returns a ModelSpec: a named parameter map plus a term generator that
turns a Lattice into HamiltonianTerm/LindbladTerm lists. Rates multiply whole
dissipators. Hamiltonians use the sign convention H = -sum_i h_i . sigma_i for fields.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence, Union

import numpy as np
import scipy.linalg

from app.lindblad.errors import KMSViolationError, ModelError, NotMagnetizationConservingError
from app.lindblad.lattice import Lattice
from app.lindblad.liouville import HamiltonianTerm, LindbladTerm, Term, validate_terms
from app.lindblad.operators import (
    P_DOWN,
    P_RIGHT,
    P_UP,
    PAULI,
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_X_PLUS,
    SIGMA_Y,
    SIGMA_Z,
    SpinOperator,
    kron_all,
)

logger = logging.getLogger(__name__)

Couplings = Union[float, Mapping[tuple[int, int], float], Sequence[Sequence[float]]]
Fields = Union[float, Sequence[float]]


@dataclass(frozen=True, eq=False)
class ModelSpec:
    name: str
    parameters: Mapping[str, Any]
    builder: Callable[[Lattice], list[Term]] = field(repr=False)

    def terms(self, lattice: Lattice) -> list[Term]:
        return validate_terms(self.builder(lattice), lattice)

    def __add__(self, other: ModelSpec) -> ModelSpec:
        if not isinstance(other, ModelSpec):
            return NotImplemented
        first, second = self.builder, other.builder
        parameters = dict(self.parameters)
        for key, value in other.parameters.items():
            if key in parameters and parameters[key] != value:
                key = f"{other.name}.{key}"
            parameters[key] = value
        return ModelSpec(
            name=f"{self.name}+{other.name}",
            parameters=parameters,
            builder=lambda lattice: list(first(lattice)) + list(second(lattice)),
        )

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "parameters": dict(self.parameters)}


def _require_rates(**rates: float) -> None:
    for name, value in rates.items():
        if not np.isfinite(value) or value < 0:
            raise ModelError(f"rate {name} must be a non-negative number, got {value}")


# ---------------------------------------------------------------- Z2 model


def flip_operators(i: int, j: int) -> tuple[SpinOperator, SpinOperator]:
    """Controlled spin flips L+_ij and L-_ij on the bond (i, j)."""
    plus = SpinOperator.product({i: P_UP, j: SIGMA_PLUS}) + SpinOperator.product({i: SIGMA_PLUS, j: P_UP})
    minus = SpinOperator.product({i: P_DOWN, j: SIGMA_MINUS}) + SpinOperator.product({i: SIGMA_MINUS, j: P_DOWN})
    return plus, minus


def anticommutator_operator(i: int, j: int) -> SpinOperator:
    """Q_ij = (1 - sz_i sz_j)/2 + s+_i s-_j + s-_i s+_j."""
    identity = SpinOperator.product({i: np.eye(2), j: np.eye(2)})
    zz = SpinOperator.product({i: SIGMA_Z, j: SIGMA_Z})
    hop = SpinOperator.product({i: SIGMA_PLUS, j: SIGMA_MINUS}) + SpinOperator.product({i: SIGMA_MINUS, j: SIGMA_PLUS})
    return 0.5 * (identity - zz) + hop


def z2_model(gamma_x: float, gamma_f: float, gamma_z: float) -> ModelSpec:
    _require_rates(gamma_x=gamma_x, gamma_f=gamma_f, gamma_z=gamma_z)

    def build(lattice: Lattice) -> list[Term]:
        terms: list[Term] = []
        if gamma_x:
            terms += [LindbladTerm(gamma_x, SpinOperator.on_site(i, SIGMA_X_PLUS), f"Dx[{i}]") for i in lattice.sites]
        if gamma_f:
            for i, j in lattice.bonds:
                plus, minus = flip_operators(i, j)
                terms.append(LindbladTerm(gamma_f, plus, f"D+[{i},{j}]"))
                terms.append(LindbladTerm(gamma_f, minus, f"D-[{i},{j}]"))
        if gamma_z:
            terms += [LindbladTerm(gamma_z, SpinOperator.on_site(i, SIGMA_Z), f"Dz[{i}]") for i in lattice.sites]
        return terms

    return ModelSpec("z2", {"gamma_x": gamma_x, "gamma_f": gamma_f, "gamma_z": gamma_z}, build)


def first_excitation_ops(lattice: Lattice, flavor: str) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """
    Left elements sigma^a_i / 2 and right elements sigma^a_i prod_{j != i} P->_j
    spanning the single-particle sector of the disordered phase.
    """
    pauli = PAULI[flavor]
    n = lattice.n_sites
    left = [SpinOperator.on_site(i, pauli / 2).embed(n) for i in lattice.sites]
    right = [kron_all([pauli if j == i else P_RIGHT for j in lattice.sites]) for i in lattice.sites]
    return left, right


def ferromagnetic_ops(lattice: Lattice) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Conserved quantities (1, sum sz / N) and the states rho_+- of the ferromagnetic limit."""
    n = lattice.n_sites
    dim = 2**n
    all_up = np.zeros((dim, dim), dtype=complex)
    all_up[0, 0] = 1.0
    all_down = np.zeros((dim, dim), dtype=complex)
    all_down[-1, -1] = 1.0
    total_z = sum(SpinOperator.on_site(i, SIGMA_Z).embed(n) for i in lattice.sites) / n
    left = [np.eye(dim, dtype=complex), total_z]
    right = [0.5 * (all_up + all_down), 0.5 * (all_up - all_down)]
    return left, right


# ---------------------------------------------------------------- emission family


def _site_fields(h: Fields | Sequence[Sequence[float]], lattice: Lattice, width: int) -> np.ndarray:
    arr = np.asarray(h, dtype=float)
    if width == 3:
        if arr.shape == (3,):
            return np.tile(arr, (lattice.n_sites, 1))
        if arr.shape == (lattice.n_sites, 3):
            return arr
        raise ModelError(f"fields must be one 3-vector or one per site, got shape {arr.shape}")
    if arr.ndim == 0:
        return np.full(lattice.n_sites, float(arr))
    if arr.shape == (lattice.n_sites,):
        return arr
    raise ModelError(f"expected a scalar or {lattice.n_sites} per-site values, got shape {arr.shape}")


def _bond_couplings(couplings: Couplings, lattice: Lattice) -> list[tuple[int, int, float]]:
    if isinstance(couplings, (int, float)):
        return [(i, j, float(couplings)) for i, j in lattice.bonds]

    if isinstance(couplings, Mapping):
        items = [(int(k[0]), int(k[1]), float(v)) for k, v in couplings.items()]
    else:
        items = [(int(c[0]), int(c[1]), float(c[2])) for c in couplings]

    merged: dict[tuple[int, int], float] = {}
    for i, j, value in items:
        if i == j:
            raise ModelError(f"coupling on self-bond ({i}, {i})")
        key = (min(i, j), max(i, j))
        if key in merged and not math.isclose(merged[key], value, rel_tol=1e-12, abs_tol=1e-12):
            raise ModelError(f"coupling J{key} is not symmetric: {merged[key]} vs {value}")
        merged[key] = value
    return [(i, j, v) for (i, j), v in sorted(merged.items())]


def emission_model(gamma: float = 1.0) -> ModelSpec:
    _require_rates(gamma=gamma)

    def build(lattice: Lattice) -> list[Term]:
        if not gamma:
            return []
        return [LindbladTerm(gamma, SpinOperator.on_site(i, SIGMA_MINUS), f"De[{i}]") for i in lattice.sites]

    return ModelSpec("emission", {"gamma": gamma}, build)


def field_hamiltonian(h: Sequence[float] | Sequence[Sequence[float]]) -> ModelSpec:
    """H = -sum_i h_i . sigma_i with one 3-vector for all sites or one per site."""

    def build(lattice: Lattice) -> list[Term]:
        fields = _site_fields(h, lattice, 3)
        terms: list[Term] = []
        for i, (hx, hy, hz) in enumerate(fields):
            if hx == hy == hz == 0:
                continue
            op = SpinOperator.on_site(i, hx * SIGMA_X + hy * SIGMA_Y + hz * SIGMA_Z)
            terms.append(HamiltonianTerm(-1.0, op, f"h[{i}]"))
        return terms

    return ModelSpec("field", {"field": np.asarray(h, dtype=float).tolist()}, build)


def xx_model(couplings: Couplings, h: Fields = 0.0, axis: str = "x") -> ModelSpec:
    """H = sum_<ij> J_ij s^a_i s^a_j - sum_i h_i s^a_i with a in {x, y}."""
    if axis not in ("x", "y"):
        raise ModelError(f"axis must be 'x' or 'y', got {axis!r}")
    pauli = PAULI[axis]

    def build(lattice: Lattice) -> list[Term]:
        terms: list[Term] = []
        for i, j, value in _bond_couplings(couplings, lattice):
            if value:
                terms.append(HamiltonianTerm(value, SpinOperator.product({i: pauli, j: pauli}), f"J[{i},{j}]"))
        for i, value in enumerate(_site_fields(h, lattice, 1)):
            if value:
                terms.append(HamiltonianTerm(-value, SpinOperator.on_site(i, pauli), f"h[{i}]"))
        return terms

    parameters: dict[str, Any] = {"axis": axis, "h": np.asarray(h, dtype=float).tolist()}
    parameters["J"] = couplings if isinstance(couplings, (int, float)) else [list(c) for c in _coupling_items(couplings)]
    return ModelSpec("xx", parameters, build)


def _coupling_items(couplings: Couplings) -> list[tuple[int, int, float]]:
    if isinstance(couplings, Mapping):
        return [(int(k[0]), int(k[1]), float(v)) for k, v in couplings.items()]
    return [(int(c[0]), int(c[1]), float(c[2])) for c in couplings]  # type: ignore[union-attr]


def _local_magnetization(support: Sequence[int]) -> np.ndarray:
    n = len(support)
    return sum(SpinOperator.on_site(k, SIGMA_Z).embed(n) for k in range(n))


def magcons_model(
    jxy: Couplings = 1.0,
    jz: Couplings = 0.0,
    hz: Fields = 0.0,
    *,
    hamiltonian: Sequence[HamiltonianTerm] = (),
    tol: float = 1e-10,
) -> ModelSpec:
    """
    Magnetization-conserving Hamiltonian: XXZ couplings, z fields and extra terms.

    Each term is checked to commute with the total sigma^z on its support.
    """

    def build(lattice: Lattice) -> list[Term]:
        terms: list[HamiltonianTerm] = []
        xy_pairs = _bond_couplings(jxy, lattice)
        z_pairs = _bond_couplings(jz, lattice)
        for i, j, value in xy_pairs:
            if value:
                op = SpinOperator.product({i: SIGMA_X, j: SIGMA_X}) + SpinOperator.product({i: SIGMA_Y, j: SIGMA_Y})
                terms.append(HamiltonianTerm(value, op, f"Jxy[{i},{j}]"))
        for i, j, value in z_pairs:
            if value:
                terms.append(HamiltonianTerm(value, SpinOperator.product({i: SIGMA_Z, j: SIGMA_Z}), f"Jz[{i},{j}]"))
        for i, value in enumerate(_site_fields(hz, lattice, 1)):
            if value:
                terms.append(HamiltonianTerm(-value, SpinOperator.on_site(i, SIGMA_Z), f"hz[{i}]"))
        terms.extend(hamiltonian)

        for term in terms:
            mz = _local_magnetization(term.support)
            h = term.operator.matrix
            residual = float(np.max(np.abs(h @ mz - mz @ h), initial=0.0))
            if residual > tol:
                raise NotMagnetizationConservingError(
                    f"term {term.label or term.support} does not commute with total sigma^z (residual {residual:.3e})"
                )
        return list(terms)

    parameters: dict[str, Any] = {"hz": np.asarray(hz, dtype=float).tolist(), "extra_terms": len(hamiltonian)}
    for name, value in (("jxy", jxy), ("jz", jz)):
        parameters[name] = value if isinstance(value, (int, float)) else [list(c) for c in _coupling_items(value)]
    return ModelSpec("magcons", parameters, build)


# ---------------------------------------------------------------- Davies generators


def kms_rate(beta: float) -> Callable[[float], float]:
    """Symmetric KMS profile gamma(w) = exp(beta w / 2)."""
    return lambda omega: math.exp(0.5 * beta * omega)


def thermal_state(hamiltonian: np.ndarray, beta: float) -> np.ndarray:
    energies, vectors = scipy.linalg.eigh(hamiltonian)
    weights = np.exp(-beta * (energies - energies.min()))
    rho = (vectors * weights) @ vectors.conj().T
    return rho / np.trace(rho).real


@dataclass(frozen=True, eq=False)
class DaviesSpec:
    hamiltonian: np.ndarray
    couplings: tuple[np.ndarray, ...]
    beta: float
    rate: Callable[[float], float] | None = None
    include_hamiltonian: bool = False

    def __post_init__(self) -> None:
        h = np.asarray(self.hamiltonian, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ModelError("Davies Hamiltonian must be a square matrix")
        n_sites = int(round(math.log2(h.shape[0]))) if h.shape[0] else -1
        if 2**n_sites != h.shape[0]:
            raise ModelError(f"Hamiltonian dimension {h.shape[0]} is not a power of two")
        if n_sites > 6:
            raise ModelError("Davies construction needs exact diagonalization; at most 6 sites")
        if np.max(np.abs(h - h.conj().T)) > 1e-10:
            raise ModelError("Davies Hamiltonian is not Hermitian")
        couplings = tuple(np.asarray(s, dtype=complex) for s in self.couplings)
        for s in couplings:
            if s.shape != h.shape:
                raise ModelError(f"coupling operator shape {s.shape} does not match H {h.shape}")
            if np.max(np.abs(s - s.conj().T)) > 1e-10:
                raise ModelError("Davies coupling operators must be Hermitian")
        if not np.isfinite(self.beta) or self.beta < 0:
            raise ModelError(f"inverse temperature must be finite and >= 0, got {self.beta}")
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "couplings", couplings)

    @property
    def n_sites(self) -> int:
        return int(round(math.log2(self.hamiltonian.shape[0])))


@dataclass(frozen=True)
class BohrFrequency:
    omega: float
    pairs: tuple[tuple[int, int], ...]  # (n, m) level indices with E_n - E_m ~ omega
    spread: float


def _cluster(values: np.ndarray, tol: float) -> list[np.ndarray]:
    order = np.argsort(values, kind="stable")
    groups: list[list[int]] = [[int(order[0])]] if order.size else []
    for prev, cur in zip(order[:-1], order[1:]):
        if values[cur] - values[prev] <= tol:
            groups[-1].append(int(cur))
        else:
            groups.append([int(cur)])
    return [np.array(g) for g in groups]


def energy_levels(hamiltonian: np.ndarray, tol: float) -> tuple[np.ndarray, list[np.ndarray]]:
    """Distinct energies and the matching eigenprojectors."""
    energies, vectors = scipy.linalg.eigh(hamiltonian)
    levels: list[float] = []
    projectors: list[np.ndarray] = []
    for group in _cluster(energies, tol):
        v = vectors[:, group]
        levels.append(float(np.mean(energies[group])))
        projectors.append(v @ v.conj().T)
    return np.array(levels), projectors


def bohr_frequencies(levels: np.ndarray, tol: float) -> list[BohrFrequency]:
    pairs = [(n, m) for n in range(levels.size) for m in range(levels.size)]
    omegas = np.array([levels[n] - levels[m] for n, m in pairs])
    out: list[BohrFrequency] = []
    for group in _cluster(omegas, tol):
        members = omegas[group]
        out.append(
            BohrFrequency(
                omega=float(np.mean(members)),
                pairs=tuple(pairs[g] for g in group),
                spread=float(members.max() - members.min()),
            )
        )
    return out


def davies_terms(spec: DaviesSpec, *, kms_tol: float = 1e-10, grouping_tol: float | None = None) -> list[Term]:
    h = spec.hamiltonian
    scale = max(float(np.linalg.norm(h, 2)), 1.0)
    tol = grouping_tol if grouping_tol is not None else 1e-9 * scale
    rate = spec.rate or kms_rate(spec.beta)

    levels, projectors = energy_levels(h, tol)
    frequencies = bohr_frequencies(levels, tol)
    # exactly degenerate gaps differ only by eigensolver noise
    noise = 1e3 * np.finfo(float).eps * scale
    flagged = [f for f in frequencies if f.spread > noise]
    if flagged:
        logger.warning("grouped %d near-degenerate Bohr frequencies (tolerance %.3e)", len(flagged), tol)
        warnings.warn(f"{len(flagged)} Bohr frequencies were merged within tolerance {tol:.3e}", stacklevel=2)

    for freq in frequencies:
        forward = float(rate(freq.omega))
        backward = float(rate(-freq.omega))
        if not (np.isfinite(forward) and forward >= 0):
            raise KMSViolationError(f"rate gamma({freq.omega:.6g}) = {forward} is not a non-negative number")
        expected = math.exp(-spec.beta * freq.omega) * forward
        if abs(backward - expected) > kms_tol * max(1.0, abs(backward), abs(expected)):
            raise KMSViolationError(
                f"gamma(-w) = {backward:.12g} but exp(-beta w) gamma(w) = {expected:.12g} at w = {freq.omega:.6g}"
            )

    support = tuple(range(spec.n_sites))
    terms: list[Term] = []
    for k, coupling in enumerate(spec.couplings):
        for freq in frequencies:
            jump = sum(projectors[m] @ coupling @ projectors[n] for n, m in freq.pairs)
            if np.max(np.abs(jump)) <= tol:
                continue
            gamma = float(rate(freq.omega))
            if gamma == 0:
                continue
            terms.append(LindbladTerm(gamma, SpinOperator(support, jump), f"S{k}(w={freq.omega:.6g})"))
    if spec.include_hamiltonian:
        terms.append(HamiltonianTerm(1.0, SpinOperator(support, h), "H"))
    logger.debug("Davies generator: levels=%d frequencies=%d terms=%d", levels.size, len(frequencies), len(terms))
    return terms


def davies_generator(spec: DaviesSpec, *, kms_tol: float = 1e-10, grouping_tol: float | None = None) -> ModelSpec:
    terms = davies_terms(spec, kms_tol=kms_tol, grouping_tol=grouping_tol)

    def build(lattice: Lattice) -> list[Term]:
        if lattice.n_sites != spec.n_sites:
            raise ModelError(f"Davies generator acts on {spec.n_sites} sites, lattice has {lattice.n_sites}")
        return list(terms)

    return ModelSpec("davies", {"beta": spec.beta, "couplings": len(spec.couplings)}, build)


def lattice_davies(
    beta: float,
    field: Sequence[float] = (0.0, 0.0, 1.0),
    zz: float = 0.0,
    coupling: str = "x",
) -> ModelSpec:
    """Davies generator for H = -sum h.sigma_i + zz sum_<ij> sz_i sz_j with one sigma^coupling bath per site."""
    if coupling not in PAULI:
        raise ModelError(f"coupling must be one of x, y, z, got {coupling!r}")

    def build(lattice: Lattice) -> list[Term]:
        n = lattice.n_sites
        h = ising_hamiltonian(field, zz, lattice)
        baths = tuple(SpinOperator.on_site(i, PAULI[coupling]).embed(n) for i in lattice.sites)
        return davies_terms(DaviesSpec(np.asarray(h), baths, beta))

    return ModelSpec("davies", {"beta": beta, "field": list(field), "zz": zz, "coupling": coupling}, build)


def ising_hamiltonian(field: Sequence[float], zz: float, lattice: Lattice) -> np.ndarray:
    n = lattice.n_sites
    hx, hy, hz = (float(v) for v in field)
    local = hx * SIGMA_X + hy * SIGMA_Y + hz * SIGMA_Z
    h = -sum(SpinOperator.on_site(i, local).embed(n) for i in lattice.sites)
    for i, j in lattice.bonds:
        h = h + zz * SpinOperator.product({i: SIGMA_Z, j: SIGMA_Z}).embed(n)
    return np.asarray(h, dtype=complex)


# ---------------------------------------------------------------- registry

MODEL_NAMES = ("z2", "emission", "emission_xx", "emission_xxz", "davies")


def _float(params: Mapping[str, Any], key: str, default: float | None = None) -> float:
    if key not in params:
        if default is None:
            raise ModelError(f"missing model parameter {key!r}")
        return default
    try:
        return float(params[key])
    except (TypeError, ValueError) as e:
        raise ModelError(f"model parameter {key!r} must be a number, got {params[key]!r}") from e


def build_model(name: str, params: Mapping[str, Any]) -> ModelSpec:
    if name == "z2":
        return z2_model(_float(params, "gamma_x"), _float(params, "gamma_f"), _float(params, "gamma_z"))
    if name == "emission":
        model = emission_model(_float(params, "gamma", 1.0))
        if params.get("field") is not None:
            model = model + field_hamiltonian(params["field"])
        return model
    if name == "emission_xx":
        model = emission_model(_float(params, "gamma", 1.0))
        return model + xx_model(params.get("J", 1.0), params.get("h", 0.0), str(params.get("axis", "x")))
    if name == "emission_xxz":
        model = emission_model(_float(params, "gamma", 1.0))
        return model + magcons_model(params.get("jxy", 1.0), params.get("jz", 0.0), params.get("hz", 0.0))
    if name == "davies":
        return lattice_davies(
            _float(params, "beta"),
            tuple(params.get("field", (0.0, 0.0, 1.0))),
            _float(params, "zz", 0.0),
            str(params.get("coupling", "x")),
        )
    raise ModelError(f"unknown model {name!r}; known models: {', '.join(MODEL_NAMES)}")


def weyl_split(name: str, params: Mapping[str, Any]) -> tuple[ModelSpec, ModelSpec] | None:
    """Two-part decomposition L = L1 + L2 with a shared block structure, when one is known."""
    if name != "z2":
        return None
    return (
        z2_model(_float(params, "gamma_x"), 0.0, 0.0),
        z2_model(0.0, _float(params, "gamma_f"), _float(params, "gamma_z")),
    )
