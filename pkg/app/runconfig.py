from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from app.config import Settings
from app.lindblad.blockstruct import BlockPartition, Orientation, contiguous_partition, grade_ordering
from app.lindblad.lattice import Lattice, chain, cubic, graph, star
from app.lindblad.models import MODEL_NAMES, ModelSpec, build_model
from app.lindblad.opspace import BasisKind, GradingRule, LocalBasis, check_rule_compatible, make_local_basis

logger = logging.getLogger(__name__)

SPEC_VERSION = 1
MAX_SITES = 8
METHODS = ("auto", "dense", "blocks")
FORMATS = ("json", "csv")

DEFAULT_BASIS = {
    "z2": "bx_prime",
    "emission": "pauli",
    "emission_xx": "pauli",
    "emission_xxz": "bz",
    "davies": "pauli",
}

DEFAULT_GRADING = {
    "bx": "particle_xyz",
    "bx_prime": "particle_xyz",
    "pauli": "nynz",
    "bz": "ketbra_updown",
}

# models whose diagonal blocks are Hermitian in their default grading
BTH_MODELS = {"z2"}
CONFIG_KEYS = frozenset(
    {
        "spec_version", "model", "lattice", "basis", "grading", "sector_split", "orientation",
        "partition_sizes", "method", "bth", "tolerances", "dense_limit", "threads", "output", "sweep",
    }
)
# models analysed without a grading unless one is requested
UNGRADED_MODELS = {"davies"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    model: str
    parameters: dict[str, Any]
    lattice: dict[str, Any]
    basis: str
    grading: str | None
    sector_split: bool = False
    orientation: str | None = None
    partition_sizes: tuple[int, ...] | None = None
    method: str = "auto"
    bth: bool = False
    tol: float = 1e-10
    zero_tol: float = 1e-9
    dense_limit: int = 4**6
    threads: int = 1
    output: str | None = None
    output_format: str = "json"
    sweep: dict[str, list[Any]] = field(default_factory=dict)

    @property
    def n_sites(self) -> int:
        return int(self.lattice.get("sites", 0))

    def canonical(self) -> dict[str, Any]:
        """Every setting that influences numbers in the output; output paths excluded."""
        return {
            "spec_version": SPEC_VERSION,
            "model": {"name": self.model, "parameters": self.parameters},
            "lattice": self.lattice,
            "basis": self.basis,
            "grading": self.grading,
            "sector_split": self.sector_split,
            "orientation": self.orientation,
            "partition_sizes": list(self.partition_sizes) if self.partition_sizes else None,
            "method": self.method,
            "bth": self.bth,
            "tolerances": {"structural": self.tol, "zero": self.zero_tol},
            "dense_limit": self.dense_limit,
            "sweep": self.sweep,
        }

    def with_parameters(self, updates: Mapping[str, Any]) -> RunConfig:
        return replace(self, parameters={**self.parameters, **updates}, sweep={})

    def build_lattice(self) -> Lattice:
        return build_lattice(self.lattice)

    def build_model(self) -> ModelSpec:
        return build_model(self.model, self.parameters)

    def build_basis(self) -> LocalBasis:
        return make_local_basis(self.basis)

    def build_partition(self, basis: LocalBasis, lattice: Lattice) -> BlockPartition | None:
        orientation = Orientation(self.orientation) if self.orientation else None
        if self.partition_sizes:
            return contiguous_partition(self.partition_sizes, orientation or Orientation.LOWER)
        if self.grading is None:
            return None
        return grade_ordering(basis, lattice, self.grading, self.sector_split, orientation)


def build_lattice(spec: Mapping[str, Any]) -> Lattice:
    geometry = str(spec.get("geometry", "chain"))
    boundary = str(spec.get("boundary", "periodic"))
    if geometry == "chain":
        return chain(int(spec["sites"]), boundary)
    if geometry == "cubic":
        return cubic([int(s) for s in spec["shape"]], boundary)
    if geometry == "star":
        return star(int(spec["sites"]) - 1)
    if geometry == "custom":
        return graph(int(spec["sites"]), spec.get("bonds", []))
    raise ConfigError(f"unknown lattice geometry {geometry!r}")


def _lattice_spec(raw: Any) -> dict[str, Any]:
    if not isinstance(raw, Mapping):
        raise ConfigError("'lattice' must be an object")
    spec = dict(raw)
    geometry = spec.setdefault("geometry", "chain")
    if geometry == "cubic":
        shape = spec.get("shape")
        if not isinstance(shape, list) or not shape:
            raise ConfigError("cubic lattices need a nonempty 'shape' list")
        sites = 1
        for extent in shape:
            sites *= int(extent)
        spec["sites"] = sites
    if "sites" not in spec:
        raise ConfigError("lattice needs 'sites'")
    try:
        sites = int(spec["sites"])
    except (TypeError, ValueError) as e:
        raise ConfigError(f"lattice 'sites' must be an integer, got {spec['sites']!r}") from e
    if not 1 <= sites <= MAX_SITES:
        raise ConfigError(f"lattice must have 1..{MAX_SITES} sites, got {sites}")
    spec["sites"] = sites
    if geometry in ("chain", "cubic"):
        spec.setdefault("boundary", "periodic")
        if spec["boundary"] not in ("open", "periodic"):
            raise ConfigError(f"boundary must be 'open' or 'periodic', got {spec['boundary']!r}")
    if geometry == "custom" and not isinstance(spec.get("bonds", []), list):
        raise ConfigError("custom lattices need a 'bonds' list")
    return spec


def parse_run_config(
    data: Mapping[str, Any],
    settings: Settings,
    overrides: Mapping[str, Any] | None = None,
) -> RunConfig:
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    if not isinstance(data, Mapping):
        raise ConfigError("config root must be an object")
    if data.get("spec_version") != SPEC_VERSION:
        raise ConfigError(f"unsupported spec_version {data.get('spec_version')!r}; expected {SPEC_VERSION}")
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    model = data.get("model")
    if not isinstance(model, Mapping) or "name" not in model:
        raise ConfigError("'model' must be an object with a 'name'")
    name = str(model["name"])
    if name not in MODEL_NAMES:
        raise ConfigError(f"unknown model {name!r}; known models: {', '.join(MODEL_NAMES)}")
    parameters = model.get("parameters", {})
    if not isinstance(parameters, Mapping):
        raise ConfigError("'model.parameters' must be an object")

    lattice = _lattice_spec(data.get("lattice"))

    basis = str(overrides.get("basis", data.get("basis", DEFAULT_BASIS[name])))
    try:
        kind = BasisKind(basis)
    except ValueError as e:
        raise ConfigError(f"unknown basis {basis!r}") from e
    if kind is BasisKind.CUSTOM:
        raise ConfigError("custom bases are only available through the library API")

    default_grading = None if name in UNGRADED_MODELS else DEFAULT_GRADING[basis]
    grading = overrides.get("grading", data.get("grading", default_grading))
    if grading in (None, "none"):
        grading = None
    else:
        try:
            check_rule_compatible(make_local_basis(basis), GradingRule(grading))
        except ValueError as e:
            raise ConfigError(str(e)) from e

    orientation = data.get("orientation")
    if orientation not in (None, "lower", "upper"):
        raise ConfigError(f"orientation must be 'lower', 'upper' or null, got {orientation!r}")

    sizes = data.get("partition_sizes")
    if sizes is not None:
        if "grading" in overrides:
            sizes = None
        elif not isinstance(sizes, list) or sum(int(s) for s in sizes) != 4 ** lattice["sites"]:
            raise ConfigError(f"'partition_sizes' must be a list summing to 4^{lattice['sites']}")

    method = str(data.get("method", "auto"))
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {method!r}")

    tolerances = data.get("tolerances", {})
    tol = float(overrides.get("tol", tolerances.get("structural", settings.tol)))
    zero_tol = float(tolerances.get("zero", settings.zero_tol))
    dense_limit = int(data.get("dense_limit", settings.dense_limit))
    threads = int(overrides.get("threads", data.get("threads", settings.threads)))
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    if tol <= 0 or zero_tol <= 0:
        raise ConfigError("tolerances must be positive")

    if method == "dense" and 4 ** lattice["sites"] > dense_limit:
        raise ConfigError(
            f"dense analysis of {lattice['sites']} sites exceeds the dense limit {dense_limit}; use method 'blocks'"
        )
    if method == "blocks" and grading is None and sizes is None:
        raise ConfigError("method 'blocks' needs a grading or partition_sizes")

    output = data.get("output", {}) or {}
    out_path = overrides.get("output", output.get("path"))
    out_format = str(overrides.get("format", output.get("format", "json")))
    if out_format not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}, got {out_format!r}")

    sweep = data.get("sweep", {}) or {}
    if not isinstance(sweep, Mapping) or any(not isinstance(v, list) or not v for v in sweep.values()):
        raise ConfigError("'sweep' must map parameter names to nonempty value lists")

    return RunConfig(
        model=name,
        parameters=dict(parameters),
        lattice=lattice,
        basis=basis,
        grading=grading,
        sector_split=bool(data.get("sector_split", False)),
        orientation=orientation,
        partition_sizes=tuple(int(s) for s in sizes) if sizes else None,
        method=method,
        bth=bool(data.get("bth", name in BTH_MODELS)),
        tol=tol,
        zero_tol=zero_tol,
        dense_limit=dense_limit,
        threads=threads,
        output=str(out_path) if out_path else None,
        output_format=out_format,
        sweep={str(k): list(v) for k, v in sweep.items()},
    )


def load_run_config(path: Path, settings: Settings, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    cfg = parse_run_config(data, settings, overrides)
    logger.info("config loaded: model=%s sites=%d basis=%s grading=%s", cfg.model, cfg.n_sites, cfg.basis, cfg.grading)
    return cfg
