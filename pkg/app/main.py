from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from app.config import Settings, load_settings
from app.lindblad.blockstruct import (
    Block,
    BlockPartition,
    Symmetry,
    extract_diagonal_blocks,
    hermiticity_check,
    verify_block_triangular,
)
from app.lindblad.errors import (
    BasisDegenerateError,
    DimensionError,
    GradingError,
    IllConditionedBasisWarning,
    ModelError,
    NotPositiveDefiniteError,
    StructureError,
)
from app.lindblad.lattice import Lattice
from app.lindblad.liouville import SuperMatrix, apply, assemble
from app.lindblad.models import ModelSpec, ising_hamiltonian, thermal_state, weyl_split
from app.lindblad.opspace import LocalBasis, biorthonormality_defect, trace_row
from app.lindblad.spectra import (
    BlockSpectrum,
    BoundMethod,
    SpectrumResult,
    block_bounds,
    blockwise_spectrum,
    detailed_balance_residual,
    full_spectrum,
    gershgorin_bound,
    hermitian_component_bounds,
    weyl_check,
)
from app.logging_utils import setup_logging
from app.records import RunRecord
from app.runconfig import FORMATS, ConfigError, RunConfig, load_run_config
from app.store import write_record

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_STRUCTURE = 4

REALITY_TOL = 1e-8
BIORTHONORMAL_TOL = 1e-12
DETAILED_BALANCE_TOL = 1e-10


def _project_root() -> Path:
    return Path(__file__).resolve().parents[1]


@dataclass(frozen=True, eq=False)
class Problem:
    cfg: RunConfig
    lattice: Lattice
    basis: LocalBasis
    model: ModelSpec
    matrix: SuperMatrix
    partition: BlockPartition | None


def prepare(cfg: RunConfig) -> Problem:
    lattice = cfg.build_lattice()
    basis = cfg.build_basis()
    model = cfg.build_model()
    matrix = assemble(model, lattice, basis, tol=cfg.tol)
    partition = cfg.build_partition(basis, lattice)
    logger.info(
        "assembled %s on %d sites: dim=%d nnz=%d blocks=%s",
        cfg.model,
        lattice.n_sites,
        matrix.dim,
        matrix.entries.nnz,
        partition.n_blocks if partition is not None else "-",
    )
    return Problem(cfg, lattice, basis, model, matrix, partition)


def solve(problem: Problem, threads: int = 1) -> tuple[str, SpectrumResult, list[BlockSpectrum]]:
    """Spectrum by diagonal blocks when the partition triangularizes the matrix, densely otherwise."""
    cfg = problem.cfg
    if cfg.method != "dense" and problem.partition is not None:
        report = verify_block_triangular(problem.matrix, problem.partition, cfg.tol)
        if report.is_triangular:
            result, solved = blockwise_spectrum(
                problem.matrix,
                problem.partition,
                tol=cfg.tol,
                zero_tol=cfg.zero_tol,
                dense_limit=cfg.dense_limit,
                threads=threads,
            )
            return "blocks", result, solved
        if cfg.method == "blocks":
            raise StructureError(
                f"matrix is not {report.orientation.value} block-triangular under {cfg.grading or 'partition_sizes'}: "
                f"|M{report.violation}| = {report.max_violation:.3e}"
            )
        logger.warning(
            "not block-triangular (max violation %.3e); falling back to a dense solve", report.max_violation
        )
    result = full_spectrum(problem.matrix, dense_limit=cfg.dense_limit, tol=cfg.zero_tol)
    return "dense", result, []


def _whole_block(problem: Problem, result: SpectrumResult) -> BlockSpectrum:
    dense = problem.matrix.dense(problem.cfg.dense_limit)
    block = Block(None, np.arange(problem.matrix.dim), dense)
    return BlockSpectrum(block, hermiticity_check(block, problem.cfg.tol).symmetry, result.eigenvalues)


def _block_summary(index: int, solved: BlockSpectrum) -> dict[str, Any]:
    key = solved.block.key
    values = solved.eigenvalues
    return {
        "index": index,
        "total": key.total if key is not None else None,
        "sector": key.sector if key is not None else None,
        "size": solved.block.size,
        "symmetry": solved.symmetry.value,
        "max_real": float(values.real.max()),
        "min_real": float(values.real.min()),
        "max_imag": float(np.abs(values.imag).max()),
    }


def _scale(matrix: SuperMatrix) -> float:
    return max(1.0, float(np.max(np.abs(matrix.entries.data), initial=0.0)))


# ---------------------------------------------------------------- commands


def cmd_spectrum(cfg: RunConfig) -> RunRecord:
    problem = prepare(cfg)
    method, result, solved = solve(problem, cfg.threads)
    logger.info("spectrum (%s): gap=%s steady_dim=%d max|Im|=%.3e", method, result.gap, result.steady_dim, result.max_imag)
    payload = {
        "method": method,
        "real": result.max_imag <= REALITY_TOL,
        "spectrum": result.to_dict(),
        "block_summary": [_block_summary(i, s) for i, s in enumerate(solved)],
    }
    return RunRecord("spectrum", cfg.canonical(), payload)


def cmd_gap(cfg: RunConfig) -> RunRecord:
    problem = prepare(cfg)
    method, result, _ = solve(problem, cfg.threads)
    logger.info("gap (%s): %s", method, result.gap)
    payload = {
        "method": method,
        "real": result.max_imag <= REALITY_TOL,
        "spectrum": result.to_dict(with_eigenvalues=False),
    }
    return RunRecord("gap", cfg.canonical(), payload)


def cmd_blocks(cfg: RunConfig) -> RunRecord:
    problem = prepare(cfg)
    if problem.partition is None:
        raise ConfigError("'blocks' needs a grading or partition_sizes")
    report = verify_block_triangular(problem.matrix, problem.partition, cfg.tol, orientation=None)
    if not report.is_triangular:
        raise StructureError(
            f"no block-triangular orientation under {cfg.grading or 'partition_sizes'} "
            f"(smallest max violation {report.max_violation:.3e})"
        )
    partition = problem.partition.with_orientation(report.orientation)
    _, solved = blockwise_spectrum(
        problem.matrix,
        partition,
        tol=cfg.tol,
        zero_tol=cfg.zero_tol,
        dense_limit=cfg.dense_limit,
        threads=cfg.threads,
    )
    payload = {
        "partition": partition.to_dict(),
        "triangularity": report.to_dict(),
        "blocks": [_block_summary(i, s) for i, s in enumerate(solved)],
    }
    logger.info("blocks: %d (%s)", partition.n_blocks, report.orientation.value)
    return RunRecord("blocks", cfg.canonical(), payload)


def _bound_row(index: int, solved: BlockSpectrum, tol: float) -> dict[str, Any]:
    reports = block_bounds(solved.block, tol)
    by_method = {r.method: r for r in reports}
    exact_max = float(solved.eigenvalues.real.max())
    exact_min = float(solved.eigenvalues.real.min())
    rigorous = [r for r in reports if r.upper is not None]
    row = _block_summary(index, solved)
    row.update(
        {
            "hermitian_upper": by_method[BoundMethod.HERMITIAN_COMPONENT].upper,
            "hermitian_lower": by_method[BoundMethod.HERMITIAN_COMPONENT].lower,
            "gershgorin_rows_upper": by_method[BoundMethod.GERSHGORIN_ROWS].upper,
            "gershgorin_cols_upper": by_method[BoundMethod.GERSHGORIN_COLS].upper,
            "singular_value": by_method[BoundMethod.SINGULAR_VALUE].certificate["nu"],
            "singular_value_rigorous": by_method[BoundMethod.SINGULAR_VALUE].rigorous,
            "upper_slack": min(r.upper for r in rigorous) - exact_max,
            "sound": all(exact_max <= r.upper + tol and exact_min >= r.lower - tol for r in rigorous),
        }
    )
    return row


def cmd_bounds(cfg: RunConfig) -> RunRecord:
    problem = prepare(cfg)
    method, result, solved = solve(problem, cfg.threads)
    if not solved:
        solved = [_whole_block(problem, result)]
    rows = [_bound_row(i, s, cfg.tol) for i, s in enumerate(solved)]
    unsound = [r["index"] for r in rows if not r["sound"]]
    if unsound:
        logger.error("bounds violated on blocks %s", unsound)
    payload = {"method": method, "gap": result.gap, "blocks": rows}
    return RunRecord("bounds", cfg.canonical(), payload, EXIT_STRUCTURE if unsound else EXIT_OK)


# ---------------------------------------------------------------- verify


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    worst: float | None = None
    detail: str = ""
    skipped: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "worst": self.worst,
            "detail": self.detail,
            "skipped": self.skipped,
        }


def _skip(name: str, detail: str) -> SuiteResult:
    return SuiteResult(name, True, None, detail, skipped=True)


def suite_biorthonormality(problem: Problem) -> SuiteResult:
    defect = biorthonormality_defect(problem.basis)
    return SuiteResult("biorthonormality", defect <= BIORTHONORMAL_TOL, defect, f"basis {problem.basis.name}")


def suite_trace_preservation(problem: Problem) -> SuiteResult:
    row = trace_row(problem.basis, problem.lattice.n_sites)
    residual = problem.matrix.entries.T @ row
    worst = float(np.max(np.abs(residual), initial=0.0))
    return SuiteResult("trace_preservation", worst <= problem.cfg.tol * _scale(problem.matrix), worst)


def suite_triangularity(problem: Problem) -> SuiteResult:
    if problem.partition is None:
        return _skip("triangularity", "no grading configured")
    report = verify_block_triangular(problem.matrix, problem.partition, problem.cfg.tol)
    detail = f"{report.orientation.value} under {problem.cfg.grading or 'partition_sizes'}"
    if report.violation is not None and not report.is_triangular:
        detail += f"; worst entry at {report.violation}"
    return SuiteResult("triangularity", report.is_triangular, report.max_violation, detail)


def suite_hermiticity(problem: Problem, triangular: bool) -> SuiteResult:
    if problem.partition is None or not triangular:
        return _skip("hermiticity", "needs a block-triangular partition")
    blocks = extract_diagonal_blocks(problem.matrix, problem.partition, tol=problem.cfg.tol)
    reports = [hermiticity_check(b, problem.cfg.tol) for b in blocks]
    worst = max(r.hermitian_deviation for r in reports)
    non_hermitian = sum(r.symmetry is not Symmetry.HERMITIAN for r in reports)
    detail = f"{non_hermitian}/{len(reports)} diagonal blocks not Hermitian"
    if not problem.cfg.bth:
        return SuiteResult("hermiticity", True, worst, detail + " (not required)")
    return SuiteResult("hermiticity", non_hermitian == 0, worst, detail)


def suite_negativity(problem: Problem, spectrum: SpectrumResult | None) -> SuiteResult:
    if spectrum is None:
        return _skip("negativity", "spectrum not available")
    tol = problem.cfg.zero_tol
    passed = spectrum.max_real <= tol and spectrum.steady_dim >= 1
    return SuiteResult(
        "negativity",
        passed,
        spectrum.max_real,
        f"steady_dim={spectrum.steady_dim} gap={spectrum.gap}",
    )


def suite_bound_soundness(problem: Problem, solved: list[BlockSpectrum]) -> SuiteResult:
    if not solved:
        return _skip("bound_soundness", "no blocks solved")
    tol = problem.cfg.tol
    worst = -np.inf
    for s in solved:
        exact_max = float(s.eigenvalues.real.max())
        exact_min = float(s.eigenvalues.real.min())
        for report in (
            hermitian_component_bounds(s.block),
            gershgorin_bound(s.block, "rows"),
            gershgorin_bound(s.block, "cols"),
        ):
            worst = max(worst, exact_max - report.upper, report.lower - exact_min)
    return SuiteResult("bound_soundness", worst <= tol, float(worst), f"{len(solved)} blocks")


def suite_weyl(problem: Problem) -> SuiteResult:
    cfg = problem.cfg
    split = weyl_split(cfg.model, cfg.parameters)
    if split is None or problem.partition is None:
        return _skip("weyl", "no two-part split for this model")
    L1 = assemble(split[0], problem.lattice, problem.basis, tol=cfg.tol)
    L2 = assemble(split[1], problem.lattice, problem.basis, tol=cfg.tol)
    try:
        report = weyl_check(L1, L2, problem.partition, cfg.tol)
    except StructureError as e:
        return SuiteResult("weyl", False, None, str(e))
    return SuiteResult(
        "weyl",
        report.holds,
        report.worst_margin,
        f"upper margin {report.upper_margin:.3e}, lower margin {report.lower_margin:.3e}",
    )


def suite_detailed_balance(problem: Problem) -> SuiteResult:
    cfg = problem.cfg
    if cfg.model != "davies":
        return _skip("detailed_balance", "only defined for Davies generators")
    params = cfg.parameters
    h = ising_hamiltonian(tuple(params.get("field", (0.0, 0.0, 1.0))), float(params.get("zz", 0.0)), problem.lattice)
    rho = thermal_state(h, float(params["beta"]))
    residual = detailed_balance_residual(problem.matrix, rho, cfg.tol)
    stationarity = float(np.max(np.abs(apply(problem.model, problem.lattice, rho))))
    worst = max(residual, stationarity)
    limit = max(cfg.tol, DETAILED_BALANCE_TOL) * _scale(problem.matrix)
    return SuiteResult(
        "detailed_balance",
        worst <= limit,
        worst,
        f"residual {residual:.3e}, |L(rho_beta)| {stationarity:.3e}",
    )


def cmd_verify(cfg: RunConfig) -> RunRecord:
    problem = prepare(cfg)
    suites = [
        suite_biorthonormality(problem),
        suite_trace_preservation(problem),
        suite_triangularity(problem),
    ]
    triangular = suites[-1].passed and not suites[-1].skipped
    suites.append(suite_hermiticity(problem, triangular))

    spectrum: SpectrumResult | None = None
    solved: list[BlockSpectrum] = []
    if triangular:
        spectrum, solved = blockwise_spectrum(
            problem.matrix,
            problem.partition,  # type: ignore[arg-type]
            tol=cfg.tol,
            zero_tol=cfg.zero_tol,
            dense_limit=cfg.dense_limit,
            threads=cfg.threads,
        )
    elif problem.matrix.dim <= cfg.dense_limit:
        spectrum = full_spectrum(problem.matrix, dense_limit=cfg.dense_limit, tol=cfg.zero_tol)
        solved = [_whole_block(problem, spectrum)]

    suites += [
        suite_negativity(problem, spectrum),
        suite_bound_soundness(problem, solved),
        suite_weyl(problem),
        suite_detailed_balance(problem),
    ]

    failed = [s for s in suites if not s.passed]
    for s in failed:
        logger.error("verify %s FAILED: worst=%s %s", s.name, s.worst, s.detail)
    logger.info("verify: %d/%d suites passed", len(suites) - len(failed), len(suites))
    payload = {"passed": not failed, "suites": [s.to_dict() for s in suites]}
    return RunRecord("verify", cfg.canonical(), payload, EXIT_STRUCTURE if failed else EXIT_OK)


# ---------------------------------------------------------------- sweep


def sweep_grid(sweep: dict[str, list[Any]]) -> list[dict[str, Any]]:
    names = list(sweep)
    return [dict(zip(names, values)) for values in itertools.product(*(sweep[n] for n in names))]


def sweep_point(cfg: RunConfig, point: dict[str, Any]) -> dict[str, Any]:
    problem = prepare(cfg.with_parameters(point))
    method, result, solved = solve(problem, threads=1)
    excited = [s for s in solved if s.block.key is not None and s.block.key.total > 0]
    row: dict[str, Any] = dict(point)
    row.update(
        {
            "gap": result.gap,
            "steady_dim": result.steady_dim,
            "max_imag": result.max_imag,
            "method": method,
            "max_upper_hc": max((hermitian_component_bounds(s.block).upper for s in excited), default=None),
            "max_upper_gershgorin": max(
                (
                    min(gershgorin_bound(s.block, "rows").upper, gershgorin_bound(s.block, "cols").upper)
                    for s in excited
                ),
                default=None,
            ),
        }
    )
    return row


def cmd_sweep(cfg: RunConfig) -> RunRecord:
    points = sweep_grid(cfg.sweep) if cfg.sweep else [{}]
    logger.info("sweep: %d grid points, threads=%d", len(points), cfg.threads)
    if cfg.threads <= 1 or len(points) <= 1:
        rows = [sweep_point(cfg, p) for p in points]
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            rows = list(pool.map(lambda p: sweep_point(cfg, p), points))
    payload = {"parameters": list(cfg.sweep), "rows": rows}
    return RunRecord("sweep", cfg.canonical(), payload)


COMMANDS: dict[str, tuple[Callable[[RunConfig], RunRecord], str]] = {
    "spectrum": (cmd_spectrum, "Full or block-wise spectrum, gap and steady-space dimension."),
    "gap": (cmd_gap, "Spectral gap and steady-space dimension only."),
    "blocks": (cmd_blocks, "Block structure under the configured grading."),
    "bounds": (cmd_bounds, "Hermitian-component, Gershgorin and singular-value bounds per block."),
    "verify": (cmd_verify, "Run the structural and numerical self-checks."),
    "sweep": (cmd_sweep, "Gap and bound table over a parameter grid."),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lindblad-gap")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="Run configuration (JSON, spec_version 1).")
        p.add_argument("--output", default=None, help='Result file; "auto" names it under LINDBLAD_OUTPUT_DIR.')
        p.add_argument("--format", choices=FORMATS, default=None, help="Result format (default json).")
        p.add_argument("--tol", type=float, default=None, help="Structural tolerance.")
        p.add_argument("--threads", type=int, default=None, help="Worker threads for blocks and sweeps.")
        p.add_argument("--basis", default=None, help="pauli | bx | bx_prime | bz")
        p.add_argument("--grading", default=None, help="particle_xyz | nynz | ketbra_updown | none")
    return parser


def _output_path(cfg: RunConfig, record: RunRecord, settings: Settings) -> Path | None:
    if cfg.output is None:
        return None
    if cfg.output == "auto":
        return settings.output_dir / f"{record.command}-{record.config_fp()[:12]}.{cfg.output_format}"
    return Path(cfg.output)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)

    root = _project_root()
    try:
        settings = load_settings(root)
    except ValueError as e:
        setup_logging(None)
        logger.error("bad environment settings: %s", e)
        return EXIT_CONFIG
    setup_logging(settings.log_path, settings.log_level)
    logging.captureWarnings(True)
    if not settings.warn_ill_conditioned:
        warnings.simplefilter("ignore", IllConditionedBasisWarning)

    overrides = {
        "output": args.output,
        "format": args.format,
        "tol": args.tol,
        "threads": args.threads,
        "basis": args.basis,
        "grading": args.grading,
    }
    command, _ = COMMANDS[args.command]
    try:
        cfg = load_run_config(Path(args.config), settings, overrides)
        record = command(cfg)
        out_path = _output_path(cfg, record, settings)
        text = write_record(record, out_path, cfg.output_format)
    except (ConfigError, ModelError, GradingError, BasisDegenerateError, json.JSONDecodeError, OSError) as e:
        logger.error("config error: %s", e)
        return EXIT_CONFIG
    except (DimensionError, NotPositiveDefiniteError, np.linalg.LinAlgError) as e:
        logger.error("numerical failure: %s", e)
        return EXIT_NUMERICAL
    except StructureError as e:
        logger.error("structure check failed: %s", e)
        return EXIT_STRUCTURE

    if out_path is None:
        sys.stdout.write(text)
    logger.info("done: %s exit=%d", record.command, record.exit_code)
    return record.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
