from __future__ import annotations

from app.lindblad.blockstruct import (
    Block,
    BlockPartition,
    HermiticityReport,
    Orientation,
    Symmetry,
    TriangularityReport,
    contiguous_partition,
    extract_diagonal_blocks,
    grade_ordering,
    hermiticity_check,
    split_connected,
    verify_block_triangular,
)
from app.lindblad.lattice import Boundary, Geometry, Lattice, chain, cubic, graph, star
from app.lindblad.liouville import (
    HamiltonianTerm,
    LindbladTerm,
    SuperMatrix,
    apply,
    assemble,
    assemble_adjoint,
    effective_matrix,
)
from app.lindblad.models import (
    DaviesSpec,
    ModelSpec,
    build_model,
    davies_generator,
    emission_model,
    field_hamiltonian,
    magcons_model,
    weyl_split,
    xx_model,
    z2_model,
)
from app.lindblad.operators import SpinOperator
from app.lindblad.opspace import (
    BasisKind,
    GradeKey,
    GradingRule,
    LocalBasis,
    ProductLabel,
    check_biorthonormality,
    dual_basis,
    grade,
    make_local_basis,
)
from app.lindblad.spectra import (
    BoundReport,
    SpectrumResult,
    WeylReport,
    blockwise_spectrum,
    detailed_balance_check,
    detailed_balance_residual,
    dispersion_magnon,
    dispersion_x,
    dispersion_y,
    dispersion_z,
    eigenvalues,
    full_spectrum,
    gershgorin_bound,
    hermitian_component_bounds,
    magnetization_law_spectrum,
    match_spectra,
    momenta,
    single_site_field_eigs,
    smallest_singular_value,
    spectral_gap,
    weyl_check,
)

__all__ = [
    "BasisKind",
    "Block",
    "BlockPartition",
    "Boundary",
    "BoundReport",
    "DaviesSpec",
    "Geometry",
    "GradeKey",
    "GradingRule",
    "HamiltonianTerm",
    "HermiticityReport",
    "Lattice",
    "LindbladTerm",
    "LocalBasis",
    "ModelSpec",
    "Orientation",
    "ProductLabel",
    "SpectrumResult",
    "SpinOperator",
    "SuperMatrix",
    "Symmetry",
    "TriangularityReport",
    "WeylReport",
    "apply",
    "assemble",
    "assemble_adjoint",
    "build_model",
    "chain",
    "check_biorthonormality",
    "contiguous_partition",
    "cubic",
    "davies_generator",
    "blockwise_spectrum",
    "detailed_balance_check",
    "detailed_balance_residual",
    "dispersion_magnon",
    "dispersion_x",
    "dispersion_y",
    "dispersion_z",
    "dual_basis",
    "effective_matrix",
    "eigenvalues",
    "emission_model",
    "extract_diagonal_blocks",
    "full_spectrum",
    "field_hamiltonian",
    "gershgorin_bound",
    "grade",
    "grade_ordering",
    "graph",
    "hermitian_component_bounds",
    "hermiticity_check",
    "magcons_model",
    "magnetization_law_spectrum",
    "make_local_basis",
    "match_spectra",
    "momenta",
    "single_site_field_eigs",
    "smallest_singular_value",
    "spectral_gap",
    "split_connected",
    "star",
    "verify_block_triangular",
    "weyl_check",
    "weyl_split",
    "xx_model",
    "z2_model",
]
