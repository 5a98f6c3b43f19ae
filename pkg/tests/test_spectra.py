from __future__ import annotations

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.lindblad.blockstruct import contiguous_partition, grade_ordering
from app.lindblad.errors import DimensionError, NotPositiveDefiniteError, StructureError
from app.lindblad.lattice import chain, cubic, star
from app.lindblad.liouville import assemble
from app.lindblad.models import DaviesSpec, davies_generator, emission_model, thermal_state, z2_model
from app.lindblad.operators import SIGMA_X, SIGMA_Z
from app.lindblad.spectra import (
    BoundMethod,
    analyze_spectrum,
    block_bounds,
    blockwise_spectrum,
    detailed_balance_residual,
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
    sort_spectrum,
    spectral_gap,
    weyl_check,
)


def test_sort_order_is_descending_real_then_small_imag():
    ordered = sort_spectrum([-1.0, 0.0, -0.5 + 2j, -0.5 - 1j, -0.5])
    assert_allclose(ordered, [0.0, -0.5, -0.5 - 1j, -0.5 + 2j, -1.0])


def test_gap_and_steady_dimension():
    gap, steady = spectral_gap([0.0, 1e-12, -0.25 + 1j, -0.3])
    assert gap == pytest.approx(0.25)
    assert steady == 2
    assert spectral_gap([0.0, 0.0]) == (None, 2)


def test_eigenvalues_small_closed_forms():
    assert_allclose(eigenvalues(np.array([[-0.75]])), [-0.75])
    m = np.array([[-1.0, 0.25], [-0.25, -0.5]])
    assert_allclose(eigenvalues(m), [-0.75, -0.75], atol=1e-12)


def test_eigenvalues_general_and_hermitian(rng):
    a = rng.normal(size=(6, 6))
    assert match_spectra(eigenvalues(a), np.linalg.eigvals(a)) < 1e-10
    h = a + a.T
    values = eigenvalues(h)
    assert np.all(values.imag == 0.0)
    assert_allclose(np.sort(values.real), np.linalg.eigvalsh(h), atol=1e-10)


def test_eigenvalues_dense_limit():
    with pytest.raises(DimensionError):
        eigenvalues(np.eye(5), dense_limit=4)
    with pytest.raises(DimensionError):
        eigenvalues(np.ones((2, 3)))


def test_emission_single_site_spectrum(pauli, single_site):
    result = full_spectrum(assemble(emission_model(1.0), single_site, pauli))
    assert_allclose(result.eigenvalues, [0.0, -0.5, -0.5, -1.0], atol=1e-12)
    assert result.gap == pytest.approx(0.5)
    assert result.steady_dim == 1
    payload = result.to_dict()
    assert payload["eigenvalues"][1] == pytest.approx([-0.5, 0.0], abs=1e-12)


def test_blockwise_spectrum_equals_dense(bx_prime):
    lattice = chain(3)
    matrix = assemble(z2_model(0.4, 0.9, 0.3), lattice, bx_prime)
    partition = grade_ordering(bx_prime, lattice, "particle_xyz")
    merged, solved = blockwise_spectrum(matrix, partition, threads=2)
    dense = full_spectrum(matrix)
    assert len(solved) == partition.n_blocks
    assert match_spectra(merged.eigenvalues, dense.eigenvalues) < 1e-6
    assert merged.gap == pytest.approx(0.2, abs=1e-9)


def test_hermitian_component_and_gershgorin_bound_real_parts(rng):
    m = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    values = np.linalg.eigvals(m)
    hc = hermitian_component_bounds(m)
    assert hc.lower - 1e-12 <= values.real.min() and values.real.max() <= hc.upper + 1e-12
    for mode in ("rows", "cols"):
        g = gershgorin_bound(m, mode)
        assert g.lower - 1e-12 <= values.real.min() and values.real.max() <= g.upper + 1e-12
    with pytest.raises(ValueError):
        gershgorin_bound(m, "diag")


def test_singular_value_report_is_marked_heuristic_for_non_hermitian():
    m = np.array([[-1.0, 5.0], [0.0, -2.0]])
    report = smallest_singular_value(m)
    assert report.method is BoundMethod.SINGULAR_VALUE
    assert not report.rigorous
    assert report.upper is None
    assert report.certificate["nu"] > 0
    sym = smallest_singular_value(np.diag([-1.0, -3.0]))
    assert sym.rigorous
    assert sym.certificate["nu"] == pytest.approx(1.0)
    assert [r.method for r in block_bounds(m)] == list(BoundMethod)


def test_weyl_relations_hold_for_z2(bx_prime):
    lattice = chain(3)
    partition = grade_ordering(bx_prime, lattice, "particle_xyz")
    l1 = assemble(z2_model(0.5, 0.0, 0.0), lattice, bx_prime)
    l2 = assemble(z2_model(0.0, 1.0, 0.7), lattice, bx_prime)
    report = weyl_check(l1, l2, partition)
    assert report.holds
    assert report.worst_margin >= -1e-9
    assert report.spectrum_sum.size == 64


def test_weyl_needs_hermitian_blocks(pauli):
    lattice = chain(3)
    partition = grade_ordering(pauli, lattice, "particle_xyz")
    l1 = assemble(z2_model(0.5, 0.0, 0.0), lattice, pauli)
    l2 = assemble(z2_model(0.0, 1.0, 0.7), lattice, pauli)
    with pytest.raises(StructureError):
        weyl_check(l1, l2, partition)


def test_detailed_balance_rejects_singular_states(pauli, single_site):
    matrix = assemble(emission_model(1.0), single_site, pauli)
    with pytest.raises(NotPositiveDefiniteError):
        detailed_balance_residual(matrix, np.diag([1.0, 0.0]))
    with pytest.raises(DimensionError):
        detailed_balance_residual(matrix, np.eye(4) / 4)


def test_davies_qubit_is_balanced_only_against_its_own_gibbs_state(pauli, single_site):
    h = -0.5 * SIGMA_Z
    matrix = assemble(davies_generator(DaviesSpec(h, (SIGMA_X,), beta=1.0)), single_site, pauli)
    gibbs = thermal_state(h, 1.0)
    assert np.max(np.abs(matrix.act(gibbs))) < 1e-10
    assert detailed_balance_residual(matrix, gibbs) < 1e-10
    # a colder state is not stationary, so the relation must break
    assert detailed_balance_residual(matrix, thermal_state(h, 2.0)) > 1e-2


def test_dispersions():
    assert dispersion_z(0.0, 0.4, 1.0) == pytest.approx(-0.2)
    assert dispersion_z(math.pi, 0.4, 1.0) == pytest.approx(-4.2)
    assert dispersion_y(math.pi, 0.4, 1.0, 0.5) == pytest.approx(-1.2)
    assert dispersion_x(math.pi, 0.4, 1.0, 0.5) == pytest.approx(-1.4)
    assert dispersion_z([0.0, math.pi], 0.4, 1.0) == pytest.approx(-4.2)
    with pytest.raises(ValueError):
        dispersion_z(4.0, 0.4, 1.0)


def test_momenta_of_periodic_lattices():
    ks = momenta(chain(6))
    assert ks.shape == (6, 1)
    assert_allclose(np.sort(ks[:, 0]), np.sort([0.0, math.pi / 3, 2 * math.pi / 3, math.pi, -math.pi / 3, -2 * math.pi / 3]))
    assert momenta(cubic((2, 3))).shape == (6, 2)
    with pytest.raises(ValueError):
        momenta(star(3))


def test_single_site_field_eigs_transition():
    lam_p, lam_m = single_site_field_eigs(1 / 16)
    assert lam_p.imag == 0 and lam_p.real > lam_m.real
    lam_p, lam_m = single_site_field_eigs(1 / 2)
    assert lam_p.real == pytest.approx(-0.75)
    assert abs(lam_p.imag) > 0


def test_magnetization_law_single_site():
    values = magnetization_law_spectrum(-0.3 * np.diag([1.0, -1.0]))
    assert_allclose(np.sort(values.real), [-1.0, -0.5, -0.5, 0.0])
    assert_allclose(np.sort(np.abs(values.imag)), [0.0, 0.0, 0.6, 0.6], atol=1e-12)


def test_match_spectra():
    assert match_spectra([1.0, 2.0j], [2.0j, 1.0 + 1e-3]) == pytest.approx(1e-3)
    with pytest.raises(DimensionError):
        match_spectra([1.0], [1.0, 2.0])


def test_analyze_spectrum_flags():
    result = analyze_spectrum([0.0, -1.0 + 0.5j, -1.0 - 0.5j])
    assert result.max_imag == pytest.approx(0.5)
    assert result.max_real == pytest.approx(0.0)
    assert result.to_dict(with_eigenvalues=False)["size"] == 3


def test_contiguous_blocks_for_emission(pauli, single_site):
    matrix = assemble(emission_model(1.0), single_site, pauli)
    merged, solved = blockwise_spectrum(matrix, contiguous_partition((1, 1, 2)))
    assert [s.block.size for s in solved] == [1, 1, 2]
    assert merged.gap == pytest.approx(0.5)
