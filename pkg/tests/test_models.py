from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.lindblad.errors import KMSViolationError, ModelError, NotMagnetizationConservingError
from app.lindblad.lattice import chain, cubic, graph, star
from app.lindblad.liouville import HamiltonianTerm, LindbladTerm, apply, assemble
from app.lindblad.models import (
    MODEL_NAMES,
    DaviesSpec,
    anticommutator_operator,
    build_model,
    davies_generator,
    davies_terms,
    emission_model,
    flip_operators,
    ising_hamiltonian,
    kms_rate,
    lattice_davies,
    magcons_model,
    thermal_state,
    weyl_split,
    xx_model,
    z2_model,
)
from app.lindblad.operators import IDENTITY, SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Y, SIGMA_Z, SpinOperator
from app.lindblad.spectra import detailed_balance_residual, full_spectrum, match_spectra


def test_lattice_constructors():
    ring = chain(4)
    assert ring.bonds == ((0, 1), (1, 2), (2, 3), (3, 0))
    assert chain(2).bonds == ((0, 1),)
    assert chain(4, "open").bonds == ((0, 1), (1, 2), (2, 3))
    grid = cubic((3, 3))
    assert grid.n_sites == 9
    assert all(grid.coordination(s) == 4 for s in grid.sites)
    hub = star(4)
    assert hub.coordination(0) == 4 and hub.coordination(3) == 1
    g = graph(3, [[0, 2], [2, 0]])
    assert g.bonds == ((0, 2),)
    with pytest.raises(ModelError):
        graph(3, [[0, 3]])


def test_flip_operators_share_their_loss_term():
    plus, minus = flip_operators(0, 1)
    q = anticommutator_operator(0, 1).matrix
    for op in (plus.matrix, minus.matrix):
        assert_allclose(op.conj().T @ op, q, atol=1e-12)
    # Q is twice the projector on (|ud> + |du>)/sqrt(2)
    assert_allclose(np.linalg.eigvalsh(q), [0.0, 0.0, 0.0, 2.0], atol=1e-12)


def test_z2_terms_per_bond_and_site():
    terms = z2_model(0.2, 1.0, 0.5).terms(chain(3))
    assert sum(t.label.startswith("Dx") for t in terms) == 3
    assert sum(t.label.startswith("D+") or t.label.startswith("D-") for t in terms) == 6
    assert sum(t.label.startswith("Dz") for t in terms) == 3
    assert z2_model(0.0, 1.0, 0.0).terms(chain(1)) == []


def test_negative_rates_are_rejected():
    with pytest.raises(ModelError):
        z2_model(-0.1, 1.0, 1.0)
    with pytest.raises(ModelError):
        emission_model(-1.0)


def test_model_composition_concatenates_terms():
    lattice = chain(2)
    combined = emission_model(1.0) + xx_model(0.5, 0.1)
    terms = combined.terms(lattice)
    assert sum(isinstance(t, LindbladTerm) for t in terms) == 2
    assert sum(isinstance(t, HamiltonianTerm) for t in terms) == 3
    assert combined.name == "emission+xx"


def test_xx_couplings_must_be_symmetric():
    with pytest.raises(ModelError):
        xx_model([[0, 1, 1.0], [1, 0, 2.0]]).terms(chain(2))
    terms = xx_model([[0, 1, 1.0], [1, 0, 1.0]]).terms(chain(2))
    assert len(terms) == 1


def test_magcons_rejects_transverse_terms():
    transverse = HamiltonianTerm(1.0, SpinOperator.on_site(0, SIGMA_X), "hx")
    with pytest.raises(NotMagnetizationConservingError):
        magcons_model(1.0, hamiltonian=[transverse]).terms(chain(2))
    dm = SpinOperator.product({0: SIGMA_X, 1: SIGMA_Y}) - SpinOperator.product({0: SIGMA_Y, 1: SIGMA_X})
    # Dzyaloshinskii-Moriya coupling conserves magnetization
    magcons_model(1.0, hamiltonian=[HamiltonianTerm(0.3, dm)]).terms(chain(2))


def test_davies_single_qubit_jump_is_sigma_plus():
    h = -0.5 * SIGMA_Z
    terms = davies_terms(DaviesSpec(h, (SIGMA_X,), beta=1.0))
    jumps = {round(math.log(t.rate) * 2, 9): t.operator.matrix for t in terms}
    # positive Bohr frequency: relaxation into the ground state (up)
    assert set(jumps) == {1.0, -1.0}
    assert_allclose(jumps[1.0], SIGMA_PLUS, atol=1e-12)
    assert_allclose(jumps[-1.0], SIGMA_MINUS, atol=1e-12)


def test_davies_thermal_state_is_stationary_and_balanced(pauli):
    lattice = chain(2)
    h = ising_hamiltonian((0.3, 0.0, 0.8), 0.4, lattice)
    baths = tuple(SpinOperator.on_site(i, SIGMA_X).embed(2) for i in lattice.sites)
    model = davies_generator(DaviesSpec(h, baths, beta=0.7))
    rho = thermal_state(h, 0.7)
    assert np.max(np.abs(apply(model, lattice, rho))) < 1e-10
    matrix = assemble(model, lattice, pauli)
    assert detailed_balance_residual(matrix, rho) < 1e-10


def test_davies_rejects_non_kms_rates():
    spec = DaviesSpec(-SIGMA_Z, (SIGMA_X,), beta=1.0, rate=lambda omega: 1.0)
    with pytest.raises(KMSViolationError):
        davies_terms(spec)
    # a KMS profile other than the symmetric one is accepted
    ok = DaviesSpec(-SIGMA_Z, (SIGMA_X,), beta=1.0, rate=lambda w: 2.0 / (1.0 + math.exp(-w)))
    assert davies_terms(ok)


def test_davies_input_validation():
    with pytest.raises(ModelError):
        DaviesSpec(SIGMA_PLUS, (SIGMA_X,), beta=1.0)
    with pytest.raises(ModelError):
        DaviesSpec(SIGMA_Z, (SIGMA_PLUS,), beta=1.0)
    with pytest.raises(ModelError):
        DaviesSpec(SIGMA_Z, (SIGMA_X,), beta=-1.0)


def test_kms_rate_profile():
    rate = kms_rate(2.0)
    assert rate(0.5) * math.exp(-2.0 * 0.5) == pytest.approx(rate(-0.5))


def test_registry_builds_every_model():
    params = {
        "z2": {"gamma_x": 0.2, "gamma_f": 1.0, "gamma_z": 0.5},
        "emission": {"gamma": 1.0, "field": [0.1, 0.2, 0.3]},
        "emission_xx": {"J": 0.5, "h": 0.2},
        "emission_xxz": {"jxy": 1.0, "jz": 0.5, "hz": 0.1},
        "davies": {"beta": 1.0},
    }
    lattice = chain(2)
    for name in MODEL_NAMES:
        assert build_model(name, params[name]).terms(lattice)
    with pytest.raises(ModelError):
        build_model("z2", {"gamma_x": 1.0})
    with pytest.raises(ModelError):
        build_model("nope", {})


def test_weyl_split_sums_to_the_model(bx_prime):
    params = {"gamma_x": 0.3, "gamma_f": 0.7, "gamma_z": 0.2}
    first, second = weyl_split("z2", params)
    lattice = chain(3)
    total = assemble(build_model("z2", params), lattice, bx_prime)
    parts = assemble(first, lattice, bx_prime) + assemble(second, lattice, bx_prime)
    assert_allclose(parts.dense(), total.dense(), atol=1e-12)
    assert weyl_split("emission", {}) is None


def _two_qubit_baths() -> tuple[np.ndarray, np.ndarray]:
    return np.kron(SIGMA_X, IDENTITY), np.kron(IDENTITY, SIGMA_X)


def test_exactly_degenerate_gaps_merge_silently(rng):
    # equally spaced levels: three pairs share the gap 1, but only up to eigensolver noise
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    h = q @ np.diag([0.0, 1.0, 2.0, 3.0]) @ q.conj().T
    h = (h + h.conj().T) / 2
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        terms = davies_terms(DaviesSpec(h, _two_qubit_baths(), beta=0.5))
    assert terms


def test_near_degenerate_gaps_still_warn():
    h = np.diag([0.0, 1.0, 2.0 + 4e-10, 3.0 + 8e-10]).astype(complex)
    with pytest.warns(UserWarning, match="merged"):
        davies_terms(DaviesSpec(h, _two_qubit_baths(), beta=0.5))


def test_xx_axis_y_has_the_spectrum_of_axis_x(pauli):
    lattice = chain(2)
    spectra = []
    for axis in ("x", "y"):
        model = emission_model(1.0) + xx_model(0.7, 0.3, axis=axis)
        spectra.append(full_spectrum(assemble(model, lattice, pauli)).eigenvalues)
    assert match_spectra(*spectra) < 1e-6


def test_infinite_temperature_davies_spectrum_is_real(pauli):
    matrix = assemble(lattice_davies(0.0, (0.2, 0.1, 0.5), 0.3), chain(2), pauli)
    assert full_spectrum(matrix).max_imag < 1e-9
