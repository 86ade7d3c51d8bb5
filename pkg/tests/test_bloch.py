import numpy as np
import pytest

from conftest import density_with_spectrum, random_hermitian
from dfmkit.bloch import (
    MODES,
    PAPER_15,
    PAPER_16,
    PAULI_FULL,
    bilinear_rhs,
    build_bilinear,
    coherence_map,
    coordinate_labels,
    coordinate_length,
    coordinate_transform,
    integrate_bilinear,
    inverse_coherence_map,
    superoperator_matrix,
)
from dfmkit.errors import DimensionError, ModeError
from dfmkit.lindblad import PAULI, ControlSchedule, LindbladModel, lindblad_rhs, lindbladian_apply, propagate
from dfmkit.presets import single_qubit_dephasing, two_qubit_dephasing


def test_coordinate_examples():
    assert np.allclose(coherence_map(np.eye(2) / 2, PAPER_15), [0, 0, 0])
    assert np.allclose(coherence_map(np.diag([1.0, 0.0]), PAPER_15), [1, 0, 0])
    assert np.allclose(coherence_map(np.eye(2) / 2, PAULI_FULL), [1, 0, 0, 0])
    assert np.allclose(inverse_coherence_map(np.zeros(3), PAPER_15), np.eye(2) / 2)


def test_paper_coordinate_order_n3():
    rho = np.arange(9).reshape(3, 3) * (1 + 0.5j)
    rho = rho + rho.conj().T
    x = coherence_map(rho, PAPER_16)
    assert coordinate_labels(3, PAPER_16) == ["d2", "d3", "s21", "s31", "s32", "a21", "a31", "a32", "tr"]
    assert np.isclose(x[0], (rho[0, 0] - rho[1, 1]).real)
    assert np.isclose(x[3], (rho[2, 0] + rho[0, 2]).real)
    assert np.isclose(x[6], (1j * (rho[2, 0] - rho[0, 2])).real)
    assert np.isclose(x[-1], np.trace(rho).real)


@pytest.mark.parametrize("mode", MODES)
def test_roundtrip_random_hermitian(rng, mode):
    for _ in range(100):
        rho = random_hermitian(rng, 4)
        x = coherence_map(rho, mode)
        assert x.size == coordinate_length(4, mode)
        back = inverse_coherence_map(x, mode, trace_hint=np.trace(rho).real)
        assert np.max(np.abs(back - rho)) < 1e-12


def test_pauli_reconstruction_identity(rng):
    rho = density_with_spectrum(rng, [0.4, 0.3, 0.2, 0.1])
    x = coherence_map(rho, PAULI_FULL)
    from dfmkit.lindblad import pauli_product_basis
    assert np.allclose(sum(xk * s for xk, s in zip(x, pauli_product_basis(2))) / 4, rho)


def test_coordinate_transform_between_modes(rng):
    rho = density_with_spectrum(rng, [0.4, 0.3, 0.2, 0.1])
    t = coordinate_transform(4, PAPER_16, PAULI_FULL)
    assert np.allclose(t @ coherence_map(rho, PAPER_16), coherence_map(rho, PAULI_FULL))


def test_mode_errors():
    with pytest.raises(ModeError):
        coherence_map(np.eye(3) / 3, PAULI_FULL)
    with pytest.raises(ModeError):
        coherence_map(np.eye(2) / 2, "bloch")
    with pytest.raises(DimensionError):
        inverse_coherence_map(np.zeros(5), PAPER_16, n=2)
    lowering = np.array([[0, 1], [0, 0]], dtype=complex)
    with pytest.raises(ModeError):
        superoperator_matrix(lambda r: lindbladian_apply(lowering, r), 2, PAPER_15)


def test_single_qubit_generators_pauli():
    z_half = LindbladModel(np.zeros((2, 2)), (("z", PAULI["Z"] / 2),))
    bz = build_bilinear(z_half, PAULI_FULL).B[0]
    expected = np.zeros((4, 4))
    expected[1, 2] = -1.0  # dx/dt = -y
    expected[2, 1] = 1.0  # dy/dt = x
    assert np.allclose(bz, expected, atol=1e-15)
    g = build_bilinear(single_qubit_dephasing(), PAULI_FULL).G[0]
    assert np.allclose(g, np.diag([0, -2, -2, 0]))


def test_preset_g_diagonal_paper16():
    bm = build_bilinear(two_qubit_dephasing(), PAPER_16)
    for g in bm.G:
        assert np.count_nonzero(g - np.diag(np.diag(g))) == 0


@pytest.mark.parametrize("mode", MODES)
def test_commuting_square_rhs(rng, mode):
    model = two_qubit_dephasing()
    bm = build_bilinear(model, mode)
    for _ in range(20):
        rho = density_with_spectrum(rng, rng.dirichlet(np.ones(4)))
        u, gamma = rng.normal(size=6), rng.uniform(0, 2, size=2)
        lhs = coherence_map(lindblad_rhs(model, rho, u, gamma), mode)
        assert np.max(np.abs(lhs - bilinear_rhs(bm, coherence_map(rho, mode), u, gamma))) < 1e-10


def test_zero_and_fixed_point():
    bm = build_bilinear(two_qubit_dephasing(), PAPER_16)
    assert not np.any(bilinear_rhs(bm, np.zeros(16), np.ones(6), [1, 1]))
    x = coherence_map(np.diag([0.4, 0.3, 0.2, 0.1]), PAPER_16)
    assert np.max(np.abs(bilinear_rhs(bm, x, None, [1, 1]))) < 1e-15


@pytest.mark.parametrize("mode", MODES)
def test_commuting_square_trajectories(rng, mode):
    model = two_qubit_dephasing(rates=(0.7, 1.3))
    bm = build_bilinear(model, mode)
    rho0 = density_with_spectrum(rng, [0.4, 0.3, 0.2, 0.1])
    u = rng.normal(size=6)
    t = np.linspace(0, 1, 11)
    traj = propagate(model, rho0, ControlSchedule.constant(u), t, dt=1e-3)
    xs = integrate_bilinear(bm, coherence_map(rho0, mode), t, u, [0.7, 1.3], dt=1e-3)
    for rho, x in zip(traj.states, xs):
        assert np.max(np.abs(coherence_map(rho, mode) - x)) < 1e-6


def test_conjugated_model_matches_transform():
    bm16 = build_bilinear(two_qubit_dephasing(), PAPER_16)
    bmp = build_bilinear(two_qubit_dephasing(), PAULI_FULL)
    moved = bm16.conjugated(coordinate_transform(4, PAPER_16, PAULI_FULL), PAULI_FULL)
    for a, b in zip(moved.B + moved.G, bmp.B + bmp.G):
        assert np.allclose(a, b, atol=1e-12)
