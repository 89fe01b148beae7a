import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from doublewell.twomode import (
    FockMatrix,
    TwoModeModel,
    assemble_bose_hubbard,
    assemble_identity_form,
    assemble_two_mode_hamiltonian,
    fock_ground_state,
    gaussian_trial_state,
    interaction_coefficient,
    interaction_tensor,
    model_from_basis,
    sigma_squared,
    symmetric_tensor,
    two_mode_constants,
)

unit = st.floats(0.0, 1.0)


@st.composite
def admissible_models(draw, max_N=150):
    """Reflection-symmetric models whose hopping term matches the gap."""
    N = draw(st.integers(2, max_N))
    A, B, C, D, lam, gap = (draw(unit) for _ in range(6))
    h11 = draw(st.floats(-3.0, 3.0))
    h12 = -gap / 2 - lam * (D + C)
    return TwoModeModel.build(N, lam, [[h11, h12], [h12, h11]], symmetric_tensor(A, B, C, D), gap)


def onsite_model(N, lam=1.0, h11=1.0, w1111=1.0):
    w = np.zeros((2, 2, 2, 2))
    w[0, 0, 0, 0] = w[1, 1, 1, 1] = w1111
    return TwoModeModel.build(N, lam, [[h11, 0.0], [0.0, h11]], w, 0.0)


# ---------------------------------------------------------------- constants

def test_constants_example():
    w = np.zeros((2, 2, 2, 2))
    w[0, 0, 0, 0] = 1.0
    E0, ENw, mu, U, _ = two_mode_constants(2, 1.0, [[1.0, 0], [0, 1.0]], w, 0.0)
    assert (E0, ENw, mu, U) == pytest.approx((2.0, 0.0, 1.5, 0.25), abs=1e-15)


def test_U_and_hop_constant():
    w = symmetric_tensor(0.8, 0.2, 0.0, 0.0)
    _, _, _, U, hop = two_mode_constants(10, 0.3, np.eye(2), w, 0.42)
    assert U == pytest.approx(0.15)
    assert hop == pytest.approx(-0.21)


def test_constants_need_two_particles():
    with pytest.raises(ValueError):
        two_mode_constants(1, 0.1, np.eye(2), np.zeros((2, 2, 2, 2)), 0.1)


def test_symmetric_tensor_index_symmetries():
    w = symmetric_tensor(0.9, 0.3, 0.2, 0.1)
    for perm in ((1, 0, 3, 2), (2, 1, 0, 3), (0, 3, 2, 1)):
        np.testing.assert_array_equal(w, w.transpose(perm))
    assert w[0, 0, 0, 0] == w[1, 1, 1, 1] == 0.9
    assert w[0, 1, 0, 1] == 0.3 and w[0, 0, 1, 1] == 0.2 and w[0, 0, 0, 1] == w[0, 1, 1, 1] == 0.1


# ---------------------------------------------------------- physical models

def test_physical_coefficients(phys):
    p = phys(6.0)
    b = p.basis
    m = model_from_basis(b, p.V, p.kernel, 50)
    w = m.w
    for perm in ((1, 0, 3, 2), (2, 1, 0, 3), (0, 3, 2, 1)):
        np.testing.assert_allclose(w, w.transpose(perm), atol=1e-12)
    assert m.is_symmetric()
    assert w[0, 0, 0, 0] > 0 and w[0, 1, 0, 1] >= 0 and m.U > 0
    # direct double quadrature of one coefficient
    assert interaction_coefficient(b, p.kernel, 1, 2, 1, 2) == pytest.approx(w[0, 1, 0, 1], rel=1e-12)
    assert interaction_coefficient(b, p.kernel, 1, 1, 1, 1) == pytest.approx(w[0, 0, 0, 0], rel=1e-12)
    # u_+/u_- diagonalize the mean-field operator, which ties bare hopping to the gap
    expected = -m.gap / 2 - m.lam * (w[0, 0, 0, 1] + w[0, 0, 1, 1])
    assert m.h[0, 1] == pytest.approx(expected, abs=1e-9)


def test_disjoint_supports_give_zero_mixing(phys):
    p = phys(6.0)
    x = p.grid.points
    a = np.where(np.abs(x - 4) < 1, np.cos(np.pi * (x - 4) / 2), 0.0)
    b = np.where(np.abs(x + 4) < 1, np.cos(np.pi * (x + 4) / 2), 0.0)
    w = interaction_tensor(p.kernel, np.vstack([a, b]))
    assert w[0, 1, 0, 0] == 0.0  # w_1211
    assert w[0, 1, 0, 1] == 0.0  # supports 8 apart, range 1


@pytest.mark.parametrize("L", [4.0, 6.0, 8.0, 10.0])
def test_physical_identity_form(phys, L):
    p = phys(L)
    m = model_from_basis(p.basis, p.V, p.kernel, 200)
    H, ident = assemble_two_mode_hamiltonian(m), assemble_identity_form(m)
    assert np.abs(H.bands - ident.bands).max() <= 1e-10 * H.max_abs()


# ----------------------------------------------------------------- assembly

def test_dimension_and_symmetry_of_small_matrix():
    H = assemble_two_mode_hamiltonian(onsite_model(2))
    assert H.to_dense().shape == (3, 3)
    dense = H.to_dense()
    np.testing.assert_array_equal(dense, dense.T)


@pytest.mark.parametrize("N", [2, 5, 12])
def test_onsite_only_diagonal(N):
    lam, h11, w1111 = 0.7, 1.3, 0.9
    H = assemble_two_mode_hamiltonian(onsite_model(N, lam, h11, w1111)).to_dense()
    k = np.arange(N + 1)
    expected = N * h11 + lam / (2 * (N - 1)) * w1111 * (k * (k - 1) + (N - k) * (N - k - 1))
    np.testing.assert_allclose(H, np.diag(expected), atol=1e-13)


def test_identity_form_without_hopping_is_diagonal():
    N, lam = 9, 0.4
    w = symmetric_tensor(0.8, 0.3, 0.0, 0.0)
    m = TwoModeModel.build(N, lam, [[1.0, 0.0], [0.0, 1.0]], w, 0.0)
    assert m.hop_constant == 0.0
    d = 2 * np.arange(N + 1) - N
    expected = m.E_0 + m.E_N_w + lam * m.U / (N - 1) * d**2
    np.testing.assert_allclose(assemble_identity_form(m).to_dense(), np.diag(expected), atol=1e-13)
    np.testing.assert_allclose(assemble_two_mode_hamiltonian(m).to_dense(), np.diag(expected),
                               atol=1e-13)


def test_pure_hop_N2_offdiagonal():
    g = 0.6
    m = TwoModeModel.build(2, 0.0, [[0, -g / 2], [-g / 2, 0]], np.zeros((2, 2, 2, 2)), g)
    ident = assemble_identity_form(m)
    assert ident.entry(0, 1) == pytest.approx(m.hop_constant * math.sqrt(2))
    assert ident.entry(1, 2) == pytest.approx(m.hop_constant * math.sqrt(2))


@given(admissible_models())
def test_identity_form_matches_ladder_assembly(model):
    H, ident = assemble_two_mode_hamiltonian(model), assemble_identity_form(model)
    assert np.abs(H.bands - ident.bands).max() <= 1e-10 * max(H.max_abs(), 1e-300)


@given(admissible_models())
def test_well_swap_invariance(model):
    H = assemble_two_mode_hamiltonian(model).to_dense()
    np.testing.assert_allclose(H, H[::-1, ::-1], atol=1e-10 * max(np.abs(H).max(), 1.0))


@given(admissible_models(max_N=60))
def test_ground_vector_reflection_and_variational(model):
    H = assemble_two_mode_hamiltonian(model)
    gs = fock_ground_state(H)
    assert np.linalg.norm(gs.vector) == pytest.approx(1.0, abs=1e-12)
    dense = np.linalg.eigvalsh(H.to_dense())[0]
    assert gs.energy == pytest.approx(dense, abs=1e-9 * max(1.0, abs(dense)))
    # even ground state whenever hopping lowers the energy; odd otherwise
    sign = 1.0 if gs.parity == "even" else -1.0
    np.testing.assert_allclose(gs.vector, sign * gs.vector[::-1], atol=1e-8)
    if model.hop_constant < 0:
        assert gs.parity == "even"
    assert abs(gs.mean_imbalance) <= 1e-6 * model.N
    trial = gaussian_trial_state(model.N, model.gap, sigma_sq=max(1.0, math.sqrt(model.N)))
    assert gs.energy <= trial.energy(H) + 1e-12 * max(1.0, abs(gs.energy))


def test_fock_matrix_round_trip():
    r = np.random.default_rng(3)
    bands = r.normal(size=(3, 8))
    bands[1, -1:] = 0
    bands[2, -2:] = 0
    F = FockMatrix(7, bands)
    dense = F.to_dense()
    np.testing.assert_array_equal(dense, dense.T)
    v = r.normal(size=8)
    v /= np.linalg.norm(v)
    np.testing.assert_allclose(F.matvec(v), dense @ v)
    assert F.expectation(v) == pytest.approx(v @ dense @ v)


# ------------------------------------------------------------- Bose-Hubbard

def test_bose_hubbard_N2_hopping():
    g = 0.37
    H = assemble_bose_hubbard(2, g, 0.0, 1.0)
    np.testing.assert_allclose(np.linalg.eigvalsh(H.to_dense()), [-g, 0, g], atol=1e-14)
    gs = fock_ground_state(H)
    assert gs.energy == pytest.approx(-g)
    np.testing.assert_allclose(gs.vector, [0.5, 1 / math.sqrt(2), 0.5], atol=1e-14)
    assert gs.variance == pytest.approx(2.0)


def test_bose_hubbard_onsite_N4():
    gs = fock_ground_state(assemble_bose_hubbard(4, 0.0, 1.0, 1.0))
    assert gs.energy == pytest.approx(2 / 3)
    np.testing.assert_allclose(gs.vector, np.eye(5)[2], atol=1e-14)
    assert gs.variance == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("N", [3, 7, 11])
def test_bose_hubbard_odd_N_degenerate(N):
    gs = fock_ground_state(assemble_bose_hubbard(N, 0.0, 1.0, 1.0))
    assert gs.degenerate
    lo, hi = N // 2, N // 2 + 1
    np.testing.assert_allclose(gs.vector[[lo, hi]], [1 / math.sqrt(2)] * 2, atol=1e-12)
    assert gs.vector[[lo, hi]].sum() ** 2 == pytest.approx(2.0)


@pytest.mark.parametrize("N", [2, 10, 99, 400])
def test_clt_variance_for_pure_hopping(N):
    gs = fock_ground_state(assemble_bose_hubbard(N, 0.5, 0.0, 0.3))
    assert gs.variance == pytest.approx(N, rel=1e-10)


def test_iterative_solver_above_dense_limit():
    N = 2400
    m = onsite_model(N, lam=0.1, w1111=0.5)
    m = TwoModeModel.build(N, 0.1, [[1.0, -1e-3], [-1e-3, 1.0]], m.w, 2e-3)
    H = assemble_two_mode_hamiltonian(m)
    gs = fock_ground_state(H)
    resid = np.linalg.norm(H.matvec(gs.vector) - gs.energy * gs.vector)
    assert resid <= 1e-8 * abs(gs.energy)
    np.testing.assert_allclose(gs.vector, gs.vector[::-1], atol=1e-8)


# ------------------------------------------------------------ trial states

def test_gaussian_trial_example():
    t = gaussian_trial_state(4, 1.0, sigma_sq=4.0)
    np.testing.assert_array_equal(t.d, [-4, -2, 0, 2, 4])
    Z = 1 + 2 * math.exp(-0.5) + 2 * math.exp(-2)
    assert t.weights[2] == pytest.approx(1 / math.sqrt(Z), rel=1e-12)
    assert t.weights[2] == pytest.approx(0.6345, abs=1e-4)
    assert t.second_moment() == pytest.approx((8 * math.exp(-0.5) + 32 * math.exp(-2)) / Z)
    assert t.second_moment() == pytest.approx(3.697, abs=1e-3)
    assert np.sum(t.weights**2) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_array_equal(t.weights, t.weights[::-1])


def test_gaussian_trial_degenerate_support():
    t = gaussian_trial_state(6, 1.0, sigma_sq=1.0)
    np.testing.assert_array_equal(t.d, [0])
    assert t.weights[0] == 1.0 and t.second_moment() == 0.0


def test_gaussian_trial_empty_support():
    with pytest.raises(ValueError, match="empty support"):
        gaussian_trial_state(6, 1.0, sigma_sq=0.5)
    with pytest.raises(ValueError, match="empty support"):
        gaussian_trial_state(5, 1.0, sigma_sq=0.9)


def test_sigma_rules():
    N, gap = 100, 1e-4
    assert sigma_squared(N, gap) == pytest.approx(1.0)
    assert sigma_squared(N, 0.04) == pytest.approx(20.0)
    assert sigma_squared(N, gap, "sqrt_N") == pytest.approx(10.0)
    assert sigma_squared(N, gap, "fixed", fixed=3.0) == 3.0
    assert sigma_squared(N, 0.04, "delta_above_2", delta=2.5, fixed=4.0) == pytest.approx(20.0)
    assert sigma_squared(N, 0.04, "delta_above_2", delta=1.5, fixed=4.0) == 4.0
    assert sigma_squared(N, 0.04, "delta_below_1", delta=0.5) == pytest.approx(20.0)
    assert sigma_squared(N, 0.04, "delta_below_1", delta=1.5) == pytest.approx(10.0)
    with pytest.raises(ValueError):
        sigma_squared(N, gap, "bogus")
    with pytest.raises(ValueError):
        sigma_squared(N, gap, "delta_below_1")
