import numpy as np
import pytest
from hypothesis import given, strategies as st

from gcf_lab.circlefield import CircleField, WeightedInner, weight_of
from gcf_lab.constants import FlowParams, jacobi_count_round
from gcf_lab.exceptions import ValidationError
from gcf_lab.shrinker import round_profile
from gcf_lab.spectrum import apply_L, assemble_L, eig_L, fourier_basis, profile_weight, translation_norms

ROUND_12 = [1, 0, 0, -3, -3, -8, -8, -15, -15, -24, -24, -35]


def test_round_spectrum_closed_form(spec_round):
    np.testing.assert_allclose(spec_round.lambdas[:12], ROUND_12, atol=1e-8)
    assert spec_round.K == 7


def test_round_K_at_02():
    assert eig_L(round_profile(0.2, 64)).K == 5


def test_round_eigenfunctions_are_harmonics(spec_round):
    t = spec_round.weight.theta
    for i, (m, trig) in enumerate([(0, np.cos), (1, np.cos), (1, np.sin), (2, np.cos), (2, np.sin)]):
        ref = trig(m * t)
        ref = ref / np.sqrt(WeightedInner(spec_round.weight)(ref, ref))
        np.testing.assert_allclose(spec_round.phis[:, i], ref, atol=1e-10)


def test_symmetrized_matrix_symmetric(threefold):
    assert assemble_L(threefold).asymmetry() < 1e-12


def test_threefold_structure(spec_threefold):
    lam = spec_threefold.lambdas
    assert lam[0] == pytest.approx(1.0, abs=1e-6)
    assert abs(lam[1]) < 1e-6 and abs(lam[2]) < 1e-6
    assert np.all(lam[3:] < -1e-6)
    assert np.all(spec_threefold.lambdas_all[3:] < -1e-6)


def test_threefold_against_dense_oracle(threefold, spec_threefold):
    prob = assemble_L(threefold)
    ref = np.sort(np.linalg.eigvalsh(prob.symmetric))[::-1]
    np.testing.assert_allclose(spec_threefold.lambdas_all, ref, rtol=1e-10, atol=1e-10)


def test_kernel_is_coordinate_functions(spec_threefold):
    t = spec_threefold.weight.theta
    inner = WeightedInner(spec_threefold.weight)
    for i, trig, other in ((1, np.cos, np.sin), (2, np.sin, np.cos)):
        phi = spec_threefold.phis[:, i]
        ref = trig(t) / np.sqrt(inner(trig(t), trig(t)))
        np.testing.assert_allclose(phi, ref, atol=1e-9)
        assert abs(inner(phi, other(t))) < 1e-10


def test_orthonormal_in_weighted_space(spec_threefold):
    P = spec_threefold.phis_all
    G = P.T @ (P * spec_threefold.weight.samples[:, None]) * (2 * np.pi / spec_threefold.N)
    np.testing.assert_allclose(G, np.eye(G.shape[0]), atol=1e-11)


def test_eigen_equation_residual(threefold, spec_threefold):
    for i in range(8):
        phi = CircleField(spec_threefold.phis[:, i])
        Lphi = apply_L(phi, threefold)
        np.testing.assert_allclose(Lphi.samples, spec_threefold.lambdas[i] * phi.samples, atol=1e-9)


def test_translation_norms_equal_by_symmetry(threefold, consts01, spec_threefold):
    c = spec_threefold.norms
    assert c[1] == pytest.approx(c[2], rel=1e-8)
    np.testing.assert_allclose(translation_norms(threefold, consts01), c)


def test_betas_and_K(spec_threefold, consts01):
    bp = spec_threefold.beta_plus()
    assert abs(bp[1]) < 1e-12 and abs(bp[2]) < 1e-12
    assert bp[0] == pytest.approx(consts01.sigma - 1, rel=1e-6)
    # rates strictly below sigma: translations plus the cos 3t / sin 3t pair
    assert spec_threefold.K == 5
    assert bp[4] < consts01.sigma


def test_rotation_mode_sits_at_sigma(threefold, spec_threefold, consts01):
    # rotating A l^sigma h adds A e^{sigma s} h', so h' is the eigenfunction with beta+ = sigma
    assert spec_threefold.beta_plus()[5] == pytest.approx(consts01.sigma, rel=1e-9)
    dh = threefold.h.derivative().samples
    phi = spec_threefold.phis[:, 5]
    cos = abs(phi @ dh) / (np.linalg.norm(phi) * np.linalg.norm(dh))
    assert cos > 1 - 1e-9
    np.testing.assert_allclose(spec_threefold.beta_plus() + spec_threefold.beta_minus(), -consts01.c1, atol=1e-12)


def test_n_doubling_stability(threefold, spec_threefold):
    fine = eig_L(threefold.at(2 * threefold.N), num=12)
    np.testing.assert_allclose(fine.lambdas, spec_threefold.lambdas[:12], atol=1e-9)


def test_fourier_basis_orthogonal():
    Q = fourier_basis(32)
    np.testing.assert_allclose(Q.T @ Q, np.eye(32), atol=1e-13)


def test_num_validated(round01):
    with pytest.raises(ValidationError):
        eig_L(round01, num=0)


@given(st.floats(0.02, 0.45))
def test_round_spectrum_property(alpha):
    sd = eig_L(round_profile(alpha, 32))
    np.testing.assert_allclose(sd.lambdas_all[:9], ROUND_12[:9], atol=1e-10)
    assert sd.K == jacobi_count_round(FlowParams(2, alpha))


def test_profile_weight_is_even(threefold):
    w = profile_weight(threefold).samples
    N = w.size
    np.testing.assert_array_equal(w, w[(-np.arange(N)) % N])
    np.testing.assert_allclose(w, weight_of(threefold.h, 0.1).samples, rtol=1e-10)


def test_weight_matches_curvature_form(threefold):
    K = 1.0 / (threefold.h.second_derivative() + threefold.h).samples
    np.testing.assert_allclose(weight_of(threefold.h, 0.1).samples, K ** (-1 / 0.9), rtol=1e-12)


def test_json_shape(spec_threefold):
    out = spec_threefold.to_json()
    assert set(out) == {"lambdas", "betas", "K", "c_norms"}
    assert all(len(b) == 2 for b in out["betas"])
