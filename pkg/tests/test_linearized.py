import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gcf_lab.exceptions import GammaOnResonance, TailDivergence, ValidationError
from gcf_lab.linearized import (
    E1,
    E2,
    E3,
    ExteriorField,
    JacobiField,
    admissible_window,
    apply_calL,
    boundary_match,
    fit_decay_rate,
    jacobi_gamma,
    jacobi_perturb,
    linear_solve_H,
    picard_zero_seed,
    s_derivative,
    translator_residual_s,
)
from gcf_lab.march import translator_residual

R = 8.0


@pytest.fixture(scope="module")
def zero128():
    return ExteriorField.zeros(R, 128, 0.55)


def small_field(rng, like, consts, amp, modes=5):
    """Random band-limited field with sup |w| / (A e^{sigma s}) about ``amp``."""
    a = rng.standard_normal((3, modes))
    t = np.linspace(0, 2 * np.pi, like.N, endpoint=False)
    x = (like.s - like.R) / (like.S_max - like.R)
    vals = 0.0
    for k in range(modes):
        prof = a[0, k] + a[1, k] * x + a[2, k] * np.sin(3 * x)
        vals = vals + np.outer(prof, np.cos(k * t + 0.7 * k))
    vals = vals / np.abs(vals).max()
    return like.like(amp * consts.bigA * np.exp(consts.sigma * like.s)[:, None] * vals, consts.sigma)


@pytest.mark.parametrize("order", [1, 2])
def test_s_derivative_fourth_order(order):
    errs = []
    for ds in (0.04, 0.02):
        s = np.arange(0, 4 + ds / 2, ds)
        v = np.exp(0.7 * s)[:, None] * np.ones((1, 3))
        exact = 0.7**order * np.exp(0.7 * s)
        errs.append(np.max(np.abs(s_derivative(v, ds, order)[:, 0] - exact) / exact))
    assert errs[1] < 1e-8
    # interior 4th order, edges 6th order: halving ds gains at least 2^4
    assert errs[0] / errs[1] > 14


def test_jacobi_fields_annihilated(spec_round, consts01):
    # ds = 0.01 keeps the 4th-order s-differences below 1e-8 up to beta = 1.5
    z = ExteriorField.zeros(R, 128, 0.55, ds=0.01)
    for j in (0, 1, 3, 5, 9):
        J = JacobiField.from_spectrum(spec_round, j, 1.0).on(z)
        beta = spec_round.beta_plus()[j]
        assert apply_calL(J, spec_round, consts01).norm(0, beta) < 1e-8


def test_calL_on_exponential_mode(spec_threefold, consts01):
    z = ExteriorField.zeros(R, spec_threefold.N, 0.3)
    j, gamma = 4, 0.3
    g = JacobiField(j, 1.0, gamma, spec_threefold.phi(j)).on(z, gamma)
    bp, bm = spec_threefold.beta_plus()[j], spec_threefold.beta_minus()[j]
    expect = (gamma - bp) * (gamma - bm) * g.values
    got = apply_calL(g, spec_threefold, consts01)
    assert (got - g.like(expect)).norm(0, gamma) < 1e-8


def test_calL_zero(spec_round, consts01, zero128):
    assert apply_calL(zero128, spec_round, consts01).norm(0) == 0.0


@pytest.mark.parametrize("which", ["round01", "threefold"])
@pytest.mark.parametrize("c", [0.05, -0.02])
def test_E1_scaling_mode_closed_form(request, consts01, which, c):
    h = request.getfixturevalue(which).at(128)
    z = ExteriorField.zeros(R, 128, consts01.sigma)
    w = z.like(c * np.exp(consts01.sigma * z.s)[:, None] * h.h.samples[None, :])
    sig, A, a = consts01.sigma, consts01.bigA, consts01.alpha
    expect = sig * (1 - sig) * c * c / (a * A) * np.exp(sig * z.s)[:, None] * h.h.samples[None, :]
    got = E1(w, h, consts01).values
    np.testing.assert_allclose(got, expect, rtol=1e-8, atol=1e-10 * np.abs(expect).max())


def test_E1_second_term_vanishes_on_circle(rng, round01, consts01, zero128):
    w = small_field(rng, zero128, consts01, 0.01)
    _, second = E1(w, round01, consts01, return_second=True)
    assert second < 1e-8


def test_E2_of_zero_decays(threefold, consts01):
    h = threefold.at(128)
    z = ExteriorField.zeros(4.0, 128, consts01.sigma, span=20.0)
    e = E2(z, h, consts01)
    per = np.exp(-consts01.sigma * z.s) * e.slice_sup()
    assert np.all(np.diff(per) < 0)
    assert per[-1] < 1e-3 * per[0]  # e^{2(sigma-1) 20} = e^{-8}
    # rate 2(sigma - 1) of the leading correction
    assert fit_decay_rate(z.s, per, start=12) == pytest.approx(2 * (consts01.sigma - 1), rel=1e-2)


def test_raw_pde_equals_expansion(rng, round01, threefold, spec_round, spec_threefold, consts01):
    for h, spec in ((round01, spec_round), (threefold.at(spec_threefold.N), spec_threefold)):
        z = ExteriorField.zeros(R, spec.N, consts01.sigma)
        w = small_field(rng, z, consts01, 0.02)
        raw = translator_residual(w, h, consts01)
        lin = translator_residual_s(w, h, spec, consts01)
        scale = consts01.bigA * np.exp(consts01.sigma * w.s)[:, None]
        diff = np.abs(raw.values - lin.values) / scale
        assert diff.max() < 1e-9
        # the two-term error alone misses the superlinear speed term
        two = translator_residual_s(w, h, spec, consts01, terms=("E1", "E2"))
        assert (np.abs(raw.values - two.values) / scale).max() > 1e3 * diff.max()


def test_E3_is_superlinear(rng, round01, consts01, zero128):
    w = small_field(rng, zero128, consts01, 1.0)
    e = [E3(w * eps, round01, consts01).norm(0, consts01.sigma) for eps in (1e-2, 1e-3, 1e-4)]
    # quadratic to leading order; the cubic part shows up at the largest eps
    assert e[1] / e[2] == pytest.approx(100, rel=0.01)
    assert e[0] / e[1] == pytest.approx(100, rel=0.1)


def test_lipschitz_bound(rng, spec_threefold, threefold, consts01):
    h = threefold.at(spec_threefold.N)
    z = ExteriorField.zeros(R, h.N, consts01.sigma)
    sig = consts01.sigma
    ratios = []
    for _ in range(50):
        w = small_field(rng, z, consts01, 0.01 * rng.uniform(0.1, 1))
        v = small_field(rng, z, consts01, 0.01 * rng.uniform(0.1, 1))
        lhs = (E1(w, h, consts01) - E1(v, h, consts01)).norm(0, sig)
        rhs = (w.norm(2, sig) + v.norm(2, sig)) * (w - v).norm(2, sig)
        ratios.append(lhs / rhs)
    C = max(ratios[:25])
    assert max(ratios[25:]) <= 1.5 * C
    assert max(ratios) / min(ratios) < 20


def test_quadratic_vanishing(spec_threefold, threefold, consts01):
    h = threefold.at(spec_threefold.N)
    z = ExteriorField.zeros(R, h.N, consts01.sigma)
    base = consts01.bigA * np.exp(consts01.sigma * z.s)[:, None]
    for j in range(6):
        phi = spec_threefold.phis_all[:, j][None, :]
        vals = [E1(z.like(eps * base * phi), h, consts01).norm(0, consts01.sigma) / eps**2 for eps in (1e-2, 1e-3, 1e-4)]
        if j in (1, 2):
            # translations: r[cos] = r[sin] = 0, so E1 vanishes identically
            assert max(vals) < 1e-3 * consts01.bigA
            continue
        assert max(vals) / min(vals) < 2


def test_H_of_zero(spec_round, zero128):
    assert np.all(linear_solve_H(zero128, R, 0.55, spec_round).values == 0.0)


@pytest.mark.parametrize("gamma, j", [(0.55, 5), (0.55, 9), (0.1, 3), (-0.5, 0)])
def test_H_single_mode_closed_form(spec_round, zero128, gamma, j):
    g = JacobiField(j, 1.0, gamma, spec_round.phi(j)).on(zero128, gamma)
    w = linear_solve_H(g, R, gamma, spec_round)
    bp, bm = spec_round.beta_plus()[j], spec_round.beta_minus()[j]
    s = zero128.s
    exact = (np.exp(gamma * s) - np.exp((gamma - bm) * R + bm * s)) / ((gamma - bp) * (gamma - bm))
    got = spec_round.project(w.values)[:, j]
    assert np.max(np.abs(got - exact) * np.exp(-gamma * s)) < 1e-8


def test_H_boundary_split(rng, spec_threefold, consts01):
    z = ExteriorField.zeros(R, spec_threefold.N, 0.2)
    g = small_field(rng, z, consts01, 0.01)
    g = g.like(g.values * np.exp((0.2 - consts01.sigma) * z.s)[:, None], 0.2)
    w = linear_solve_H(g, R, 0.2, spec_threefold)
    m = admissible_window(0.2, spec_threefold)
    assert m == 3
    c = spec_threefold.project(w.values[0])
    assert np.max(np.abs(c[:m])) < 1e-10 * max(1.0, w.norm(0, 0.2))


def test_admissible_window_errors(spec_round):
    bp = spec_round.beta_plus()
    with pytest.raises(GammaOnResonance):
        admissible_window(float(bp[3]), spec_round)
    with pytest.raises(ValidationError):
        admissible_window(spec_round.beta_minus()[0] - 0.1, spec_round)
    with pytest.raises(TailDivergence):
        admissible_window(0.79, spec_round)
    assert admissible_window(0.55, spec_round) == 5
    assert admissible_window(-0.5, spec_round) == 0


@pytest.mark.parametrize("fixture", ["zero_seed_round", "zero_seed_threefold"])
def test_zero_seed_contracts(request, fixture):
    res = request.getfixturevalue(fixture)
    assert res.ratios and max(res.ratios) < 0.5
    assert res.residual < 1e-7
    assert res.field.values[0].max() == 0.0 and res.field.values[0].min() == 0.0


def test_zero_seed_gamma_window(round01, consts01, spec_round):
    with pytest.raises(ValidationError):
        picard_zero_seed(round01, consts01, spec_round, R, 0.85)


def test_jacobi_gamma_hand_value(spec_round, consts01):
    g, m = jacobi_gamma(spec_round.beta_plus()[3], 0.55, spec_round, consts01)
    beta = (-1 + math.sqrt(2.92)) / 2
    assert m == 3
    assert g == pytest.approx(beta - 0.125, abs=1e-12)


def test_jacobi_perturb_trivial_and_rejected(zero_seed_round, spec_round, consts01, round01):
    w = zero_seed_round.field
    same = jacobi_perturb(w, 3, 0.0, spec_round, consts01, R, round01)
    np.testing.assert_array_equal(same.field.values, w.values)
    with pytest.raises(ValidationError):
        jacobi_perturb(w, 7, 0.1, spec_round, consts01, R, round01)


def test_jacobi_perturb_rate(zero_seed_round, spec_round, consts01, round01):
    w = zero_seed_round.field
    res = jacobi_perturb(w, 3, 0.1, spec_round, consts01, R, round01)
    assert max(res.ratios) < 0.5
    diff = res.field - w
    coeff = np.abs(spec_round.project(diff.values)[:, 3])
    rate = fit_decay_rate(diff.s, coeff, start=R + 4, stop=R + 12)
    assert rate == pytest.approx(spec_round.beta_plus()[3], rel=2e-3)


def test_boundary_match_condition(round01, consts01, spec_round):
    base = picard_zero_seed(round01, consts01, spec_round, R, 0.45)
    bm = boundary_match(base.field, R, 0.5, spec_round, consts01, 1, round01)
    assert bm.boundary_error < 1e-9 * math.exp(0.5 * R)
    assert bm.slope_relative < 0.3
    assert max(bm.result.ratios) < 0.9


def test_field_json_roundtrip(zero_seed_round):
    f = zero_seed_round.field
    back = ExteriorField.from_json(f.to_json())
    np.testing.assert_array_equal(back.values, f.values)
    assert back.R == f.R and back.ds == f.ds and back.gamma == f.gamma


@given(st.floats(8.0, 23.9))
def test_at_s_interpolation(s0):
    f = ExteriorField.from_function(lambda s, t: np.exp(0.3 * s) * np.cos(t) + 0 * s, R, 32, 0.3)
    val, der = f.at_s(s0)
    t = np.linspace(0, 2 * np.pi, 32, endpoint=False)
    np.testing.assert_allclose(val, np.exp(0.3 * s0) * np.cos(t), rtol=1e-8, atol=1e-8 * np.exp(0.3 * s0))
    np.testing.assert_allclose(der, 0.3 * np.exp(0.3 * s0) * np.cos(t), rtol=1e-6, atol=1e-6 * np.exp(0.3 * s0))
