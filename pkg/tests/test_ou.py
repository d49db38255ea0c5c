import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heatchain.chain import ChainParams, ValidationError
from heatchain.langevin import SimConfig, run
from heatchain.ou import (DiscreteQuadraticForm, OuParams, c1_from_curvature, covariance_by_quadrature,
                          curvature_constant, decay_rate_bound, dhat_exact, dhat_inverse, dhat_numeric,
                          dinv_apply, fit_norm_bound, offdiagonal_audit, propagator, stationary_covariance)
from scipy.linalg import expm

ou_params = st.builds(OuParams, alpha=st.floats(0.2, 6.0), M=st.floats(0.1, 80.0), T=st.floats(0.2, 3.0))


def test_propagator_at_zero():
    assert np.allclose(propagator(0.0, OuParams(1.0, 2.0)), np.eye(2))


@settings(max_examples=60)
@given(ou_params, st.floats(0.0, 5.0))
def test_propagator_matches_expm(par, tau):
    ref = expm(-tau * par.drift())
    assert np.allclose(propagator(tau, par), ref, rtol=1e-9, atol=1e-12)


@settings(max_examples=60)
@given(ou_params, st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_semigroup(par, t1, t2):
    lhs = propagator(t1 + t2, par)
    rhs = propagator(t1, par) @ propagator(t2, par)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(np.linalg.norm(lhs), 1e-300) + 1e-14


def test_critical_damping_continuity():
    par = OuParams(2.0, 4.0)
    near = OuParams(2.0, 4.0 + 1e-9)
    assert np.allclose(propagator(0.7, par), propagator(0.7, near), atol=1e-8)


@pytest.mark.parametrize("alpha,M", [(1.0, 0.5), (1.0, 3.0), (5.0, 75.0), (0.5, 0.25)])
def test_norm_bound_holds(alpha, M):
    par = OuParams(alpha, M)
    ap = 0.8 * decay_rate_bound(par)
    c = fit_norm_bound(par, ap)
    taus = np.linspace(1e-3, 20 / alpha, 777)
    assert all(np.linalg.norm(propagator(t, par), 2) <= c * math.exp(-t * ap) * (1 + 1e-9) for t in taus)
    with pytest.raises(ValidationError):
        fit_norm_bound(par, decay_rate_bound(par))


def test_stationary_covariance_examples():
    assert np.allclose(stationary_covariance(OuParams.from_zeta(2.0, 1.0, 2.0)), np.diag([2.0, 2.0]))


@pytest.mark.parametrize("alpha,M,T", [(1.0, 1.0, 2.0), (0.5, 3.0, 0.7), (5.0, 75.0, 1.0), (2.0, 1.0, 1.5)])
def test_covariance_quadrature_oracle(alpha, M, T):
    par = OuParams(alpha, M, T)
    assert np.allclose(covariance_by_quadrature(par), stationary_covariance(par), rtol=1e-6, atol=1e-9)


def test_covariance_against_langevin():
    T, M, zeta = 1.5, 2.0, 1.0
    pr = ChainParams.uniform(N=1, M=M, lam=0.0, zeta=zeta, temps=T, J=0.0)
    st_ = run(pr, SimConfig(dt=0.01, n_steps=2_000_000, burn_in=5000, seed=21, scheme="splitting"))
    C = stationary_covariance(OuParams.from_zeta(zeta, M, T))
    assert abs(st_.q2[0] - C[0, 0]) < 3 * st_.q2_err[0]
    assert abs(st_.p2[0] - C[1, 1]) < 3 * st_.p2_err[0]


def test_dinv_apply_examples():
    f0 = DiscreteQuadraticForm(size=6, epsilon=0.1, M=2.0, zeta=4.0, c1=0.0, c_inv=3.0)
    v = np.arange(6.0)
    assert np.allclose(dinv_apply(v, f0), 3.0 * 0.5 * v)
    f1 = DiscreteQuadraticForm(size=6, epsilon=0.1, M=2.0, zeta=4.0, c1=0.3, c_inv=3.0)
    out = dinv_apply(np.full(6, 2.0), f1)
    assert np.allclose(out[1:-1], 3.0 * 0.5 * 2.0)
    assert np.allclose(dinv_apply(v, f1), f1.matrix() @ v)
    with pytest.raises(ValidationError):
        dinv_apply(np.ones(5), f1)


def test_quadratic_form_positive_on_random_vectors():
    par = OuParams(5.0, 75.0)
    form = DiscreteQuadraticForm(size=40, epsilon=0.1, M=par.M, zeta=par.zeta, c1=abs(c1_from_curvature(par)))
    assert form.is_positive_definite()
    rng = np.random.default_rng(0)
    for _ in range(100):
        v = rng.normal(size=40)
        assert v @ dinv_apply(v, form) > 0


def test_dhat_numeric_matches_closed_form():
    par = OuParams(5.0, 75.0)
    for p0 in (0.0, 0.3, 1.0, 2.5):
        assert dhat_numeric(p0, par) == pytest.approx(float(dhat_exact(p0, par)), rel=1e-8)


def test_dhat_inverse_examples():
    par = OuParams(5.0, 75.0)
    assert dhat_inverse(0.0, par) == pytest.approx(75.0 / 10.0)
    p = np.linspace(0, math.pi / 2, 50)
    assert np.allclose(dhat_inverse(p, par), dhat_inverse(-p, par))
    rel = np.abs(dhat_inverse(p, par) * dhat_exact(p, par) - 1.0)
    assert rel.max() < 0.15
    with pytest.raises(ValidationError):
        dhat_inverse(0.1, OuParams(5.0, 10.0))


def test_curvature_matches_second_derivative():
    par = OuParams(5.0, 75.0)
    h = 1e-3
    f = lambda x: 1.0 / float(dhat_exact(x, par))
    second = (f(h) - 2 * f(0.0) + f(-h)) / h ** 2
    assert second == pytest.approx(curvature_constant(par) / par.alpha, rel=1e-5)


@given(st.floats(1.0, 20.0), st.floats(1.05, 5.0))
def test_c1_scales_like_one_over_alpha(alpha, ratio):
    a = c1_from_curvature(OuParams(alpha, ratio * alpha ** 2))
    b = c1_from_curvature(OuParams(2 * alpha, ratio * (2 * alpha) ** 2))
    assert b == pytest.approx(a / 2, rel=0.1)


def test_offdiagonal_audit_reports_measured_size():
    rep = offdiagonal_audit(OuParams(5.0, 75.0))
    assert rep["offdiag_ratio"][0] == pytest.approx(0.0, abs=1e-15)
    assert 0 < rep["max_offdiag_ratio"] < 1
