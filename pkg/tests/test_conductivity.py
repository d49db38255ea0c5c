import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heatchain.chain import ValidationError
from heatchain.conductivity import (ALPHA, SweepConfig, SweepPoint, SweepResult, calibrate_c,
                                    conductivity_profile, fit_exponent, measure_point, perturbative_flux,
                                    perturbative_sweep, resistance_constant, run_sweep)


def test_perturbative_flux_examples():
    assert perturbative_flux(1.0, 1.0, 1.0, 1.0, 1.0) == 0.0
    assert perturbative_flux(4.0, 3.0, 1.0, 1.0, 1.0) == pytest.approx(4 ** (-4 / 3))
    # doubling J quadruples the current
    assert perturbative_flux(4.0, 3.0, 2.0, 1.0, 1.0) == pytest.approx(4 * 4 ** (-4 / 3))
    with pytest.raises(ValidationError):
        perturbative_flux(0.0, 1.0, 1.0, 1.0, 1.0)


def test_resistance_constant():
    assert resistance_constant(0.5, 8.0, 2.0) == pytest.approx(8.0 ** ALPHA / 0.5)
    with pytest.raises(ValidationError):
        resistance_constant(0.0, 1.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 20.0), st.floats(0.05, 0.8), st.integers(2, 30), st.sampled_from(["trapezoid", "left"]))
def test_profile_solves_bond_equations(T, rel, N, rule):
    res = conductivity_profile(T * (1 + rel), T * (1 - rel), N, 0.7, 1.3, 0.9, rule)
    assert res.ok, res.message
    assert res.flux_residuals(rule).max() < 1e-10
    assert np.all(np.diff(res.profile) < 0)
    # telescoping: the bond drops add up to the imposed difference
    m = res.profile[:-1] ** ALPHA if rule == "left" else 0.5 * (res.profile[:-1] ** ALPHA + res.profile[1:] ** ALPHA)
    assert res.F * res.C * m.sum() == pytest.approx(2 * T * rel, rel=1e-10)


def test_trapezoid_rule_is_orientation_invariant():
    a = conductivity_profile(3.0, 1.0, 10, 1.0, 1.0, 1.0)
    b = conductivity_profile(1.0, 3.0, 10, 1.0, 1.0, 1.0)
    assert b.F == pytest.approx(-a.F, rel=1e-12)
    assert b.K == pytest.approx(a.K, rel=1e-12)
    assert np.allclose(b.profile, a.profile[::-1], rtol=1e-12)
    # the left-endpoint rule is not, but agrees to first order in the gradient
    la = conductivity_profile(3.0, 1.0, 10, 1.0, 1.0, 1.0, "left")
    lb = conductivity_profile(1.0, 3.0, 10, 1.0, 1.0, 1.0, "left")
    assert la.K != pytest.approx(lb.K, rel=1e-6)

    def gap(d):
        fwd = conductivity_profile(2 + d, 2 - d, 10, 1.0, 1.0, 1.0, "left").K
        bwd = conductivity_profile(2 - d, 2 + d, 10, 1.0, 1.0, 1.0, "left").K
        return abs(fwd / bwd - 1)

    assert gap(0.005) / gap(0.01) == pytest.approx(0.5, rel=0.01)


def test_equal_ends():
    res = conductivity_profile(2.0, 2.0, 5, 1.0, 1.0, 1.0)
    assert res.F == 0.0 and np.all(res.profile == 2.0)
    assert res.K == pytest.approx(1.0 / (res.C * 2.0 ** ALPHA))


def test_profile_validation():
    with pytest.raises(ValidationError):
        conductivity_profile(1.0, 0.5, 1, 1.0, 1.0, 1.0)
    with pytest.raises(ValidationError):
        conductivity_profile(-1.0, 0.5, 4, 1.0, 1.0, 1.0)
    with pytest.raises(ValidationError):
        conductivity_profile(1.0, 0.5, 4, 1.0, 1.0, 1.0, "midpoint")


def test_calibrate_c_inverts_the_law():
    c = 0.37
    K = c * 0.8 ** 2 / (2.0 * 3.0) ** ALPHA
    assert calibrate_c(K, 3.0, 0.8, 2.0) == pytest.approx(c)
    with pytest.raises(ValidationError):
        calibrate_c(-1.0, 1.0, 1.0, 1.0)


def test_perturbative_sweep_exponent_is_exact():
    sweep = perturbative_sweep([2, 4, 8, 16], SweepConfig(N=12), c_eps=0.5)
    fit = fit_exponent(sweep)
    assert fit.slope == pytest.approx(-4 / 3, abs=1e-10)
    assert fit.ci == (fit.slope, fit.slope)


def synthetic(slope, rel_err, seed):
    rng = np.random.default_rng(seed)
    pts = []
    for T in (1.0, 2.0, 4.0, 8.0, 16.0):
        K = 3.0 * T ** slope * (1 + rel_err * rng.standard_normal())
        pts.append(SweepPoint(T, 1.0, 1.0, 8, 0.0, 0.0, K, rel_err * K, 0, ""))
    return SweepResult(pts)


def test_fit_recovers_synthetic_slope():
    fit = fit_exponent(synthetic(-4 / 3, 0.02, 1))
    assert fit.slope == pytest.approx(-1.333, abs=0.05)
    assert fit.ci[0] < fit.slope < fit.ci[1]
    assert "slope" in fit.report()


def test_fit_validation():
    pts = synthetic(-1.0, 0.01, 0).points
    with pytest.raises(ValidationError):
        fit_exponent(SweepResult(pts[:3]))
    with pytest.raises(ValidationError):
        fit_exponent(SweepResult([SweepPoint(T, 1, 1, 8, 0, 0, 1.0, 0.1, 0, "") for T in (1, 1.5, 2, 3)]))


def test_measure_point_is_deterministic_and_csv():
    cfg = SweepConfig(N=6, n_steps=40_000, burn_in=1000, iterations=1)
    a = measure_point(2.0, cfg, 11)
    b = measure_point(2.0, cfg, 11)
    assert a == b or (math.isnan(a.residual) and a.K == b.K)
    assert a.flux > 0
    sweep = run_sweep([1.0, 2.0], cfg)
    assert sweep.fit is None and [p.seed for p in sweep.points] == [cfg.seed, cfg.seed + 1000]
    lines = sweep.to_csv().splitlines()
    assert lines[0].startswith("#") and lines[1] == "T,lambda,J,N,flux,flux_err,K,K_err,seed"
    assert len(lines) == 4
