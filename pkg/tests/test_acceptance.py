"""End-to-end acceptance checks, one test per criterion.

Criterion 3 runs the full conductivity sweep and takes tens of minutes.
"""
import itertools
import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from heatchain.chain import ChainParams
from heatchain.conductivity import SweepConfig, run_sweep
from heatchain.langevin import SimConfig, run
from heatchain.oracle import Comparison, direct_two_point
from heatchain.polymer import Cell, Lattice, PolymerEngine, PolymerParams, graphs, kp_check, two_point_series
from heatchain.polymer.certificate import decay_kernel
from heatchain.selfconsistent import ScSolveConfig, solve_profile


def test_criterion_1_equilibrium_covariance(verdict):
    T = np.array([0.5, 1.0, 1.5, 2.0])
    M, zeta = 2.0, 1.0
    pr = ChainParams.uniform(N=4, M=M, lam=0.0, zeta=zeta, temps=T, J=0.0)
    st_ = run(pr, SimConfig.default(pr, 1_000_000, burn_in=10_000, seed=2024))
    zq = np.abs(st_.q2 - T / M) / st_.q2_err
    zp = np.abs(st_.p2 - T) / st_.p2_err
    ok = bool(np.all(zq < 3) and np.all(zp < 3))
    assert verdict(1, "equilibrium covariance", ok, f"max |z| q2 {zq.max():.2f}, p2 {zp.max():.2f}")


def test_criterion_2_self_consistent_steady_state(verdict):
    pr = ChainParams.uniform(N=8, M=1.0, lam=1.0, zeta=1.0, temps=np.linspace(1.2, 0.8, 8), J=0.1, range=1)
    sim = SimConfig(dt=0.02, n_steps=20_000_000, burn_in=20_000, seed=11, scheme="splitting")
    res = solve_profile(pr, ScSolveConfig(sim=sim, eta=0.7, tol=1e-2, max_outer=10), raise_on_failure=False)
    F, e = res.stats.bond_flux, res.stats.bond_flux_err
    Fb = np.average(F, weights=1 / e ** 2)
    z = np.abs(F - Fb) / np.hypot(e, 1 / np.sqrt(np.sum(1 / e ** 2)))
    max_res = res.trace[-1].max_residual
    ok = bool(res.converged and max_res < 1e-2 and np.all(z < 3))
    assert verdict(2, "self-consistent steady state", ok,
                   f"max|R| {max_res:.2e} after {len(res.trace)} iterations, flux spread max z {z.max():.2f}")


def test_criterion_3_conductivity_exponent(verdict):
    sweep = run_sweep([2.0, 4.0, 8.0, 16.0], SweepConfig())
    fit = sweep.fit
    for p in sweep.points:
        print(f"  T={p.T:g} K={p.K:.5g} +- {p.K_err:.2g} flux={p.flux:.5g}")
    ok = -1.55 <= fit.slope <= -1.15
    assert verdict(3, "conductivity scaling", ok, fit.report())


def certificate_params(rng, N):
    while True:
        zeta = rng.uniform(8.0, 12.0)
        P = PolymerParams(N=N, zeta=zeta, M=3 * (zeta / 2) ** 2 * rng.uniform(1.0, 1.5), lam=10 ** rng.uniform(16, 18),
                          J=rng.uniform(0.05, 0.2), c1=10 ** rng.uniform(-9, -7), T=rng.uniform(0.5, 2.0))
        if kp_check(P).passed:
            return P


def test_criterion_4_oracle_equivalence(verdict):
    rng = np.random.default_rng(44)
    shapes = [(1, 1), (1, 2), (2, 1), (1, 3), (3, 1)]
    n_rows = worst = 0
    failures = []
    base = [certificate_params(rng, 3) for _ in range(10)]
    for k, P3 in enumerate(base):
        for nt, N in shapes:
            P = P3.replace(N=N)
            lat = Lattice(nt, N)
            eng = PolymerEngine(P, lat)
            for x, y in itertools.combinations_with_replacement(lat.cells, 2):
                for obs in (("q", "q"), ("p", "p")):
                    s = two_point_series(eng, x, y, obs, max_n=4, max_size=len(lat))
                    o = direct_two_point(x, y, lat, P, obs)
                    c = Comparison(f"{k}:{nt}x{N}:{x}-{y}:{obs}", s.value, s.error, o.value, o.error)
                    d = np.abs(s.partial_sums() - o.value)
                    # non-increasing up to the resolution floor of the two computations
                    mono = bool(np.all(np.diff(d) <= c.combined_error))
                    n_rows += 1
                    scale = max(abs(o.value), 1e-300)
                    worst = max(worst, c.discrepancy / scale)
                    if not (c.passed and mono):
                        failures.append(c.label)
    ok = not failures
    assert verdict(4, "oracle equivalence", ok,
                   f"{n_rows} comparisons, worst relative discrepancy {worst:.1e}, failures {failures[:3]}")


def test_criterion_5_certificate(verdict):
    grid = [1e10, 1e12, 1e14, 1e16]
    certs = [kp_check(PolymerParams.strong_pinning(N=4, zeta=10.0, lam=lam, J=0.1, c1=1e-8)) for lam in grid]
    eps = [c.eps_K for c in certs]
    monotone = all(b < a for a, b in zip(eps, eps[1:]))
    passing = [lam for lam, c in zip(grid, certs) if c.passed]
    ok = monotone and bool(passing)
    assert verdict(5, "convergence certificate", ok,
                   "eps(K) " + ", ".join(f"{e:.3g}" for e in eps) + f"; passes at lambda {passing}")


def test_criterion_6_combinatorics(verdict):
    counts = {n: len(graphs.enumerate_connected_graphs(n)) for n in (2, 3, 4)}
    edges4 = list(itertools.combinations(range(4), 2))
    brute = sum(graphs._connected(4, [e for i, e in enumerate(edges4) if m >> i & 1]) for m in range(64))
    cayley = all(len(set(graphs.enumerate_trees(n))) == n ** (n - 2) for n in range(2, 8))
    profiles = all(graphs.degree_profile_counts(n).get(d, 0) == graphs.cayley_profile_count(d)
                   for n in range(2, 7) for d in itertools.product(range(1, n), repeat=n))
    ok = counts == {2: 1, 3: 4, 4: 38} and brute == 38 and cayley and profiles
    assert verdict(6, "combinatorics", ok, f"connected {counts}, brute force n=4 {brute}")


def stable_instance(rng, n):
    V = np.triu(rng.normal(scale=rng.uniform(0.1, 2.0), size=(n, n)), 1)
    V = V + V.T
    site = np.array([0.5 * np.sum(np.abs(np.minimum(V[i], 0))) for i in range(n)]) + rng.uniform(0, 0.2, n)
    return site, V


def test_criterion_7_bbf_inequality(verdict):
    rng = np.random.default_rng(77)
    held = 0
    for k in range(200):
        site, V = stable_instance(rng, 2 + k % 4)
        assert graphs.is_stable(site, V)
        lhs, rhs = graphs.bbf_sides(site, V)
        held += lhs <= rhs * (1 + 1e-12)
    assert verdict(7, "BBF inequality", held == 200, f"{held}/200 instances")


STRIP = PolymerParams(N=4, zeta=10.0, M=75.0, lam=1e16, J=0.1, c1=1e-8, p=2.0)


def strip_values(P, sources):
    lat = Lattice(2, 4)
    eng = PolymerEngine(P, lat)
    return {(x, y): two_point_series(eng, x, y, max_n=3, max_size=3).value for x in sources for y in lat.cells}


def test_criterion_8_decay(verdict):
    assert kp_check(STRIP).passed
    x = Cell(1, 0)
    vals = strip_values(STRIP, [x])
    d = np.array([1.0, 2.0, 3.0])
    S = np.array([abs(vals[(x, Cell(1, k))]) for k in (1, 2, 3)])
    slope = float(np.polyfit(np.log(d), np.log(S), 1)[0])
    ok = abs(-slope - STRIP.p) <= 0.5
    assert verdict(8, "two-point decay", ok, f"fitted spatial exponent {-slope:.4f} (p = {STRIP.p:g})")


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_criterion_8_envelope_property(seed):
    P = certificate_params(np.random.default_rng(seed), 4)
    vals = strip_values(P, [Cell(1, 0), Cell(1, 1), Cell(2, 0)])
    peak = max(abs(v) for (a, b), v in vals.items() if a == b)
    for (a, b), v in vals.items():
        assert abs(v) <= peak * decay_kernel(0.5, a, b, P.p) * (1 + 1e-12)
