import math

import numpy as np
import pytest

from heatchain.chain import ChainParams, PhaseState, ValidationError, build_coupling, total_energy
from heatchain.langevin import (IntegratorDivergence, SimConfig, bond_flux, replica_generator,
                                reservoir_flux, run, step, with_seed)


def single(zeta=0.0, T=1.0, lam=0.0, M=1.0):
    return ChainParams.uniform(N=1, M=M, lam=lam, zeta=zeta, temps=T, J=0.0)


def test_euler_step_by_hand():
    pr = single()
    out = step(PhaseState([1.0], [0.0]), pr, build_coupling(pr), 0.1, None)
    assert out.q[0] == pytest.approx(1.0)
    assert out.p[0] == pytest.approx(-0.1)
    assert out.time == pytest.approx(0.1)


def test_euler_energy_growth_is_exact():
    # explicit Euler on q'' = -q multiplies q^2 + p^2 by (1 + dt^2) every step
    pr = single()
    J = build_coupling(pr)
    dt = 1e-3
    n = int(round(10 * 2 * math.pi / dt))
    s = PhaseState([1.0], [0.0])
    for _ in range(n):
        s = step(s, pr, J, dt, None)
    ratio = total_energy(s, pr) / 0.5
    assert ratio == pytest.approx((1 + dt * dt) ** n, rel=1e-9)
    assert ratio - 1 < 2 * (10 * 2 * math.pi * dt)  # O(dt) per period


def test_stability_guard():
    pr = single(zeta=10.0)
    with pytest.raises(ValidationError):
        step(PhaseState([0.0], [0.0]), pr, build_coupling(pr), 0.1, None)


def test_divergence_is_an_error():
    pr = ChainParams.uniform(N=2, M=1.0, lam=1.0, zeta=0.1, temps=1.0, J=0.0)
    cfg = SimConfig(dt=0.4, n_steps=2000, seed=1)
    with pytest.raises(IntegratorDivergence):
        run(pr, cfg, PhaseState([1e3, 0.0], [0.0, 0.0]))


def test_bond_flux_examples():
    J = np.array([[0.0, 1.0], [1.0, 0.0]])
    pair, fwd, nn = bond_flux(PhaseState([1.0, 0.0], [0.0, 2.0]), J)
    assert fwd[0] == pytest.approx(1.0)
    assert nn[0] == pytest.approx(1.0)
    assert pair[0, 1] == pytest.approx(-pair[1, 0])
    pair, fwd, nn = bond_flux(PhaseState([1.0, 0.5], [0.0, 0.0]), J)
    assert np.all(pair == 0)


def test_pair_flux_antisymmetric_random():
    rng = np.random.default_rng(3)
    pr = ChainParams.uniform(N=6, M=1.0, lam=0.0, zeta=0.0, temps=1.0, J=0.3)
    pair, _, _ = bond_flux(PhaseState(rng.normal(size=6), rng.normal(size=6)), build_coupling(pr))
    assert np.allclose(pair, -pair.T)


def test_reservoir_flux_example():
    pr = ChainParams.uniform(N=1, M=1.0, lam=0.0, zeta=2.0, temps=1.0, J=0.0)

    class S:
        p2 = np.array([0.5])
    assert reservoir_flux(0, S, pr) == pytest.approx(1.0)


def test_seed_determinism_and_streams():
    pr = ChainParams.uniform(N=3, M=1.0, lam=1.0, zeta=1.0, temps=[1.2, 1.0, 0.8], J=0.1)
    cfg = SimConfig(dt=0.01, n_steps=4000, burn_in=100, seed=5)
    a, b = run(pr, cfg), run(pr, cfg)
    assert np.array_equal(a.p2, b.p2) and np.array_equal(a.bond_flux, b.bond_flux)
    c = run(pr, with_seed(cfg, 6))
    assert not np.array_equal(a.p2, c.p2)
    assert replica_generator(1, 0).random() != replica_generator(1, 1).random()


def test_workers_do_not_change_results():
    pr = ChainParams.uniform(N=3, M=1.0, lam=1.0, zeta=1.0, temps=1.0, J=0.1)
    cfg = SimConfig(dt=0.01, n_steps=2000, seed=2, replicas=3)
    a = run(pr, cfg)
    b = run(pr, SimConfig(dt=0.01, n_steps=2000, seed=2, replicas=3, workers=3))
    assert np.array_equal(a.p2, b.p2)


@pytest.mark.parametrize("scheme", ["splitting", "euler"])
def test_single_oscillator_equilibrium(scheme):
    pr = single(zeta=1.0, T=2.0)
    dt = 0.01 if scheme == "splitting" else 1e-3
    st = run(pr, SimConfig(dt=dt, n_steps=2_000_000, burn_in=5000, seed=9, scheme=scheme))
    # Euler carries an O(dt) bias in <p^2>: T (1 + zeta dt / 2 + ...)
    bias = 0.0 if scheme == "splitting" else 2.0 * dt
    assert abs(st.p2[0] - 2.0) < 3 * st.p2_err[0] + bias
    assert abs(st.q2[0] - 2.0) < 3 * st.q2_err[0] + bias


def test_equilibrium_chain_has_no_flux_and_balances():
    pr = ChainParams.uniform(N=4, M=1.0, lam=1.0, zeta=1.0, temps=1.0, J=0.2)
    st = run(pr, SimConfig(dt=0.02, n_steps=1_000_000, burn_in=5000, seed=4, scheme="splitting"))
    assert np.all(np.abs(st.bond_flux) < 3 * st.bond_flux_err + 1e-12)
    R, Re = st.reservoir_flux, st.reservoir_flux_err
    assert abs(R.sum()) < 3 * math.sqrt(np.sum(Re ** 2))


def test_nonequilibrium_global_balance():
    pr = ChainParams.uniform(N=4, M=1.0, lam=1.0, zeta=1.0, temps=[1.5, 1.0, 1.0, 0.5], J=0.3)
    st = run(pr, SimConfig(dt=0.02, n_steps=1_000_000, burn_in=5000, seed=8, scheme="splitting"))
    R, Re = st.reservoir_flux, st.reservoir_flux_err
    assert abs(R.sum()) < 3 * math.sqrt(np.sum(Re ** 2))
    assert st.bond_flux[0] > 0


def test_dt_halving_within_noise():
    pr = ChainParams.uniform(N=2, M=1.0, lam=1.0, zeta=1.0, temps=[1.2, 0.8], J=0.2)
    a = run(pr, SimConfig(dt=0.02, n_steps=1_000_000, burn_in=5000, seed=1, scheme="splitting"))
    b = run(pr, SimConfig(dt=0.01, n_steps=2_000_000, burn_in=10000, seed=2, scheme="splitting"))
    assert np.all(np.abs(a.p2 - b.p2) < 3 * np.hypot(a.p2_err, b.p2_err))


def test_csv_header():
    pr = single(zeta=1.0)
    text = run(pr, SimConfig(dt=0.01, n_steps=2000, seed=0)).to_csv()
    assert text.startswith("# ")
    assert text.splitlines()[1].startswith("kind,index,T,p2")


def test_config_validation():
    with pytest.raises(ValidationError):
        SimConfig(dt=-1.0, n_steps=10)
    with pytest.raises(ValidationError):
        SimConfig(dt=0.01, n_steps=10, scheme="rk4")
