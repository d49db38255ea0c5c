"""Langevin dynamics of the chain with one Ornstein-Uhlenbeck bath per site.

dq_j = p_j dt
dp_j = (F_j - zeta_j p_j) dt + sqrt(2 zeta_j T_j) dB_j

Euler-Maruyama is the reference scheme. The splitting scheme (OBABO: exact OU
half-kicks around a velocity-Verlet step) is the cross-check; it has no O(dt)
heating bias in the kinetic temperature.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .chain import ChainParams, PhaseState, ValidationError, build_coupling, force

SCHEMES = {"euler": _kernels.EULER, "splitting": _kernels.SPLITTING}
CHUNK = 1 << 15


class IntegratorDivergence(FloatingPointError):
    def __init__(self, site: int, step: int):
        super().__init__(f"non-finite state at site {site}, step {step}")
        self.site = site
        self.step = step


@dataclass(frozen=True)
class SimConfig:
    dt: float
    n_steps: int
    burn_in: int = 0
    seed: int = 0
    batch_count: int = 20
    scheme: str = "euler"
    replicas: int = 1
    workers: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError("dt must be > 0")
        if self.batch_count < 2:
            raise ValidationError("batch_count must be >= 2")
        if self.n_steps < self.batch_count:
            raise ValidationError("n_steps must be at least batch_count")
        if self.burn_in < 0:
            raise ValidationError("burn_in must be >= 0")
        if self.scheme not in SCHEMES:
            raise ValidationError(f"unknown scheme {self.scheme!r}")
        if self.replicas < 1 or self.workers < 1:
            raise ValidationError("replicas and workers must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError("seed must be an unsigned 64-bit integer")

    @classmethod
    def default(cls, params: ChainParams, n_steps: int, **kw) -> "SimConfig":
        """dt = 1e-3 / max(zeta)."""
        zmax = float(np.max(params.zeta)) or 1.0
        return cls(dt=1e-3 / zmax, n_steps=n_steps, **kw)

    def check_stability(self, params: ChainParams):
        if self.dt * float(np.max(params.zeta)) >= 0.5:
            raise ValidationError("stability guard violated: dt * max(zeta) must be < 0.5")


@dataclass
class ObservableStats:
    """Batch-mean estimates of steady-state observables.

    ``bond_flux`` is the nearest-neighbour current (J_{j,j+1}/2)(q_j - q_{j+1})(p_j + p_{j+1});
    ``cut_flux`` is the total current across the cut between j and j+1 (equal to
    ``bond_flux`` for nearest-neighbour coupling); ``forward_flux`` is the current from
    site j to all sites l > j.
    """

    temps: np.ndarray
    zeta: np.ndarray
    p2: np.ndarray
    p2_err: np.ndarray
    q2: np.ndarray
    q2_err: np.ndarray
    bond_flux: np.ndarray
    bond_flux_err: np.ndarray
    cut_flux: np.ndarray
    cut_flux_err: np.ndarray
    forward_flux: np.ndarray
    forward_flux_err: np.ndarray
    n_samples: int
    batch_count: int
    batches: dict = field(default_factory=dict, repr=False)

    @property
    def reservoir_flux(self) -> np.ndarray:
        return self.zeta * (self.temps - self.p2)

    @property
    def reservoir_flux_err(self) -> np.ndarray:
        return self.zeta * self.p2_err

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# heatchain steady-state observables; samples={self.n_samples} batches={self.batch_count}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "index", "T", "p2", "p2_err", "q2", "q2_err", "R", "R_err",
                    "flux", "flux_err", "cut_flux", "cut_flux_err"])
        R, Re = self.reservoir_flux, self.reservoir_flux_err
        for j in range(self.p2.size):
            w.writerow(["site", j + 1, _f(self.temps[j]), _f(self.p2[j]), _f(self.p2_err[j]),
                        _f(self.q2[j]), _f(self.q2_err[j]), _f(R[j]), _f(Re[j]), "", "", "", ""])
        for j in range(self.bond_flux.size):
            w.writerow(["bond", j + 1, "", "", "", "", "", "", "",
                        _f(self.bond_flux[j]), _f(self.bond_flux_err[j]),
                        _f(self.cut_flux[j]), _f(self.cut_flux_err[j])])
        return buf.getvalue()


def _f(x: float) -> str:
    return repr(float(x))


def step(state: PhaseState, params: ChainParams, coupling: np.ndarray, dt: float,
         rng: np.random.Generator | None) -> PhaseState:
    """One Euler-Maruyama step; ``rng=None`` gives the noiseless update."""
    if dt * float(np.max(params.zeta)) >= 0.5:
        raise ValidationError("stability guard violated: dt * max(zeta) must be < 0.5")
    f = force(state, params, coupling)
    q = state.q + state.p * dt
    p = state.p + (f - params.zeta * state.p) * dt
    if rng is not None:
        p = p + np.sqrt(2.0 * params.zeta * params.temps * dt) * rng.standard_normal(params.N)
    bad = np.flatnonzero(~(np.isfinite(p) & np.isfinite(q)))
    if bad.size:
        raise IntegratorDivergence(int(bad[0]), 0)
    return PhaseState(q, p, state.time + dt)


def bond_flux(state: PhaseState, coupling: np.ndarray):
    """Pair currents, forward currents and nearest-neighbour currents of one state.

    Returns ``(pair, forward, nn)`` with pair[j, l] = J_jl (q_j - q_l)(p_j + p_l)/2,
    forward[j] = sum_{l>j} pair[j, l] and nn[j] = pair[j, j+1].
    """
    q, p = state.q, state.p
    pair = 0.5 * coupling * (q[:, None] - q[None, :]) * (p[:, None] + p[None, :])
    forward = np.triu(pair, 1).sum(axis=1)
    nn = np.diagonal(pair, 1).copy()
    return pair, forward, nn


def reservoir_flux(j: int, stats: ObservableStats, params: ChainParams) -> float:
    """R_j = zeta_j (T_j - <p_j^2>)."""
    return float(params.zeta[j] * (params.temps[j] - stats.p2[j]))


def replica_generator(seed: int, replica: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, replica)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, replica])))


def _run_replica(params: ChainParams, cfg: SimConfig, coupling: np.ndarray, replica: int,
                 init: PhaseState | None):
    n = params.N
    rng = replica_generator(cfg.seed, replica)
    if init is None:
        # start near the single-site equilibrium width to shorten the transient
        m_eff = np.maximum(params.M - coupling.sum(axis=1), 1e-12)
        width = np.sqrt(params.temps / m_eff)
        if params.lam > 0:
            width = np.minimum(width, (4.0 * params.temps / params.lam) ** 0.25)
        q = rng.standard_normal(n) * width
        p = rng.standard_normal(n) * np.sqrt(params.temps)
    else:
        q, p = init.q.copy(), init.p.copy()
    B = cfg.batch_count
    batch_len = cfg.n_steps // B
    acc = {k: np.zeros((B, n)) for k in ("p2", "q2", "fwd")}
    acc["bond"] = np.zeros((B, max(n - 1, 0)))
    acc["cut"] = np.zeros((B, max(n - 1, 0)))
    bad = np.zeros(1, dtype=np.int64)
    total = cfg.burn_in + batch_len * B
    M = np.ascontiguousarray(params.M, dtype=float)
    zeta = np.ascontiguousarray(params.zeta, dtype=float)
    temps = np.ascontiguousarray(params.temps, dtype=float)
    J = np.ascontiguousarray(coupling, dtype=float)
    scheme = SCHEMES[cfg.scheme]
    done = 0
    while done < total:
        m = min(CHUNK, total - done)
        width = n if cfg.scheme == "euler" else 2 * n
        noise = rng.standard_normal((m, width))
        status = _kernels.integrate_chunk(q, p, M, float(params.lam), zeta, temps, J, cfg.dt,
                                          scheme, noise, done, cfg.burn_in, batch_len,
                                          acc["p2"], acc["q2"], acc["bond"], acc["cut"],
                                          acc["fwd"], bad)
        if status >= 0:
            raise IntegratorDivergence(int(bad[0]), int(status))
        done += m
    return {k: v / batch_len for k, v in acc.items()}, batch_len * B


def run(params: ChainParams, cfg: SimConfig, init: PhaseState | None = None) -> ObservableStats:
    """Integrate all replicas and return batch-mean statistics.

    Replicas own independent streams, so the result does not depend on ``workers``.
    """
    cfg.check_stability(params)
    coupling = build_coupling(params)
    reps = range(cfg.replicas)
    if cfg.workers > 1 and cfg.replicas > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            out = list(pool.map(lambda r: _run_replica(params, cfg, coupling, r, init), reps))
    else:
        out = [_run_replica(params, cfg, coupling, r, init) for r in reps]
    batches = {k: np.concatenate([o[0][k] for o in out]) for k in out[0][0]}
    nb = batches["p2"].shape[0]

    def mean_err(a):
        return a.mean(axis=0), a.std(axis=0, ddof=1) / np.sqrt(nb)

    p2, p2e = mean_err(batches["p2"])
    q2, q2e = mean_err(batches["q2"])
    bf, bfe = mean_err(batches["bond"])
    cf, cfe = mean_err(batches["cut"])
    ff, ffe = mean_err(batches["fwd"])
    return ObservableStats(temps=params.temps.copy(), zeta=params.zeta.copy(), p2=p2, p2_err=p2e,
                           q2=q2, q2_err=q2e, bond_flux=bf, bond_flux_err=bfe, cut_flux=cf,
                           cut_flux_err=cfe, forward_flux=ff, forward_flux_err=ffe,
                           n_samples=sum(o[1] for o in out), batch_count=nb, batches=batches)


def with_seed(cfg: SimConfig, seed: int) -> SimConfig:
    return replace(cfg, seed=int(seed) % 2 ** 64)
