"""Physical model of the pinned anharmonic chain.

H = sum_j [ p_j^2/2 + M_j q_j^2/2 + lambda q_j^4/4 ] - 1/2 sum_{j != l} q_j J_jl q_l

with a power-law coupling J_jl = J / |j - l|^p on a free (non-periodic) chain.
The interaction is attractive (spring-like): equivalently
1/4 sum_{j != l} J_jl (q_j - q_l)^2 with the pinning lowered to M_j - sum_l J_jl.
This is the sign under which the local energies and bond currents below are an
exact energy bookkeeping, with heat flowing from hot to cold.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import zeta as hurwitz_zeta


class ValidationError(ValueError):
    """Raised when a physical or numerical input is rejected."""


def _as_site_vector(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValidationError(f"{name} must be a scalar or a length-{n} vector")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Coupling:
    """Power-law coupling law J / |j - l|^p with an optional range cutoff."""

    J: float
    p: float = 2.0
    range: int | None = None
    periodic: bool = False

    def __post_init__(self):
        if self.periodic:
            raise ValidationError("periodic boundaries are not supported; the chain is free")
        if not np.isfinite(self.J) or self.J < 0:
            raise ValidationError("coupling amplitude J must be finite and >= 0")
        if not self.p > 1:
            raise ValidationError("decay exponent p must exceed 1 for an integrable coupling")
        if self.range is not None and self.range < 1:
            raise ValidationError("coupling range must be >= 1")

    def row_sum_bound(self) -> float:
        """J_M = 2 J zeta(p), the infinite-chain bound on every row sum."""
        return 2.0 * self.J * float(hurwitz_zeta(self.p, 1.0))


@dataclass(frozen=True)
class ChainParams:
    N: int
    M: np.ndarray
    lam: float
    zeta: np.ndarray
    temps: np.ndarray
    coupling: Coupling
    mass: float = 1.0
    T_min: float = field(default=0.0)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValidationError("N must be a positive integer")
        n = int(self.N)
        object.__setattr__(self, "N", n)
        object.__setattr__(self, "M", _as_site_vector(self.M, n, "M"))
        object.__setattr__(self, "zeta", _as_site_vector(self.zeta, n, "zeta"))
        object.__setattr__(self, "temps", _as_site_vector(self.temps, n, "temps"))
        if self.mass != 1.0:
            raise ValidationError("only unit particle masses are supported")
        if not np.all(np.isfinite(self.M)) or np.any(self.M <= 0):
            raise ValidationError("pinning M_j must be > 0")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValidationError("lambda must be >= 0")
        if not np.all(np.isfinite(self.zeta)) or np.any(self.zeta < 0):
            raise ValidationError("bath couplings zeta_j must be >= 0")
        if not np.all(np.isfinite(self.temps)) or np.any(self.temps <= 0):
            raise ValidationError("bath temperatures must be > 0")
        if self.T_min > 0 and np.any(self.temps < self.T_min):
            raise ValidationError("bath temperatures must stay above T_min")

    @classmethod
    def uniform(cls, N, M, lam, zeta, temps, J, p=2.0, range=None):
        return cls(N=N, M=M, lam=lam, zeta=zeta, temps=temps,
                   coupling=Coupling(J=J, p=p, range=range))

    @property
    def gamma(self) -> np.ndarray:
        """Noise strengths gamma_j = 2 zeta_j T_j."""
        return 2.0 * self.zeta * self.temps

    def with_temps(self, temps) -> "ChainParams":
        return ChainParams(N=self.N, M=self.M, lam=self.lam, zeta=self.zeta,
                           temps=np.array(temps, dtype=float), coupling=self.coupling,
                           T_min=self.T_min)


@dataclass(frozen=True)
class PhaseState:
    q: np.ndarray
    p: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        p = np.array(self.p, dtype=float)
        if q.ndim != 1 or q.shape != p.shape:
            raise ValidationError("q and p must be 1-D vectors of equal length")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ValidationError("phase state contains non-finite entries")
        q.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @classmethod
    def zeros(cls, n: int) -> "PhaseState":
        return cls(np.zeros(n), np.zeros(n))


def build_coupling(params: ChainParams | int, coupling: Coupling | None = None) -> np.ndarray:
    """Dense symmetric coupling matrix with zero diagonal.

    Accepts either a ChainParams or ``(N, Coupling)``.
    """
    if isinstance(params, ChainParams):
        n, law = params.N, params.coupling
    else:
        n, law = int(params), coupling
    idx = np.arange(n)
    dist = np.abs(idx[:, None] - idx[None, :]).astype(float)
    mat = np.zeros((n, n))
    mask = dist > 0
    if law.range is not None:
        mask &= dist <= law.range
    mat[mask] = law.J / dist[mask] ** law.p
    mat.setflags(write=False)
    return mat


def _check_state(state: PhaseState, params: ChainParams):
    if state.q.shape != (params.N,):
        raise ValidationError(f"state has {state.q.size} sites, params expect {params.N}")


def force(state: PhaseState, params: ChainParams, coupling: np.ndarray) -> np.ndarray:
    """F_j = -M_j q_j + sum_l J_jl q_l - lambda q_j^3."""
    _check_state(state, params)
    q = state.q
    return -params.M * q + coupling @ q - params.lam * q ** 3


def total_energy(state: PhaseState, params: ChainParams, coupling: np.ndarray | None = None) -> float:
    _check_state(state, params)
    if coupling is None:
        coupling = build_coupling(params)
    q, p = state.q, state.p
    onsite = 0.5 * p ** 2 + 0.5 * params.M * q ** 2 + 0.25 * params.lam * q ** 4
    return float(onsite.sum() - 0.5 * q @ coupling @ q)


def site_energies(state: PhaseState, params: ChainParams, coupling: np.ndarray | None = None) -> np.ndarray:
    """Per-site energies whose sum is the Hamiltonian.

    The bond part is 1/4 sum_l J_jl (q_j - q_l)^2; the on-site quadratic uses the
    adjusted pinning M_j - sum_l J_jl, which absorbs the leftover q^2 terms.
    """
    _check_state(state, params)
    if coupling is None:
        coupling = build_coupling(params)
    q, p = state.q, state.p
    diff2 = (q[:, None] - q[None, :]) ** 2
    bond = 0.25 * np.sum(coupling * diff2, axis=1)
    m_adj = params.M - coupling.sum(axis=1)
    return 0.5 * p ** 2 + bond + 0.5 * m_adj * q ** 2 + 0.25 * params.lam * q ** 4


def site_energy(j: int, state: PhaseState, params: ChainParams, coupling: np.ndarray | None = None) -> float:
    if not 0 <= j < params.N:
        raise IndexError(f"site {j} outside 0..{params.N - 1}")
    return float(site_energies(state, params, coupling)[j])
