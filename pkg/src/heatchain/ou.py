"""Closed forms for a single harmonic site coupled to an Ornstein-Uhlenbeck bath.

The linear drift is A0 = [[0, -1], [M, zeta]] acting on (q, p), so that
d(q, p) = -A0 (q, p) dt + noise with noise covariance diag(0, 2 zeta T).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg, optimize

from .chain import ValidationError


@dataclass(frozen=True)
class OuParams:
    alpha: float
    M: float
    T: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValidationError("alpha must be > 0")
        if not self.M > 0:
            raise ValidationError("M must be > 0")
        if not self.T > 0:
            raise ValidationError("T must be > 0")

    @classmethod
    def from_zeta(cls, zeta: float, M: float, T: float = 1.0) -> "OuParams":
        return cls(alpha=zeta / 2.0, M=M, T=T)

    @property
    def zeta(self) -> float:
        return 2.0 * self.alpha

    @property
    def strong_pinning(self) -> bool:
        return self.M > self.alpha ** 2

    @property
    def rho(self) -> float:
        """sqrt(alpha^2 - M) for weak pinning, 0 otherwise."""
        return math.sqrt(max(self.alpha ** 2 - self.M, 0.0))

    @property
    def rho_tilde(self) -> float:
        """sqrt(M - alpha^2) for strong pinning, 0 otherwise."""
        return math.sqrt(max(self.M - self.alpha ** 2, 0.0))

    def drift(self) -> np.ndarray:
        return np.array([[0.0, -1.0], [self.M, self.zeta]])

    def noise(self) -> np.ndarray:
        return np.diag([0.0, 2.0 * self.zeta * self.T])


def _ch_sh(tau: float, par: OuParams):
    """cosh(tau rho) and sinh(tau rho)/rho continued through rho^2 = alpha^2 - M."""
    r2 = par.alpha ** 2 - par.M
    x = tau * tau * r2
    if abs(x) < 1e-8:
        # series in x = (tau rho)^2
        return 1.0 + x / 2.0 + x * x / 24.0, tau * (1.0 + x / 6.0 + x * x / 120.0)
    if r2 > 0:
        r = math.sqrt(r2)
        return math.cosh(tau * r), math.sinh(tau * r) / r
    r = math.sqrt(-r2)
    return math.cos(tau * r), math.sin(tau * r) / r


def propagator(tau: float, par: OuParams) -> np.ndarray:
    """exp(-tau A0) in closed form."""
    if tau < 0:
        raise ValidationError("tau must be >= 0")
    ch, sh = _ch_sh(tau, par)
    a = par.alpha
    B = np.array([[a, 1.0], [-par.M, -a]])
    return math.exp(-tau * a) * (ch * np.eye(2) + sh * B)


def stationary_covariance(par: OuParams) -> np.ndarray:
    return np.diag([par.T / par.M, par.T])


def covariance_by_quadrature(par: OuParams, rtol: float = 1e-11) -> np.ndarray:
    """Integral of exp(-s A0) sigma^2 exp(-s A0)^T over s in (0, inf)."""
    sig = par.noise()

    def entry(i, k):
        f = lambda s: (propagator(s, par) @ sig @ propagator(s, par).T)[i, k]
        scale = 1.0 / min(par.alpha, par.M / par.zeta)
        val = 0.0
        edges = np.arange(0.0, 80.0 * scale + scale, scale)
        for lo, hi in zip(edges[:-1], edges[1:]):
            val += integrate.quad(f, lo, hi, epsrel=rtol, epsabs=1e-14, limit=200)[0]
        return val

    C = np.empty((2, 2))
    for i in range(2):
        for k in range(i, 2):
            C[i, k] = C[k, i] = entry(i, k)
    return C


def decay_rate_bound(par: OuParams) -> float:
    """min(zeta/2, M/zeta): every admissible alpha' lies strictly below this."""
    return min(par.zeta / 2.0, par.M / par.zeta)


def fit_norm_bound(par: OuParams, alpha_prime: float, taus=None) -> float:
    """Smallest c with ||exp(-tau A0)|| <= c exp(-tau alpha') on [0, 20/alpha].

    A grid fine enough to resolve the oscillation locates the local maxima, which
    are then refined by bounded 1-D maximization. Passing ``taus`` restricts the
    fit to those sample points.
    """
    if not 0 < alpha_prime < decay_rate_bound(par):
        raise ValidationError("alpha' must lie in (0, min(zeta/2, M/zeta))")
    g = lambda t: np.linalg.norm(propagator(t, par), 2) * math.exp(t * alpha_prime)
    if taus is not None:
        return max(g(t) for t in taus)
    t_max = 20.0 / par.alpha
    scale = min(1.0 / par.alpha, 1.0 / par.rho_tilde if par.rho_tilde > 0 else math.inf)
    grid = np.linspace(0.0, t_max, max(2001, int(200 * t_max / scale)))
    vals = np.array([g(t) for t in grid])
    best = float(vals.max())
    h = grid[1] - grid[0]
    peaks = [i for i in range(1, grid.size - 1) if vals[i] >= vals[i - 1] and vals[i] >= vals[i + 1]]
    for i in peaks:
        res = optimize.minimize_scalar(lambda t: -g(t), bounds=(grid[i] - h, grid[i] + h), method="bounded",
                                       options={"xatol": 1e-14 * max(1.0, grid[i])})
        best = max(best, -float(res.fun))
    return best


def curvature_constant(par: OuParams) -> float:
    """c in 1/D(p0) ~ M/(2 alpha) + (c/alpha)(1 - cos p0), matched at p0 = 0.

    From the closed form of 1/D below, its p0^2 coefficient is
    (4 alpha^2 - 3 M) / (2 alpha M); (1 - cos p0) ~ p0^2/2 fixes c = (4 alpha^2 - 3M)/M.
    """
    return (4.0 * par.alpha ** 2 - 3.0 * par.M) / par.M


def c1_from_curvature(par: OuParams) -> float:
    """c1 in C^-1 (M/zeta + c1 (-Delta)) whose symbol 2 c1 (1 - cos p0) matches (c/alpha)(1 - cos p0)."""
    return curvature_constant(par) / (2.0 * par.alpha)


def dhat_exact(p0, par: OuParams):
    """Fourier transform of exp(-alpha |tau|) cos(rho~ tau) in closed form."""
    p0 = np.asarray(p0, dtype=float)
    a, M = par.alpha, par.M
    s = M + p0 ** 2
    return 2.0 * a * s / (s ** 2 - 4.0 * (M - a ** 2) * p0 ** 2)


def dhat_numeric(p0: float, par: OuParams) -> float:
    """Same transform by oscillatory quadrature (independent check)."""
    if not par.strong_pinning:
        raise ValidationError("strong pinning M > alpha^2 required")
    rt = par.rho_tilde
    f = lambda t: math.exp(-par.alpha * t) * math.cos(rt * t)
    return 2.0 * integrate.quad(f, 0.0, np.inf, weight="cos", wvar=abs(p0))[0] if p0 != 0 else \
        2.0 * integrate.quad(f, 0.0, np.inf)[0]


def dhat_inverse(p0, par: OuParams):
    """M/(2 alpha) + (c/alpha)(1 - cos p0) with c from curvature matching."""
    if not par.strong_pinning:
        raise ValidationError("dhat_inverse requires strong pinning M > alpha^2")
    c = curvature_constant(par)
    return par.M / (2.0 * par.alpha) + (c / par.alpha) * (1.0 - np.cos(p0))


@dataclass(frozen=True)
class DiscreteQuadraticForm:
    """C^-1 (M/zeta delta + c1 (-Delta)) on a time grid of ``size`` points.

    ``c_inv`` is the scalar C^-1 of the component (M/T for q, 1/T for p).
    -Delta(t, s) = 2 delta_ts - delta_|t-s|,1 restricted to the grid.
    """

    size: int
    epsilon: float
    M: float
    zeta: float
    c1: float
    c_inv: float = 1.0

    def __post_init__(self):
        if self.size < 2:
            raise ValidationError("time grid needs at least 2 points")

    @property
    def diagonal(self) -> float:
        return self.c_inv * (self.M / self.zeta + 2.0 * self.c1)

    @property
    def off_diagonal(self) -> float:
        return -self.c_inv * self.c1

    def matrix(self) -> np.ndarray:
        n = self.size
        return (np.diag(np.full(n, self.diagonal)) + np.diag(np.full(n - 1, self.off_diagonal), 1)
                + np.diag(np.full(n - 1, self.off_diagonal), -1))

    def eigenvalues(self) -> np.ndarray:
        return linalg.eigvalsh_tridiagonal(np.full(self.size, self.diagonal),
                                           np.full(self.size - 1, self.off_diagonal))

    def is_positive_definite(self) -> bool:
        return bool(self.eigenvalues().min() > 0)


def dinv_apply(v, form: DiscreteQuadraticForm) -> np.ndarray:
    """Banded product of the quadratic-form operator with a vector on the time grid."""
    v = np.asarray(v, dtype=float)
    if v.shape != (form.size,):
        raise ValidationError(f"vector length {v.size} does not match grid size {form.size}")
    out = form.diagonal * v
    out[:-1] += form.off_diagonal * v[1:]
    out[1:] += form.off_diagonal * v[:-1]
    return out


def offdiagonal_audit(par: OuParams, taus=None) -> dict:
    """Size of the q-p cross terms of the stationary two-time covariance.

    C(tau) = exp(-tau A0) C(inf, inf); the simplified form keeps only its diagonal.
    Returns the largest ratio |offdiag| / sqrt(|C_qq C_pp|) at tau = 0 scale.
    """
    if taus is None:
        taus = np.linspace(0.0, 10.0 / par.alpha, 401)
    C0 = stationary_covariance(par)
    scale = math.sqrt(C0[0, 0] * C0[1, 1])
    ratios, diag_max = [], []
    for t in taus:
        C = propagator(t, par) @ C0
        ratios.append(max(abs(C[0, 1]), abs(C[1, 0])) / scale)
        diag_max.append(max(abs(C[0, 0]) / C0[0, 0], abs(C[1, 1]) / C0[1, 1]))
    return {"tau": np.asarray(taus), "offdiag_ratio": np.asarray(ratios),
            "diag_ratio": np.asarray(diag_max), "max_offdiag_ratio": float(max(ratios))}
