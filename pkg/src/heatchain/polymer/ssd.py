"""Single-cell measure dnu = exp(-U(q, p)) dq dp / C with

    U = c6 q^6 + c3 q^3 p + c2 p^2 + c4 q^4.

For a bulk cell c6 = a/2, c3 = a, c2 = a (M + 2 zeta c1), c4 = a lambda^(-1/3) M with
a = eps / gamma. Completing the square in p gives

    p | q ~ Normal(-c3 q^3 / (2 c2), 1 / (2 c2)),
    q     ~ exp(-(c6 - c3^2 / (4 c2)) q^6 - c4 q^4),

which is how every integral here is organized: a generalized Gauss rule for the
q marginal (built by Lanczos on a fine Gauss-Legendre discretization) times
Gauss-Hermite nodes for the conditional p.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import linalg, special

from ..chain import ValidationError
from .lattice import PolymerParams

TAIL_EXPONENT = 60.0  # exp(-60) ~ 1e-26 of the mass is discarded beyond the radius


@dataclass(frozen=True)
class SsdSpec:
    c6: float
    c4: float
    c3: float = 0.0
    c2: float = 0.0
    q_only: bool = False
    n_q: int = 32
    n_p: int = 32

    def __post_init__(self):
        if min(self.c6, self.c4, self.c2) < 0:
            raise ValidationError("measure coefficients must be >= 0")
        if self.q_only:
            if self.c3 or self.c2:
                raise ValidationError("a q-only measure has no p terms")
        elif not self.c2 > 0:
            raise ValidationError("p^2 coefficient must be > 0")
        if not self.has_q_marginal and self.c3:
            raise ValidationError("q marginal is not normalizable")
        if self.n_q < 1 or self.n_p < 1:
            raise ValidationError("node counts must be >= 1")

    @classmethod
    def for_cell(cls, params: PolymerParams, kind: str = "bulk", site: int = 0,
                 n_q: int = 32, n_p: int = 32) -> "SsdSpec":
        """Cell measure of the given kind ('bulk', 'initial' or 'final').

        An 'initial' cell carries the bulk weight times a Gaussian in an extra
        momentum variable that nothing else touches; it integrates out to a
        constant, so its normalized measure equals the bulk one.
        """
        a = float(params.a_sites[site])
        if kind == "final":
            return cls(c6=a, c4=a * params.mu, q_only=True, n_q=n_q, n_p=1)
        if kind not in ("bulk", "initial"):
            raise ValidationError(f"unknown cell kind {kind!r}")
        return cls(c6=0.5 * a, c4=a * params.mu, c3=a, c2=a * params.B, n_q=n_q, n_p=n_p)

    @property
    def q6_marginal(self) -> float:
        """q^6 coefficient of the q marginal after integrating out p."""
        if self.q_only:
            return self.c6
        return self.c6 - self.c3 ** 2 / (4.0 * self.c2)

    @property
    def has_q_marginal(self) -> bool:
        return self.q6_marginal > 0 or (self.q6_marginal == 0 and self.c4 > 0)

    @property
    def radius(self) -> float:
        """Truncation radius of the q axis."""
        k6, k4 = self.q6_marginal, self.c4
        r = 1.0
        while k6 * r ** 6 + k4 * r ** 4 < TAIL_EXPONENT:
            r *= 1.25
        return r

    def U(self, q, p=0.0):
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        return self.c6 * q ** 6 + self.c3 * q ** 3 * p + self.c2 * p ** 2 + self.c4 * q ** 4

    def with_nodes(self, n_q: int, n_p: int) -> "SsdSpec":
        from dataclasses import replace
        return replace(self, n_q=n_q, n_p=1 if self.q_only else n_p)

    def cloud(self, n_q: int | None = None, n_p: int | None = None):
        """Product-rule nodes (q, p) and weights summing to one."""
        n_q = n_q or self.n_q
        n_p = 1 if self.q_only else (n_p or self.n_p)
        if not self.has_q_marginal:
            raise ValidationError("q marginal is not normalizable")
        qn, qw = _gauss_rule(self.q6_marginal, self.c4, n_q)
        if self.q_only:
            return qn.copy(), np.zeros_like(qn), qw.copy()
        x, hw = hermegauss(n_p)
        hw = hw / hw.sum()
        sigma = 1.0 / math.sqrt(2.0 * self.c2)
        mean = -self.c3 * qn ** 3 / (2.0 * self.c2)
        q = np.repeat(qn, n_p)
        p = (mean[:, None] + sigma * x[None, :]).ravel()
        w = (qw[:, None] * hw[None, :]).ravel()
        return q, p, w


def ssd_weight(q, p, spec: SsdSpec):
    """Unnormalized density exp(-U)."""
    return np.exp(-spec.U(q, p))


def normalization(spec: SsdSpec) -> float:
    """C = integral of exp(-U) dq dp."""
    val, _ = _q_integral(spec, lambda q: np.ones_like(q), 0.0, normalized=False)
    if spec.q_only:
        return val
    return val * math.sqrt(math.pi / spec.c2)


@lru_cache(maxsize=256)
def _gauss_rule(k6: float, k4: float, n: int):
    """Gauss rule of the normalized weight exp(-k6 q^6 - k4 q^4) on the real line."""
    r = 1.0
    while k6 * r ** 6 + k4 * r ** 4 < TAIL_EXPONENT:
        r *= 1.25
    m = max(600, 12 * n)
    x, v = np.polynomial.legendre.leggauss(m)
    x = r * x
    v = r * v * np.exp(-k6 * x ** 6 - k4 * x ** 4)
    v = v / v.sum()
    # Lanczos on diag(x) with start vector sqrt(v), full reorthogonalization
    Q = np.zeros((m, n))
    alpha = np.zeros(n)
    beta = np.zeros(max(n - 1, 0))
    Q[:, 0] = np.sqrt(v)
    for k in range(n):
        w = x * Q[:, k]
        alpha[k] = Q[:, k] @ w
        w = w - Q[:, :k + 1] @ (Q[:, :k + 1].T @ w)
        w = w - Q[:, :k + 1] @ (Q[:, :k + 1].T @ w)
        if k + 1 < n:
            beta[k] = np.linalg.norm(w)
            Q[:, k + 1] = w / beta[k]
    if n == 1:
        return np.array([alpha[0]]), np.array([1.0])
    nodes, vecs = linalg.eigh_tridiagonal(alpha, beta)
    weights = vecs[0, :] ** 2
    return nodes, weights / weights.sum()


def _abs_gauss_moment(beta: float, mean, sigma: float):
    """E|X|^beta for X ~ Normal(mean, sigma^2)."""
    if beta == 0:
        return np.ones_like(mean)
    z = -(np.asarray(mean) ** 2) / (2.0 * sigma ** 2)
    return (sigma ** beta * 2.0 ** (beta / 2.0) * special.gamma((beta + 1.0) / 2.0) / math.sqrt(math.pi)
            * special.hyp1f1(-beta / 2.0, 0.5, z))


def _q_integral(spec: SsdSpec, g, alpha: float, normalized: bool = True, n: int = 256):
    """2 * int_0^R q^alpha g(q) w(q) dq (divided by the same with alpha = 0, g = 1 if normalized).

    Uses q = R u^3 so that q^alpha dq = 3 R^(alpha+1) u^(3 alpha + 2) du is smooth, and
    returns the n-node value with the difference to n/2 nodes as the error estimate.
    """
    R = spec.radius
    k6, k4 = spec.q6_marginal, spec.c4

    def rule(m):
        u, v = np.polynomial.legendre.leggauss(m)
        u = 0.5 * (u + 1.0)
        v = 0.5 * v
        q = R * u ** 3
        jac = 3.0 * R * u ** 2
        base = np.exp(-k6 * q ** 6 - k4 * q ** 4) * jac * v
        num = 2.0 * np.sum(base * q ** alpha * g(q))
        den = 2.0 * np.sum(base)
        return num / den if normalized else num

    hi, lo = rule(n), rule(n // 2)
    return hi, abs(hi - lo)


@dataclass(frozen=True)
class MomentResult:
    value: float
    error: float
    bound: float | None = None


def ssd_moment(alpha: float, beta: float, spec: SsdSpec, constants=None) -> MomentResult:
    """Absolute moment int |q|^alpha |p|^beta dnu.

    The p integral is done in closed form (Gaussian absolute moment given q), the
    q integral by Gauss-Legendre after a smoothing substitution with node doubling.
    ``constants`` (a ``MomentConstants``) adds the Gamma-function ceiling; when
    omitted, the ceiling for a zero dominating polynomial is used.
    """
    if alpha < 0 or beta < 0:
        raise ValidationError("moment orders must be >= 0")
    if spec.q_only and beta > 0:
        return MomentResult(0.0, 0.0, None)
    if not spec.has_q_marginal:
        # pure Gaussian in p: only p moments exist
        if alpha > 0 or spec.c3:
            raise ValidationError("q marginal is not normalizable")
        sigma = 1.0 / math.sqrt(2.0 * spec.c2)
        return MomentResult(float(_abs_gauss_moment(beta, np.zeros(1), sigma)[0]), 0.0, None)
    if spec.q_only:
        g = lambda q: np.ones_like(q)
    else:
        sigma = 1.0 / math.sqrt(2.0 * spec.c2)
        g = lambda q: _abs_gauss_moment(beta, -spec.c3 * q ** 3 / (2.0 * spec.c2), sigma)
    value, err = _q_integral(spec, g, alpha)
    bound = None
    from .certificate import moment_bound, moment_constants
    try:
        consts = constants if constants is not None else moment_constants(spec)
        bound = moment_bound(alpha, beta, consts)
    except ValidationError:
        bound = None
    if err > 1e-9 * max(abs(value), 1e-300) and err > 1e-14:
        raise FloatingPointError(f"moment quadrature did not converge (error {err:.3g})")
    return MomentResult(float(value), float(err), bound)


def signed_moment(i: int, j: int, spec: SsdSpec) -> float:
    """int q^i p^j dnu with the product rule (exact for small i, j)."""
    q, p, w = spec.cloud(max(spec.n_q, (i + 3 * j) // 2 + 2), max(spec.n_p, j // 2 + 2))
    return float(np.sum(w * q ** i * p ** j))


def ell(spec: SsdSpec, component: str) -> float:
    """One-point value l_q or l_p; zero by the q, p -> -q, -p symmetry up to round-off."""
    if component == "q":
        return signed_moment(1, 0, spec)
    if component == "p":
        return 0.0 if spec.q_only else signed_moment(0, 1, spec)
    raise ValidationError("component must be 'q' or 'p'")


def sample(spec: SsdSpec, size: int, rng: np.random.Generator):
    """Exact draws from the cell measure (inverse CDF in q, Gaussian p given q)."""
    R = spec.radius
    grid = np.linspace(-R, R, 20001)
    dens = np.exp(-spec.q6_marginal * grid ** 6 - spec.c4 * grid ** 4)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    q = np.interp(rng.random(size), cdf, grid)
    if spec.q_only:
        return q, np.zeros(size)
    sigma = 1.0 / math.sqrt(2.0 * spec.c2)
    p = -spec.c3 * q ** 3 / (2.0 * spec.c2) + sigma * rng.standard_normal(size)
    return q, p
