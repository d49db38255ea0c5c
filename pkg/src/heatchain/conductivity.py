"""Perturbative heat flux, the Fourier-law profile it implies, and simulation sweeps of K(T)."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

from .chain import ChainParams, ValidationError
from .langevin import SimConfig
from .selfconsistent import ScSolveConfig, solve_profile

ALPHA = 4.0 / 3.0
BOND_RULES = ("trapezoid", "left")


def perturbative_flux(T_j: float, T_next: float, J: float, lam: float, c_eps: float) -> float:
    """Leading-order current from site j to j+1 for a small temperature difference."""
    if T_j <= 0 or lam <= 0:
        raise ValidationError("T_j and lambda must be > 0")
    return -c_eps * J ** 2 * lam ** (-ALPHA) * T_j ** (-ALPHA) * (T_next - T_j)


def resistance_constant(J: float, lam: float, c_eps: float) -> float:
    """The constant C with F C T^alpha = T_j - T_{j+1}, i.e. 1/C = c J^2 / lambda^(4/3)."""
    if J == 0 or c_eps <= 0:
        raise ValidationError("need J != 0 and c_eps > 0")
    return lam ** ALPHA / (c_eps * J ** 2)


@dataclass
class ProfileResult:
    F: float
    profile: np.ndarray
    K: float
    C: float
    ok: bool = True
    message: str = ""

    def flux_residuals(self, rule: str = "trapezoid") -> np.ndarray:
        """Relative residuals of the N-1 bond equations F C m_j = T_j - T_{j+1}."""
        T = self.profile
        m = _bond_mean(T[:-1], T[1:], rule)
        lhs = self.F * self.C * m
        rhs = T[:-1] - T[1:]
        scale = np.maximum(np.abs(rhs), np.abs(lhs))
        return np.where(scale > 0, np.abs(lhs - rhs) / np.where(scale > 0, scale, 1.0), 0.0)


def _bond_mean(a, b, rule):
    if rule == "left":
        return np.asarray(a) ** ALPHA
    return 0.5 * (np.asarray(a) ** ALPHA + np.asarray(b) ** ALPHA)


def _march(F: float, C: float, T1: float, N: int, rule: str) -> np.ndarray:
    T = np.empty(N)
    T[0] = T1
    for j in range(N - 1):
        t = T[j]
        if rule == "left":
            T[j + 1] = t - F * C * t ** ALPHA
        else:
            # T' + (FC/2) T'^a = t - (FC/2) t^a, monotone in T'
            rhs = t - 0.5 * F * C * t ** ALPHA
            g = lambda x: x + 0.5 * F * C * max(x, 0.0) ** ALPHA - rhs
            lo, hi = min(rhs, 0.0) - 1.0, max(rhs, 0.0) + 1.0
            T[j + 1] = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=1e-15)
        if not T[j + 1] > 0:
            T[j + 1:] = np.nan
            break
    return T


def conductivity_profile(T1: float, TN: float, N: int, J: float, lam: float, c_eps: float,
                         rule: str = "trapezoid") -> ProfileResult:
    """Solve F C m_j = T_j - T_{j+1}, j = 1..N-1, for F and the interior profile.

    m_j is the bond's T^(4/3): the left value T_j^(4/3) (``rule='left'``, the
    literal perturbative formula) or the mean of both ends (``'trapezoid'``,
    the default, which makes K independent of the chain's orientation). The two
    agree to first order in the gradient.
    """
    if N < 2:
        raise ValidationError("N must be >= 2")
    if T1 <= 0 or TN <= 0:
        raise ValidationError("temperatures must be > 0")
    if rule not in BOND_RULES:
        raise ValidationError(f"rule must be one of {BOND_RULES}")
    C = resistance_constant(J, lam, c_eps)
    if T1 == TN:
        prof = np.full(N, float(T1))
        return ProfileResult(0.0, prof, (N - 1) / float(np.sum(C * _bond_mean(prof[:-1], prof[1:], rule))), C)

    def miss(F):
        T = _march(F, C, T1, N, rule)
        return (T[-1] if np.isfinite(T[-1]) else -1e300) - TN

    # any flux with |F| C min(T)^a > |T1 - TN| overshoots; bracket from the linear estimate
    F0 = (T1 - TN) / ((N - 1) * C * max(T1, TN) ** ALPHA)
    lo, hi = (0.0, F0) if F0 > 0 else (F0, 0.0)
    for _ in range(200):
        if miss(lo) * miss(hi) <= 0:
            break
        if F0 > 0:
            hi *= 2.0
        else:
            lo *= 2.0
    else:
        return ProfileResult(math.nan, np.full(N, math.nan), math.nan, C, False, "flux bracket not found")
    try:
        F = optimize.brentq(miss, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
    except (RuntimeError, ValueError) as exc:
        return ProfileResult(math.nan, np.full(N, math.nan), math.nan, C, False, str(exc))
    T = _march(F, C, T1, N, rule)
    T[-1] = TN
    if not np.all(np.isfinite(T)) or np.any(T <= 0):
        return ProfileResult(F, T, math.nan, C, False, "profile left the positive range")
    K = (N - 1) / float(np.sum(C * _bond_mean(T[:-1], T[1:], rule)))
    res = ProfileResult(F, T, K, C)
    if abs(F - K * (T1 - TN) / (N - 1)) > 1e-10 * abs(F):
        res.ok, res.message = False, "F and K disagree"
    return res


def calibrate_c(K: float, T: float, J: float, lam: float) -> float:
    """c(eps) from one measured conductivity, using K = c J^2 / (lambda T)^(4/3)."""
    if K <= 0 or T <= 0:
        raise ValidationError("need K > 0 and T > 0")
    return K * (lam * T) ** ALPHA / J ** 2


# ---------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepConfig:
    N: int = 16
    M: float = 2.0
    J: float = 1.0
    lam: float = 1.0
    zeta: float = 0.01
    zeta_boundary: float = 0.5
    rel_gradient: float = 0.25
    dt0: float = 0.02
    n_steps: int = 30_000_000
    burn_in: int = 50_000
    iterations: int = 3
    seed: int = 7

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class SweepPoint:
    T: float
    lam: float
    J: float
    N: int
    flux: float
    flux_err: float
    K: float
    K_err: float
    seed: int
    config_hash: str
    residual: float = math.nan


@dataclass
class FitResult:
    slope: float
    ci: tuple
    intercept: float
    n_points: int

    def report(self) -> str:
        return (f"K ~ T^slope: slope = {self.slope:.4f}, 95% CI [{self.ci[0]:.4f}, {self.ci[1]:.4f}] "
                f"from {self.n_points} points")


@dataclass
class SweepResult:
    points: list
    config: SweepConfig | None = None
    fit: FitResult | None = field(default=None)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# conductivity sweep, config {self.config.digest() if self.config else 'n/a'}\n")
        w = csv.writer(buf)
        w.writerow(["T", "lambda", "J", "N", "flux", "flux_err", "K", "K_err", "seed"])
        for p in self.points:
            w.writerow([repr(p.T), repr(p.lam), repr(p.J), p.N, repr(p.flux), repr(p.flux_err),
                        repr(p.K), repr(p.K_err), p.seed])
        return buf.getvalue()


def measure_point(T: float, cfg: SweepConfig, seed: int) -> SweepPoint:
    """Self-consistent run at mean temperature T; K from the bulk flux over the bulk gradient."""
    N = cfg.N
    zeta = np.full(N, cfg.zeta)
    zeta[0] = zeta[-1] = cfg.zeta_boundary
    temps = np.linspace((1 + cfg.rel_gradient) * T, (1 - cfg.rel_gradient) * T, N)
    params = ChainParams.uniform(N=N, M=cfg.M, lam=cfg.lam, zeta=zeta, temps=temps, J=cfg.J, range=1)
    # the quartic stiffness grows like sqrt(lambda T); shrink the step accordingly
    sim = SimConfig(dt=cfg.dt0 / (cfg.lam * T) ** 0.25, n_steps=cfg.n_steps, burn_in=cfg.burn_in,
                    scheme="splitting", seed=seed)
    sc = ScSolveConfig(sim=sim, eta=1.0, tol=math.inf, max_outer=cfg.iterations, min_outer=cfg.iterations)
    res = solve_profile(params, sc, raise_on_failure=False)
    s = res.stats
    F = float(s.bond_flux.mean())
    F_err = float(math.sqrt(np.mean(s.bond_flux_err ** 2) / (N - 1)))
    j = np.arange(1, N - 1, dtype=float)
    Tk, Te = s.p2[1:-1], s.p2_err[1:-1]
    coef, cov = np.polyfit(j, Tk, 1, w=1.0 / Te, cov="unscaled")
    g, g_err = float(coef[0]), float(math.sqrt(cov[0, 0]))
    K = -F / g
    K_err = abs(K) * math.hypot(F_err / F, g_err / g)
    return SweepPoint(T, cfg.lam, cfg.J, N, F, F_err, K, K_err, seed, cfg.digest(), res.trace[-1].max_residual)


def _measure(args):
    return measure_point(*args)


def run_sweep(Ts, cfg: SweepConfig, workers: int = 1) -> SweepResult:
    """One point per temperature, seeded cfg.seed + 1000 k; order of results follows Ts."""
    jobs = [(float(T), cfg, cfg.seed + 1000 * k) for k, T in enumerate(Ts)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            points = list(ex.map(_measure, jobs))
    else:
        points = [_measure(j) for j in jobs]
    out = SweepResult(points, cfg)
    if len(points) >= 4:
        out.fit = fit_exponent(out)
    return out


def fit_exponent(sweep: SweepResult, n_boot: int = 2000, seed: int = 0) -> FitResult:
    """Weighted least squares of log K on log T with a parametric bootstrap CI."""
    pts = sweep.points
    if len(pts) < 4:
        raise ValidationError("need at least 4 temperature points")
    T = np.array([p.T for p in pts], dtype=float)
    K = np.array([p.K for p in pts], dtype=float)
    Ke = np.array([p.K_err for p in pts], dtype=float)
    if T.max() / T.min() < 4.0:
        raise ValidationError("temperatures must span at least a factor of 4")
    if np.any(K <= 0):
        raise ValidationError("conductivities must be > 0 for a log fit")
    x, y = np.log(T), np.log(K)
    sig = np.where(Ke > 0, Ke / K, 1.0)
    slope, intercept = np.polyfit(x, y, 1, w=1.0 / sig)
    if not np.any(Ke > 0):
        return FitResult(float(slope), (float(slope), float(slope)), float(intercept), len(pts))
    rng = np.random.default_rng(seed)
    boot = np.empty(n_boot)
    for b in range(n_boot):
        yb = y + sig * rng.standard_normal(len(y))
        boot[b] = np.polyfit(x, yb, 1, w=1.0 / sig)[0]
    lo, hi = np.percentile(boot, [2.5, 97.5])
    return FitResult(float(slope), (float(lo), float(hi)), float(intercept), len(pts))


def perturbative_sweep(Ts, cfg: SweepConfig, c_eps: float) -> SweepResult:
    """The sweep the perturbative formula predicts, with zero error bars."""
    pts = []
    for T in Ts:
        T1, TN = (1 + cfg.rel_gradient) * T, (1 - cfg.rel_gradient) * T
        pr = conductivity_profile(T1, TN, cfg.N, cfg.J, cfg.lam, c_eps)
        pts.append(SweepPoint(float(T), cfg.lam, cfg.J, cfg.N, pr.F, 0.0, pr.K, 0.0, cfg.seed, cfg.digest()))
    return SweepResult(pts, cfg)
