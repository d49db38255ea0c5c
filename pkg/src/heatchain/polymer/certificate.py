"""Kotecky-Preiss certificate with explicit constants.

Chain of bounds (all constants are computed, none is left symbolic):

* Young's inequality with row sums gives |sum_{pairs in R} G| <= sum_x P(q_x, p_x)
  with P = P4 q^4 + P2 q^2 + Pp p^2.
* Moment ceiling: int |q|^n |p|^m e^P dnu <= Pref K3^(-(1+n)/6) K4^(-(1+m)/2)
  Gamma((1+n)/6) Gamma((1+m)/2), where
      K1 q^6 + K2 >= (c6 - c3^2/(4 c2)) q^6 + c4 q^4,
      U - P >= K3 q^6 + K4 p^2 + K5,
      Pref = e^(K2 - K5) K1^(1/6) c2^(1/2) / (3 * 2 sqrt(pi) Gamma(7/6)).
* Tree sum: 12 oriented link choices per tree edge, sum_tau prod Gamma(d_k)
  <= (n-2)! 4^(n-1) / 2, and the kernel constant O1, give
      sum_{R ni z, z'} |rho(R)| e^|R| <= c eps(K)^(n-1) F^(2/3)_{zz'},
      eps(K) = 48 e^2 Q O1 K / (K3~ K4~)^2,   c = e Q / 2,
  with Q = Pref K3^(-1/6) K4^(-1/2) K6.
* The certificate passes when eps(K) < 1 and c S eps / (1 - eps) < 1, where
  S = sum_{z != x} F^(2/3)_{xz}; this is the Kotecky-Preiss condition with a = 1.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize, special

from ..chain import ValidationError
from .lattice import Cell, PolymerParams
from .ssd import SsdSpec

C_I_FACTOR = 2.0 * math.sqrt(math.pi) * math.gamma(7.0 / 6.0)


# ---------------------------------------------------------------- moment ceiling

@dataclass(frozen=True)
class MomentConstants:
    K1: float
    K2: float
    K3: float
    K4: float | None
    K5: float
    c2: float | None
    delta1: float
    delta3: float
    s: float | None

    @property
    def prefactor(self) -> float:
        """e^(K2-K5) K1^(1/6) c2^(1/2) / (3 * 2 sqrt(pi) Gamma(7/6)); no p factor for q-only cells."""
        base = math.exp(self.K2 - self.K5) * self.K1 ** (1.0 / 6.0) / (3.0 * C_I_FACTOR)
        if self.c2 is None:
            return base
        return base * math.sqrt(self.c2)


def _best_delta1(k1: float, c: float) -> float:
    """Minimizer of 4c^3/(27 d^2) + log(k1 + d)/6 over d > 0."""
    if c <= 0:
        return 0.0
    g = lambda d: -8.0 * c ** 3 / (27.0 * d ** 3) + 1.0 / (6.0 * (k1 + d))
    hi = 1.0
    while g(hi) < 0:
        hi *= 2.0
    lo = hi
    while g(lo) > 0:
        lo /= 2.0
    return optimize.brentq(g, lo, hi, xtol=1e-300, rtol=1e-14)


def _k5(d3: float, b4: float, P2: float) -> float:
    """min over s = q^2 >= 0 of d3 s^3 + b4 s^2 - P2 s (<= 0)."""
    if P2 <= 0 and b4 >= 0:
        return 0.0
    if d3 <= 0:
        if b4 > 0:
            s = P2 / (2.0 * b4)
            return -P2 * s / 2.0
        return -math.inf
    s = (-2.0 * b4 + math.sqrt(4.0 * b4 ** 2 + 12.0 * d3 * P2)) / (6.0 * d3)
    return min(0.0, d3 * s ** 3 + b4 * s ** 2 - P2 * s)


def _lower(spec: SsdSpec, P, s, d3):
    P4, P2, Pp = P
    if spec.q_only or spec.c3 == 0:
        K3 = spec.c6 - d3
        K4 = None if spec.q_only else spec.c2 - Pp
    else:
        K3 = spec.c6 - spec.c3 / (2.0 * s) - d3
        K4 = spec.c2 - spec.c3 * s / 2.0 - Pp
    K5 = _k5(d3, spec.c4 - P4, P2)
    return K3, K4, K5


def moment_constants(spec: SsdSpec, P=(0.0, 0.0, 0.0), objective=None) -> MomentConstants:
    """Valid K1..K5 for the cell measure and dominating polynomial P = (P4, P2, Pp).

    Free parameters (delta1, Young parameter s, delta3) are chosen to minimize
    ``objective(consts)`` (default: the alpha = beta = 0 ceiling).
    """
    if not spec.has_q_marginal or spec.q6_marginal <= 0:
        raise ValidationError("moment ceiling needs a sextic q marginal")
    k1 = spec.q6_marginal
    d1 = _best_delta1(k1, spec.c4)
    K1 = k1 + d1
    K2 = 4.0 * spec.c4 ** 3 / (27.0 * d1 ** 2) if spec.c4 > 0 else 0.0
    c2 = None if spec.q_only else spec.c2
    if objective is None:
        objective = lambda mc: moment_bound(0.0, 0.0, mc)

    has_s = not (spec.q_only or spec.c3 == 0)
    if has_s:
        s_lo = spec.c3 / (2.0 * spec.c6)
        s_hi = 2.0 * (spec.c2 - P[2]) / spec.c3
        if not s_hi > s_lo:
            raise ValidationError("dominating polynomial too large: no Young split keeps K3, K4 > 0")

    def unpack(z):
        if has_s:
            s = s_lo + (s_hi - s_lo) * special.expit(z[0])
            room = spec.c6 - spec.c3 / (2.0 * s)
        else:
            s = None
            room = spec.c6
        d3 = room * special.expit(z[-1])
        return s, d3

    def build(z):
        s, d3 = unpack(z)
        K3, K4, K5 = _lower(spec, P, s, d3)
        return MomentConstants(K1, K2, K3, K4, K5, c2, d1, d3, s)

    def f(z):
        mc = build(z)
        if mc.K3 <= 0 or (mc.K4 is not None and mc.K4 <= 0) or not math.isfinite(mc.K5):
            return 1e300
        val = objective(mc)
        return math.log(val) if val > 0 and math.isfinite(val) else 1e300

    if not has_s and spec.q_only is False and spec.c2 - P[2] <= 0:
        raise ValidationError("dominating polynomial too large: K4 <= 0")
    starts = [np.array([0.0, -2.0]), np.array([1.0, -4.0]), np.array([-1.0, 0.0])] if has_s \
        else [np.array([-2.0]), np.array([-5.0]), np.array([0.0])]
    best = None
    for z0 in starts:
        res = optimize.minimize(f, z0, method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
        if best is None or res.fun < best.fun:
            best = res
    mc = build(best.x)
    if mc.K3 <= 0 or (mc.K4 is not None and mc.K4 <= 0):
        raise ValidationError("no admissible constants: K3 or K4 not positive")
    return mc


def moment_bound(alpha: float, beta: float, mc: MomentConstants) -> float:
    """Ceiling of int |q|^alpha |p|^beta e^P dnu."""
    val = mc.prefactor * mc.K3 ** (-(1.0 + alpha) / 6.0) * math.gamma((1.0 + alpha) / 6.0)
    if mc.K4 is None:
        return val if beta == 0 else 0.0
    return val * mc.K4 ** (-(1.0 + beta) / 2.0) * math.gamma((1.0 + beta) / 2.0)


# ---------------------------------------------------------------- kernels

def decay_kernel(w: float, x: Cell, y: Cell, p: float) -> float:
    """F^(w)_{xy} = exp(-w |x0 - y0| / eps) [(1 - delta)/|x - y|^p + delta]."""
    if not w > 0:
        raise ValidationError("w must be > 0")
    d = abs(x.j - y.j)
    return math.exp(-w * abs(x.t - y.t)) * (1.0 if d == 0 else d ** (-p))


def _space_weight(d, p):
    d = np.abs(np.asarray(d))
    out = np.ones(d.shape)
    nz = d > 0
    out[nz] = d[nz] ** (-p)
    return out


def time_convolution_constant(w1: float, w2: float, box: int = 400) -> float:
    """sup_D sum_z exp(-w1|z| - w2|z - D|) / exp(-w1 |D|) over the time lattice."""
    if not 0 < w1 < w2:
        raise ValidationError("need 0 < w1 < w2")
    z = np.arange(-4 * box, 4 * box + 1)
    best = 0.0
    for D in range(0, box + 1):
        val = np.sum(np.exp(-w1 * np.abs(z) - w2 * np.abs(z - D) + w1 * D))
        best = max(best, float(val))
    return best


def space_convolution_constant(p: float, box: int = 2000, exclude_ends: bool = False) -> float:
    """sup_d sum_k S(k) S(d - k) / S(d), S(0) = 1, S(k) = |k|^-p.

    With ``exclude_ends`` the k = 0 and k = d terms are dropped and d >= 1 (the
    two-step coupling sum). The supremum is taken over d <= box with the sum over
    |k| <= 8 box plus an integral tail bound.
    """
    K = 8 * box
    k = np.arange(-K, K + 1)
    Sk = _space_weight(k, p)
    # for |k| > K >= 8d, |d - k| >= 7|k|/8, so the dropped terms sum to at most this
    tail = 2.0 * (8.0 / 7.0) ** p * K ** (1.0 - 2.0 * p) / (2.0 * p - 1.0)
    best = 0.0
    for d in range(1 if exclude_ends else 0, box + 1):
        terms = Sk * _space_weight(d - k, p)
        if exclude_ends:
            terms = terms[(k != 0) & (k != d)]
        val = (float(np.sum(terms)) + tail) / float(_space_weight(d, p))
        best = max(best, val)
    return best


def row_sum_constant(p: float, w: float = 1.0) -> float:
    """sum_{y} F^(w)_{xy} over the infinite lattice, y = x included."""
    time = (1.0 + math.exp(-w)) / (1.0 - math.exp(-w))
    return time * (1.0 + 2.0 * special.zeta(p))


def kernel_sum(p: float, w: float) -> float:
    """sum_{z != x} F^(w)_{xz}."""
    return row_sum_constant(p, w) - 1.0


def convolution_check(w1: float, w2: float, p: float, extent: int = 12):
    """Largest ratio sum_{z != x,y} F^(w1)_{xz} F^(w2)_{zy} / F^(w1)_{xy} on a finite box.

    Returns (ratio, constant) where constant = time * space convolution constants;
    ratio <= constant is the inequality being checked.
    """
    cells = [Cell(t, j) for t in range(extent) for j in range(extent)]
    x = Cell(extent // 2, extent // 2)
    worst = 0.0
    for y in cells:
        if y == x:
            continue
        tot = sum(decay_kernel(w1, x, z, p) * decay_kernel(w2, z, y, p) for z in cells if z != x and z != y)
        worst = max(worst, tot / decay_kernel(w1, x, y, p))
    return worst, time_convolution_constant(w1, w2) * space_convolution_constant(p, box=400)


def decay_rate(eps_K: float, zeta: float) -> float:
    """m'(K) = (-log eps(K) + 1/2) / eps with eps = 1/zeta."""
    if not 0 < eps_K < 1:
        raise ValidationError("decay rate needs 0 < eps(K) < 1")
    return zeta * (-math.log(eps_K) + 0.5)


# ---------------------------------------------------------------- certificate

def link_ceilings(params: PolymerParams, O3: float) -> tuple:
    """A_1..A_6: each |A^(s)_xy| <= A_s e^(-|x0-y0|/eps + 1) x (power law or delta)."""
    a, lam, M, J, c1, zeta = params.a, params.lam, params.M, params.J, abs(params.c1), params.zeta
    A1 = a * J * lam ** (-1.0 / 3.0)
    A2 = a * J * lam ** (-2.0 / 3.0) * M
    A3 = a * lam ** (-2.0 / 3.0) / 4.0 * J * J * O3
    A4 = a * J * lam ** (-1.0 / 3.0)
    A5 = 2.0 * a * lam ** (-2.0 / 3.0) * M * (1.0 + 3.0 * c1)
    A6 = a * zeta * c1
    return (A1, A2, A3, A4, A5, A6)


def dominating_polynomial(params: PolymerParams) -> tuple:
    """(P4, P2, Pp) with |sum_{pairs in R} G| <= sum_{x in R} P(q_x, p_x)."""
    a, lam, M, c1, zeta = params.a, params.lam, params.M, abs(params.c1), params.zeta
    JM = params.J_M
    R1 = a * lam ** (-1.0 / 3.0) * JM
    R2 = a * lam ** (-2.0 / 3.0) * M * JM
    R3 = a * lam ** (-2.0 / 3.0) * JM ** 2 / 4.0
    R4 = a * lam ** (-1.0 / 3.0) * JM
    P4 = R4
    P2 = R1 / 2.0 + R2 + R3 + 4.0 * a * lam ** (-2.0 / 3.0) * M * c1
    Pp = R1 / 2.0 + 2.0 * a * zeta * c1
    return (P4, P2, Pp)


def gamma_ratio_constant(d_max: int = 80) -> float:
    """K6 = sup_{d >= 1, n <= 3d, m <= d} Gamma((1+n)/6) Gamma((1+m)/2) / Gamma(d)."""
    best = 0.0
    for d in range(1, d_max + 1):
        gn = max(special.gamma((1.0 + n) / 6.0) for n in range(0, 3 * d + 1))
        gm = max(special.gamma((1.0 + m) / 2.0) for m in range(0, d + 1))
        best = max(best, gn * gm / special.gamma(d))
    return float(best)


@dataclass
class Certificate:
    params: dict
    A: tuple
    K: float
    P: tuple
    moments: MomentConstants
    K6: float
    K3t: float
    K4t: float
    O1: float
    O3: float
    S23: float
    Q: float
    eps_K: float
    c: float
    kp_sum: float
    passed: bool
    reason: str
    hypotheses: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        """1 - (left side of the Kotecky-Preiss condition); positive iff passed."""
        return 1.0 - self.kp_sum

    def rows(self) -> list:
        m = self.moments
        rows = [("A%d" % (i + 1), v, "link ceiling of kind %d" % (i + 1)) for i, v in enumerate(self.A)]
        rows += [
            ("K", self.K, "max A_s"),
            ("P4", self.P[0], "q^4 coefficient of the dominating polynomial"),
            ("P2", self.P[1], "q^2 coefficient of the dominating polynomial"),
            ("Pp", self.P[2], "p^2 coefficient of the dominating polynomial"),
            ("K1", m.K1, "K1 q^6 + K2 >= (a/2 - a/(4B)) q^6 + a lam^-1/3 M q^4"),
            ("K2", m.K2, "same inequality, constant term"),
            ("K3", m.K3, "U - P >= K3 q^6 + K4 p^2 + K5"),
            ("K4", m.K4, "same inequality, p^2 term"),
            ("K5", m.K5, "same inequality, constant term"),
            ("K6", self.K6, "Gamma((1+n)/6) Gamma((1+m)/2) <= K6 Gamma(d), n <= 3d, m <= d"),
            ("K3~", self.K3t, "min(1, sqrt(K3))"),
            ("K4~", self.K4t, "min(1, sqrt(K4))"),
            ("O1", self.O1, "max(row sum of F^(1), convolution constant F^(2/3) * F^(1))"),
            ("O3", self.O3, "two-step coupling sum constant"),
            ("S", self.S23, "sum_{z != x} F^(2/3)_{xz}"),
            ("Q", self.Q, "single-cell moment factor"),
            ("eps(K)", self.eps_K, "48 e^2 Q O1 K / (K3~ K4~)^2"),
            ("c", self.c, "e Q / 2"),
            ("kp_sum", self.kp_sum, "c S eps / (1 - eps); condition is < 1"),
        ]
        return [(name, float(v), note) for name, v, note in rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# convergence certificate; pass={self.passed}; reason={self.reason}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "value", "definition"])
        for name, val, desc in self.rows():
            w.writerow([name, repr(float(val)) if val is not None else "", desc])
        for k, v in self.params.items():
            w.writerow([f"param:{k}", repr(v), "input"])
        for k, v in self.hypotheses.items():
            w.writerow([f"check:{k}", str(v), "moment-ceiling hypothesis"])
        return buf.getvalue()

    def report(self) -> str:
        lines = [f"certificate: {'PASS' if self.passed else 'FAIL'} ({self.reason})"]
        for name, val, desc in self.rows():
            lines.append(f"  {name:8s} = {val!r:>24}   {desc}")
        for k, v in self.hypotheses.items():
            lines.append(f"  {k}: {v}")
        return "\n".join(lines)


_K6 = None


def kp_check(params: PolymerParams) -> Certificate:
    """Compute every constant of the convergence certificate for ``params``."""
    global _K6
    alpha = params.zeta / 2.0
    if not params.M > alpha ** 2:
        raise ValidationError("certificate requires strong pinning M > (zeta/2)^2")
    O3 = space_convolution_constant(params.p, box=400, exclude_ends=True)
    A = link_ceilings(params, O3)
    K = max(A)
    P = dominating_polynomial(params)
    if _K6 is None:
        _K6 = gamma_ratio_constant()
    K6 = _K6
    O_row = row_sum_constant(params.p, 1.0)
    O_conv = time_convolution_constant(2.0 / 3.0, 1.0) * space_convolution_constant(params.p, box=400)
    O1 = max(O_row, O_conv)
    S23 = kernel_sum(params.p, 2.0 / 3.0)
    spec = SsdSpec.for_cell(params.replace(T=params.T_min), "bulk")
    a = params.a
    hyp = {"C1 < a/6": P[0] < a / 6.0, "C2 < a/4": (P[2] - 2.0 * a * params.zeta * abs(params.c1)) < a / 4.0}
    info = {k: (v if v is None or isinstance(v, tuple) else float(v)) for k, v in asdict(params).items()}

    def eps_of(mc: MomentConstants):
        K3t = min(1.0, math.sqrt(mc.K3))
        K4t = min(1.0, math.sqrt(mc.K4))
        Q = mc.prefactor * mc.K3 ** (-1.0 / 6.0) * mc.K4 ** (-0.5) * K6
        return 48.0 * math.e ** 2 * Q * O1 * K / (K3t * K4t) ** 2, Q, K3t, K4t

    try:
        mc = moment_constants(spec, P, objective=lambda m: eps_of(m)[0])
    except ValidationError as exc:
        nan = float("nan")
        dummy = MomentConstants(nan, nan, nan, nan, nan, spec.c2, nan, nan, nan)
        return Certificate(info, A, K, P, dummy, K6, nan, nan, O1, O3, S23, nan, math.inf, nan,
                           math.inf, False, f"moment ceiling hypothesis violated: {exc}", hyp)
    eps_K, Q, K3t, K4t = eps_of(mc)
    c = math.e * Q / 2.0
    if eps_K < 1:
        kp = c * S23 * eps_K / (1.0 - eps_K)
        passed = kp < 1.0
        reason = "Kotecky-Preiss condition holds" if passed else "c S eps/(1-eps) >= 1"
    else:
        kp = math.inf
        passed = False
        reason = "eps(K) >= 1"
    return Certificate(info, A, K, P, mc, K6, K3t, K4t, O1, O3, S23, Q, eps_K, c, kp, passed, reason, hyp)
