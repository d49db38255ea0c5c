"""Self-consistent internal bath temperatures.

Interior temperatures are iterated with the damped fixed-point map
T_j <- (1 - eta) T_j + eta <p_j^2>, which is stationary exactly where the
reservoir flux R_j = zeta_j (T_j - <p_j^2>) vanishes.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .chain import ChainParams, ValidationError
from .langevin import ObservableStats, SimConfig, run


class NonConvergence(RuntimeError):
    def __init__(self, message: str, trace: list):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class ScSolveConfig:
    sim: SimConfig
    eta: float = 0.5
    tol: float = 1e-2
    max_outer: int = 20
    min_outer: int = 1
    initial: tuple | None = None

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValidationError("damping eta must lie in (0, 1]")
        if not self.tol > 0:
            raise ValidationError("tol must be > 0")
        if self.max_outer < 1 or self.min_outer < 1:
            raise ValidationError("iteration counts must be >= 1")


@dataclass
class TraceRow:
    iteration: int
    max_residual: float
    median_residual: float
    temps: np.ndarray
    residuals: np.ndarray = field(repr=False)


@dataclass
class ScResult:
    temps: np.ndarray
    stats: ObservableStats
    trace: list
    converged: bool

    def trace_csv(self) -> str:
        return trace_csv(self.trace)


def trace_csv(trace: list) -> str:
    buf = io.StringIO()
    buf.write("# self-consistent temperature iteration; residual R_j = zeta_j (T_j - <p_j^2>) on interior sites\n")
    w = csv.writer(buf, lineterminator="\n")
    n = trace[0].temps.size if trace else 0
    w.writerow(["iteration", "max_abs_R", "median_abs_R"] + [f"T{j + 1}" for j in range(n)])
    for row in trace:
        w.writerow([row.iteration, repr(float(row.max_residual)), repr(float(row.median_residual))]
                   + [repr(float(t)) for t in row.temps])
    return buf.getvalue()


def linear_profile(T1: float, TN: float, N: int) -> np.ndarray:
    return np.linspace(T1, TN, N)


def solve_profile(params: ChainParams, cfg: ScSolveConfig, raise_on_failure: bool = True) -> ScResult:
    """Iterate interior temperatures until max |R_j| <= tol.

    Iteration k uses seed ``cfg.sim.seed + k`` so the whole solve is reproducible.
    """
    N = params.N
    if N < 3:
        raise ValidationError("self-consistent solve needs N >= 3")
    T1, TN = float(params.temps[0]), float(params.temps[-1])
    if cfg.initial is not None:
        temps = np.array(cfg.initial, dtype=float)
        if temps.shape != (N,):
            raise ValidationError("initial profile has the wrong length")
        temps[0], temps[-1] = T1, TN
    else:
        temps = linear_profile(T1, TN, N)
    trace = []
    stats = None
    for k in range(cfg.max_outer):
        current = params.with_temps(temps)
        stats = run(current, replace(cfg.sim, seed=(cfg.sim.seed + k) % 2 ** 64))
        R = stats.reservoir_flux[1:-1]
        absR = np.abs(R)
        trace.append(TraceRow(k, float(absR.max()), float(np.median(absR)), temps.copy(), R.copy()))
        if absR.max() <= cfg.tol and k + 1 >= cfg.min_outer:
            return ScResult(temps, stats, trace, True)
        new = temps.copy()
        new[1:-1] = (1.0 - cfg.eta) * temps[1:-1] + cfg.eta * stats.p2[1:-1]
        if np.any(new <= 0):
            break
        temps = new
    if raise_on_failure:
        raise NonConvergence(f"no self-consistent profile within {cfg.max_outer} iterations "
                             f"(last max|R| = {trace[-1].max_residual:.3g})", trace)
    return ScResult(temps, stats, trace, False)
