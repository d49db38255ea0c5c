"""Brute-force ground truth for the polymer engine on lattices of at most three cells.

Xi and the two-point function are tensor-product quadratures of prod e^{G_xy}
over the cell clouds, with no cluster decomposition. The product is expanded as
prod (1 + f_xy) over *all* edge subsets, connected or not, so that Xi - 1 is
obtained without cancelling against the leading 1. Errors come from node
doubling. Four-cell lattices fall back to importance sampling from the product
of single-cell measures.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .chain import ValidationError
from .polymer.activity import PolymerEngine
from .polymer.lattice import Cell, Lattice, PolymerParams
from .polymer.ssd import sample

MAX_CELLS = 3
MAX_MC_CELLS = 4
BASE_RULE = (12, 6)


@dataclass
class OracleValue:
    value: float
    error: float
    method: str = "quadrature"


def _engine(lattice: Lattice, params: PolymerParams, rule) -> PolymerEngine:
    n_q, n_p = rule
    return PolymerEngine(params, lattice, fine=rule, coarse=(max(n_q // 2, 1), max(n_p // 2, 1)))


def _check(lattice: Lattice, cap: int = MAX_CELLS):
    if len(lattice) > cap:
        raise ValidationError(f"oracle is capped at {cap} cells ({2 * cap} integration dimensions)")


def _moments(engine: PolymerEngine, inserts=(), min_edges: int = 0) -> float:
    """sum over edge subsets g (|g| >= min_edges) of int prod_inserts psi prod_{e in g} f_e."""
    cells = engine.lattice.cells
    vecs = engine._vectors(cells, "fine", inserts)
    edges = engine.support_edges(cells)
    mats = {(i, k): np.expm1(engine.G(cells[i], cells[k], "fine")) for i, k in edges}
    total = 0.0
    for r in range(min_edges, len(edges) + 1):
        for g in itertools.combinations(edges, r):
            total += engine._contract(cells, g, vecs, mats)
    return total


def _partition(engine: PolymerEngine) -> float:
    """Xi - 1 at the engine's fine rule: all nonempty edge subsets."""
    return _moments(engine, min_edges=1)


def direct_partition(lattice: Lattice, params: PolymerParams, rule=BASE_RULE) -> OracleValue:
    """Xi - 1 of the normalized lattice measure; Xi itself is 1 + value."""
    _check(lattice)
    lo = _partition(_engine(lattice, params, rule))
    hi = _partition(_engine(lattice, params, (2 * rule[0], 2 * rule[1])))
    return OracleValue(float(hi), float(abs(hi - lo)))


def direct_log_partition(lattice: Lattice, params: PolymerParams, rule=BASE_RULE) -> OracleValue:
    xi = direct_partition(lattice, params, rule)
    return OracleValue(math.log1p(xi.value), xi.error / (1.0 + xi.value))


def _two_point(engine: PolymerEngine, x1: Cell, x2: Cell, obs) -> float:
    cells = engine.lattice.cells
    for x in (x1, x2):
        if x not in cells:
            raise ValidationError(f"{x} is not a lattice cell")
    xi = _moments(engine)
    n12 = _moments(engine, ((x1, obs[0]), (x2, obs[1])))
    n1 = _moments(engine, ((x1, obs[0]),))
    n2 = _moments(engine, ((x2, obs[1]),))
    return n12 / xi - (n1 / xi) * (n2 / xi)


def direct_two_point(x1: Cell, x2: Cell, lattice: Lattice, params: PolymerParams, obs=("q", "q"),
                     rule=BASE_RULE) -> OracleValue:
    """Truncated <psi_x1 psi_x2> under prod dnu prod e^G / Xi."""
    _check(lattice)
    for o in obs:
        if o not in ("q", "p"):
            raise ValidationError("observable must be 'q' or 'p'")
    lo = _two_point(_engine(lattice, params, rule), x1, x2, obs)
    hi = _two_point(_engine(lattice, params, (2 * rule[0], 2 * rule[1])), x1, x2, obs)
    return OracleValue(float(hi), float(abs(hi - lo)))


def mc_two_point(x1: Cell, x2: Cell, lattice: Lattice, params: PolymerParams, obs=("q", "q"),
                 n_samples: int = 200_000, seed: int = 0) -> OracleValue:
    """Importance-sampling estimate from the product measure, error = one standard error (delta method)."""
    _check(lattice, MAX_MC_CELLS)
    eng = PolymerEngine(params, lattice)
    cells = lattice.cells
    rng = np.random.default_rng(seed)
    draws = {c: sample(eng.specs[c], n_samples, rng) for c in cells}
    G = np.zeros(n_samples)
    for i, k in eng.support_edges(cells):
        (qx, px), (qy, py) = draws[cells[i]], draws[cells[k]]
        G -= sum(t.evaluate(qx, px, qy, py) for t in eng.terms(cells[i], cells[k]))
    w = np.exp(G)
    comp = {"q": 0, "p": 1}
    a = draws[x1][comp[obs[0]]]
    b = draws[x2][comp[obs[1]]]
    W = w.mean()
    ea, eb, eab = (w * a).mean() / W, (w * b).mean() / W, (w * a * b).mean() / W
    value = eab - ea * eb
    # influence function of the ratio estimator
    infl = (w * (a * b - eab) - eb * w * (a - ea) - ea * w * (b - eb)) / W
    return OracleValue(float(value), float(infl.std(ddof=1) / math.sqrt(n_samples)), "monte-carlo")


@dataclass
class Comparison:
    label: str
    engine: float
    engine_error: float
    oracle: float
    oracle_error: float
    rel_tol: float = 1e-4

    @property
    def combined_error(self) -> float:
        return self.engine_error + self.oracle_error

    @property
    def discrepancy(self) -> float:
        return abs(self.engine - self.oracle)

    @property
    def passed(self) -> bool:
        scale = max(abs(self.oracle), abs(self.engine))
        return self.discrepancy <= self.rel_tol * scale + self.combined_error


def comparison_csv(rows) -> str:
    buf = io.StringIO()
    buf.write("# engine vs oracle\n")
    w = csv.writer(buf)
    w.writerow(["label", "engine", "engine_error", "oracle", "oracle_error", "combined_error", "pass"])
    for r in rows:
        vals = (r.engine, r.engine_error, r.oracle, r.oracle_error, r.combined_error)
        w.writerow([r.label, *(repr(float(v)) for v in vals), int(r.passed)])
    return buf.getvalue()
