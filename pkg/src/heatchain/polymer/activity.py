"""Polymer activities and the truncated cluster series for log Xi and S_2.

Every multi-cell integral is a contraction over per-cell node clouds: cell weights
are vectors, link factors are matrices on pairs of clouds, and ``numpy.einsum``
contracts the network of one graph. Activities sum over the connected spanning
subgraphs of the polymer's support graph (pairs with a nonzero link term) using
expm1(G), which keeps tiny activities free of cancellation.

Each quantity is computed with a fine and a coarse product rule; their difference
is the reported quadrature error.
"""
from __future__ import annotations

import itertools
import math
import string
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..chain import ValidationError
from . import graphs
from .lattice import Cell, Lattice, PolymerParams
from .links import pair_matrix, pair_terms
from .ssd import SsdSpec, ell, sample

MAX_ACTIVITY_SIZE = 5
FINE = (12, 6)
COARSE = (9, 4)


@dataclass
class SeriesEstimate:
    value: float
    per_order: tuple
    quad_error: float
    truncation_error: float
    n_clusters: int
    breakdown: dict = field(default_factory=dict)

    @property
    def error(self) -> float:
        return self.quad_error + self.truncation_error

    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.per_order)


class PolymerEngine:
    """Cell clouds, link matrices and activities for one lattice and parameter set."""

    def __init__(self, params: PolymerParams, lattice: Lattice, fine=FINE, coarse=COARSE):
        if params.N != lattice.N:
            raise ValidationError("lattice and params disagree on N")
        self.params = params
        self.lattice = lattice
        self.rules = {"fine": tuple(fine), "coarse": tuple(coarse)}
        self.specs = {c: SsdSpec.for_cell(params, lattice.kind(c), c.j) for c in lattice.cells}
        self._clouds = {}
        self._terms = {}
        self._mats = {}

    # -- building blocks
    def spec(self, cell: Cell) -> SsdSpec:
        return self.specs[cell]

    def cloud(self, cell: Cell, rule: str = "fine"):
        key = (cell, rule)
        if key not in self._clouds:
            n_q, n_p = self.rules[rule]
            self._clouds[key] = self.specs[cell].cloud(n_q, n_p)
        return self._clouds[key]

    def terms(self, x: Cell, y: Cell) -> list:
        key = (x, y) if x < y else (y, x)
        if key not in self._terms:
            a, b = key
            self._terms[key] = pair_terms(a, b, self.params, p_x=not self.specs[a].q_only,
                                          p_y=not self.specs[b].q_only)
        ts = self._terms[key]
        if key == (x, y):
            return ts
        from .links import LinkWeight
        return [LinkWeight(t.kind, t.coefficient, (t.exponents[2], t.exponents[3], t.exponents[0], t.exponents[1]))
                for t in ts]

    def linked(self, x: Cell, y: Cell) -> bool:
        return bool(self.terms(x, y))

    def G(self, x: Cell, y: Cell, rule: str = "fine") -> np.ndarray:
        key = (x, y, rule)
        if key not in self._mats:
            self._mats[key] = pair_matrix(self.terms(x, y), self.cloud(x, rule), self.cloud(y, rule))
        return self._mats[key]

    def support_edges(self, R) -> list:
        R = list(R)
        return [(i, k) for i, k in itertools.combinations(range(len(R)), 2) if self.linked(R[i], R[k])]

    def is_connected(self, R) -> bool:
        R = list(R)
        return len(R) == 1 or graphs._connected(len(R), self.support_edges(R))

    def polymers(self, max_size: int) -> list:
        """All cell subsets of size 2..max_size with a connected support graph, canonical order."""
        if max_size > MAX_ACTIVITY_SIZE:
            raise ValidationError(f"polymer size is capped at {MAX_ACTIVITY_SIZE}")
        cells = self.lattice.cells
        out = []
        for r in range(2, max_size + 1):
            for R in itertools.combinations(cells, r):
                if self.is_connected(R):
                    out.append(R)
        return out

    # -- contractions
    def _contract(self, R, edges, vectors, mats) -> float:
        letters = string.ascii_letters
        ops, subs = [], []
        for i in range(len(R)):
            ops.append(vectors[i])
            subs.append(letters[i])
        for i, k in edges:
            ops.append(mats[(i, k)])
            subs.append(letters[i] + letters[k])
        return float(np.einsum(",".join(subs) + "->", *ops, optimize="greedy"))

    def _graph_sum(self, R, vectors, rule, exp_factor=False) -> float:
        edges = self.support_edges(R)
        mats = {}
        for i, k in edges:
            G = self.G(R[i], R[k], rule)
            mats[(i, k)] = np.exp(G) if exp_factor else np.expm1(G)
        if exp_factor:
            return self._contract(R, edges, vectors, mats)
        if len(R) == 1:
            return float(np.sum(vectors[0]))
        total = 0.0
        for g in graphs.connected_spanning_subgraphs(len(R), edges):
            total += self._contract(R, g, vectors, mats)
        return total

    def _vectors(self, R, rule, inserts=()):
        """Cell weight vectors, each insertion (cell, component) multiplying its cell's weights."""
        vecs = []
        for c in R:
            q, p, w = self.cloud(c, rule)
            v = w.copy()
            for cell, comp in inserts:
                if cell == c:
                    v = v * (q if comp == "q" else p)
            vecs.append(v)
        return vecs

    def activity(self, R, rule: str | None = None):
        """rho(R); returns (value, error) or the value for one named rule."""
        R = tuple(sorted(R))
        if len(R) < 2:
            raise ValidationError("partition-function polymers have at least two cells")
        if len(R) > MAX_ACTIVITY_SIZE:
            raise ValidationError(f"polymer size is capped at {MAX_ACTIVITY_SIZE}")
        if len(set(R)) != len(R):
            raise ValidationError("polymer cells must be distinct")
        if rule is not None:
            return self._graph_sum(R, self._vectors(R, rule), rule)
        fine = self._graph_sum(R, self._vectors(R, "fine"), "fine")
        coarse = self._graph_sum(R, self._vectors(R, "coarse"), "coarse")
        return fine, abs(fine - coarse)

    def activity_tilde(self, R, x1: Cell, x2: Cell, obs=("q", "q"), rule: str = "fine") -> np.ndarray:
        """(rho, rho_1, rho_2, rho_12): coefficients of 1, a1, a2, a1 a2 in the modified activity.

        Singletons {x_i} give int [prod_i (1 + a_i psi_i)] dnu - 1.
        """
        R = tuple(sorted(R))
        ins1, ins2 = (x1, obs[0]), (x2, obs[1])
        in1, in2 = x1 in R, x2 in R
        if len(R) == 1:
            c = R[0]
            spec = self.specs[c]
            out = np.zeros(4)
            if in1:
                out[1] = ell(spec, obs[0])
            if in2:
                out[2] = ell(spec, obs[1])
            if in1 and in2:
                q, p, w = self.cloud(c, rule)
                vals = {"q": q, "p": p}
                out[3] = float(np.sum(w * vals[obs[0]] * vals[obs[1]]))
            return out
        out = np.zeros(4)
        out[0] = self._graph_sum(R, self._vectors(R, rule), rule)
        if in1:
            out[1] = self._graph_sum(R, self._vectors(R, rule, (ins1,)), rule)
        if in2:
            out[2] = self._graph_sum(R, self._vectors(R, rule, (ins2,)), rule)
        if in1 and in2:
            out[3] = self._graph_sum(R, self._vectors(R, rule, (ins1, ins2)), rule)
        return out

    def activity_mc(self, R, n_samples: int, seed: int = 0):
        """Importance-sampling estimate of rho(R) from the product measure: (mean, standard error)."""
        R = tuple(sorted(R))
        rng = np.random.default_rng(np.random.SeedSequence([seed, len(R)]))
        draws = {c: sample(self.specs[c], n_samples, rng) for c in R}
        edges = self.support_edges(R)
        f = {}
        for i, k in edges:
            terms = self.terms(R[i], R[k])
            (qx, px), (qy, py) = draws[R[i]], draws[R[k]]
            G = -sum(t.evaluate(qx, px, qy, py) for t in terms)
            f[(i, k)] = np.expm1(G)
        total = np.zeros(n_samples)
        for g in graphs.connected_spanning_subgraphs(len(R), edges):
            prod = np.ones(n_samples)
            for e in g:
                prod = prod * f[e]
            total += prod
        return float(total.mean()), float(total.std(ddof=1) / math.sqrt(n_samples))


# ---------------------------------------------------------------- cluster sums

def _multisets(n_items: int, n: int):
    return itertools.combinations_with_replacement(range(n_items), n)


def _cluster_weight(idx, masks) -> float:
    """phi^T / prod m_i! for a non-decreasing index tuple."""
    n = len(idx)
    edges = tuple((i, k) for i, k in itertools.combinations(range(n), 2) if masks[idx[i]] & masks[idx[k]])
    phi = graphs.ursell_from_graph(n, edges)
    if phi == 0:
        return 0.0
    return phi / math.prod(math.factorial(m) for m in Counter(idx).values())


def log_partition_series(engine: PolymerEngine, max_n: int, max_size: int) -> SeriesEstimate:
    """Truncated sum over clusters of at most ``max_n`` polymers of size <= ``max_size``."""
    if max_n < 1 or max_n > graphs.MAX_URSELL_N:
        raise ValidationError(f"max_n must lie in 1..{graphs.MAX_URSELL_N}")
    polys = engine.polymers(max_size)
    if not polys:
        return SeriesEstimate(0.0, tuple([0.0] * max_n), 0.0, 0.0, 0)
    index = {c: i for i, c in enumerate(engine.lattice.cells)}
    masks = [sum(1 << index[c] for c in R) for R in polys]
    rho = {r: np.array([engine.activity(R, rule=r) for R in polys]) for r in ("fine", "coarse")}
    per = {r: [0.0] * max_n for r in rho}
    count = 0
    for n in range(1, max_n + 1):
        for idx in _multisets(len(polys), n):
            w = _cluster_weight(idx, masks)
            if w == 0.0:
                continue
            count += 1
            for r in rho:
                per[r][n - 1] += w * math.prod(rho[r][i] for i in idx)
    fine, coarse = float(sum(per["fine"])), float(sum(per["coarse"]))
    return SeriesEstimate(fine, tuple(float(v) for v in per["fine"]), abs(fine - coarse),
                          abs(float(per["fine"][-1])), count)


def _alg_mul(a, b):
    """Product in the algebra spanned by 1, a1, a2, a1 a2 (a1^2 = a2^2 = 0)."""
    return np.array([a[0] * b[0], a[0] * b[1] + a[1] * b[0], a[0] * b[2] + a[2] * b[0],
                     a[0] * b[3] + a[1] * b[2] + a[2] * b[1] + a[3] * b[0]])


def _split(vectors):
    """(D2, D1) parts of the a1 a2 coefficient: both insertions in one polymer, or in two."""
    d2 = sum(v[3] * math.prod(u[0] for k, u in enumerate(vectors) if k != i) for i, v in enumerate(vectors))
    d1 = 0.0
    for i, j in itertools.permutations(range(len(vectors)), 2):
        d1 += vectors[i][1] * vectors[j][2] * math.prod(u[0] for k, u in enumerate(vectors) if k not in (i, j))
    return d2, d1


def two_point_series(engine: PolymerEngine, x1: Cell, x2: Cell, obs=("q", "q"), max_n: int = 3,
                     max_size: int = 3) -> SeriesEstimate:
    """Truncated series for the truncated two-point function S_2(x1; x2).

    The a1 a2 coefficient of log Xi~(a1, a2) is extracted exactly: one-body
    polymers {x_i} enter with int prod(1 + a_i psi) dnu - 1, and every activity is
    carried as its 4-vector in (1, a1, a2, a1 a2). ``breakdown`` splits the value
    into the two-insertions-in-one-polymer part (D2) and the one-insertion-each
    part (D1).
    """
    for o in obs:
        if o not in ("q", "p"):
            raise ValidationError("observable must be 'q' or 'p'")
    if max_n < 1 or max_n > graphs.MAX_URSELL_N:
        raise ValidationError(f"max_n must lie in 1..{graphs.MAX_URSELL_N}")
    polys = [(x1,)] + ([(x2,)] if x2 != x1 else []) + engine.polymers(max_size)
    index = {c: i for i, c in enumerate(engine.lattice.cells)}
    masks = [sum(1 << index[c] for c in R) for R in polys]
    has1 = [x1 in R for R in polys]
    has2 = [x2 in R for R in polys]
    vec = {r: [engine.activity_tilde(R, x1, x2, obs, rule=r) for R in polys] for r in ("fine", "coarse")}
    per = {r: [0.0] * max_n for r in vec}
    d1 = d2 = 0.0
    count = 0
    for n in range(1, max_n + 1):
        for idx in _multisets(len(polys), n):
            if not any(has1[i] for i in idx) or not any(has2[i] for i in idx):
                continue
            w = _cluster_weight(idx, masks)
            if w == 0.0:
                continue
            count += 1
            for r in vec:
                acc = np.array([1.0, 0.0, 0.0, 0.0])
                for i in idx:
                    acc = _alg_mul(acc, vec[r][i])
                per[r][n - 1] += w * acc[3]
            a, b = _split([vec["fine"][i] for i in idx])
            d2 += w * a
            d1 += w * b
    fine, coarse = float(sum(per["fine"])), float(sum(per["coarse"]))
    return SeriesEstimate(fine, tuple(float(v) for v in per["fine"]), abs(fine - coarse),
                          abs(float(per["fine"][-1])), count, {"D1": float(d1), "D2": float(d2)})
