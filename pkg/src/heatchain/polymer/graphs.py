"""Graph combinatorics of the cluster expansion."""
from __future__ import annotations

import itertools
import math
from collections import Counter
from functools import lru_cache

import numpy as np

from ..chain import ValidationError

MAX_GRAPH_N = 6
MAX_TREE_N = 8


def _connected(n: int, edges) -> bool:
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    comps = n
    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            comps -= 1
    return comps == 1


def connected_spanning_subgraphs(n: int, edges) -> list:
    """All edge subsets of ``edges`` that connect the vertices 0..n-1."""
    edges = list(edges)
    if n == 1:
        return [()]
    out = []
    for mask in range(1, 1 << len(edges)):
        sub = tuple(e for i, e in enumerate(edges) if mask >> i & 1)
        if len(sub) >= n - 1 and _connected(n, sub):
            out.append(sub)
    return out


@lru_cache(maxsize=None)
def enumerate_connected_graphs(n: int) -> tuple:
    """Connected graphs on {0..n-1}, each a tuple of edges (i < j)."""
    if not 2 <= n <= MAX_GRAPH_N:
        raise ValidationError(f"graph enumeration is capped at 2 <= n <= {MAX_GRAPH_N}")
    return tuple(connected_spanning_subgraphs(n, itertools.combinations(range(n), 2)))


def prufer_decode(seq, n: int) -> tuple:
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    edges = []
    for v in seq:
        leaf = min(i for i in range(n) if degree[i] == 1)
        edges.append((min(leaf, v), max(leaf, v)))
        degree[leaf] -= 1
        degree[v] -= 1
    u, w = [i for i in range(n) if degree[i] == 1]
    edges.append((u, w))
    return tuple(sorted(edges))


@lru_cache(maxsize=None)
def enumerate_trees(n: int) -> tuple:
    """Labeled trees on {0..n-1} from Pruefer sequences."""
    if not 2 <= n <= MAX_TREE_N:
        raise ValidationError(f"tree enumeration is capped at 2 <= n <= {MAX_TREE_N}")
    if n == 2:
        return (((0, 1),),)
    return tuple(prufer_decode(seq, n) for seq in itertools.product(range(n), repeat=n - 2))


def degrees(n: int, edges) -> tuple:
    d = [0] * n
    for u, v in edges:
        d[u] += 1
        d[v] += 1
    return tuple(d)


def degree_profile_counts(n: int) -> Counter:
    """Number of labeled trees per incidence profile (d_1, ..., d_n)."""
    return Counter(degrees(n, t) for t in enumerate_trees(n))


def cayley_profile_count(profile) -> int:
    """(n-2)! / prod (d_i - 1)!."""
    n = len(profile)
    if sum(profile) != 2 * n - 2 or min(profile) < 1:
        return 0
    return math.factorial(n - 2) // math.prod(math.factorial(d - 1) for d in profile)


def spanning_tree_count(n: int, edges) -> int:
    """Kirchhoff's matrix-tree theorem."""
    if n == 1:
        return 1
    L = np.zeros((n, n))
    for u, v in edges:
        L[u, u] += 1
        L[v, v] += 1
        L[u, v] -= 1
        L[v, u] -= 1
    return int(round(np.linalg.det(L[1:, 1:])))


def overlap_graph(polymers) -> tuple:
    """Edges {i, j} with R_i and R_j sharing a cell."""
    sets = [frozenset(R) for R in polymers]
    return tuple((i, j) for i, j in itertools.combinations(range(len(sets)), 2) if sets[i] & sets[j])


@lru_cache(maxsize=None)
def ursell_from_graph(n: int, edges: tuple) -> int:
    """Sum over connected spanning subgraphs f of g of (-1)^|f| (and 1 for n = 1)."""
    if n == 1:
        return 1
    if not _connected(n, edges):
        return 0
    return sum((-1) ** len(f) for f in connected_spanning_subgraphs(n, edges))


MAX_URSELL_N = 5


def ursell(*polymers) -> int:
    """Ursell coefficient phi^T(R_1, ..., R_n)."""
    n = len(polymers)
    if not 1 <= n <= MAX_URSELL_N:
        raise ValidationError(f"ursell is capped at 1 <= n <= {MAX_URSELL_N}")
    edges = overlap_graph(polymers)
    value = ursell_from_graph(n, edges)
    if abs(value) > spanning_tree_count(n, edges):
        raise ArithmeticError("Rota bound violated")
    return value


def is_stable(V_site, V_pair) -> bool:
    """sum_{x in S} V_x + sum_{pairs in S} V_xy >= 0 for every subset S."""
    n = len(V_site)
    for r in range(1, n + 1):
        for S in itertools.combinations(range(n), r):
            tot = sum(V_site[i] for i in S) + sum(V_pair[i][j] for i, j in itertools.combinations(S, 2))
            if tot < 0:
                return False
    return True


def bbf_sides(V_site, V_pair):
    """Both sides of the tree-graph inequality.

    lhs = |sum_{g connected} prod_{xy in g} (exp(-V_xy) - 1)|,
    rhs = exp(sum V_x) sum_{trees} prod |V_xy|.
    """
    n = len(V_site)
    if n == 1:
        return 1.0, math.exp(V_site[0])
    V = np.asarray(V_pair, dtype=float)
    lhs = abs(sum(math.prod(math.expm1(-V[i, j]) for i, j in g) for g in enumerate_connected_graphs(n)))
    rhs = math.exp(float(np.sum(V_site))) * sum(math.prod(abs(V[i, j]) for i, j in t)
                                               for t in enumerate_trees(n))
    return lhs, rhs
