"""The six pair terms G^(k)_{xy} coupling two cells.

Each term is a coefficient times a monomial q_x^ax p_x^bx q_y^ay p_y^by. The pair
interaction of an unordered pair {x, y} is

    G_{x,y} = -sum_k (G^(k)_{xy} + G^(k)_{yx}),

both orientations being present in the ordered double sums of the action.
``link_weight`` returns single oriented terms; the overall minus sign is applied
once, in ``pair_matrix``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..chain import ValidationError
from .lattice import Cell, PolymerParams

KINDS = (1, 2, 3, 4, 5, 6)
_MONOMIAL = {1: (1, 0, 0, 1), 2: (1, 0, 1, 0), 3: (1, 0, 1, 0), 4: (3, 0, 1, 0),
             5: (1, 0, 1, 0), 6: (0, 1, 0, 1)}


@dataclass(frozen=True)
class LinkWeight:
    kind: int
    coefficient: float
    exponents: tuple  # (a_x, b_x, a_y, b_y) on (q_x, p_x, q_y, p_y)

    def evaluate(self, qx, px, qy, py):
        ax, bx, ay, by = self.exponents
        return self.coefficient * qx ** ax * px ** bx * qy ** ay * py ** by

    @property
    def uses_p(self) -> bool:
        return bool(self.exponents[1] or self.exponents[3])


def laplacian(t: int, s: int) -> float:
    """Delta(t, s) = -2 delta_ts + delta_|t-s|,1 on the time grid."""
    d = abs(t - s)
    return -2.0 if d == 0 else (1.0 if d == 1 else 0.0)


def link_weight(kind: int, x: Cell, y: Cell, params: PolymerParams) -> LinkWeight:
    """Oriented term G^(k)_{xy} as a coefficient on its monomial.

    Kind 5 also accepts x == y and then returns the stencil center
    2 a lambda^(-2/3) M (1 + 2 c1).
    """
    if kind not in KINDS:
        raise ValidationError(f"invalid link kind {kind}")
    if x == y and kind != 5:
        raise ValidationError("link terms need two distinct cells")
    a = params.a_sites
    J = params.coupling_matrix
    lam = params.lam
    same_time = x.t == y.t
    same_site = x.j == y.j
    coef = 0.0
    if kind in (1, 4):
        if same_time and not same_site:
            coef = a[x.j] * J[x.j, y.j] * lam ** (-1.0 / 3.0)
    elif kind == 2:
        if same_time and not same_site:
            coef = a[x.j] * J[x.j, y.j] * lam ** (-2.0 / 3.0) * params.M
    elif kind == 3:
        if same_time:
            ks = [k for k in range(params.N) if k != x.j and k != y.j]
            coef = lam ** (-2.0 / 3.0) / 4.0 * sum(a[k] * J[x.j, k] * J[k, y.j] for k in ks)
    elif kind == 5:
        if same_site:
            stencil = (1.0 if x.t == y.t else 0.0) - params.c1 * laplacian(x.t, y.t)
            coef = 2.0 * a[x.j] * lam ** (-2.0 / 3.0) * params.M * stencil
    else:
        if same_site and abs(x.t - y.t) == 1:
            coef = -a[x.j] * params.zeta * params.c1
    return LinkWeight(kind, float(coef), _MONOMIAL[kind])


def pair_terms(x: Cell, y: Cell, params: PolymerParams, p_x: bool = True, p_y: bool = True) -> list:
    """Nonzero oriented terms of the unordered pair, with the second orientation swapped to (x, y) order.

    ``p_x``/``p_y`` false marks a cell without a momentum variable (its p terms drop).
    """
    if x == y:
        raise ValidationError("a pair needs two distinct cells")
    out = []
    for k in KINDS:
        for first, second, flip in ((x, y, False), (y, x, True)):
            lw = link_weight(k, first, second, params)
            if lw.coefficient == 0.0:
                continue
            if flip:
                ax, bx, ay, by = lw.exponents
                lw = LinkWeight(k, lw.coefficient, (ay, by, ax, bx))
            ax, bx, ay, by = lw.exponents
            if (bx and not p_x) or (by and not p_y):
                continue
            out.append(lw)
    return out


def pair_matrix(terms: list, cx, cy) -> np.ndarray:
    """G_{x,y} = -sum of the terms, evaluated on two node clouds (q, p, w)."""
    qx, px = cx[0][:, None], cx[1][:, None]
    qy, py = cy[0][None, :], cy[1][None, :]
    G = np.zeros((qx.shape[0], qy.shape[1]))
    for lw in terms:
        G -= lw.evaluate(qx, px, qy, py)
    return G


def pair_value(terms: list, psi_x, psi_y) -> float:
    """G_{x,y} at one configuration psi = (q, p)."""
    return float(-sum(lw.evaluate(psi_x[0], psi_x[1], psi_y[0], psi_y[1]) for lw in terms))
