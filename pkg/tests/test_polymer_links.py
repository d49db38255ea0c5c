import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heatchain.chain import ValidationError
from heatchain.polymer import Cell, PolymerParams, link_weight, pair_terms
from heatchain.polymer.links import KINDS, laplacian, pair_matrix, pair_value

P = PolymerParams(N=4, zeta=10.0, M=75.0, lam=1e12, J=0.1, c1=0.01)


def test_deltas():
    assert link_weight(1, Cell(1, 0), Cell(2, 1), P).coefficient == 0.0
    assert link_weight(6, Cell(1, 0), Cell(2, 1), P).coefficient == 0.0
    assert link_weight(6, Cell(1, 0), Cell(2, 0), P).coefficient != 0.0


def test_kind5_stencil_center():
    # delta - c1 Delta with Delta(t, t) = -2
    lw = link_weight(5, Cell(1, 0), Cell(1, 0), P)
    assert lw.coefficient == pytest.approx(2 * P.a * P.lam ** (-2 / 3) * P.M * (1 + 2 * P.c1))
    nb = link_weight(5, Cell(1, 0), Cell(2, 0), P)
    assert nb.coefficient == pytest.approx(-2 * P.a * P.lam ** (-2 / 3) * P.M * P.c1)


def test_laplacian():
    assert laplacian(3, 3) == -2 and laplacian(3, 4) == 1 and laplacian(3, 5) == 0


def test_monomials():
    x, y = Cell(1, 0), Cell(1, 1)
    assert link_weight(1, x, y, P).exponents == (1, 0, 0, 1)
    assert link_weight(4, x, y, P).exponents == (3, 0, 1, 0)
    assert link_weight(6, x, Cell(2, 0), P).uses_p
    with pytest.raises(ValidationError):
        link_weight(7, x, y, P)
    with pytest.raises(ValidationError):
        link_weight(1, x, x, P)


def test_lambda_scaling_of_coefficients():
    P4 = P.replace(lam=4 * P.lam)
    x, y = Cell(1, 0), Cell(1, 1)
    for k, power in ((1, -1 / 3), (4, -1 / 3), (2, -2 / 3), (3, -2 / 3)):
        a, b = link_weight(k, x, Cell(1, 2) if k == 3 else y, P), link_weight(k, x, Cell(1, 2) if k == 3 else y, P4)
        assert b.coefficient == pytest.approx(a.coefficient * 4 ** power, rel=1e-12)
    z = Cell(2, 0)
    assert link_weight(5, x, z, P4).coefficient == pytest.approx(link_weight(5, x, z, P).coefficient * 4 ** (-2 / 3))


@given(st.integers(1, 6), st.integers(0, 3), st.integers(1, 6), st.integers(0, 3))
def test_support_is_local_in_time(t1, j1, t2, j2):
    x, y = Cell(t1, j1), Cell(t2, j2)
    if x == y:
        return
    coefs = [link_weight(k, x, y, P).coefficient for k in KINDS]
    if abs(t1 - t2) > 1:
        assert all(c == 0 for c in coefs)


def test_pair_terms_both_orientations():
    x, y = Cell(1, 0), Cell(1, 2)
    terms = pair_terms(x, y, P)
    kinds = sorted(t.kind for t in terms)
    assert kinds.count(1) == 2 and kinds.count(4) == 2
    # swapped orientation is expressed on (x, y) variables
    swapped = [t for t in terms if t.kind == 4 and t.exponents == (1, 0, 3, 0)]
    assert len(swapped) == 1
    with pytest.raises(ValidationError):
        pair_terms(x, x, P)


def test_pair_value_symmetric_in_cells():
    rng = np.random.default_rng(0)
    for x, y in itertools.combinations([Cell(1, 0), Cell(1, 1), Cell(2, 0), Cell(2, 3)], 2):
        psi_x, psi_y = rng.normal(size=2), rng.normal(size=2)
        a = pair_value(pair_terms(x, y, P), psi_x, psi_y)
        b = pair_value(pair_terms(y, x, P), psi_y, psi_x)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-300)


def test_q_only_cells_drop_p_terms():
    x, y = Cell(1, 0), Cell(2, 0)
    assert any(t.uses_p for t in pair_terms(x, y, P))
    assert not any(t.uses_p for t in pair_terms(x, y, P, p_y=False))


def test_pair_matrix_sign():
    x, y = Cell(1, 0), Cell(1, 1)
    terms = pair_terms(x, y, P)
    cx = (np.array([1.0]), np.array([0.5]), np.array([1.0]))
    cy = (np.array([-0.3]), np.array([2.0]), np.array([1.0]))
    G = pair_matrix(terms, cx, cy)
    assert G[0, 0] == pytest.approx(-sum(t.evaluate(1.0, 0.5, -0.3, 2.0) for t in terms))
