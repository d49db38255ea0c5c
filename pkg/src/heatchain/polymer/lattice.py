"""Space-time cells of the discrete-time representation and the model constants.

A cell x = (t, j) stands for time x0 = t * eps (t = 1..n_times) and site j (0-based).
The time step is eps = 1 / zeta throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..chain import Coupling, ValidationError, build_coupling


@dataclass(frozen=True, order=True)
class Cell:
    t: int
    j: int


@dataclass(frozen=True)
class PolymerParams:
    """Physical constants entering the single-cell measure and the link terms.

    ``T`` may be a scalar or one temperature per site; gamma_x = 2 zeta T_x.
    ``c1`` is the temporal Laplacian weight of the simplified covariance.
    """

    N: int
    zeta: float
    M: float
    lam: float
    J: float
    T: float | tuple = 1.0
    p: float = 2.0
    c1: float = 0.0
    range: int | None = None

    def __post_init__(self):
        if self.N < 1:
            raise ValidationError("N must be >= 1")
        if not self.zeta > 0:
            raise ValidationError("zeta must be > 0")
        if not self.M > 0:
            raise ValidationError("M must be > 0")
        if not self.lam > 0:
            raise ValidationError("the cell scaling needs lambda > 0")
        if self.J < 0:
            raise ValidationError("J must be >= 0")
        temps = np.atleast_1d(np.asarray(self.T, dtype=float))
        if temps.size not in (1, self.N) or np.any(temps <= 0):
            raise ValidationError("T must be positive, scalar or one per site")
        Coupling(J=self.J, p=self.p, range=self.range)
        if self.B <= 0.5:
            raise ValidationError("single-cell measure not normalizable: need M + 2 zeta c1 > 1/2")

    @classmethod
    def strong_pinning(cls, N: int, zeta: float, lam: float, J: float, **kw) -> "PolymerParams":
        """M = 3 alpha^2 with alpha = zeta / 2."""
        return cls(N=N, zeta=zeta, M=3.0 * (zeta / 2.0) ** 2, lam=lam, J=J, **kw)

    @property
    def eps(self) -> float:
        return 1.0 / self.zeta

    @property
    def temps(self) -> np.ndarray:
        t = np.atleast_1d(np.asarray(self.T, dtype=float))
        return np.full(self.N, t[0]) if t.size == 1 else t

    @property
    def T_min(self) -> float:
        return float(self.temps.min())

    @property
    def a_sites(self) -> np.ndarray:
        """eps / gamma_x per site."""
        return self.eps / (2.0 * self.zeta * self.temps)

    @property
    def a(self) -> float:
        """eps / gamma with gamma built from T_min (the uniform ceiling)."""
        return self.eps / (2.0 * self.zeta * self.T_min)

    @property
    def B(self) -> float:
        """p^2 coefficient of the cell measure (inside the eps/gamma prefactor)."""
        return self.M + 2.0 * self.zeta * self.c1

    @property
    def mu(self) -> float:
        """q^4 coefficient lambda^(-1/3) M."""
        return self.lam ** (-1.0 / 3.0) * self.M

    @property
    def coupling(self) -> Coupling:
        return Coupling(J=self.J, p=self.p, range=self.range)

    @cached_property
    def coupling_matrix(self) -> np.ndarray:
        return build_coupling(self.N, self.coupling)

    @property
    def J_M(self) -> float:
        """Row-sum ceiling 2 J zeta(p) of the infinite chain."""
        return self.coupling.row_sum_bound()

    def replace(self, **kw) -> "PolymerParams":
        from dataclasses import replace
        return replace(self, **kw)


@dataclass(frozen=True)
class Lattice:
    """Cells {1..n_times} x {0..N-1}; eps = 1/zeta is carried by the params."""

    n_times: int
    N: int
    cells: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_times < 1 or self.N < 1:
            raise ValidationError("lattice needs n_times >= 1 and N >= 1")
        object.__setattr__(self, "cells", tuple(Cell(t, j) for t in range(1, self.n_times + 1)
                                                for j in range(self.N)))

    @classmethod
    def from_extent(cls, extent: float, eps: float, N: int) -> "Lattice":
        """Lattice for a time extent that must be an integer multiple of eps."""
        k = extent / eps
        if abs(k - round(k)) > 1e-9 * max(1.0, abs(k)) or round(k) < 1:
            raise ValidationError("time extent must be a positive integer multiple of eps")
        return cls(int(round(k)), N)

    def __len__(self) -> int:
        return self.n_times * self.N

    def index(self, cell: Cell) -> int:
        return (cell.t - 1) * self.N + cell.j

    def kind(self, cell: Cell) -> str:
        """'final' at x0 = T (takes precedence when n_times = 1), 'initial' at x0 = eps, else 'bulk'."""
        if not (1 <= cell.t <= self.n_times and 0 <= cell.j < self.N):
            raise ValidationError(f"{cell} is not on the lattice")
        if cell.t == self.n_times:
            return "final"
        if cell.t == 1:
            return "initial"
        return "bulk"
