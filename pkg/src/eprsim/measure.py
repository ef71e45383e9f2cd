"""Base setting-dependent measure on the planar parameter grid.

The hidden parameters of one spin pair are a point ``(u, v)`` of the square
``Omega = [-3, 3m) x [-3, 3m)`` (``m = K + 2`` cells per block).  Station 1
turns ``(a, u)`` into an outcome of +/-1, station 2 turns ``(b, v)`` into
one; neither station function sees the remote setting.  The base measure
puts mass only on diagonal unit cells: component masses ``|a_k| |b_k|`` on
the three negative cells and spline-weight products on the positive ones.
Its pair expectation is exactly ``-a . b`` while the total mass stays within
``3 / (8 K**2)`` of one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bspline import BasisSet, KnotGrid, basis_matrix, weight_matrix

UNIT_TOL = 1e-12


def unit_vector(components) -> np.ndarray:
    """Validate and return a unit vector in R^3 as a float64 array."""
    a = np.asarray(components, dtype=np.float64)
    if a.shape != (3,):
        raise ValueError(f"setting must have 3 components, got shape {a.shape}")
    norm2 = float(a @ a)
    if abs(norm2 - 1.0) > 1e-11:
        raise ValueError(f"setting must be a unit vector, |a|^2 = {norm2!r}")
    return a


def sign_pm(x) -> np.ndarray | int:
    """Sign with the convention sign(0) = +1."""
    out = np.where(np.asarray(x) >= 0, 1, -1)
    return int(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GridSpec:
    """Geometry of the parameter square plus the mass-excess budget.

    ``K`` counts knots of the underlying spline grid, ``m = K + 2`` is both
    the basis size and the per-block cell count.  Unit cells are indexed by
    ``c`` in ``{-2, ..., 3m}`` with cell ``c = [c-1, c)``.  ``epsilon`` must
    exceed the provable mass excess ``3 / (8 K**2)`` and stay below 1/2.
    """

    K: int
    epsilon: float | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.K, (int, np.integer)) or self.K < 4 or self.K % 2:
            raise ValueError(f"K must be an even integer >= 4, got {self.K!r}")
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", 3.0 / (4.0 * self.K**2))
        excess = 3.0 / (8.0 * self.K**2)
        if not (excess < self.epsilon < 0.5):
            raise ValueError(
                f"epsilon must lie in ({excess}, 0.5), got {self.epsilon!r}"
            )

    @property
    def m(self) -> int:
        return self.K + 2

    @property
    def side(self) -> int:
        """Cells along one axis of the square."""
        return 3 * self.m + 3

    @property
    def u_min(self) -> float:
        return -3.0

    @property
    def u_max(self) -> float:
        return float(3 * self.m)

    @property
    def basis(self) -> BasisSet:
        return BasisSet(KnotGrid(self.K))

    def cell_range(self) -> range:
        return range(-2, 3 * self.m + 1)

    def check_point(self, u: float, name: str = "u") -> None:
        if not (self.u_min <= u < self.u_max):
            raise ValueError(f"{name}={u!r} outside [{self.u_min}, {self.u_max})")


def _split_point(u: float) -> tuple[int, float]:
    """Unit-cell start (an integer) and the fractional offset of ``u``."""
    start = math.floor(u)
    return start, u - start


def station_a(grid: GridSpec, a: np.ndarray, u: float) -> int:
    """Station-1 outcome at coordinate ``u``: */-1, a function of (a, u) only.

    On the negative block the value is ``sign(a_k)`` on ``[-k, -k+1)``; on
    the positive range it follows the period-2 step pattern that is -1 on
    the first half of every even cell and +1 elsewhere.
    """
    grid.check_point(u)
    start, frac = _split_point(u)
    if start < 0:
        k = -start  # u in [-k, -k+1)
        return sign_pm(a[k - 1])
    return -1 if (start % 2 == 0 and frac < 0.5) else 1


def station_b(grid: GridSpec, b: np.ndarray, v: float) -> int:
    """Station-2 outcome at ``v``: ``-sign(b_k)`` on the negative block, and
    on the positive range -1 exactly when ``v mod 2`` falls in
    ``[0, 1/2) U [3/2, 2)`` (so every positive unit cell integrates to zero).
    """
    grid.check_point(v, "v")
    start, frac = _split_point(v)
    if start < 0:
        k = -start
        return -sign_pm(b[k - 1])
    if start % 2 == 0:
        return -1 if frac < 0.5 else 1
    return 1 if frac < 0.5 else -1


def u_density(grid: GridSpec, a: np.ndarray, u: float) -> float:
    """Station-1 marginal density factor at ``u`` (cell-constant)."""
    grid.check_point(u)
    c = math.floor(u) + 1  # cell index: cell c = [c-1, c)
    return float(_u_cell_densities(grid, a)[c + 2])


def v_density(grid: GridSpec, b: np.ndarray, v: float) -> float:
    """Station-2 marginal density factor at ``v`` (cell-constant)."""
    grid.check_point(v, "v")
    c = math.floor(v) + 1
    return float(_v_cell_densities(grid, b)[c + 2])


def _u_cell_densities(grid: GridSpec, a: np.ndarray) -> np.ndarray:
    """Cell-constant station-1 density for every cell c = -2 .. 3m."""
    m = grid.m
    basis = grid.basis
    out = np.empty(3 * m + 3)
    out[0:3] = np.abs(a)[::-1]  # cells -2,-1,0 carry |a_3|,|a_2|,|a_1|
    x = np.abs(np.asarray(a, dtype=np.float64))
    nmat = basis_matrix(basis, x)  # (m, 3)
    for comp in range(3):
        out[3 + comp * m : 3 + (comp + 1) * m] = nmat[:, comp]
    return out


def _v_cell_densities(grid: GridSpec, b: np.ndarray) -> np.ndarray:
    m = grid.m
    basis = grid.basis
    out = np.empty(3 * m + 3)
    out[0:3] = np.abs(b)[::-1]
    y = np.abs(np.asarray(b, dtype=np.float64))
    wmat = weight_matrix(basis, y)  # (m, 3)
    for comp in range(3):
        out[3 + comp * m : 3 + (comp + 1) * m] = 0.5 * wmat[:, comp]
    return out


def component_masses(grid: GridSpec, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """The 3 negative-block masses ``|a_k||b_k|`` and the 3m positive-block
    chunk masses (basis value times half the truncated weight), in cell order.
    """
    du = _u_cell_densities(grid, a)
    dv = _v_cell_densities(grid, b)
    return du[0:3] * dv[0:3], du[3:] * dv[3:]


@dataclass(frozen=True)
class DiagonalMeasure:
    """Base measure: mass sits on diagonal unit cells only.

    ``neg_mass[j]`` is the mass of diagonal cell ``[-3+j, -2+j)^2`` for
    ``j = 0, 1, 2`` (components 3, 2, 1); ``pos_mass[t]`` the mass of
    ``[t, t+1)^2`` for ``t = 0 .. 3m-1``.  Densities are cell-constant.
    """

    grid: GridSpec
    a: np.ndarray
    b: np.ndarray
    neg_mass: np.ndarray
    pos_mass: np.ndarray

    @property
    def m1(self) -> float:
        return float(math.fsum(self.neg_mass))

    @property
    def m2(self) -> float:
        return float(math.fsum(self.pos_mass))

    @property
    def total(self) -> float:
        return float(math.fsum(self.neg_mass) + math.fsum(self.pos_mass))

    def cell_mass(self, c: int) -> float:
        """Mass of diagonal cell ``c`` (cell = [c-1, c))."""
        if not (-2 <= c <= 3 * self.grid.m):
            raise ValueError(f"cell index {c} out of range")
        return float(self.neg_mass[c + 2]) if c <= 0 else float(self.pos_mass[c - 1])


def build_base_measure(grid: GridSpec, a, b) -> DiagonalMeasure:
    """Construct the diagonal product measure for settings ``a`` and ``b``."""
    a = unit_vector(a)
    b = unit_vector(b)
    neg, pos = component_masses(grid, a, b)
    return DiagonalMeasure(grid=grid, a=a, b=b, neg_mass=neg, pos_mass=pos)


def cell_integral_a(grid: GridSpec, a: np.ndarray, c: int) -> float:
    """Integral of the station-1 function over unit cell ``c``.

    Negative cells give ``sign(a_k)``; positive cells alternate 0 (cells
    starting at even integers) and 1 (odd starts).
    """
    start = c - 1
    if start < -3 or start >= 3 * grid.m:
        raise ValueError(f"cell index {c} out of range")
    if start < 0:
        return float(sign_pm(a[-start - 1]))
    return 0.0 if start % 2 == 0 else 1.0


def cell_integral_b(grid: GridSpec, b: np.ndarray, c: int) -> float:
    """Integral of the station-2 function over unit cell ``c``.

    Negative cells give ``-sign(b_k)``; every positive cell integrates to 0.
    """
    start = c - 1
    if start < -3 or start >= 3 * grid.m:
        raise ValueError(f"cell index {c} out of range")
    if start < 0:
        return float(-sign_pm(b[-start - 1]))
    return 0.0


def exact_pair_expectation(grid: GridSpec, a, b) -> float:
    """Closed-form pair expectation ``int A B dmu`` under the base measure.

    Evaluates the honest cell sum; positive diagonal cells vanish because the
    station-2 pattern integrates to zero over every positive unit interval.
    The value equals ``-a . b`` to within 1e-12.
    """
    measure = build_base_measure(grid, a, b)
    terms = []
    for c in measure.grid.cell_range():
        mass = measure.cell_mass(c)
        if mass == 0.0:
            continue
        terms.append(
            mass
            * cell_integral_a(grid, measure.a, c)
            * cell_integral_b(grid, measure.b, c)
        )
    return float(math.fsum(terms))


def _disagreement_fraction(grid: GridSpec, a: np.ndarray, c: int) -> float:
    """Area fraction of diagonal cell ``c`` where B(v) != -A(u).

    The station patterns are constant on half-unit intervals, so sampling
    the four half-cell midpoint combinations is exact.
    """
    start = c - 1
    quarter = (start + 0.25, start + 0.75)
    hits = 0
    for uq in quarter:
        au = station_a(grid, a, uq)
        for vq in quarter:
            bv = station_b(grid, a, vq)
            if bv != -au:
                hits += 1
    return hits / 4.0


def anticorrelation_defect(grid: GridSpec, a) -> float:
    """Measure of the set where equal-setting outcomes fail to anti-align.

    At ``b = a`` the negative cells anti-align everywhere; each positive
    diagonal cell disagrees on exactly half its area, so the defect equals
    half the positive mass and is bounded by ``3 / (8 K**2) < epsilon``.
    """
    a = unit_vector(a)
    measure = build_base_measure(grid, a, a)
    terms = []
    for c in measure.grid.cell_range():
        mass = measure.cell_mass(c)
        if mass == 0.0:
            continue
        frac = _disagreement_fraction(grid, a, c)
        if frac:
            terms.append(mass * frac)
    return float(math.fsum(terms))
