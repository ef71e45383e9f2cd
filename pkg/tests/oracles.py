"""Independent oracles used to freeze expected values.

Everything here deliberately avoids the package's evaluation paths: spline
values come from the exact rational closed form of the cardinal quadratic
B-spline (and from scipy's basis elements), station patterns are recoded
straight from their interval tables, and integration uses a half-unit
midpoint mesh on which every integrand is piecewise constant.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy.interpolate import BSpline


def cardinal_quadratic(t: Fraction) -> Fraction:
    """Cardinal quadratic B-spline on knots 0, 1, 2, 3 (exact rational)."""
    if t <= 0 or t >= 3:
        return Fraction(0)
    if t <= 1:
        return t * t / 2
    if t <= 2:
        return (-2 * t * t + 6 * t - 3) / 2
    return (3 - t) * (3 - t) / 2


def rational_basis_value(K: int, i: int, x: Fraction) -> Fraction:
    """Exact value of the uniform-knot basis function via the closed form."""
    return cardinal_quadratic(K * Fraction(x) - i)


def scipy_basis_value(K: int, i: int, x: float) -> float:
    """Same basis function through scipy's independent implementation."""
    knots = np.array([i, i + 1, i + 2, i + 3]) / K
    val = BSpline.basis_element(knots, extrapolate=False)(x)
    return 0.0 if np.isnan(val) else float(val)


def blending_weight(K: int, i: int, y: float, truncated: bool) -> float:
    w = (y - (i + 1) / K) * (y - (i + 2) / K)
    if truncated and (i + 1) / K <= y <= (i + 2) / K:
        return 0.0
    return w


def station_a_table(a, u: float) -> int:
    """Station-1 pattern coded directly from its interval table."""
    for k in (1, 2, 3):
        if -k <= u < -k + 1:
            return 1 if a[k - 1] >= 0 else -1
    w = u % 2.0
    return -1 if w < 0.5 else 1


def station_b_table(b, v: float) -> int:
    for k in (1, 2, 3):
        if -k <= v < -k + 1:
            return -(1 if b[k - 1] >= 0 else -1)
    w = v % 2.0
    return -1 if (w < 0.5 or w >= 1.5) else 1


def density_u_table(K: int, a, u: float) -> float:
    for k in (1, 2, 3):
        if -k <= u < -k + 1:
            return abs(a[k - 1])
    m = K + 2
    t = int(math.floor(u))
    comp = t // m
    i = t % m - 2
    return scipy_basis_value(K, i, abs(a[comp]))


def density_v_table(K: int, b, v: float) -> float:
    for k in (1, 2, 3):
        if -k <= v < -k + 1:
            return abs(b[k - 1])
    m = K + 2
    t = int(math.floor(v))
    comp = t // m
    i = t % m - 2
    return 0.5 * blending_weight(K, i, abs(b[comp]), truncated=True)


def halfmesh_pair_expectation(K: int, a, b) -> float:
    """Numerical integral of A * B * density on the half-unit mesh.

    The density is constant per unit cell and the station patterns per
    half-unit interval, so the midpoint mesh integrates exactly.
    """
    m = K + 2
    total = 0.0
    for cell_start in range(-3, 3 * m):
        mid = cell_start + 0.5
        rho = density_u_table(K, a, mid) * density_v_table(K, b, mid)
        if rho == 0.0:
            continue
        for du in (0.25, 0.75):
            for dv in (0.25, 0.75):
                total += 0.25 * rho * station_a_table(a, cell_start + du) \
                    * station_b_table(b, cell_start + dv)
    return total


def halfmesh_total_mass(K: int, a, b) -> float:
    m = K + 2
    return sum(
        density_u_table(K, a, c + 0.5) * density_v_table(K, b, c + 0.5)
        for c in range(-3, 3 * m)
    )


def binomial_product(n: int, k: int) -> int:
    """Binomial coefficient via the iterative product (exact integers)."""
    if k < 0 or k > n:
        return 0
    result = 1
    for i in range(1, k + 1):
        result = result * (n - i + 1) // i
    return result
