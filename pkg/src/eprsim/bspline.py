"""Quadratic B-spline basis on a uniform knot grid over [0, 1].

The basis underpins the measure construction: ``(y - x)**2`` expands exactly
as ``sum_i w_i(y) * N_i(x)`` with quadratic blending weights
``w_i(y) = (y - y_{i+1}) * (y - y_{i+2})`` (the Marsden identity for degree
two), and zeroing each weight on its negative stretch keeps everything
nonnegative at the cost of a certified error of at most ``1 / (4 K**2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KnotGrid:
    """Uniform knots ``y_nu = nu / K`` with an even knot count ``K >= 4``."""

    knot_count: int

    def __post_init__(self) -> None:
        k = self.knot_count
        if not isinstance(k, (int, np.integer)) or k < 4 or k % 2 != 0:
            raise ValueError(f"knot count must be an even integer >= 4, got {k!r}")

    @property
    def spacing(self) -> float:
        return 1.0 / self.knot_count

    def knot(self, nu: int) -> float:
        return nu / self.knot_count


@dataclass(frozen=True)
class BasisSet:
    """All quadratic splines on a :class:`KnotGrid` that are nonzero on [0, 1).

    Indices run from -2 to K-1 inclusive (count ``m = K + 2``); the spline
    with index K vanishes identically on [0, 1) and is dropped.
    """

    grid: KnotGrid

    @property
    def K(self) -> int:
        return self.grid.knot_count

    @property
    def size(self) -> int:
        return self.K + 2

    @property
    def index_range(self) -> range:
        return range(-2, self.K)

    def _check_index(self, i: int) -> None:
        if not (-2 <= i <= self.K - 1):
            raise ValueError(f"basis index {i} outside [-2, {self.K - 1}]")


def basis_matrix(basis: BasisSet, x: np.ndarray) -> np.ndarray:
    """Evaluate every basis function at the points ``x`` in [0, 1].

    Returns an array of shape ``(m, len(x))`` whose row ``r`` holds
    ``N_{r-2}(x)``.  Evaluation runs the triangular Cox-de Boor recursion on
    the uniform knots; values at knots follow the right-continuous
    convention, except x = 1 which is taken as a left limit so the partition
    of unity holds on the closed interval.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("x must be one-dimensional")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("x outside [0, 1]")
    K = basis.K
    # Knot interval containing x, clamped so x = 1 uses the last interval.
    pos = np.minimum(np.floor(x * K).astype(np.int64), K - 1)
    n = x.shape[0]
    # Order-1 splines over the extended index range -2 .. K+1.
    n1 = np.zeros((K + 4, n))
    n1[pos + 2, np.arange(n)] = 1.0
    knots = np.arange(-2, K + 5) / K  # y_{-2} .. y_{K+4}

    def step(lower: np.ndarray, order: int) -> np.ndarray:
        rows = lower.shape[0] - 1
        out = np.empty((rows, n))
        denom = (order - 1) / K
        for r in range(rows):
            yi = knots[r]              # y_{i} for i = r - 2
            yip = knots[r + order]     # y_{i + order}
            out[r] = ((x - yi) * lower[r] + (yip - x) * lower[r + 1]) / denom
        return out

    n2 = step(n1, 2)
    n3 = step(n2, 3)
    return n3


def basis_value(basis: BasisSet, i: int, x: float) -> float:
    """Value of the normalized quadratic spline ``N_i`` at ``x`` in [0, 1]."""
    basis._check_index(i)
    return float(basis_matrix(basis, np.array([x]))[i + 2, 0])


def marsden_weight(basis: BasisSet, i: int, y) -> np.ndarray | float:
    """Quadratic blending weight ``(y - y_{i+1}) * (y - y_{i+2})``."""
    basis._check_index(i)
    K = basis.K
    y = np.asarray(y, dtype=np.float64)
    out = (y - (i + 1) / K) * (y - (i + 2) / K)
    return float(out) if out.ndim == 0 else out


def truncated_weight(basis: BasisSet, i: int, y) -> np.ndarray | float:
    """Blending weight zeroed on its negative stretch ``[y_{i+1}, y_{i+2}]``.

    Always in [0, 2] for ``y`` in [0, 1].
    """
    basis._check_index(i)
    K = basis.K
    y = np.asarray(y, dtype=np.float64)
    if np.any(y < 0.0) or np.any(y > 1.0):
        raise ValueError("y outside [0, 1]")
    w = (y - (i + 1) / K) * (y - (i + 2) / K)
    out = np.where((y >= (i + 1) / K) & (y <= (i + 2) / K), 0.0, w)
    return float(out) if out.ndim == 0 else out


def weight_matrix(basis: BasisSet, y: np.ndarray, truncated: bool = True) -> np.ndarray:
    """Blending weights for all indices at points ``y``, shape ``(m, len(y))``."""
    y = np.asarray(y, dtype=np.float64)
    K = basis.K
    idx = np.arange(-2, K)[:, None]
    w = (y[None, :] - (idx + 1) / K) * (y[None, :] - (idx + 2) / K)
    if truncated:
        inside = (y[None, :] >= (idx + 1) / K) & (y[None, :] <= (idx + 2) / K)
        w = np.where(inside, 0.0, w)
    return w


def expand_squared_difference(basis: BasisSet, x: float, y: float) -> dict:
    """Expand ``(y - x)**2`` in the truncated basis combination.

    Returns ``{"approx": sum_i w_i(y) N_i(x), "residual": approx - (y-x)**2}``.
    The residual satisfies ``0 <= residual <= 1/(4 K**2)`` up to 1e-12.
    """
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ValueError("x, y must lie in [0, 1]")
    nx = basis_matrix(basis, np.array([x]))[:, 0]
    wy = weight_matrix(basis, np.array([y]))[:, 0]
    approx = float(wy @ nx)
    return {"approx": approx, "residual": approx - (y - x) ** 2}


def verify_expansion_bound(
    basis: BasisSet, resolution: int, truncated: bool = True
) -> dict:
    """Scan the expansion residual on a ``(resolution+1)**2`` lattice of [0,1]^2.

    With truncation the residual must stay in ``[0, 1/(4 K**2)]``; without it
    the expansion reproduces ``(y - x)**2`` exactly (polynomial identity).
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    pts = np.linspace(0.0, 1.0, resolution + 1)
    nmat = basis_matrix(basis, pts)          # (m, n)
    wmat = weight_matrix(basis, pts, truncated=truncated)
    approx = wmat.T @ nmat                   # approx[yi, xi]
    target = (pts[:, None] - pts[None, :]) ** 2
    residual = approx - target
    bound = 1.0 / (4.0 * basis.K**2)
    lo = float(residual.min())
    hi = float(residual.max())
    if truncated:
        ok = lo >= -1e-12 and hi <= bound + 1e-12
    else:
        ok = max(abs(lo), abs(hi)) <= 1e-10
    return {
        "K": basis.K,
        "truncated": truncated,
        "min_residual": lo,
        "max_residual": hi,
        "bound": bound if truncated else 1e-10,
        "pass": bool(ok),
    }
