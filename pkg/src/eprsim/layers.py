"""Family of relocated measures whose uniform mixture hides all structure.

Each layer relocates the mass of the base construction: the 3x3 block of
component masses moves to one of ``(m+1)**2`` positions, the station
patterns follow by a strip interchange, row/column labelings permute the
component cells inside the block, and the spline-weight chunks scatter onto
distinct host cells outside the block's cross of strips.  Every layer keeps
the exact pair expectation and total mass of the base measure, while
averaging over layers makes the joint density uniform over the whole square
(the basis of the no-signaling property).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from . import _kernels
from .measure import GridSpec, component_masses, sign_pm, unit_vector

# All six permutations of (1, 2, 3) in lexicographic order; a labeling maps
# block offset 0..2 to a component index.  The base construction labels the
# negative block right-to-left: offset 0 is component 3.
PERMUTATIONS: tuple[tuple[int, int, int], ...] = (
    (1, 2, 3), (1, 3, 2), (2, 1, 3), (2, 3, 1), (3, 1, 2), (3, 2, 1),
)
BASE_LABELS: tuple[int, int, int] = (3, 2, 1)

# offset = INVERSE_PERMUTATIONS[p][component-1] where PERMUTATIONS[p][offset] = component
INVERSE_PERMUTATIONS = tuple(
    tuple(perm.index(comp + 1) for comp in range(3)) for perm in PERMUTATIONS
)

PERM_TABLE = np.asarray(PERMUTATIONS, dtype=np.int64) - 1
INV_PERM_TABLE = np.asarray(INVERSE_PERMUTATIONS, dtype=np.int64)


@dataclass(frozen=True)
class LayerSpec:
    """One member of the measure family.

    ``q_col``/``q_row`` place the 3x3 block (both -1 for the base layer),
    ``col_label``/``row_label`` assign components to block offsets, and
    ``host_cells`` pins each of the 3m weight chunks (component-major, basis
    index ascending) to a distinct off-strip cell given as (column, row)
    positions in ``0 .. 3m+2``.
    """

    grid: GridSpec
    q_col: int
    q_row: int
    col_label: tuple[int, int, int]
    row_label: tuple[int, int, int]
    host_cells: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        m = self.grid.m
        for name, j in (("q_col", self.q_col), ("q_row", self.q_row)):
            if not (-1 <= j <= m - 1):
                raise ValueError(f"{name}={j} outside [-1, {m - 1}]")
        for name, lab in (("col_label", self.col_label), ("row_label", self.row_label)):
            if tuple(sorted(lab)) != (1, 2, 3):
                raise ValueError(f"{name}={lab!r} is not a permutation of (1, 2, 3)")
        if len(self.host_cells) != 3 * m:
            raise ValueError(f"need {3 * m} host cells, got {len(self.host_cells)}")
        if len(set(self.host_cells)) != len(self.host_cells):
            raise ValueError("host cells must be pairwise distinct")
        ccols = range(3 * (self.q_col + 1), 3 * (self.q_col + 1) + 3)
        crows = range(3 * (self.q_row + 1), 3 * (self.q_row + 1) + 3)
        for col, row in self.host_cells:
            if not (0 <= col < 3 * m + 3 and 0 <= row < 3 * m + 3):
                raise ValueError(f"host cell ({col}, {row}) outside the grid")
            if col in ccols or row in crows:
                raise ValueError(f"host cell ({col}, {row}) lands on a strip")

    def block_cell(self, component: int) -> tuple[int, int]:
        """(column, row) position of the component mass inside the block."""
        coff = INVERSE_PERMUTATIONS[PERMUTATIONS.index(self.col_label)][component - 1]
        roff = INVERSE_PERMUTATIONS[PERMUTATIONS.index(self.row_label)][component - 1]
        return 3 * (self.q_col + 1) + coff, 3 * (self.q_row + 1) + roff


def base_layer_spec(grid: GridSpec) -> LayerSpec:
    """The layer that reproduces the base diagonal construction exactly."""
    m = grid.m
    diagonal = tuple((t + 3, t + 3) for t in range(3 * m))
    return LayerSpec(
        grid=grid, q_col=-1, q_row=-1,
        col_label=BASE_LABELS, row_label=BASE_LABELS, host_cells=diagonal,
    )


def sample_layer(rng: np.random.Generator, grid: GridSpec) -> LayerSpec:
    """Draw a layer uniformly: block position over ``(m+1)**2``, labelings
    over 6 x 6, host assignment a uniform injection into the off-strip pool.

    Draw order (fixed for reproducibility): block column, block row, column
    labeling, row labeling, host permutation.
    """
    m = grid.m
    q_col = int(rng.integers(0, m + 1)) - 1
    q_row = int(rng.integers(0, m + 1)) - 1
    col_label = PERMUTATIONS[int(rng.integers(0, 6))]
    row_label = PERMUTATIONS[int(rng.integers(0, 6))]
    pool = rng.permutation(9 * m * m)[: 3 * m]
    host = tuple(
        _pool_to_cell(int(p), q_col, q_row, m) for p in pool
    )
    return LayerSpec(grid=grid, q_col=q_col, q_row=q_row,
                     col_label=col_label, row_label=row_label, host_cells=host)


def _pool_to_cell(pool_index: int, q_col: int, q_row: int, m: int) -> tuple[int, int]:
    """Map a flat off-strip pool index (0 .. 9m^2-1) to grid positions."""
    pcol = pool_index % (3 * m)
    prow = pool_index // (3 * m)
    col = pcol if pcol < 3 * (q_col + 1) else pcol + 3
    row = prow if prow < 3 * (q_row + 1) else prow + 3
    return col, row


def layer_station_a(grid: GridSpec, spec: LayerSpec, a: np.ndarray, u: float) -> int:
    """Station-1 outcome under the layer's interchanged pattern."""
    grid.check_point(u)
    start = math.floor(u)
    frac = u - start
    q_lo = 3 * spec.q_col
    if q_lo <= start < q_lo + 3:
        comp = spec.col_label[start - q_lo]
        return sign_pm(a[comp - 1])
    # translated by the strip interchange when u sits in the vacated block
    phase = start + 3 * (spec.q_col + 1) if start < 0 else start
    return -1 if (phase % 2 == 0 and frac < 0.5) else 1


def layer_station_b(grid: GridSpec, spec: LayerSpec, b: np.ndarray, v: float) -> int:
    """Station-2 outcome under the layer's interchanged pattern."""
    grid.check_point(v, "v")
    start = math.floor(v)
    frac = v - start
    q_lo = 3 * spec.q_row
    if q_lo <= start < q_lo + 3:
        comp = spec.row_label[start - q_lo]
        return -sign_pm(b[comp - 1])
    phase = start + 3 * (spec.q_row + 1) if start < 0 else start
    return -1 if ((phase % 2 == 0) == (frac < 0.5)) else 1


@dataclass(frozen=True)
class LayerMeasure:
    """Cell masses of one layer: 3 component cells plus 3m host cells."""

    grid: GridSpec
    spec: LayerSpec
    a: np.ndarray
    b: np.ndarray
    cells: dict[tuple[int, int], float]

    @property
    def total(self) -> float:
        return float(math.fsum(self.cells.values()))


def build_layer_measure(grid: GridSpec, a, b, spec: LayerSpec) -> LayerMeasure:
    """Place the component masses inside the block and one weight chunk on
    each host cell.  Raises on any cell collision.
    """
    a = unit_vector(a)
    b = unit_vector(b)
    comp_mass = np.abs(a) * np.abs(b)
    _, chunk = component_masses(grid, a, b)
    cells: dict[tuple[int, int], float] = {}
    for comp in range(1, 4):
        cells[spec.block_cell(comp)] = float(comp_mass[comp - 1])
    for t, cell in enumerate(spec.host_cells):
        if cell in cells:
            raise ValueError(f"host cell {cell} collides with an occupied cell")
        cells[cell] = float(chunk[t])
    return LayerMeasure(grid=grid, spec=spec, a=a, b=b, cells=cells)


def _layer_cell_integral_a(grid: GridSpec, spec: LayerSpec, a: np.ndarray, col: int) -> float:
    u0 = col - 3
    return (layer_station_a(grid, spec, a, u0 + 0.25)
            + layer_station_a(grid, spec, a, u0 + 0.75)) / 2.0


def _layer_cell_integral_b(grid: GridSpec, spec: LayerSpec, b: np.ndarray, row: int) -> float:
    v0 = row - 3
    return (layer_station_b(grid, spec, b, v0 + 0.25)
            + layer_station_b(grid, spec, b, v0 + 0.75)) / 2.0


def layer_expectation(grid: GridSpec, a, b, spec: LayerSpec) -> float:
    """Pair expectation under one layer, evaluated as an honest cell sum.

    The station patterns are constant on half-unit intervals so the two
    midpoint samples per cell integrate them exactly.  Host cells vanish
    (the station-2 pattern integrates to zero over every off-strip row) and
    the block cells reproduce ``-a . b``.
    """
    measure = build_layer_measure(grid, a, b, spec)
    terms = []
    for (col, row), mass in measure.cells.items():
        if mass == 0.0:
            continue
        terms.append(
            mass
            * _layer_cell_integral_a(grid, spec, measure.a, col)
            * _layer_cell_integral_b(grid, spec, measure.b, row)
        )
    return float(math.fsum(terms))


def layer_defect(grid: GridSpec, a, spec: LayerSpec) -> float:
    """Equal-setting anti-correlation defect of one layer (mass where the
    outcomes fail to anti-align, always below epsilon)."""
    a = unit_vector(a)
    measure = build_layer_measure(grid, a, a, spec)
    terms = []
    for (col, row), mass in measure.cells.items():
        if mass == 0.0:
            continue
        hits = 0
        for uq in (col - 3 + 0.25, col - 3 + 0.75):
            au = layer_station_a(grid, spec, a, uq)
            for vq in (row - 3 + 0.25, row - 3 + 0.75):
                if layer_station_b(grid, spec, a, vq) != -au:
                    hits += 1
        terms.append(mass * hits / 4.0)
    return float(math.fsum(terms))


@dataclass(frozen=True)
class LayerCount:
    """Exact combinatorics of the layer family.

    ``unordered_total`` treats the host selection as a bare cell subset (the
    published count); ``ordered_total`` multiplies in the ``(3m)!`` ways of
    assigning the distinguishable chunks to the chosen cells, which is the
    convention the sampler realizes.
    """

    block_positions: int
    labelings: int
    host_subsets: int
    host_arrangements: int

    @property
    def unordered_total(self) -> int:
        return self.block_positions * self.labelings * self.host_subsets

    @property
    def ordered_total(self) -> int:
        return self.block_positions * self.labelings * self.host_arrangements


def count_layers(grid: GridSpec) -> LayerCount:
    """Exact big-integer count of the layer family for this grid."""
    m = grid.m
    return LayerCount(
        block_positions=(m + 1) ** 2,
        labelings=36,
        host_subsets=comb(9 * m * m, 3 * m),
        host_arrangements=comb(9 * m * m, 3 * m) * factorial(3 * m),
    )


def layer_count_formula(n: int) -> int:
    """Single-arrangement count ``(n+1)**2 * C(9 n**2, 3 n)`` for block size n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return (n + 1) ** 2 * comb(9 * n * n, 3 * n)


def _sample_layer_batch(rng: np.random.Generator, grid: GridSpec, count: int):
    """Vectorized layer draws: block indices, labeling indices, and host
    pool indices (count x 3m) from per-layer uniform injections."""
    m = grid.m
    bj = rng.integers(0, m + 1, size=count)
    bk = rng.integers(0, m + 1, size=count)
    cp = rng.integers(0, 6, size=count)
    rp = rng.integers(0, 6, size=count)
    keys = rng.random((count, 9 * m * m))
    hosts = np.argsort(keys, axis=1)[:, : 3 * m]
    return bj, bk, cp, rp, hosts


def density_uniformity_audit(
    grid: GridSpec,
    a,
    b,
    layers: int,
    seed: int = 0,
    batch_size: int = 20_000,
) -> dict:
    """Average cell masses over sampled layers against the uniform target.

    Accumulates per-cell mass sums and squared sums, compares each cell mean
    with ``(M1 + M2) / (3m + 3)**2`` at a five-sigma tolerance computed from
    the per-cell sample variance, and checks total-mass conservation.
    """
    if layers < 1:
        raise ValueError("layers must be >= 1")
    a = unit_vector(a)
    b = unit_vector(b)
    m = grid.m
    side = grid.side
    comp_mass = np.abs(a) * np.abs(b)
    _, chunk = component_masses(grid, a, b)
    total = float(math.fsum(comp_mass) + math.fsum(chunk))
    target = total / side**2

    sums = np.zeros(side * side)
    sq_sums = np.zeros(side * side)
    rng = np.random.default_rng(seed)
    done = 0
    while done < layers:
        count = min(batch_size, layers - done)
        bj, bk, cp, rp, hosts = _sample_layer_batch(rng, grid, count)
        _kernels.accumulate_layer_masses(
            bj, bk, cp, rp, hosts, comp_mass, chunk,
            INV_PERM_TABLE, m, side, sums, sq_sums,
        )
        done += count

    mean = sums / layers
    var = np.maximum(sq_sums / layers - mean**2, 0.0)
    tol = 5.0 * np.sqrt(var / layers) + 1e-15
    deviation = np.abs(mean - target)
    worst = int(np.argmax(deviation - tol))
    conserved = float(math.fsum(sums) / layers)
    return {
        "layers": layers,
        "uniform_target": target,
        "max_deviation": float(deviation.max()),
        "tolerance_at_worst_cell": float(tol[worst]),
        "per_cell_stats": {
            "cells": side * side,
            "mean_min": float(mean.min()),
            "mean_max": float(mean.max()),
            "worst_margin": float((deviation - tol).max()),
        },
        "mean_total_mass": conserved,
        "expected_total_mass": total,
        "conservation_error": abs(conserved - total),
        "pass": bool(np.all(deviation <= tol) and abs(conserved - total) <= 1e-10),
    }
