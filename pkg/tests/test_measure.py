"""Base measure: station patterns, densities, mass accounting, expectation."""

import numpy as np
import numpy.testing as npt
import pytest

from eprsim.bspline import BasisSet, KnotGrid, basis_value, truncated_weight
from eprsim.measure import (
    GridSpec,
    anticorrelation_defect,
    build_base_measure,
    cell_integral_a,
    cell_integral_b,
    exact_pair_expectation,
    sign_pm,
    station_a,
    station_b,
    u_density,
    unit_vector,
    v_density,
)

from oracles import (
    halfmesh_pair_expectation,
    halfmesh_total_mass,
    station_a_table,
    station_b_table,
)

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


def random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def test_unit_vector_validation():
    with pytest.raises(ValueError):
        unit_vector([1, 1, 0])
    with pytest.raises(ValueError):
        unit_vector([1, 0])
    npt.assert_allclose(unit_vector([0.6, 0.8, 0.0]), [0.6, 0.8, 0.0])


def test_grid_spec():
    g = GridSpec(4)
    assert g.m == 6 and g.side == 21
    assert g.epsilon == 3.0 / 64
    with pytest.raises(ValueError):
        GridSpec(6, epsilon=0.6)
    with pytest.raises(ValueError):
        GridSpec(6, epsilon=1e-4)   # below the provable excess
    with pytest.raises(ValueError):
        GridSpec(5)


def test_sign_convention():
    assert sign_pm(0.0) == 1
    assert sign_pm(-0.0) == 1
    assert sign_pm(-2.0) == -1
    npt.assert_array_equal(sign_pm(np.array([-1.0, 0.0, 3.0])), [-1, 1, 1])


def test_station_a_rows():
    g = GridSpec(4)
    assert station_a(g, E2, -1.5) == 1          # sign(a_2) on [-2, -1)
    assert station_a(g, unit_vector([0, -1, 0]), -1.5) == -1
    assert station_a(g, E1, 0.25) == -1
    assert station_a(g, E1, 1.0) == 1
    assert station_a(g, E1, 0.5) == 1           # half-integer starts the +1 run
    with pytest.raises(ValueError):
        station_a(g, E1, -3.5)
    with pytest.raises(ValueError):
        station_a(g, E1, 18.0)


def test_station_b_rows():
    g = GridSpec(4)
    assert station_b(g, E1, -0.5) == -1         # -sign(b_1)
    assert station_b(g, unit_vector([-1, 0, 0]), -0.5) == 1
    assert station_b(g, E1, 0.25) == -1
    assert station_b(g, E1, 1.0) == 1
    assert station_b(g, E1, 1.75) == -1


@pytest.mark.parametrize("K", [4, 8])
def test_stations_match_interval_tables(K):
    g = GridSpec(K)
    rng = np.random.default_rng(5)
    a = random_unit(rng)
    b = random_unit(rng)
    us = rng.uniform(-3.0, 3 * g.m, size=500)
    for u in us:
        assert station_a(g, a, u) == station_a_table(a, u)
        assert station_b(g, b, u) == station_b_table(b, u)


def test_station_cell_integrals():
    g = GridSpec(4)
    assert cell_integral_b(g, E1, 1) == 0.0       # [0, 1)
    assert cell_integral_a(g, E1, 2) == 1.0       # [1, 2)
    assert cell_integral_a(g, E1, 0) == 1.0       # [-1, 0), sign(a_1)
    # every positive cell: B integrates to zero, A alternates 0, 1
    for c in range(1, 3 * g.m + 1):
        assert cell_integral_b(g, E2, c) == 0.0
        assert cell_integral_a(g, E2, c) == (0.0 if (c - 1) % 2 == 0 else 1.0)


def test_densities():
    g = GridSpec(4)
    b4 = BasisSet(KnotGrid(4))
    assert u_density(g, E1, -0.5) == 1.0
    assert v_density(g, E3, -2.5) == 1.0
    a = unit_vector([0.6, 0.8, 0.0])
    # first positive cell carries the leftmost basis value of |a_1|
    npt.assert_allclose(u_density(g, a, 0.5), basis_value(b4, -2, 0.6),
                        rtol=0, atol=1e-15)
    npt.assert_allclose(v_density(g, a, 0.5),
                        0.5 * truncated_weight(b4, -2, 0.6), rtol=0, atol=1e-15)
    npt.assert_allclose(v_density(g, a, 0.5), 0.255, rtol=0, atol=1e-15)
    # block of component 2 sums to one when |a_2| = 0 (partition of unity)
    block = [u_density(g, E1, 0.5 + g.m + t) for t in range(g.m)]
    npt.assert_allclose(sum(block), 1.0, rtol=0, atol=1e-12)
    # truncated weight kills the cells straddling y = 1
    assert v_density(g, E1, g.m - 0.5) == 0.0


def test_mass_accounting():
    g = GridSpec(4)
    m_aa = build_base_measure(g, E1, E1)
    assert m_aa.m1 == 1.0
    assert m_aa.m2 <= 3.0 / 128
    m_ab = build_base_measure(g, E1, E2)
    assert m_ab.m1 == 0.0
    assert abs(m_ab.total - 1.0) <= 3.0 / 128


@pytest.mark.parametrize("K", [4, 8, 16])
def test_mass_window_random(K):
    g = GridSpec(K)
    rng = np.random.default_rng(K)
    for _ in range(100):
        total = build_base_measure(g, random_unit(rng), random_unit(rng)).total
        assert 1.0 - 1e-12 <= total <= 1.0 + 3.0 / (8 * K * K) + 1e-12


def test_mass_against_halfmesh_oracle():
    g = GridSpec(4)
    rng = np.random.default_rng(9)
    for _ in range(10):
        a, b = random_unit(rng), random_unit(rng)
        npt.assert_allclose(build_base_measure(g, a, b).total,
                            halfmesh_total_mass(4, a, b), rtol=0, atol=1e-12)


def test_exact_expectation_special_cases():
    g = GridSpec(4)
    assert exact_pair_expectation(g, E1, E1) == -1.0
    assert exact_pair_expectation(g, E1, E2) == 0.0
    npt.assert_allclose(
        exact_pair_expectation(g, [0.6, 0.8, 0], [0.8, 0.6, 0]),
        -0.96, rtol=0, atol=1e-12)


@pytest.mark.parametrize("K", [4, 8, 16])
def test_exact_expectation_random(K):
    g = GridSpec(K)
    rng = np.random.default_rng(13 + K)
    for _ in range(100):
        a, b = random_unit(rng), random_unit(rng)
        npt.assert_allclose(exact_pair_expectation(g, a, b), -(a @ b),
                            rtol=0, atol=1e-10)


def test_expectation_against_halfmesh_oracle():
    rng = np.random.default_rng(21)
    for K in (4, 8):
        for _ in range(5):
            a, b = random_unit(rng), random_unit(rng)
            npt.assert_allclose(
                exact_pair_expectation(GridSpec(K), a, b),
                halfmesh_pair_expectation(K, a, b), rtol=0, atol=1e-10)


def test_defect_bounds():
    g = GridSpec(4)
    assert anticorrelation_defect(g, E1) <= 3.0 / 128
    g16 = GridSpec(16)
    assert anticorrelation_defect(g16, E3) <= 3.0 / 2048
    rng = np.random.default_rng(31)
    for K in (4, 8, 16):
        grid = GridSpec(K)
        for _ in range(25):
            a = random_unit(rng)
            defect = anticorrelation_defect(grid, a)
            assert 0.0 <= defect <= 3.0 / (8 * K * K) + 1e-15
            assert defect < grid.epsilon
            # each positive diagonal cell disagrees on exactly half its area
            half_m2 = 0.5 * build_base_measure(grid, a, a).m2
            npt.assert_allclose(defect, half_m2, rtol=0, atol=1e-14)
