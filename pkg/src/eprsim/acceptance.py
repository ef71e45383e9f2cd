"""Acceptance battery: one callable per verification criterion.

Each criterion returns an :class:`AcceptanceResult`; the pytest acceptance
module asserts them and the CLI ``selftest`` command prints the table.
Seeds are fixed so every statistical verdict is reproducible.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from itertools import product

import numpy as np

from .bspline import BasisSet, KnotGrid, verify_expansion_bound
from .inequalities import (
    Correlation,
    bell_check,
    chsh_bound_identity,
    chsh_check,
    change_of_variables_demo,
    coplanar_setting,
    product_form_consistency,
    sign_identity_check,
)
from .layers import (
    build_layer_measure,
    density_uniformity_audit,
    layer_expectation,
    sample_layer,
)
from .measure import (
    GridSpec,
    anticorrelation_defect,
    build_base_measure,
    exact_pair_expectation,
)
from .simulate import (
    ExperimentConfig,
    equal_setting_audit,
    marginal_shift_audit,
    modulated_run,
    run_experiment,
)


@dataclass(frozen=True)
class AcceptanceResult:
    cid: int
    name: str
    passed: bool
    details: str
    seconds: float

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] criterion {self.cid:2d} ({self.seconds:6.2f}s) {self.name}: {self.details}"


def _random_unit(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def _timed(cid: int, name: str, fn) -> AcceptanceResult:
    start = time.perf_counter()
    passed, details = fn()
    return AcceptanceResult(cid=cid, name=name, passed=passed, details=details,
                            seconds=time.perf_counter() - start)


def criterion_01(knots=(4, 8, 16), pairs=200, seed=101) -> AcceptanceResult:
    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for K in knots:
            grid = GridSpec(K)
            for _ in range(pairs):
                a = _random_unit(rng)
                b = _random_unit(rng)
                worst = max(worst, abs(exact_pair_expectation(grid, a, b) + a @ b))
        return worst <= 1e-10, f"max |E + a.b| = {worst:.3e} over {pairs} pairs, K={knots}"

    res = _timed(1, "exact quantum correlation", run)
    if res.seconds >= 1.0:
        return AcceptanceResult(res.cid, res.name, False,
                                res.details + f" (runtime {res.seconds:.2f}s >= 1s)",
                                res.seconds)
    return res


def criterion_02(knots=(4, 8, 16), resolution=1000) -> AcceptanceResult:
    def run():
        lines = []
        ok = True
        for K in knots:
            basis = BasisSet(KnotGrid(K))
            trunc = verify_expansion_bound(basis, resolution, truncated=True)
            exact = verify_expansion_bound(basis, resolution, truncated=False)
            ok = ok and trunc["pass"] and exact["pass"]
            lines.append(f"K={K}: residual in [{trunc['min_residual']:.1e}, "
                         f"{trunc['max_residual']:.2e}] <= {trunc['bound']:.2e}, "
                         f"exact max {max(abs(exact['min_residual']), abs(exact['max_residual'])):.1e}")
        return ok, "; ".join(lines)

    res = _timed(2, "spline expansion bound", run)
    if res.seconds >= 30.0:
        return AcceptanceResult(res.cid, res.name, False,
                                res.details + f" (runtime {res.seconds:.2f}s >= 30s)",
                                res.seconds)
    return res


def criterion_03(knots=(4, 8, 16), pairs=500, seed=103) -> AcceptanceResult:
    def run():
        rng = np.random.default_rng(seed)
        ok = True
        lines = []
        for K in knots:
            grid = GridSpec(K)
            theta_max = 0.0
            for _ in range(pairs):
                total = build_base_measure(grid, _random_unit(rng), _random_unit(rng)).total
                ok = ok and (1.0 - 1e-12 <= total <= 1.0 + 3.0 / (8 * K * K) + 1e-12)
                theta_max = max(theta_max, K * K * (total - 1.0))
            lines.append(f"K={K}: theta_max = {theta_max:.4f}")
        return ok, ("mass window held for all pairs; " + ", ".join(lines)
                    + " (provable bound 3/8 = 0.375; optimistic 1/24 ~ 0.0417 "
                    "reference is exceeded)")

    return _timed(3, "total mass window", run)


def criterion_04(K=8, settings=100, trials=10**6, seed=104) -> AcceptanceResult:
    def run():
        grid = GridSpec(K)
        rng = np.random.default_rng(seed)
        bound = 3.0 / (8 * K * K)
        worst = 0.0
        first = None
        for _ in range(settings):
            a = _random_unit(rng)
            if first is None:
                first = a
            defect = anticorrelation_defect(grid, a)
            worst = max(worst, defect)
            if not (defect <= bound + 1e-15 and defect < grid.epsilon):
                return False, f"defect {defect} breaks bound {bound}"
        audit = equal_setting_audit(grid, first, trials, seed)
        ok = audit["pass"] and audit["defect_match"]
        return ok, (f"max exact defect {worst:.2e} <= {bound:.2e}; empirical "
                    f"violation {audit['violation_frequency']:.2e} vs predicted "
                    f"{audit['predicted_violation']:.2e} (match={audit['defect_match']})")

    return _timed(4, "anti-correlation defect", run)


def criterion_05(K=4, pair_count=3, layers=1000, seed=105) -> AcceptanceResult:
    def run():
        grid = GridSpec(K)
        rng = np.random.default_rng(seed)
        worst_e = 0.0
        worst_m = 0.0
        for _ in range(pair_count):
            a = _random_unit(rng)
            b = _random_unit(rng)
            base_total = build_base_measure(grid, a, b).total
            for _ in range(layers):
                spec = sample_layer(rng, grid)
                worst_e = max(worst_e, abs(layer_expectation(grid, a, b, spec) + a @ b))
                layer_total = build_layer_measure(grid, a, b, spec).total
                worst_m = max(worst_m, abs(layer_total - base_total))
        ok = worst_e <= 1e-10 and worst_m <= 1e-12
        return ok, (f"{pair_count} pairs x {layers} layers: max |E + a.b| = "
                    f"{worst_e:.2e}, max mass drift = {worst_m:.2e}")

    return _timed(5, "per-layer exactness", run)


def criterion_06(K=8, pair_count=10, trials=10**6, seed=106, workers=1) -> AcceptanceResult:
    def run():
        grid = GridSpec(K)
        rng = np.random.default_rng(seed)
        pairs = tuple((_random_unit(rng), _random_unit(rng)) for _ in range(pair_count))
        config = ExperimentConfig(grid=grid, pairs=pairs, trials=trials,
                                  seed=seed, workers=workers)
        worst_ratio = 0.0
        for est in run_experiment(config):
            dev = abs(est.mean - (-(est.a @ est.b)))
            tol = 4.0 * est.stderr + grid.epsilon
            worst_ratio = max(worst_ratio, dev / tol)
        return worst_ratio <= 1.0, (f"{pair_count} pairs x {trials} trials: worst "
                                    f"deviation/tolerance = {worst_ratio:.3f}")

    res = _timed(6, "Monte Carlo estimator", run)
    if res.seconds >= 60.0:
        return AcceptanceResult(res.cid, res.name, False,
                                res.details + f" (runtime {res.seconds:.2f}s >= 60s)",
                                res.seconds)
    return res


def _mc_correlations(grid, pairs, trials, seed, workers=1):
    config = ExperimentConfig(grid=grid, pairs=tuple(pairs), trials=trials,
                              seed=seed, workers=workers)
    return [
        Correlation(value=e.mean, stderr=e.stderr, source="monte_carlo")
        for e in run_experiment(config)
    ]


def criterion_07(K=8, trials=10**6, seed=107) -> AcceptanceResult:
    def run():
        grid = GridSpec(K)
        a, b, c = (coplanar_setting(t) for t in (0.0, 60.0, 120.0))
        p_ab, p_ac, p_bc = _mc_correlations(grid, [(a, b), (a, c), (b, c)],
                                            trials, seed)
        eps = grid.epsilon
        rhs_dev = abs((1.0 + p_bc.value) - 0.5)
        lhs_dev = abs(abs(p_ab.value - p_ac.value) - 1.0)
        rhs_ok = rhs_dev <= 4 * p_bc.stderr + eps
        lhs_ok = lhs_dev <= 4 * math.hypot(p_ab.stderr, p_ac.stderr) + 2 * eps
        report = bell_check(p_bc, p_ab, p_ac)
        ok = rhs_ok and lhs_ok and report.violated and report.slack < -0.4
        return ok, (f"1+P(b,c) = {1 + p_bc.value:.4f}, |P(a,b)-P(a,c)| = "
                    f"{abs(p_ab.value - p_ac.value):.4f}, slack = {report.slack:.4f}, "
                    f"violated = {report.violated}")

    return _timed(7, "Bell violation (Monte Carlo)", run)


def criterion_08(K=8, trials=10**6, seed=108) -> AcceptanceResult:
    def run():
        grid = GridSpec(K)
        a, d, b, c = (coplanar_setting(t) for t in (0.0, 90.0, 45.0, 315.0))
        p_ab, p_db, p_ac, p_dc = _mc_correlations(
            grid, [(a, b), (d, b), (a, c), (d, c)], trials, seed)
        report = chsh_check(p_ab, p_db, p_ac, p_dc)
        target = 2.0 * math.sqrt(2.0)
        comb = math.sqrt(sum(p.stderr**2 for p in (p_ab, p_db, p_ac, p_dc)))
        ok = (abs(report.lhs - target) <= 4 * comb + 4 * grid.epsilon
              and report.lhs > 2.0 and report.violated)
        return ok, (f"|S| = {report.lhs:.4f} vs 2*sqrt(2) = {target:.4f} "
                    f"(tol {4 * comb + 4 * grid.epsilon:.4f}), violated = {report.violated}")

    return _timed(8, "CHSH violation (Monte Carlo)", run)


def criterion_09(K=4, trials=10**6, seed=109) -> AcceptanceResult:
    def run():
        grid = GridSpec(K)
        rep = marginal_shift_audit(grid, [1, 0, 0], [0, 1, 0], [0, 0, 1],
                                   trials, seed)
        return rep["pass"], (
            f"KS = {rep['ks_statistic']:.5f} < {rep['ks_threshold']:.5f}, "
            f"|dE(A)| = {rep['delta_mean_a']:.5f} <= {rep['delta_tolerance']:.5f}, "
            f"uniform KS = {rep['uniform_ks_statistic']:.5f} < "
            f"{rep['uniform_ks_threshold']:.5f}")

    return _timed(9, "no-signaling audit", run)


def criterion_10(K=4, layers=200_000, seed=110) -> AcceptanceResult:
    def run():
        grid = GridSpec(K)
        rng = np.random.default_rng(seed)
        a = _random_unit(rng)
        b = _random_unit(rng)
        rep = density_uniformity_audit(grid, a, b, layers, seed=seed)
        return rep["pass"], (
            f"{layers} layers: max deviation {rep['max_deviation']:.2e} "
            f"(worst margin {rep['per_cell_stats']['worst_margin']:+.2e}), "
            f"conservation error {rep['conservation_error']:.2e}")

    return _timed(10, "averaged-density uniformity", run)


def criterion_11(tables=10**5, seed=111) -> AcceptanceResult:
    def run():
        # deterministic +/-1 assignments can never break the three-term bound
        for x, y, z in product((-1, 1), repeat=3):
            report = bell_check(-x * y, -z * x, -z * y)
            if report.violated:
                return False, f"deterministic table x={x} y={y} z={z} violated"
            if not sign_identity_check(x, y, z):
                return False, f"sign identity failed on ({x},{y},{z})"
        rng = np.random.default_rng(seed)
        fa, fd, gb, gc = rng.uniform(-1.0, 1.0, size=(4, tables))
        s = fa * gb + fd * gb + fa * gc - fd * gc
        if np.abs(s).max() > 2.0 + 1e-12:
            return False, f"product table reached |S| = {np.abs(s).max()}"
        quad = rng.uniform(-1.0, 1.0, size=(4, 200))
        for u, v, x, y in quad.T:
            if not chsh_bound_identity(u, v, x, y):
                return False, "bound identity failed"
        return True, (f"8 deterministic tables and {tables} product tables "
                      f"never violate; max |S| = {np.abs(s).max():.4f}")

    return _timed(11, "inequality enumeration oracles", run)


def _product_form_bruteforce(p11, p22, p12) -> bool:
    """Independent oracle: exhaust trinary factor tables."""
    vals = (-1.0, 0.0, 1.0)
    for f1, f2, g1, g2 in product(vals, repeat=4):
        if f1 * g1 == p11 and f2 * g2 == p22 and f1 * g2 == p12:
            return True
    return False


def criterion_12(tables=1000, seed=112) -> AcceptanceResult:
    def run():
        singlet = product_form_consistency(-1.0, -1.0, 0.0)
        rank1 = product_form_consistency(-1.0, -1.0, -1.0)
        if singlet.consistent or not rank1.consistent:
            return False, "fixed cases wrong"
        rng = np.random.default_rng(seed)
        for _ in range(tables):
            p11, p22, p12 = rng.choice([-1.0, 0.0, 1.0], size=3)
            got = product_form_consistency(p11, p22, p12).consistent
            want = _product_form_bruteforce(p11, p22, p12)
            if got != want:
                return False, f"mismatch at ({p11},{p22},{p12}): {got} vs {want}"
        return True, (f"singlet values inconsistent, rank-1 consistent, "
                      f"{tables} random tables agree with brute force")

    return _timed(12, "product-form contradiction", run)


def criterion_13(resolution=10**6) -> AcceptanceResult:
    def run():
        vec = np.ones(3) / math.sqrt(3.0)
        general = change_of_variables_demo(vec, vec, resolution=resolution)
        identity = change_of_variables_demo([1, 0, 0], [1, 0, 0],
                                            resolution=resolution)
        ok = general["abs_diff"] <= 1e-8 and identity["abs_diff"] <= 1e-12
        return ok, (f"general diff {general['abs_diff']:.2e} "
                    f"({general['points']} points), identity diff "
                    f"{identity['abs_diff']:.2e}")

    return _timed(13, "change-of-variables agreement", run)


def criterion_14(K=8, trials=10**6, seed=114) -> AcceptanceResult:
    def run():
        grid = GridSpec(K)
        config = ExperimentConfig(
            grid=grid,
            pairs=((coplanar_setting(0.0), coplanar_setting(60.0)),),
            trials=trials, seed=seed,
        )
        rep = modulated_run(config, "rademacher")[0]
        bound = 4.0 / math.sqrt(trials)
        ok = rep["product_invariant"] and abs(rep["mean_a"]) <= bound
        return ok, (f"product invariant = {rep['product_invariant']}, "
                    f"|E(A_r)| = {abs(rep['mean_a']):.2e} <= {bound:.2e}")

    return _timed(14, "single-side modulator", run)


ALL_CRITERIA = (
    criterion_01, criterion_02, criterion_03, criterion_04, criterion_05,
    criterion_06, criterion_07, criterion_08, criterion_09, criterion_10,
    criterion_11, criterion_12, criterion_13, criterion_14,
)


def run_all(knots=None, trials=None, layers=None) -> list[AcceptanceResult]:
    """Run the full battery, optionally scaling the expensive knobs."""
    kwargs_by_cid: dict[int, dict] = {i: {} for i in range(1, 15)}
    if knots:
        kwargs_by_cid[1]["knots"] = tuple(knots)
        kwargs_by_cid[2]["knots"] = tuple(knots)
        kwargs_by_cid[3]["knots"] = tuple(knots)
    if trials:
        for cid in (4, 6, 7, 8, 9, 14):
            kwargs_by_cid[cid]["trials"] = trials
    if layers:
        kwargs_by_cid[10]["layers"] = layers
    return [fn(**kwargs_by_cid[cid]) for cid, fn in enumerate(ALL_CRITERIA, start=1)]
