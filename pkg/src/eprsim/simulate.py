"""Trial-level Monte Carlo experiment driver.

A trial samples one layer, one massed cell within it (categorical in the
cell masses), and a uniform point inside that cell; the stations then map
their own coordinate and setting to +/-1.  Sampling uses the normalized
measure, whose total differs from one by less than epsilon, so every
statistical acceptance window carries an epsilon slack.

Reproducibility: the root seed, the pair index and the batch index feed a
``numpy.random.SeedSequence`` entropy tuple; trial ``i`` of a batch always
consumes position ``i`` of each pre-generated array, so results do not
depend on the worker count.  The hot per-trial work happens in
:mod:`eprsim._kernels`; the categorical sampling shortcut there draws the
selected chunk's host cell from its exact marginal law (uniform over the
off-strip pool), which coincides with sampling a full injection and then
one cell.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _kernels
from .layers import (
    INV_PERM_TABLE,
    LayerSpec,
    build_layer_measure,
    layer_station_a,
    layer_station_b,
    sample_layer,
)
from .measure import (
    GridSpec,
    anticorrelation_defect,
    build_base_measure,
    component_masses,
    exact_pair_expectation,
    sign_pm,
    unit_vector,
)

BATCH_SIZE = 1 << 16

# asymptotic Kolmogorov-Smirnov critical coefficient at the 99% level
KS_COEFF_99 = math.sqrt(-math.log(0.01 / 2.0) / 2.0)


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSpec
    pairs: tuple[tuple[np.ndarray, np.ndarray], ...]
    trials: int
    seed: int
    workers: int = 1

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        pairs = tuple((unit_vector(a), unit_vector(b)) for a, b in self.pairs)
        object.__setattr__(self, "pairs", pairs)


@dataclass(frozen=True)
class CorrelationEstimate:
    """Monte Carlo estimate of one pair correlation."""

    a: np.ndarray
    b: np.ndarray
    n: int
    sum_ab: int

    @property
    def mean(self) -> float:
        return self.sum_ab / self.n

    @property
    def stderr(self) -> float:
        return math.sqrt(max(1.0 - self.mean**2, 0.0) / self.n)


@dataclass(frozen=True)
class HiddenState:
    layer: LayerSpec
    u: float
    v: float
    cell: tuple[int, int]


@dataclass(frozen=True)
class TrialRecord:
    state: HiddenState
    outcome_a: int
    outcome_b: int


def draw_trial(rng: np.random.Generator, grid: GridSpec, a, b) -> TrialRecord:
    """Sample one full trial, constructing the complete layer.

    Draw order: layer (see :func:`eprsim.layers.sample_layer`), one uniform
    for the cell categorical, then the two in-cell offsets.
    """
    a = unit_vector(a)
    b = unit_vector(b)
    spec = sample_layer(rng, grid)
    measure = build_layer_measure(grid, a, b, spec)
    cells = list(measure.cells.items())
    masses = np.array([mass for _, mass in cells])
    cum = np.cumsum(masses / masses.sum())
    cum[-1] = 1.0
    idx = int(np.searchsorted(cum, rng.random(), side="right"))
    (col, row), _ = cells[idx]
    u = col - 3 + rng.random()
    v = row - 3 + rng.random()
    return TrialRecord(
        state=HiddenState(layer=spec, u=u, v=v, cell=(col, row)),
        outcome_a=layer_station_a(grid, spec, a, u),
        outcome_b=layer_station_b(grid, spec, b, v),
    )


def _categorical_cumulative(grid: GridSpec, a: np.ndarray, b: np.ndarray):
    """Cumulative cell-choice probabilities: components 1..3, then chunks."""
    comp_mass = np.abs(a) * np.abs(b)
    _, chunk = component_masses(grid, a, b)
    masses = np.concatenate([comp_mass, chunk])
    total = masses.sum()
    cum = np.cumsum(masses / total)
    cum[-1] = 1.0
    return cum, float(total)


def _run_batch(grid, sa, sb, cum, seed_tuple, count, offset,
               u_out=None, a_out=None, modulator=None):
    """Generate one batch of trials and return its integer tallies.

    Fixed draw order: block column/row, labeling indices, raw host
    column/row, categorical uniform, two in-cell offsets, modulator stream.
    """
    m = grid.m
    rng = np.random.default_rng(np.random.SeedSequence(seed_tuple))
    bj = rng.integers(0, m + 1, size=count)
    bk = rng.integers(0, m + 1, size=count)
    cp = rng.integers(0, 6, size=count)
    rp = rng.integers(0, 6, size=count)
    colraw = rng.integers(0, 3 * m, size=count)
    rowraw = rng.integers(0, 3 * m, size=count)
    cat_u = rng.random(count)
    ufrac = rng.random(count)
    vfrac = rng.random(count)

    out_a, out_b, out_u, _ = _kernels.trial_outcomes(
        bj, bk, cp, rp, cat_u, colraw, rowraw, ufrac, vfrac,
        cum, sa, sb, INV_PERM_TABLE, m,
    )
    ab = out_a * out_b
    tallies = {
        "n": count,
        "sum_ab": int(ab.sum(dtype=np.int64)),
        "sum_a": int(out_a.sum(dtype=np.int64)),
        "sum_b": int(out_b.sum(dtype=np.int64)),
        "n_disagree": int(np.count_nonzero(ab == 1)),
    }
    if modulator is not None:
        z = rng.random(count)
        idx = np.arange(offset, offset + count, dtype=np.int64)
        r = np.asarray(modulator(idx, z))
        if r.shape != (count,) or not np.all(np.abs(r) == 1):
            raise ValueError("modulator must return one value of +/-1 per trial")
        r = r.astype(np.int8)
        ab_mod = (out_a * r) * (out_b * r)
        tallies["sum_a_mod"] = int((out_a * r).sum(dtype=np.int64))
        tallies["sum_b_mod"] = int((out_b * r).sum(dtype=np.int64))
        tallies["sum_ab_mod"] = int(ab_mod.sum(dtype=np.int64))
        tallies["product_invariant"] = bool(np.array_equal(ab_mod, ab))
    if u_out is not None:
        u_out[offset : offset + count] = out_u
        a_out[offset : offset + count] = out_a
    return tallies


def _run_pair(grid, a, b, trials, seed, pair_index=0, workers=1,
              collect_u=False, modulator=None):
    """Run all batches of one setting pair and merge integer tallies."""
    a = unit_vector(a)
    b = unit_vector(b)
    cum, total = _categorical_cumulative(grid, a, b)
    sa = np.asarray(sign_pm(a), dtype=np.int64)
    sb = np.asarray(sign_pm(b), dtype=np.int64)
    u_out = np.empty(trials) if collect_u else None
    a_out = np.empty(trials, dtype=np.int8) if collect_u else None

    jobs = []
    offset = 0
    batch_index = 0
    while offset < trials:
        count = min(BATCH_SIZE, trials - offset)
        jobs.append(((seed, pair_index, batch_index), count, offset))
        offset += count
        batch_index += 1

    def run(job):
        seed_tuple, count, off = job
        return _run_batch(grid, sa, sb, cum, seed_tuple, count, off,
                          u_out=u_out, a_out=a_out, modulator=modulator)

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    merged = {"n": 0, "sum_ab": 0, "sum_a": 0, "sum_b": 0, "n_disagree": 0,
              "total_mass": total}
    if modulator is not None:
        merged.update({"sum_a_mod": 0, "sum_b_mod": 0, "sum_ab_mod": 0,
                       "product_invariant": True})
    for res in results:
        for key, val in res.items():
            if key == "product_invariant":
                merged[key] = merged[key] and val
            else:
                merged[key] += val
    if collect_u:
        merged["u"] = u_out
        merged["a_outcomes"] = a_out
    return merged


def run_experiment(config: ExperimentConfig) -> list[CorrelationEstimate]:
    """Monte Carlo correlation estimate for every configured pair."""
    estimates = []
    for pair_index, (a, b) in enumerate(config.pairs):
        tallies = _run_pair(
            config.grid, a, b, config.trials, config.seed,
            pair_index=pair_index, workers=config.workers,
        )
        estimates.append(
            CorrelationEstimate(a=a, b=b, n=tallies["n"], sum_ab=tallies["sum_ab"])
        )
    return estimates


def equal_setting_audit(grid: GridSpec, a, trials: int, seed: int,
                        workers: int = 1) -> dict:
    """Frequency of perfect anti-correlation at equal settings.

    The empirical violation frequency must match the exact defect measure
    (normalized) and the anti-correlation frequency must stay above
    ``1 - epsilon`` minus sampling slack.
    """
    a = unit_vector(a)
    tallies = _run_pair(grid, a, a, trials, seed, workers=workers)
    n = tallies["n"]
    freq_violate = tallies["n_disagree"] / n
    anti_freq = 1.0 - freq_violate
    defect = anticorrelation_defect(grid, a)
    total = build_base_measure(grid, a, a).total
    predicted = defect / total
    sigma_pred = math.sqrt(max(predicted * (1 - predicted), 1e-300) / n)
    sigma_anti = math.sqrt(anti_freq * (1 - anti_freq) / n)
    return {
        "n": n,
        "anti_corr_frequency": anti_freq,
        "violation_frequency": freq_violate,
        "exact_defect": defect,
        "predicted_violation": predicted,
        "defect_match": abs(freq_violate - predicted) <= 5 * sigma_pred,
        "bound": grid.epsilon,
        "pass": anti_freq >= 1.0 - grid.epsilon - 4 * sigma_anti,
    }


# --- single-side modulators ------------------------------------------------

def modulator_identity(idx: np.ndarray, z: np.ndarray) -> np.ndarray:
    return np.ones_like(idx, dtype=np.int8)


def modulator_rademacher(idx: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Symmetric +/-1 from the seeded per-trial stream."""
    return np.where(z < 0.5, -1, 1).astype(np.int8)


def modulator_alternating(idx: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Deterministic +/-1 by trial parity."""
    return (1 - 2 * (idx % 2)).astype(np.int8)


MODULATORS = {
    "identity": modulator_identity,
    "rademacher": modulator_rademacher,
    "alternating": modulator_alternating,
}


def modulated_run(config: ExperimentConfig, modulator) -> list[dict]:
    """Run with both outcomes multiplied by the same +/-1 modulator.

    The product of outcomes is unchanged trial by trial, while the single
    side means follow the modulator (zero for the symmetric choices).
    """
    if isinstance(modulator, str):
        modulator = MODULATORS[modulator]
    reports = []
    for pair_index, (a, b) in enumerate(config.pairs):
        tallies = _run_pair(
            config.grid, a, b, config.trials, config.seed,
            pair_index=pair_index, workers=config.workers, modulator=modulator,
        )
        n = tallies["n"]
        reports.append({
            "a": a.tolist(), "b": b.tolist(), "n": n,
            "mean_a": tallies["sum_a_mod"] / n,
            "mean_b": tallies["sum_b_mod"] / n,
            "mean_ab": tallies["sum_ab_mod"] / n,
            "mean_a_plain": tallies["sum_a"] / n,
            "mean_b_plain": tallies["sum_b"] / n,
            "product_invariant": tallies["product_invariant"]
            and tallies["sum_ab_mod"] == tallies["sum_ab"],
        })
    return reports


def correlation_curve(grid: GridSpec, a, plane_normal, steps: int,
                      trials: int, seed: int, workers: int = 1) -> list[dict]:
    """Sweep the second setting through the plane orthogonal to ``normal``.

    Rows carry the angle, the quantum value ``-cos``, the exact closed-form
    expectation and the Monte Carlo estimate.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    a = unit_vector(a)
    normal = np.asarray(plane_normal, dtype=np.float64)
    w = np.cross(normal, a)
    norm = np.linalg.norm(w)
    if norm < 1e-9:
        raise ValueError("plane normal must not be parallel to the setting")
    w /= norm
    rows = []
    for i, angle in enumerate(np.linspace(0.0, 180.0, steps)):
        theta = math.radians(angle)
        b = unit_vector(math.cos(theta) * a + math.sin(theta) * w)
        tallies = _run_pair(grid, a, b, trials, seed, pair_index=i,
                            workers=workers)
        est = CorrelationEstimate(a=a, b=b, n=tallies["n"],
                                  sum_ab=tallies["sum_ab"])
        rows.append({
            "angle_deg": float(angle),
            "quantum": float(-(a @ b)),
            "exact": exact_pair_expectation(grid, a, b),
            "mc_mean": est.mean,
            "mc_stderr": est.stderr,
            "n": est.n,
        })
    return rows


def marginal_shift_audit(grid: GridSpec, a, b, c, trials: int, seed: int,
                         workers: int = 1) -> dict:
    """Check that station 1 cannot see the remote setting change b -> c.

    Compares the station-1 coordinate samples from runs under (a, b) and
    (a, c) with a two-sample Kolmogorov-Smirnov test at the 99% level,
    compares the outcome means within ``4 sigma + epsilon``, and checks the
    coordinate marginal against the uniform law on the parameter interval.
    """
    a = unit_vector(a)
    b = unit_vector(b)
    c = unit_vector(c)
    run_b = _run_pair(grid, a, b, trials, seed, pair_index=0,
                      workers=workers, collect_u=True)
    run_c = _run_pair(grid, a, c, trials, seed, pair_index=1,
                      workers=workers, collect_u=True)
    n1 = run_b["n"]
    n2 = run_c["n"]

    ks = stats.ks_2samp(run_b["u"], run_c["u"], method="asymp")
    ks_threshold = KS_COEFF_99 * math.sqrt((n1 + n2) / (n1 * n2))

    mean1 = run_b["sum_a"] / n1
    mean2 = run_c["sum_a"] / n2
    se1 = math.sqrt(max(1.0 - mean1**2, 0.0) / n1)
    se2 = math.sqrt(max(1.0 - mean2**2, 0.0) / n2)
    delta_tol = 4.0 * math.sqrt(se1**2 + se2**2) + grid.epsilon

    span = grid.u_max - grid.u_min
    uniform = stats.kstest(run_b["u"], stats.uniform(loc=grid.u_min,
                                                     scale=span).cdf)
    uniform_threshold = KS_COEFF_99 / math.sqrt(n1)

    passed = (ks.statistic < ks_threshold
              and abs(mean1 - mean2) <= delta_tol
              and uniform.statistic < uniform_threshold)
    return {
        "n": n1,
        "ks_statistic": float(ks.statistic),
        "ks_pvalue": float(ks.pvalue),
        "ks_threshold": ks_threshold,
        "mean_a_under_b": mean1,
        "mean_a_under_c": mean2,
        "delta_mean_a": abs(mean1 - mean2),
        "delta_tolerance": delta_tol,
        "uniform_ks_statistic": float(uniform.statistic),
        "uniform_ks_threshold": uniform_threshold,
        "pass": bool(passed),
    }
