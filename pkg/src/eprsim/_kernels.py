"""Hot inner loops: per-trial outcome generation and layer-mass accumulation.

Every kernel exists twice: a numba ``@njit`` scalar loop and a vectorized
pure-numpy twin.  The active implementation is picked at import time; set
``EPRSIM_DISABLE_NUMBA=1`` to force the numpy path (it is also used
automatically when numba is unavailable).  Both paths consume the same
pre-generated random arrays, so ``trial_outcomes`` is bit-identical across
paths.  ``benchmarks/bench_kernels.py`` times one against the other.

Conventions shared by all kernels: grid positions count cells from 0 (cell
start ``= position - 3``), the block occupies positions ``[3*bj, 3*bj + 3)``
where ``bj = q_col + 1``, and raw host draws in ``[0, 3m)`` skip the block
by shifting up three positions.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

NUMBA_ENABLED = HAVE_NUMBA and os.environ.get("EPRSIM_DISABLE_NUMBA", "0") != "1"


def _trial_outcomes_loop(
    bj, bk, cp, rp, cat_u, colraw, rowraw, ufrac, vfrac,
    cum, sa, sb, inv_perm, m,
    out_a, out_b, out_u, out_v,
):
    n = bj.shape[0]
    ncat = cum.shape[0]
    for i in range(n):
        # first category whose cumulative probability exceeds the draw
        lo = 0
        hi = ncat
        x = cat_u[i]
        while lo < hi:
            mid = (lo + hi) // 2
            if x < cum[mid]:
                hi = mid
            else:
                lo = mid + 1
        idx = lo

        if idx < 3:
            # component mass inside the block, at the cell labeled idx+1
            ustart = 3 * bj[i] + inv_perm[cp[i], idx] - 3
            vstart = 3 * bk[i] + inv_perm[rp[i], idx] - 3
            a_val = sa[idx]
            b_val = -sb[idx]
        else:
            # weight chunk on a uniform off-strip host cell
            pc = colraw[i] if colraw[i] < 3 * bj[i] else colraw[i] + 3
            pr = rowraw[i] if rowraw[i] < 3 * bk[i] else rowraw[i] + 3
            ustart = pc - 3
            vstart = pr - 3
            phase = ustart + 3 * bj[i] if ustart < 0 else ustart
            a_val = -1 if (phase % 2 == 0 and ufrac[i] < 0.5) else 1
            phase = vstart + 3 * bk[i] if vstart < 0 else vstart
            b_val = -1 if ((phase % 2 == 0) == (vfrac[i] < 0.5)) else 1

        out_a[i] = a_val
        out_b[i] = b_val
        out_u[i] = ustart + ufrac[i]
        out_v[i] = vstart + vfrac[i]


if HAVE_NUMBA:
    _trial_outcomes_numba_impl = njit(cache=True, nogil=True)(_trial_outcomes_loop)


def trial_outcomes_numba(
    bj, bk, cp, rp, cat_u, colraw, rowraw, ufrac, vfrac, cum, sa, sb, inv_perm, m
):
    if not HAVE_NUMBA:
        raise RuntimeError("numba is not available")
    n = bj.shape[0]
    out_a = np.empty(n, dtype=np.int8)
    out_b = np.empty(n, dtype=np.int8)
    out_u = np.empty(n, dtype=np.float64)
    out_v = np.empty(n, dtype=np.float64)
    _trial_outcomes_numba_impl(
        bj, bk, cp, rp, cat_u, colraw, rowraw, ufrac, vfrac,
        cum, sa, sb, inv_perm, m, out_a, out_b, out_u, out_v,
    )
    return out_a, out_b, out_u, out_v


def trial_outcomes_numpy(
    bj, bk, cp, rp, cat_u, colraw, rowraw, ufrac, vfrac, cum, sa, sb, inv_perm, m
):
    idx = np.searchsorted(cum, cat_u, side="right")
    comp = np.minimum(idx, 2)

    # block branch
    ustart_m1 = 3 * bj + inv_perm[cp, comp] - 3
    vstart_m1 = 3 * bk + inv_perm[rp, comp] - 3
    a_m1 = sa[comp]
    b_m1 = -sb[comp]

    # host branch
    pc = np.where(colraw < 3 * bj, colraw, colraw + 3)
    pr = np.where(rowraw < 3 * bk, rowraw, rowraw + 3)
    ustart_h = pc - 3
    vstart_h = pr - 3
    phase_u = np.where(ustart_h < 0, ustart_h + 3 * bj, ustart_h)
    phase_v = np.where(vstart_h < 0, vstart_h + 3 * bk, vstart_h)
    a_h = np.where((phase_u % 2 == 0) & (ufrac < 0.5), -1, 1)
    b_h = np.where((phase_v % 2 == 0) == (vfrac < 0.5), -1, 1)

    is_m1 = idx < 3
    out_a = np.where(is_m1, a_m1, a_h).astype(np.int8)
    out_b = np.where(is_m1, b_m1, b_h).astype(np.int8)
    ustart = np.where(is_m1, ustart_m1, ustart_h)
    vstart = np.where(is_m1, vstart_m1, vstart_h)
    return out_a, out_b, ustart + ufrac, vstart + vfrac


def _accumulate_layer_loop(
    bj, bk, cp, rp, hosts, comp_mass, chunk, inv_perm, m, side, sums, sq_sums
):
    count = bj.shape[0]
    nchunk = hosts.shape[1]
    for i in range(count):
        for c in range(3):
            col = 3 * bj[i] + inv_perm[cp[i], c]
            row = 3 * bk[i] + inv_perm[rp[i], c]
            w = comp_mass[c]
            sums[row * side + col] += w
            sq_sums[row * side + col] += w * w
        for t in range(nchunk):
            pcol = hosts[i, t] % (3 * m)
            prow = hosts[i, t] // (3 * m)
            col = pcol if pcol < 3 * bj[i] else pcol + 3
            row = prow if prow < 3 * bk[i] else prow + 3
            w = chunk[t]
            sums[row * side + col] += w
            sq_sums[row * side + col] += w * w


if HAVE_NUMBA:
    _accumulate_layer_numba_impl = njit(cache=True, nogil=True)(_accumulate_layer_loop)


def accumulate_layer_masses_numba(
    bj, bk, cp, rp, hosts, comp_mass, chunk, inv_perm, m, side, sums, sq_sums
):
    if not HAVE_NUMBA:
        raise RuntimeError("numba is not available")
    _accumulate_layer_numba_impl(
        bj, bk, cp, rp, hosts, comp_mass, chunk, inv_perm, m, side, sums, sq_sums
    )


def accumulate_layer_masses_numpy(
    bj, bk, cp, rp, hosts, comp_mass, chunk, inv_perm, m, side, sums, sq_sums
):
    count = bj.shape[0]
    ncells = side * side

    cols = 3 * bj[:, None] + inv_perm[cp]          # (count, 3)
    rows = 3 * bk[:, None] + inv_perm[rp]
    flat = (rows * side + cols).ravel()
    w = np.broadcast_to(comp_mass, (count, 3)).ravel()
    sums += np.bincount(flat, weights=w, minlength=ncells)
    sq_sums += np.bincount(flat, weights=w * w, minlength=ncells)

    pcol = hosts % (3 * m)
    prow = hosts // (3 * m)
    cols = np.where(pcol < 3 * bj[:, None], pcol, pcol + 3)
    rows = np.where(prow < 3 * bk[:, None], prow, prow + 3)
    flat = (rows * side + cols).ravel()
    w = np.broadcast_to(chunk, hosts.shape).ravel()
    sums += np.bincount(flat, weights=w, minlength=ncells)
    sq_sums += np.bincount(flat, weights=w * w, minlength=ncells)


if NUMBA_ENABLED:
    trial_outcomes = trial_outcomes_numba
    accumulate_layer_masses = accumulate_layer_masses_numba
else:
    trial_outcomes = trial_outcomes_numpy
    accumulate_layer_masses = accumulate_layer_masses_numpy
