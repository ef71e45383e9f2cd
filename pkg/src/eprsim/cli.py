"""Command-line interface: computations, audits and the acceptance battery.

Exit codes: 0 on success/pass, 1 when a checked bound or acceptance rule
fails, 2 on invalid input.  Reports are JSON envelopes (or CSV for the
tabular commands) with full-precision numbers; byte output is deterministic
for fixed inputs (set ``SOURCE_DATE_EPOCH`` to pin the timestamp).  Relative
output paths resolve against ``EPRSIM_OUTPUT_DIR`` when it is set.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time

import numpy as np

from . import __version__, acceptance
from .bspline import BasisSet, KnotGrid, verify_expansion_bound
from .inequalities import (
    Correlation,
    bell_check,
    change_of_variables_demo,
    chsh_check,
    coplanar_setting,
    product_form_consistency,
    quantum_prediction,
    uniform_test_density,
)
from .layers import count_layers, density_uniformity_audit, layer_count_formula
from .measure import (
    GridSpec,
    anticorrelation_defect,
    build_base_measure,
    exact_pair_expectation,
    unit_vector,
)
from .simulate import (
    ExperimentConfig,
    correlation_curve,
    marginal_shift_audit,
    run_experiment,
)
from .acceptance import _product_form_bruteforce


def _parse_vector(text: str) -> np.ndarray:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected 3 comma-separated components, got {text!r}")
    return unit_vector(parts)


def _parse_floats(text: str, count: int) -> list[float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != count:
        raise ValueError(f"expected {count} comma-separated values, got {text!r}")
    return parts


def _grid(args) -> GridSpec:
    if getattr(args, "epsilon", None) is not None:
        return GridSpec(args.knots, args.epsilon)
    return GridSpec(args.knots)


def _full_precision(obj):
    """Round-trip every float through 17 significant digits."""
    if isinstance(obj, float):
        return float(format(obj, ".17g"))
    if isinstance(obj, dict):
        return {k: _full_precision(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_full_precision(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _full_precision(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return _full_precision(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _emit(args, command: str, config: dict, payload: dict, passed: bool,
          csv_table: tuple[list[str], list[list]] | None = None) -> None:
    out_path = getattr(args, "out", None)
    fmt = getattr(args, "format", "json")
    if fmt == "csv":
        if csv_table is None:
            raise ValueError(f"command {command!r} has no CSV representation")
        header, rows = csv_table
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format(v, ".17g") if isinstance(v, float) else v
                             for v in row])
        text = buf.getvalue()
    else:
        stamp = os.environ.get("SOURCE_DATE_EPOCH")
        envelope = {
            "tool": "eprsim",
            "version": __version__,
            "command": command,
            "config": _full_precision(config),
            "timestamp": int(stamp) if stamp is not None else time.time(),
            "pass": passed,
            "payload": _full_precision(payload),
        }
        text = json.dumps(envelope, indent=2) + "\n"
    if out_path:
        base = os.environ.get("EPRSIM_OUTPUT_DIR", "")
        if base and not os.path.isabs(out_path):
            out_path = os.path.join(base, out_path)
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_lemma(args) -> int:
    basis = BasisSet(KnotGrid(args.knots))
    trunc = verify_expansion_bound(basis, args.resolution, truncated=True)
    exact = verify_expansion_bound(basis, args.resolution, truncated=False)
    passed = trunc["pass"] and exact["pass"]
    _emit(args, "lemma", {"knots": args.knots, "resolution": args.resolution},
          {"truncated": trunc, "exact_identity": exact}, passed)
    return 0 if passed else 1


def _measure_payload(grid: GridSpec, a, b) -> dict:
    measure = build_base_measure(grid, a, b)
    return {
        "K": grid.K,
        "m": grid.m,
        "a": list(a),
        "b": list(b),
        "M1": measure.m1,
        "M2": measure.m2,
        "total": measure.total,
        "expectation": exact_pair_expectation(grid, a, b),
        "defect": anticorrelation_defect(grid, a),
    }


def _cmd_expectation(args) -> int:
    grid = _grid(args)
    a, b = _parse_vector(args.a), _parse_vector(args.b)
    payload = _measure_payload(grid, a, b)
    passed = abs(payload["expectation"] + float(a @ b)) <= 1e-10
    _emit(args, "expectation", {"knots": grid.K, "a": list(a), "b": list(b)},
          payload, passed)
    return 0 if passed else 1


def _cmd_mass(args) -> int:
    grid = _grid(args)
    a, b = _parse_vector(args.a), _parse_vector(args.b)
    payload = _measure_payload(grid, a, b)
    upper = 1.0 + 3.0 / (8 * grid.K**2) + 1e-12
    passed = 1.0 - 1e-12 <= payload["total"] <= upper
    _emit(args, "mass", {"knots": grid.K, "a": list(a), "b": list(b)},
          payload, passed)
    return 0 if passed else 1


def _cmd_defect(args) -> int:
    grid = _grid(args)
    a = _parse_vector(args.a)
    defect = anticorrelation_defect(grid, a)
    bound = 3.0 / (8 * grid.K**2)
    passed = defect <= bound + 1e-15 and defect < grid.epsilon
    _emit(args, "defect", {"knots": grid.K, "a": list(a)},
          {"defect": defect, "bound": bound, "epsilon": grid.epsilon}, passed)
    return 0 if passed else 1


def _load_sim_config(args) -> ExperimentConfig:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        for key in ("knots", "seed", "trials", "pairs"):
            if key not in raw:
                raise ValueError(f"config missing required key {key!r}")
        grid = (GridSpec(raw["knots"], raw["epsilon"])
                if raw.get("epsilon") is not None else GridSpec(raw["knots"]))
        pairs = tuple((unit_vector(p["a"]), unit_vector(p["b"]))
                      for p in raw["pairs"])
        return ExperimentConfig(grid=grid, pairs=pairs, trials=raw["trials"],
                                seed=raw["seed"], workers=raw.get("workers", 1))
    if not (args.a and args.b):
        raise ValueError("need either --config or both --a and --b")
    grid = _grid(args)
    return ExperimentConfig(
        grid=grid, pairs=((_parse_vector(args.a), _parse_vector(args.b)),),
        trials=args.trials, seed=args.seed, workers=args.workers,
    )


def _cmd_simulate(args) -> int:
    config = _load_sim_config(args)
    estimates = run_experiment(config)
    rows = []
    payload_rows = []
    passed = True
    for est in estimates:
        exact = exact_pair_expectation(config.grid, est.a, est.b)
        quantum = quantum_prediction(est.a, est.b)
        abs_err = abs(est.mean - quantum)
        passed = passed and abs_err <= 4 * est.stderr + config.grid.epsilon
        rows.append([*est.a.tolist(), *est.b.tolist(), est.n, est.mean,
                     est.stderr, exact, quantum, abs_err])
        payload_rows.append({
            "a": est.a.tolist(), "b": est.b.tolist(), "n": est.n,
            "mean": est.mean, "stderr": est.stderr, "exact": exact,
            "quantum": quantum, "abs_err": abs_err,
        })
    header = ["ax", "ay", "az", "bx", "by", "bz", "n", "mean", "stderr",
              "exact", "quantum", "abs_err"]
    _emit(args, "simulate",
          {"knots": config.grid.K, "trials": config.trials,
           "seed": config.seed, "workers": config.workers,
           "pairs": [{"a": a.tolist(), "b": b.tolist()} for a, b in config.pairs]},
          {"estimates": payload_rows}, passed, csv_table=(header, rows))
    return 0 if passed else 1


def _cmd_curve(args) -> int:
    grid = _grid(args)
    a = _parse_vector(args.a)
    normal = [float(p) for p in args.normal.split(",")]
    rows = correlation_curve(grid, a, normal, args.steps, args.trials,
                             args.seed, workers=args.workers)
    passed = all(
        abs(r["exact"] - r["quantum"]) <= 1e-10
        and abs(r["mc_mean"] - r["quantum"]) <= 4 * r["mc_stderr"] + grid.epsilon
        for r in rows
    )
    header = ["angle_deg", "quantum", "exact", "mc_mean", "mc_stderr", "n"]
    table = [[r[k] for k in header] for r in rows]
    _emit(args, "curve",
          {"knots": grid.K, "a": list(a), "normal": normal,
           "steps": args.steps, "trials": args.trials, "seed": args.seed},
          {"rows": rows}, passed, csv_table=(header, table))
    return 0 if passed else 1


def _cmd_audit_uniformity(args) -> int:
    grid = _grid(args)
    a, b = _parse_vector(args.a), _parse_vector(args.b)
    rep = density_uniformity_audit(grid, a, b, args.layers, seed=args.seed)
    _emit(args, "audit-uniformity",
          {"knots": grid.K, "a": list(a), "b": list(b),
           "layers": args.layers, "seed": args.seed},
          rep, rep["pass"])
    return 0 if rep["pass"] else 1


def _cmd_audit_nosignal(args) -> int:
    grid = _grid(args)
    a, b, c = (_parse_vector(v) for v in (args.a, args.b, args.c))
    rep = marginal_shift_audit(grid, a, b, c, args.trials, args.seed,
                               workers=args.workers)
    _emit(args, "audit-nosignal",
          {"knots": grid.K, "a": list(a), "b": list(b), "c": list(c),
           "trials": args.trials, "seed": args.seed},
          rep, rep["pass"])
    return 0 if rep["pass"] else 1


def _cmd_layers_count(args) -> int:
    grid = _grid(args)
    counts = count_layers(grid)
    payload = {
        "m": grid.m,
        "block_positions": counts.block_positions,
        "labelings": counts.labelings,
        "host_subsets": str(counts.host_subsets),
        "host_arrangements": str(counts.host_arrangements),
        "unordered_total": str(counts.unordered_total),
        "ordered_total": str(counts.ordered_total),
        "convention": "chunks are distinguishable; unordered_total is the "
                      "bare subset count",
        "formula_n1_check": layer_count_formula(1),
    }
    _emit(args, "layers-count", {"knots": grid.K}, payload, True)
    return 0


def _angle_correlations(grid, angles, trials, seed, workers):
    """Pair correlations for a list of (station1, station2) angle pairs."""
    settings = [(coplanar_setting(t1), coplanar_setting(t2)) for t1, t2 in angles]
    if trials:
        config = ExperimentConfig(grid=grid, pairs=tuple(settings),
                                  trials=trials, seed=seed, workers=workers)
        return [Correlation(value=e.mean, stderr=e.stderr, source="monte_carlo")
                for e in run_experiment(config)], "monte_carlo"
    return [Correlation(value=quantum_prediction(a, b), source="quantum_formula")
            for a, b in settings], "quantum_formula"


def _cmd_bell(args) -> int:
    grid = _grid(args)
    ta, tb, tc = _parse_floats(args.angles, 3)
    corr, source = _angle_correlations(
        grid, [(tb, tc), (ta, tb), (ta, tc)], args.trials, args.seed, args.workers)
    p_bc, p_ab, p_ac = corr
    report = bell_check(p_bc, p_ab, p_ac)
    payload = {
        "angles_deg": [ta, tb, tc], "source": source,
        "P_bc": p_bc.value, "P_ab": p_ab.value, "P_ac": p_ac.value,
        "stderr": [p_bc.stderr, p_ab.stderr, p_ac.stderr],
        "lhs": report.lhs, "rhs": report.rhs, "slack": report.slack,
        "tolerance": report.tolerance, "violated": report.violated,
    }
    _emit(args, "bell",
          {"knots": grid.K, "angles": [ta, tb, tc], "trials": args.trials,
           "seed": args.seed},
          payload, report.violated)
    return 0 if report.violated else 1


def _cmd_chsh(args) -> int:
    grid = _grid(args)
    ta, td, tb, tc = _parse_floats(args.angles, 4)
    corr, source = _angle_correlations(
        grid, [(ta, tb), (td, tb), (ta, tc), (td, tc)],
        args.trials, args.seed, args.workers)
    report = chsh_check(*corr)
    payload = {
        "angles_deg": {"a": ta, "d": td, "b": tb, "c": tc}, "source": source,
        "P": [p.value for p in corr], "stderr": [p.stderr for p in corr],
        "S": corr[0].value + corr[1].value + corr[2].value - corr[3].value,
        "abs_S": report.lhs, "bound": report.rhs, "slack": report.slack,
        "tolerance": report.tolerance, "violated": report.violated,
    }
    _emit(args, "chsh",
          {"knots": grid.K, "angles": [ta, td, tb, tc], "trials": args.trials,
           "seed": args.seed},
          payload, report.violated)
    return 0 if report.violated else 1


def _cmd_appendix1(args) -> int:
    a, b = _parse_vector(args.a), _parse_vector(args.b)
    density = uniform_test_density if args.density == "uniform" else None
    rep = change_of_variables_demo(a, b, test_density=density,
                                   resolution=args.resolution)
    _emit(args, "appendix1",
          {"a": list(a), "b": list(b), "resolution": args.resolution,
           "density": args.density},
          rep, rep["pass"])
    return 0 if rep["pass"] else 1


def _cmd_appendix3(args) -> int:
    p11, p22, p12 = _parse_floats(args.correlations, 3)
    rep = product_form_consistency(p11, p22, p12)
    trinary = all(p in (-1.0, 0.0, 1.0) for p in (p11, p22, p12))
    agrees = (rep.consistent == _product_form_bruteforce(p11, p22, p12)
              if trinary else True)
    payload = {
        "correlations": [p11, p22, p12],
        "consistent": rep.consistent,
        "witness": list(rep.witness) if rep.witness else None,
        "reason": rep.reason,
        "bruteforce_agrees": agrees,
    }
    _emit(args, "appendix3", {"correlations": [p11, p22, p12]}, payload, agrees)
    return 0 if agrees else 1


def _cmd_selftest(args) -> int:
    knots = None
    if args.knots is not None:
        knots = [int(k) for k in args.knots.split(",") if k.strip()]
        if not knots:
            raise ValueError("empty knots list")
    results = acceptance.run_all(knots=knots, trials=args.trials,
                                 layers=args.layers)
    for res in results:
        print(res.line())
    passed = all(r.passed for r in results)
    print(f"selftest: {sum(r.passed for r in results)}/{len(results)} criteria passed")
    return 0 if passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eprsim",
        description="Setting-dependent measure construction for spin-pair "
                    "correlations: exact checks, Monte Carlo runs, audits.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(handler=fn)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--out", help="output path (default stdout)")
        return p

    p = add("lemma", _cmd_lemma, "scan the spline expansion residual bound")
    p.add_argument("--knots", type=int, default=8)
    p.add_argument("--resolution", type=int, default=1000)

    for name, fn in (("expectation", _cmd_expectation), ("mass", _cmd_mass)):
        p = add(name, fn, f"{name} of the base measure for one setting pair")
        p.add_argument("--knots", type=int, default=8)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--a", required=True)
        p.add_argument("--b", required=True)

    p = add("defect", _cmd_defect, "equal-setting anti-correlation defect")
    p.add_argument("--knots", type=int, default=8)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--a", required=True)

    p = add("simulate", _cmd_simulate, "Monte Carlo correlation estimates")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--knots", type=int, default=8)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)

    p = add("curve", _cmd_curve, "correlation sweep against the quantum curve")
    p.add_argument("--knots", type=int, default=8)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--a", default="1,0,0")
    p.add_argument("--normal", default="0,0,1")
    p.add_argument("--steps", type=int, default=7)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)

    p = add("audit-uniformity", _cmd_audit_uniformity,
            "averaged cell masses against the uniform density")
    p.add_argument("--knots", type=int, default=4)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--a", default="0.6,0.8,0")
    p.add_argument("--b", default="0.8,0.6,0")
    p.add_argument("--layers", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)

    p = add("audit-nosignal", _cmd_audit_nosignal,
            "station-1 marginal invariance under remote setting change")
    p.add_argument("--knots", type=int, default=4)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--a", default="1,0,0")
    p.add_argument("--b", default="0,1,0")
    p.add_argument("--c", default="0,0,1")
    p.add_argument("--trials", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)

    p = add("layers-count", _cmd_layers_count, "exact size of the layer family")
    p.add_argument("--knots", type=int, default=4)
    p.add_argument("--epsilon", type=float)

    p = add("bell", _cmd_bell, "three-setting inequality check")
    p.add_argument("--knots", type=int, default=8)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--angles", default="0,60,120",
                   help="angles of a, b, c in degrees (x-y plane)")
    p.add_argument("--trials", type=int, default=0,
                   help="Monte Carlo trials per pair (0 = quantum formula)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)

    p = add("chsh", _cmd_chsh, "four-setting inequality check")
    p.add_argument("--knots", type=int, default=8)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--angles", default="0,90,45,315",
                   help="angles of a, d, b, c in degrees (x-y plane)")
    p.add_argument("--trials", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)

    p = add("appendix1", _cmd_appendix1,
            "change-of-variables demonstration with the one-norm Jacobian")
    p.add_argument("--a", default="0.5773502691896258,0.5773502691896258,0.5773502691896258")
    p.add_argument("--b", default="0.5773502691896258,0.5773502691896258,0.5773502691896258")
    p.add_argument("--resolution", type=int, default=10**6)
    p.add_argument("--density", choices=("default", "uniform"), default="default")

    p = add("appendix3", _cmd_appendix3,
            "product-form consistency of basis-pair correlations")
    p.add_argument("--correlations", default="-1,-1,0",
                   help="P(e1,e1), P(e2,e2), P(e1,e2)")

    p = add("selftest", _cmd_selftest, "run the acceptance battery")
    p.add_argument("--knots", help="comma list for the exact-check criteria")
    p.add_argument("--trials", type=int)
    p.add_argument("--layers", type=int)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"eprsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
