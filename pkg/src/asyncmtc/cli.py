"""Command line interface: ``asyncmtc {run,trace,curves,selftest}``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
from pathlib import Path
import sys

import numpy as np

from . import harness
from .continuation import ContinuationOptions, rho_max
from .dictionary import ExtendedDictionary
from .model import SystemConfig
from .oracles import proximal_gradient
from .solver import SolverOptions, bcd_solve, block_update

logger = logging.getLogger("asyncmtc")


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="JSON experiment config")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--trials", type=int, help="Monte Carlo trials per sweep point")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asyncmtc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo campaign")
    _common(run)

    trace = sub.add_parser("trace", help="per-sweep objective and gap of one BCD solve")
    _common(trace)

    curves = sub.add_parser("curves", help="error probabilities versus preamble length")
    _common(curves)
    curves.add_argument("--lengths", type=_int_list, default=[10, 15, 20, 25])
    curves.add_argument("--antennas", type=_int_list, default=[32, 128])

    sub.add_parser("selftest", help="quick oracle cross-checks")
    return parser


def _spec(args) -> harness.ExperimentSpec:
    return harness.load_spec(args.config, master_seed=args.seed, num_trials=args.trials,
                             jobs=args.jobs)


def cmd_run(args) -> int:
    spec = _spec(args)
    spec.out_dir = str(args.out)
    records = harness.run_experiment(spec)
    if spec.sweep_axis is not None:
        harness.emit_error_curves(records, args.out / "curves.csv")
    for rec in records:
        a = rec.aggregate
        print(f"{rec.sweep_axis or 'point'}={rec.sweep_value}: trials={a.num_trials} "
              f"P_err={a.detection_error_prob:.4f} P_md={a.missed_detection_prob:.4f} "
              f"P_fa={a.false_alarm_prob:.4f}")
    print(f"results written to {args.out}")
    return 0


def cmd_trace(args) -> int:
    spec = _spec(args)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "convergence.csv"
    info = harness.emit_convergence_trace(path, spec.config, spec.master_seed,
                                          spec.solver, spec.continuation)
    print(f"trace written to {path} (rho={info['rho']:.4g}, "
          f"reference sweeps={info['reference_sweeps']})")
    return 0 if info["reference_converged"] else 1


def cmd_curves(args) -> int:
    base = _spec(args)
    for m in args.antennas:
        spec = dataclasses.replace(
            base,
            config=dataclasses.replace(base.config, num_antennas=m),
            sweep_axis="preamble_len",
            sweep_values=tuple(args.lengths),
            out_dir=str(args.out / f"M{m}"),
        )
        records = harness.run_experiment(spec)
        path = harness.emit_error_curves(records, args.out / f"curves_M{m}.csv")
        print(f"M={m}: wrote {path}")
        for value, p_err, p_md, p_fa in harness.error_curve_rows(records):
            print(f"  L={value}: P_err={p_err:.4f} P_md={p_md:.4f} P_fa={p_fa:.4f}")
    return 0


def _selftest_checks():
    rng = np.random.default_rng(2024)

    # scalar instance: (2 - x)^2 + x is minimized at x = 1.5
    y = np.array([[2.0], [2.0]], dtype=complex)
    x = block_update(np.ones(2, dtype=complex), 0, y, rho=1.0, p=1.0)
    yield "block update matches scalar calculus", abs(x[0] - 1.5) < 1e-12

    pre = np.exp(2j * np.pi * rng.uniform(size=(4, 3)))
    d = ExtendedDictionary(pre, 2)
    r = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
    dense = d.dense()
    ok = all(np.allclose(d.matched_filter(n, t, r), dense[:, d.column_index(n, t)].conj() @ r,
                         atol=1e-12) for n in range(4) for t in range(3))
    yield "matched filter matches dense product", ok

    worst = 0.0
    for _ in range(5):
        pre = np.exp(2j * np.pi * rng.uniform(size=(6, 8)))
        d = ExtendedDictionary(pre, 2)
        y = rng.standard_normal((10, 3)) + 1j * rng.standard_normal((10, 3))
        rho = 0.3 * rho_max(y, d, 1.0)
        st = bcd_solve(y, d, rho, 1.0, SolverOptions(rel_tol=1e-14, max_sweeps=20_000))
        _, f_ref = proximal_gradient(d.dense(), y, 1.0, rho)
        worst = max(worst, abs(st.objective - f_ref) / f_ref)
    yield "BCD optimum matches proximal gradient", worst < 1e-6

    cfg = SystemConfig(noise_var=0.0, num_active=2, num_antennas=16)
    spec = harness.ExperimentSpec(config=cfg, num_trials=3,
                                  continuation=ContinuationOptions(debias=True))
    rows = harness.run_experiment(spec)[0].rows
    yield "noiseless detection is exact", all(not r["detection_error"] for r in rows)
    again = harness.run_experiment(spec)[0].rows
    yield "campaign rows are reproducible", harness.dump_rows(rows) == harness.dump_rows(again)


def cmd_selftest(args) -> int:
    failed = 0
    for name, ok in _selftest_checks():
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")
        failed += not ok
    return 1 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "trace": cmd_trace, "curves": cmd_curves,
               "selftest": cmd_selftest}[args.command]
    try:
        return handler(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
