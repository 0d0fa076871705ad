"""Seeded Monte Carlo campaigns, convergence traces and error-curve export.

Each trial's seed is derived from ``(master_seed, sweep_value, trial_index)``
by :class:`numpy.random.SeedSequence`, never from execution order, so a
campaign produces the same rows whatever the number of worker processes.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
import csv
import dataclasses
from dataclasses import asdict, dataclass, field
import hashlib
import json
import logging
import math
from pathlib import Path
import time
from typing import Iterable, Sequence

import numpy as np

from .continuation import ContinuationOptions, initial_rho, solve_with_continuation
from .dictionary import ExtendedDictionary
from .metrics import AggregateScore, TrialScore, aggregate, score_trial
from .model import SystemConfig, realize
from .solver import SolverOptions, bcd_solve

logger = logging.getLogger(__name__)

SWEEP_AXES = ("preamble_len", "num_antennas", "num_devices", "num_active", "max_delay")
REFERENCE_TOL = 1e-12


@dataclass
class ExperimentSpec:
    config: SystemConfig = field(default_factory=SystemConfig)
    solver: SolverOptions = field(default_factory=SolverOptions)
    continuation: ContinuationOptions = field(default_factory=ContinuationOptions)
    sweep_axis: str | None = None
    sweep_values: tuple[int, ...] = ()
    num_trials: int = 200
    jobs: int = 1
    master_seed: int = 0
    known_gains: bool = True
    out_dir: str | None = None

    def __post_init__(self):
        if self.num_trials < 1:
            raise ValueError("num_trials must be >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if self.sweep_axis is not None:
            if self.sweep_axis not in SWEEP_AXES:
                raise ValueError(f"cannot sweep {self.sweep_axis!r}; choose from {SWEEP_AXES}")
            if not self.sweep_values or any(int(v) != v or v <= 0 for v in self.sweep_values):
                raise ValueError("sweep values must be positive integers")
            self.sweep_values = tuple(int(v) for v in self.sweep_values)

    def points(self) -> list[tuple[int | None, SystemConfig]]:
        if self.sweep_axis is None:
            return [(None, self.config)]
        return [(v, dataclasses.replace(self.config, **{self.sweep_axis: v})) for v in self.sweep_values]


@dataclass
class ResultRecord:
    sweep_axis: str | None
    sweep_value: int | None
    config: SystemConfig
    config_hash: str
    master_seed: int
    rows: list[dict]
    aggregate: AggregateScore
    wall_time: float = 0.0


def config_hash(config: SystemConfig, sopts: SolverOptions, copts: ContinuationOptions, known_gains: bool) -> str:
    payload = {
        "system": asdict(config),
        "solver": asdict(sopts),
        "continuation": asdict(copts),
        "known_gains": known_gains,
    }
    blob = json.dumps(payload, sort_keys=True, default=repr)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def trial_seed(master_seed: int, sweep_value: int | None, trial: int) -> int:
    key = (0 if sweep_value is None else int(sweep_value), int(trial))
    ss = np.random.SeedSequence(master_seed, spawn_key=key)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def run_trial(config: SystemConfig, sopts: SolverOptions, copts: ContinuationOptions,
              known_gains: bool, seed: int) -> tuple[TrialScore, dict]:
    """Draw one realization from ``seed``, detect, and score it."""
    real = realize(config, seed)
    dictionary = ExtendedDictionary(real.preambles, config.max_delay)
    result = solve_with_continuation(
        real.received, dictionary, config.tx_power, copts, sopts,
        gains=real.truth.path_loss if known_gains else None,
        noise_var=config.noise_var,
    )
    info = {
        "rounds": result.rounds_used,
        "rho_final": result.rho_final,
        "sweeps": result.state.sweeps,
        "forced_feasible": result.forced_feasible,
        "solver_converged": bool(result.solver_converged),
    }
    return score_trial(result, real.truth), info


def _row(score: TrialScore, info: dict, sweep_value, trial: int, seed: int, chash: str) -> dict:
    row = score.as_dict()
    if math.isnan(row["channel_nmse"]):
        row["channel_nmse"] = None
    row.update(info)
    row.update(sweep_value=sweep_value, trial=trial, seed=seed, config_hash=chash)
    return row


def _run_task(task):
    config, sopts, copts, known_gains, seed = task
    try:
        return run_trial(config, sopts, copts, known_gains, seed)
    except Exception as exc:  # re-raised in the parent with the seed attached
        raise RuntimeError(f"trial with seed {seed} failed: {exc!r}") from exc


def run_experiment(spec: ExperimentSpec) -> list[ResultRecord]:
    """Run every sweep point of ``spec`` and return one record per point."""
    records = []
    pool = ProcessPoolExecutor(max_workers=spec.jobs) if spec.jobs > 1 else None
    try:
        for value, config in spec.points():
            chash = config_hash(config, spec.solver, spec.continuation, spec.known_gains)
            seeds = [trial_seed(spec.master_seed, value, i) for i in range(spec.num_trials)]
            tasks = [(config, spec.solver, spec.continuation, spec.known_gains, s) for s in seeds]
            start = time.perf_counter()
            if pool is None:
                outputs = list(map(_run_task, tasks))
            else:
                chunk = max(1, len(tasks) // (4 * spec.jobs))
                outputs = list(pool.map(_run_task, tasks, chunksize=chunk))
            elapsed = time.perf_counter() - start
            rows = [_row(score, info, value, i, seeds[i], chash)
                    for i, (score, info) in enumerate(outputs)]
            agg = aggregate([score for score, _ in outputs])
            logger.info("%s=%s: %d trials, P_err=%.4f, P_md=%.4f, P_fa=%.4f (%.1fs)",
                        spec.sweep_axis, value, len(rows), agg.detection_error_prob,
                        agg.missed_detection_prob, agg.false_alarm_prob, elapsed)
            records.append(ResultRecord(spec.sweep_axis, value, config, chash,
                                        spec.master_seed, rows, agg, elapsed))
    finally:
        if pool is not None:
            pool.shutdown()
    if spec.out_dir:
        write_records(records, spec, spec.out_dir)
    return records


# -- persistence -------------------------------------------------------------

_SCORE_FIELDS = [f.name for f in dataclasses.fields(TrialScore)]
_AGG_FIELDS = [f.name for f in dataclasses.fields(AggregateScore)]


def dump_rows(rows: Iterable[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)


def scores_from_rows(rows: Iterable[dict]) -> list[TrialScore]:
    out = []
    for r in rows:
        kw = {k: r[k] for k in _SCORE_FIELDS}
        if kw["channel_nmse"] is None:
            kw["channel_nmse"] = float("nan")
        out.append(TrialScore(**kw))
    return out


def write_records(records: Sequence[ResultRecord], spec: ExperimentSpec, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trials.jsonl", "w") as fh:
        for rec in records:
            fh.write(dump_rows(rec.rows))
    with open(out / "aggregate.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sweep_axis", "sweep_value", "config_hash", "master_seed", *_AGG_FIELDS])
        for rec in records:
            agg = rec.aggregate.as_dict()
            w.writerow([rec.sweep_axis or "", "" if rec.sweep_value is None else rec.sweep_value,
                        rec.config_hash, rec.master_seed, *(agg[k] for k in _AGG_FIELDS)])
    with open(out / "config.txt", "w") as fh:
        fh.write(format_spec(spec))
    timings = [{"sweep_value": r.sweep_value, "wall_time_s": r.wall_time} for r in records]
    (out / "timings.json").write_text(json.dumps(timings, indent=2) + "\n")
    return out


def format_spec(spec: ExperimentSpec) -> str:
    lines = []
    for section, obj in (("system", spec.config), ("solver", spec.solver),
                         ("continuation", spec.continuation)):
        for k, v in asdict(obj).items():
            lines.append(f"{section}.{k} = {v!r}")
    lines += [
        f"sweep_axis = {spec.sweep_axis!r}",
        f"sweep_values = {list(spec.sweep_values)!r}",
        f"num_trials = {spec.num_trials}",
        f"master_seed = {spec.master_seed}",
        f"known_gains = {spec.known_gains}",
    ]
    return "\n".join(lines) + "\n"


def load_spec(path, **overrides) -> ExperimentSpec:
    """Read an experiment spec from a JSON file.

    Recognized top-level keys: ``system``, ``solver``, ``continuation``
    (objects whose keys match the option dataclasses), ``sweep``
    (``{"axis": ..., "values": [...]}``), ``trials``, ``seed``, ``jobs``,
    ``known_gains``.  Keyword ``overrides`` replace fields of the result.
    """
    raw = json.loads(Path(path).read_text()) if path else {}
    unknown = set(raw) - {"system", "solver", "continuation", "sweep", "trials",
                          "seed", "jobs", "known_gains"}
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    sweep = raw.get("sweep") or {}
    kwargs = dict(
        config=SystemConfig(**raw.get("system", {})),
        solver=SolverOptions(**raw.get("solver", {})),
        continuation=ContinuationOptions(**raw.get("continuation", {})),
        sweep_axis=sweep.get("axis"),
        sweep_values=tuple(sweep.get("values", ())),
        num_trials=raw.get("trials", 200),
        jobs=raw.get("jobs", 1),
        master_seed=raw.get("seed", 0),
        known_gains=raw.get("known_gains", True),
    )
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec(**kwargs)


# -- figures -----------------------------------------------------------------

def convergence_trace(
    config: SystemConfig,
    seed: int | None = None,
    sopts: SolverOptions | None = None,
    copts: ContinuationOptions | None = None,
    rho: float | None = None,
) -> tuple[list[tuple[int, float, float]], dict]:
    """Per-sweep objective of one BCD solve and its relative gap to a tight reference.

    Returns rows ``(t, objective, relative_gap)`` for t = 1, 2, ... and a dict
    of diagnostics, including whether the reference solve converged.
    """
    sopts = sopts or SolverOptions()
    copts = copts or ContinuationOptions()
    real = realize(config, seed)
    dictionary = ExtendedDictionary(real.preambles, config.max_delay)
    p = config.tx_power
    if rho is None:
        rho = initial_rho(real.received, dictionary, p, copts, config.noise_var)
    run = bcd_solve(real.received, dictionary, rho, p, sopts)
    ref_opts = dataclasses.replace(sopts, rel_tol=REFERENCE_TOL, max_sweeps=max(100_000, sopts.max_sweeps))
    ref = bcd_solve(real.received, dictionary, rho, p, ref_opts)
    if not ref.converged:
        logger.warning("reference solve did not reach rel_tol=%g", REFERENCE_TOL)
    best = min(ref.objective, min(run.objective_trace))
    rows = []
    for t, g in enumerate(run.objective_trace[1:], start=1):
        gap = (g - best) / best if best > 0 else 0.0
        rows.append((t, g, gap))
    info = {"rho": rho, "reference_objective": best, "reference_converged": ref.converged,
            "reference_sweeps": ref.sweeps, "run_converged": run.converged}
    return rows, info


def emit_convergence_trace(path, config: SystemConfig, seed: int | None = None,
                           sopts: SolverOptions | None = None,
                           copts: ContinuationOptions | None = None) -> dict:
    rows, info = convergence_trace(config, seed, sopts, copts)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "objective", "relative_gap"])
        w.writerows((t, repr(g), repr(gap)) for t, g, gap in rows)
    return info


def error_curve_rows(records: Sequence[ResultRecord]) -> list[tuple]:
    axes = {r.sweep_axis for r in records}
    if len(axes) != 1:
        raise ValueError(f"records must share one sweep axis, got {axes}")
    if None in axes and len(records) > 1:
        raise ValueError("records without a sweep axis cannot form a curve")
    ordered = sorted(records, key=lambda r: r.sweep_value)
    return [(r.sweep_value, r.aggregate.detection_error_prob, r.aggregate.missed_detection_prob,
             r.aggregate.false_alarm_prob) for r in ordered]


def emit_error_curves(records: Sequence[ResultRecord], path) -> Path:
    rows = error_curve_rows(records)
    axis = records[0].sweep_axis
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([axis or "point", "detection_error_prob", "missed_detection_prob", "false_alarm_prob"])
        w.writerows(rows)
    return Path(path)
