"""Experiment harness: configs, single runs, step-size sweeps, CSV output.

This is the layer the command-line interface drives.  A JSON experiment
config describes a target, an algorithm/estimator pairing, a schedule,
and the initialization; ``execute_run`` produces per-iteration trace rows
and ``execute_sweep`` crosses a log-spaced step-size grid with both
algorithms, both stochastic estimators, and R repetitions.

Seeding policy: repetition ``r`` of a run uses seed ``base + r``; inside a
sweep, the noise stream id is the grid index of the step size, so all four
algorithm/estimator combinations of one (step size, repetition) cell see
identical noise (common random numbers), while distinct cells are
independent.  Outputs are byte-identical across reruns and worker counts.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .diagnostics import free_energy_mc
from .errors import InvalidParameters
from .estimators import EstimatorKind
from .geometry import GaussianVariational, w2_distance_sq
from .optimizers import Algorithm, OptimizerConfig, RunTrace, run
from .schedules import StepSchedule, constant_schedule, theorem_schedule
from .targets import (
    LogisticRidgePotential,
    Potential,
    QuadraticPotential,
    load_logistic_dataset,
    quadratic_optimum,
    random_quadratic,
)

__all__ = [
    "ExperimentConfig",
    "parse_experiment_config",
    "build_target",
    "build_initial_state",
    "build_schedule",
    "execute_run",
    "execute_sweep",
    "TRACE_HEADER",
    "SWEEP_HEADER",
    "format_trace_rows",
    "format_sweep_rows",
]

TRACE_HEADER = "run_id,seed,t,gamma,free_energy,free_energy_se,w2_sq,diverged"
SWEEP_HEADER = "gamma,algorithm,estimator,seed,final_free_energy,diverged"

SWEEP_ALGORITHMS = (Algorithm.SPGD, Algorithm.SPBWGD)
SWEEP_ESTIMATORS = (EstimatorKind.BONNET_PRICE, EstimatorKind.BONNET_REPARAM)

# Stream tag separating evaluation noise from training noise in a lineage.
_EVAL_STREAM_OFFSET = 1 << 20


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description (see ``parse_experiment_config``)."""

    target: dict
    algorithm: str = "spgd"
    estimator: str = "bonnet_price"
    minibatch: int = 8
    iterations: int = 100
    schedule: dict = field(default_factory=lambda: {"kind": "theorem"})
    init_mean: Any = 0.0
    init_variance: float = 0.34
    eval_samples: int = 4096
    repetitions: int = 1
    seed: int = 0
    divergence_threshold: float = 1e12
    output: str | None = None


def _require(cond: bool, fieldname: str, message: str):
    if not cond:
        raise InvalidParameters(f"config field '{fieldname}': {message}")


def parse_experiment_config(raw: dict) -> ExperimentConfig:
    """Validate a raw JSON object into an ``ExperimentConfig``.

    Raises ``InvalidParameters`` naming the offending field.
    """
    _require(isinstance(raw, dict), "<root>", "config must be a JSON object")
    known = {
        "target", "algorithm", "estimator", "minibatch", "iterations",
        "schedule", "init", "eval_samples", "repetitions", "seed",
        "divergence_threshold", "output",
    }
    for key in raw:
        _require(key in known, key, "unknown field")
    target = raw.get("target")
    _require(isinstance(target, dict), "target", "must be an object")
    kind = target.get("kind")
    _require(kind in ("quadratic", "logistic"), "target.kind", "must be 'quadratic' or 'logistic'")
    if kind == "quadratic":
        _require(int(target.get("dim", 0)) >= 1, "target.dim", "must be an integer >= 1")
        _require(
            float(target.get("condition_number", 1.0)) >= 1.0,
            "target.condition_number", "must be >= 1",
        )
    else:
        _require(isinstance(target.get("dataset"), str), "target.dataset", "must be a file path")
        _require(float(target.get("ridge", 0.0)) > 0.0, "target.ridge", "must be > 0")

    algorithm = raw.get("algorithm", "spgd")
    _require(algorithm in {a.value for a in Algorithm}, "algorithm", "must be 'spgd' or 'spbwgd'")
    estimator = raw.get("estimator", "bonnet_price")
    _require(
        estimator in {e.value for e in EstimatorKind},
        "estimator", "must be 'bonnet_price', 'bonnet_reparam', or 'exact'",
    )

    minibatch = raw.get("minibatch", 8)
    _require(isinstance(minibatch, int) and minibatch >= 1, "minibatch", "must be an integer >= 1")
    iterations = raw.get("iterations", 100)
    _require(isinstance(iterations, int) and iterations >= 0, "iterations", "must be an integer >= 0")

    schedule = raw.get("schedule", {"kind": "theorem"})
    _require(isinstance(schedule, dict), "schedule", "must be an object")
    skind = schedule.get("kind")
    _require(skind in ("constant", "theorem"), "schedule.kind", "must be 'constant' or 'theorem'")
    if skind == "constant":
        _require(float(schedule.get("gamma", 0.0)) > 0.0, "schedule.gamma", "must be > 0")
    elif "delta_sq" in schedule:
        _require(float(schedule["delta_sq"]) >= 0.0, "schedule.delta_sq", "must be >= 0")

    init = raw.get("init", {})
    _require(isinstance(init, dict), "init", "must be an object")
    variance = init.get("variance", 0.34)
    _require(float(variance) > 0.0, "init.variance", "must be > 0")

    eval_samples = raw.get("eval_samples", 4096)
    _require(
        isinstance(eval_samples, int) and eval_samples >= 2,
        "eval_samples", "must be an integer >= 2",
    )
    repetitions = raw.get("repetitions", 1)
    _require(
        isinstance(repetitions, int) and repetitions >= 1,
        "repetitions", "must be an integer >= 1",
    )
    seed = raw.get("seed", 0)
    _require(isinstance(seed, int), "seed", "must be an integer")
    threshold = raw.get("divergence_threshold", 1e12)
    _require(float(threshold) > 0.0, "divergence_threshold", "must be > 0")
    output = raw.get("output")
    _require(output is None or isinstance(output, str), "output", "must be a file path")

    return ExperimentConfig(
        target=dict(target),
        algorithm=algorithm,
        estimator=estimator,
        minibatch=minibatch,
        iterations=iterations,
        schedule=dict(schedule),
        init_mean=init.get("mean", 0.0),
        init_variance=float(variance),
        eval_samples=eval_samples,
        repetitions=repetitions,
        seed=seed,
        divergence_threshold=float(threshold),
        output=output,
    )


def build_target(config: ExperimentConfig) -> Potential:
    """Instantiate the target described by the config.

    File errors from a logistic dataset propagate as ``OSError``.
    """
    spec = config.target
    if spec["kind"] == "quadratic":
        return random_quadratic(
            dim=int(spec["dim"]),
            condition_number=float(spec.get("condition_number", 1.0)),
            seed=int(spec.get("seed", 0)),
            strong_convexity=float(spec.get("strong_convexity", 1.0)),
            center_scale=float(spec.get("center_scale", 1.0)),
        )
    design, labels = load_logistic_dataset(spec["dataset"])
    return LogisticRidgePotential(design, labels, float(spec["ridge"]))


def build_initial_state(config: ExperimentConfig, dim: int) -> GaussianVariational:
    return GaussianVariational.isotropic(dim, config.init_mean, config.init_variance)


def build_schedule(
    config: ExperimentConfig, target: Potential, q0: GaussianVariational
) -> StepSchedule:
    spec = config.schedule
    if spec["kind"] == "constant":
        return constant_schedule(float(spec["gamma"]))
    meta = target.metadata
    if "delta_sq" in spec:
        delta_sq = float(spec["delta_sq"])
    elif isinstance(target, QuadraticPotential):
        delta_sq = meta.strong_convexity * w2_distance_sq(q0, quadratic_optimum(target))
    else:
        raise InvalidParameters(
            "config field 'schedule.delta_sq': required for non-quadratic targets"
        )
    return theorem_schedule(meta.strong_convexity, meta.smoothness, meta.dim, delta_sq)


def execute_run(config: ExperimentConfig) -> list[RunTrace]:
    """Run ``repetitions`` independent trajectories with seeds base..base+R-1."""
    target = build_target(config)
    q0 = build_initial_state(config, target.dim)
    schedule = build_schedule(config, target, q0)
    opt = OptimizerConfig(
        algorithm=config.algorithm,
        estimator=config.estimator,
        minibatch=config.minibatch,
        max_iters=config.iterations,
        divergence_threshold=config.divergence_threshold,
    )
    return [
        run(opt, target, q0, schedule, seed=config.seed + rep, stream=0)
        for rep in range(config.repetitions)
    ]


def _format_float(value: float) -> str:
    return repr(float(value))


def format_trace_rows(traces: list[RunTrace], base_seed: int) -> list[str]:
    rows = []
    for run_id, trace in enumerate(traces):
        seed = base_seed + run_id
        for rec in trace.records:
            w2 = "" if rec.w2_sq is None else _format_float(rec.w2_sq)
            rows.append(
                f"{run_id},{seed},{rec.t},{_format_float(rec.gamma)},"
                f"{_format_float(rec.free_energy)},{_format_float(rec.free_energy_se)},"
                f"{w2},{str(rec.diverged).lower()}"
            )
    return rows


@dataclass(frozen=True)
class SweepCell:
    gamma_index: int
    gamma: float
    algorithm: Algorithm
    estimator: EstimatorKind
    repetition: int


@dataclass(frozen=True)
class SweepResult:
    cell: SweepCell
    seed: int
    final_free_energy: float | None
    diverged: bool


def _run_sweep_cell(args: tuple[ExperimentConfig, SweepCell]) -> SweepResult:
    config, cell = args
    target = build_target(config)
    q0 = build_initial_state(config, target.dim)
    opt = OptimizerConfig(
        algorithm=cell.algorithm,
        estimator=cell.estimator,
        minibatch=config.minibatch,
        max_iters=config.iterations,
        divergence_threshold=config.divergence_threshold,
    )
    seed = config.seed + cell.repetition
    trace = run(
        opt, target, q0, constant_schedule(cell.gamma),
        seed=seed, stream=cell.gamma_index,
    )
    if trace.diverged:
        return SweepResult(cell, seed, None, True)
    eval_seed = np.random.SeedSequence(
        entropy=seed, spawn_key=(_EVAL_STREAM_OFFSET + cell.gamma_index,)
    )
    estimate = free_energy_mc(trace.final_state, target, config.eval_samples, eval_seed)
    if not math.isfinite(estimate.value):
        return SweepResult(cell, seed, None, True)
    return SweepResult(cell, seed, estimate.value, False)


def sweep_cells(config: ExperimentConfig, grid: np.ndarray) -> list[SweepCell]:
    """Cartesian cell list in deterministic output order."""
    return [
        SweepCell(gi, float(g), algo, est, rep)
        for (gi, g), algo, est, rep in itertools.product(
            enumerate(grid), SWEEP_ALGORITHMS, SWEEP_ESTIMATORS, range(config.repetitions)
        )
    ]


def execute_sweep(
    config: ExperimentConfig, grid: np.ndarray, workers: int = 1
) -> list[SweepResult]:
    """Run every sweep cell, concurrently if ``workers > 1``.

    Results come back in deterministic cell order regardless of worker
    scheduling.
    """
    cells = sweep_cells(config, grid)
    payload = [(config, cell) for cell in cells]
    if workers <= 1:
        return [_run_sweep_cell(p) for p in payload]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_sweep_cell, payload, chunksize=1))


def format_sweep_rows(results: list[SweepResult]) -> list[str]:
    rows = []
    for res in results:
        fe = "" if res.final_free_energy is None else _format_float(res.final_free_energy)
        rows.append(
            f"{_format_float(res.cell.gamma)},{res.cell.algorithm.value},"
            f"{res.cell.estimator.value},{res.seed},{fe},{str(res.diverged).lower()}"
        )
    return rows
