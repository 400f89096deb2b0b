"""Experiment orchestration: reference optima, step-size tuning, comparative
runs, and machine-readable CSV/JSON outputs.

Run metrics go to ``<prefix>.csv`` with header

    epoch,eta_raw,eta_applied,objective,subopt,grad_evals,wall_seconds,fallback

plus a ``<prefix>.json`` sidecar echoing the full configuration and the
reference-solution provenance. Floats are serialized with 17 significant
digits so parsing an emitted file recovers every value exactly. A spec
fully determines the outputs except for the wall_seconds column.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from .bb import Decay
from .data import dataset_fingerprint, load_libsvm, synthesize_dataset
from .objectives import Dataset, Problem, estimate_curvature, full_gradient, full_objective
from .optimizers import (
    STATUS_CONVERGED,
    STATUS_DIVERGED,
    RunConfig,
    RunResult,
    StepSchedule,
    run_adagrad,
    run_sag,
    run_sag_bb,
    run_sgd,
    run_sgd_bb,
    run_svrg,
    run_svrg_bb,
)
from .theory import min_epoch_length, svrg_bb_step_bounds, theta_rate

ALGORITHMS = ("sgd", "svrg-i", "svrg-ii", "svrg-bb", "sgd-bb", "sag", "sag-bb", "adagrad")
FIXED_STEP_ALGORITHMS = ("sgd", "svrg-i", "svrg-ii", "sag", "adagrad")
SUBOPT_FLOOR = 1e-16  # keeps log-scale plots sane

DEFAULT_TUNE_GRID = tuple(
    sorted(c * 10.0**e for e in range(-4, 2) for c in (1.0, 2.0, 5.0))
)


@dataclass(frozen=True)
class SyntheticSpec:
    seed: int
    n: int
    d: int
    noise: float


@dataclass
class ExperimentSpec:
    """One benchmark run: data source, problem, algorithm and its config."""

    algorithm: str
    kind: str
    lam: float
    config: RunConfig
    data_path: str | None = None
    synth: SyntheticSpec | None = None
    eta: float | None = None  # fixed-step algorithms only
    schedule: str = "fixed"  # sgd only: "fixed" | "diminishing"
    smoothing: bool = True  # sgd-bb only
    label: str | None = None
    out: str | None = None  # output path prefix

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(
                f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}"
            )
        if (self.data_path is None) == (self.synth is None):
            raise ValueError("exactly one of data_path or synth must be given")
        if self.algorithm in FIXED_STEP_ALGORITHMS and self.eta is None:
            raise ValueError(f"algorithm {self.algorithm!r} needs an explicit eta")

    def series_label(self) -> str:
        if self.label is not None:
            return self.label
        if self.algorithm in FIXED_STEP_ALGORITHMS:
            tag = f"eta={self.eta:g}"
            if self.algorithm == "sgd" and self.schedule == "diminishing":
                tag = f"eta/(k+1), eta={self.eta:g}"
        else:
            tag = f"eta0={self.config.eta0:g}"
        return f"{self.algorithm}({tag})"


def load_dataset(spec: ExperimentSpec) -> Dataset:
    if spec.data_path is not None:
        data, _ = load_libsvm(spec.data_path)
        return data
    s = spec.synth
    return synthesize_dataset(s.seed, s.n, s.d, s.noise)


def default_m(algorithm: str, n: int) -> int:
    """Inner-loop length conventions: 2n for the SVRG family, n otherwise."""
    return 2 * n if algorithm.startswith("svrg") else n


def _dispatch_run(
    algorithm: str,
    problem: Problem,
    data: Dataset,
    cfg: RunConfig,
    *,
    eta: float | None = None,
    schedule: str = "fixed",
    smoothing: bool = True,
    keep_snapshots: bool = False,
) -> RunResult:
    if algorithm == "sgd":
        return run_sgd(
            problem, data, StepSchedule(eta, schedule), cfg, keep_snapshots=keep_snapshots
        )
    if algorithm == "svrg-i":
        return run_svrg(problem, data, eta, "I", cfg, keep_snapshots=keep_snapshots)
    if algorithm == "svrg-ii":
        return run_svrg(problem, data, eta, "II", cfg, keep_snapshots=keep_snapshots)
    if algorithm == "svrg-bb":
        return run_svrg_bb(problem, data, cfg, keep_snapshots=keep_snapshots)
    if algorithm == "sgd-bb":
        return run_sgd_bb(problem, data, cfg, smoothing, keep_snapshots=keep_snapshots)
    if algorithm == "sag":
        return run_sag(problem, data, eta, cfg, keep_snapshots=keep_snapshots)
    if algorithm == "sag-bb":
        return run_sag_bb(problem, data, cfg, keep_snapshots=keep_snapshots)
    if algorithm == "adagrad":
        return run_adagrad(problem, data, eta, cfg, keep_snapshots=keep_snapshots)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def run_algorithm(
    spec: ExperimentSpec, problem: Problem, data: Dataset, *, keep_snapshots: bool = False
) -> RunResult:
    return _dispatch_run(
        spec.algorithm,
        problem,
        data,
        spec.config,
        eta=spec.eta,
        schedule=spec.schedule,
        smoothing=spec.smoothing,
        keep_snapshots=keep_snapshots,
    )


@dataclass
class ReferenceSolution:
    x_star: np.ndarray
    f_star: float
    grad_norm: float
    provenance: dict
    converged: bool


_REFERENCE_CACHE: dict[tuple[str, str, float], ReferenceSolution] = {}


def compute_reference(
    problem: Problem,
    data: Dataset,
    tol: float = 1e-10,
    *,
    cap_epochs: int = 200,
    seed: int = 0,
    m: int | None = None,
) -> ReferenceSolution:
    """High-precision optimum from a self-tuned BB-stepped SVRG run.

    Runs until the full-gradient norm drops below ``tol`` or the epoch cap
    is reached; in the latter case the lowest-objective snapshot is returned
    flagged non-converged. Results are cached per (dataset fingerprint,
    loss kind, lambda); a cache hit is reused only if it already meets the
    requested tolerance.
    """
    if not problem.lam > 0:
        raise ValueError("reference solving requires lam > 0")
    if not tol > 0:
        raise ValueError("tol must be positive")
    key = (dataset_fingerprint(data), problem.kind, problem.lam)
    cached = _REFERENCE_CACHE.get(key)
    if cached is not None and cached.grad_norm <= tol:
        return cached

    m = m if m is not None else 2 * data.n
    eta0 = 1.0 / (m * problem.lam)  # BB upper bound; the run self-tunes from here
    cfg = RunConfig(epochs=cap_epochs, m=m, eta0=eta0, seed=seed)
    run = run_svrg_bb(
        problem, data, cfg, stop_grad_norm=tol, keep_snapshots=True
    )
    if run.status == "converged":
        x_star = run.x_final.copy()
    else:
        objectives = [r.objective for r in run.records]
        best = int(np.argmin(objectives))
        x_star = run.snapshots[best].copy()
    grad_norm = float(np.linalg.norm(full_gradient(problem, data, x_star)))
    ref = ReferenceSolution(
        x_star=x_star,
        f_star=full_objective(problem, data, x_star),
        grad_norm=grad_norm,
        provenance={
            "algorithm": "svrg-bb",
            "epochs": len(run.records),
            "seed": seed,
            "tol": tol,
        },
        converged=grad_norm < tol,
    )
    _REFERENCE_CACHE[key] = ref
    return ref


def tune_fixed_step(
    problem: Problem,
    data: Dataset,
    algorithm: str,
    grid: tuple[float, ...] | None = None,
    budget_epochs: int = 15,
    *,
    m: int | None = None,
    seed: int = 0,
    schedule: str = "fixed",
) -> float:
    """Grid search over fixed steps; returns the step with the lowest final
    objective within the budget, ties broken toward the smaller step.

    Raises RuntimeError listing per-step statuses if every grid point
    diverges.
    """
    if algorithm not in FIXED_STEP_ALGORITHMS:
        raise ValueError(f"{algorithm!r} is not a fixed-step algorithm")
    grid = DEFAULT_TUNE_GRID if grid is None else tuple(grid)
    if not grid or any(not g > 0 for g in grid):
        raise ValueError("grid must be a nonempty sequence of positive steps")
    m = m if m is not None else default_m(algorithm, data.n)

    outcomes: list[tuple[float, RunResult]] = []
    for eta in sorted(grid):
        cfg = RunConfig(epochs=budget_epochs, m=m, eta0=eta, seed=seed)
        res = _dispatch_run(algorithm, problem, data, cfg, eta=eta, schedule=schedule)
        outcomes.append((eta, res))

    survivors = [
        (res.records[-1].objective, eta)
        for eta, res in outcomes
        if res.status != STATUS_DIVERGED
    ]
    if not survivors:
        statuses = ", ".join(f"eta={eta:g}: {res.status}" for eta, res in outcomes)
        raise RuntimeError(f"every grid step diverged ({statuses})")
    _, best_eta = min(survivors)
    return best_eta


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _subopt(objective: float, f_star: float) -> float:
    gap = objective - f_star
    if math.isfinite(gap) and gap < SUBOPT_FLOOR:
        return SUBOPT_FLOOR
    return gap


def _config_echo(spec: ExperimentSpec, data: Dataset) -> dict:
    cfg = dataclasses.asdict(spec.config)
    cfg["phi"] = spec.config.phi.value
    source: dict = {"fingerprint": dataset_fingerprint(data), "n": data.n, "d": data.d}
    if spec.data_path is not None:
        source["path"] = spec.data_path
    else:
        source["synthetic"] = dataclasses.asdict(spec.synth)
    return {
        "algorithm": spec.algorithm,
        "kind": spec.kind,
        "lambda": spec.lam,
        "eta": spec.eta,
        "schedule": spec.schedule,
        "smoothing": spec.smoothing,
        "config": cfg,
        "dataset": source,
    }


@dataclass
class ExperimentOutput:
    result: RunResult
    reference: ReferenceSolution
    csv_path: str
    json_path: str


def run_experiment(spec: ExperimentSpec, out_prefix: str | None = None) -> ExperimentOutput:
    """Execute one spec and write the metrics CSV plus its JSON sidecar."""
    prefix = out_prefix if out_prefix is not None else spec.out
    if prefix is None:
        raise ValueError("an output prefix is required (spec.out or out_prefix)")
    data = load_dataset(spec)
    problem = Problem(spec.kind, spec.lam)
    ref = compute_reference(problem, data)
    result = run_algorithm(spec, problem, data)

    csv_path = f"{prefix}.csv"
    json_path = f"{prefix}.json"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "epoch",
                "eta_raw",
                "eta_applied",
                "objective",
                "subopt",
                "grad_evals",
                "wall_seconds",
                "fallback",
            ]
        )
        for r in result.records:
            writer.writerow(
                [
                    r.k,
                    _fmt(r.eta_raw),
                    _fmt(r.eta_applied),
                    _fmt(r.objective),
                    _fmt(_subopt(r.objective, ref.f_star)),
                    r.grad_evals_cumulative,
                    _fmt(r.wall_seconds),
                    int(r.fallback_used),
                ]
            )
    sidecar = _config_echo(spec, data)
    sidecar["status"] = result.status
    sidecar["reference"] = {
        "f_star": ref.f_star,
        "grad_norm": ref.grad_norm,
        "converged": ref.converged,
        "provenance": ref.provenance,
    }
    with open(json_path, "w") as fh:
        json.dump(sidecar, fh, indent=2)
    return ExperimentOutput(result, ref, csv_path, json_path)


@dataclass
class CompareOutput:
    csv_path: str
    series: list[str]
    reference: ReferenceSolution
    results: list[RunResult]


def compare(specs: list[ExperimentSpec], out_path: str) -> CompareOutput:
    """Run several specs over one (dataset, problem) and emit a long-format
    CSV ``series,epoch,subopt,eta_applied`` sharing a single reference
    optimum."""
    if len(specs) < 2:
        raise ValueError("compare needs at least two specs")
    datasets = [load_dataset(s) for s in specs]
    fps = [dataset_fingerprint(d) for d in datasets]
    kinds = {(s.kind, s.lam) for s in specs}
    if len(set(fps)) != 1 or len(kinds) != 1:
        raise ValueError("compare requires identical (dataset, problem) across specs")
    data = datasets[0]
    problem = Problem(specs[0].kind, specs[0].lam)
    ref = compute_reference(problem, data)

    labels: list[str] = []
    for s in specs:
        base = s.series_label()
        label = base
        i = 2
        while label in labels:
            label = f"{base}#{i}"
            i += 1
        labels.append(label)

    results = [run_algorithm(s, problem, data) for s in specs]
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series", "epoch", "subopt", "eta_applied"])
        for label, result in zip(labels, results):
            for r in result.records:
                writer.writerow(
                    [
                        label,
                        r.k,
                        _fmt(_subopt(r.objective, ref.f_star)),
                        _fmt(r.eta_applied),
                    ]
                )
    return CompareOutput(out_path, labels, ref, results)


@dataclass(frozen=True)
class TheoryReport:
    """check-theory output; every field is a pass-through of the theory ops."""

    mu: float
    L: float
    theta: float
    theta_frac: float
    min_epochs: int
    eta_low: float
    eta_high: float
    m: int
    condition_met: bool


def check_theory(
    problem: Problem, data: Dataset, m: int, theta_frac: float = 0.9
) -> TheoryReport:
    """Curvature estimates, certified rate, epoch-length condition and BB
    step bounds for the given problem, plus whether ``m`` satisfies the
    slack-adjusted condition."""
    est = estimate_curvature(problem, data)
    min_m = min_epoch_length(est.mu, est.L, theta_frac)
    lo, hi = svrg_bb_step_bounds(est.mu, est.L, m)
    return TheoryReport(
        mu=est.mu,
        L=est.L,
        theta=theta_rate(est.mu, est.L),
        theta_frac=theta_frac,
        min_epochs=min_m,
        eta_low=lo,
        eta_high=hi,
        m=m,
        condition_met=m >= min_m,
    )
