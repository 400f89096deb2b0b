"""Epoch-structured stochastic runners: SGD, SVRG, SAG, AdaGrad and their
Barzilai-Borwein-stepped variants, all reproducible under a seed.

Conventions shared by every runner:

* A run executes ``config.epochs`` epochs of ``config.m`` inner iterations
  from the initial point x0 (zeros unless given). Epoch k produces the
  snapshot x~_{k+1} from x~_0, x~_1, ...; the record for epoch k stores the
  step size used during epoch k and the objective of the snapshot that the
  epoch produced, i.e. F(x~_{k+1}).
* One RNG stream per run (PCG64 seeded from ``config.seed``), consumed only
  by inner-loop index sampling plus the random-snapshot draw of SVRG option
  II. Variants sharing a seed therefore sample the same index sequence.
* Gradient-evaluation accounting: an SVRG epoch costs n + 2m component
  gradient evaluations, every other runner costs m per epoch. Objective
  evaluations for the records are metrics only and are not counted.
* An epoch whose end objective exceeds 1e10 or is non-finite (or whose
  iterate is non-finite) marks the run diverged and truncates the record
  stream after the offending record.
* Wall time per record comes from a monotonic clock and is excluded from
  the determinism contract.

BB-stepped variants: SVRG with BB steps computes the epoch step from the
two latest snapshots and their exact full gradients starting at epoch 1.
SGD/SAG with BB steps need averaged inner gradients from two completed
epochs, so epochs 0 and 1 use eta0 and eta1 and the BB step starts at epoch
2, optionally smoothed toward a C/phi(k) decay (the applied step is the
smoothed one; the smoother itself always consumes raw BB steps).
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .bb import Decay, SmootherState, sgd_bb_step, smooth_step, svrg_bb_step
from .objectives import (
    Dataset,
    Problem,
    _component_gradient0,
    full_gradient,
    full_objective,
)

DIVERGENCE_THRESHOLD = 1e10
ADAGRAD_EPS = 1e-8

STATUS_COMPLETED = "completed"
STATUS_DIVERGED = "diverged"
STATUS_CONVERGED = "converged"


@dataclass(frozen=True)
class RunConfig:
    """Epoch/iteration budget and step-size parameters for one run.

    ``eta1`` (second warm-up step of the BB-on-SGD/SAG variants) defaults to
    eta0; ``beta`` (averaged-gradient weight) defaults to 10/m and must
    resolve into (0, 1).
    """

    epochs: int
    m: int
    eta0: float
    eta1: float | None = None
    beta: float | None = None
    phi: Decay = Decay.HARMONIC
    seed: int = 0
    record_every: int = 1

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not self.eta0 > 0:
            raise ValueError("eta0 must be positive")
        if self.eta1 is not None and not self.eta1 > 0:
            raise ValueError("eta1 must be positive")
        if self.beta is not None and not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    def resolved_eta1(self) -> float:
        return self.eta0 if self.eta1 is None else self.eta1

    def resolved_beta(self) -> float:
        if self.beta is not None:
            return self.beta
        beta = 10.0 / self.m
        if not 0 < beta < 1:
            raise ValueError(
                f"default beta = 10/m = {beta} is outside (0, 1); pass beta explicitly"
            )
        return beta


@dataclass(frozen=True)
class StepSchedule:
    """Plain-SGD step rule: a fixed eta, or eta/(k+1) per epoch."""

    eta: float
    kind: Literal["fixed", "diminishing"] = "fixed"

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if self.kind not in ("fixed", "diminishing"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    def at(self, k: int) -> float:
        if self.kind == "diminishing":
            return self.eta / (k + 1)
        return self.eta


@dataclass(frozen=True)
class EpochRecord:
    k: int
    eta_raw: float
    eta_applied: float
    objective: float
    grad_evals_cumulative: int
    wall_seconds: float
    fallback_used: bool


@dataclass
class RunResult:
    algorithm: str
    records: list[EpochRecord]
    x_final: np.ndarray
    config: RunConfig
    status: str = STATUS_COMPLETED
    snapshots: list[np.ndarray] | None = None  # aligned with records when kept


class _EpochLog:
    """Record keeping, stride handling and the divergence guard."""

    def __init__(self, problem, data, config, keep_snapshots: bool):
        self.problem = problem
        self.data = data
        self.config = config
        self.records: list[EpochRecord] = []
        self.snapshots: list[np.ndarray] | None = [] if keep_snapshots else None
        self.evals = 0
        self.t0 = time.perf_counter()
        self.status = STATUS_COMPLETED

    def log(
        self,
        k: int,
        eta_raw: float,
        eta_applied: float,
        x: np.ndarray,
        evals_this_epoch: int,
        fallback_used: bool,
    ) -> bool:
        """Append a record if due; return False when the run must stop."""
        self.evals += evals_this_epoch
        obj = full_objective(self.problem, self.data, x)
        diverged = (
            not np.isfinite(obj)
            or obj > DIVERGENCE_THRESHOLD
            or not np.isfinite(x).all()
        )
        due = k % self.config.record_every == 0 or k == self.config.epochs - 1
        if due or diverged:
            self.records.append(
                EpochRecord(
                    k=k,
                    eta_raw=eta_raw,
                    eta_applied=eta_applied,
                    objective=obj,
                    grad_evals_cumulative=self.evals,
                    wall_seconds=time.perf_counter() - self.t0,
                    fallback_used=fallback_used,
                )
            )
            if self.snapshots is not None:
                self.snapshots.append(x.copy())
        if diverged:
            self.status = STATUS_DIVERGED
            return False
        return True

    def result(self, algorithm: str, x: np.ndarray, config: RunConfig) -> RunResult:
        return RunResult(
            algorithm=algorithm,
            records=self.records,
            x_final=x,
            config=config,
            status=self.status,
            snapshots=self.snapshots,
        )


def _start(data: Dataset, x0: np.ndarray | None) -> np.ndarray:
    if x0 is None:
        return np.zeros(data.d)
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (data.d,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({data.d},)")
    return x0.copy()


def _draw_index(rng: np.random.Generator, n: int) -> int:
    # single scalar draw per inner step, uniform with replacement
    return int(rng.integers(0, n))


def run_sgd(
    problem: Problem,
    data: Dataset,
    schedule: StepSchedule,
    config: RunConfig,
    *,
    x0: np.ndarray | None = None,
    keep_snapshots: bool = False,
) -> RunResult:
    """Plain SGD: x <- x - eta_k * grad f_i(x), i uniform with replacement."""
    rng = np.random.default_rng(config.seed)
    x = _start(data, x0)
    n, m = data.n, config.m
    log = _EpochLog(problem, data, config, keep_snapshots)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(config.epochs):
            eta_k = schedule.at(k)
            for _ in range(m):
                i0 = _draw_index(rng, n)
                g = _component_gradient0(problem, data, i0, x)
                x -= eta_k * g
            if not log.log(k, eta_k, eta_k, x, m, False):
                break
    name = "sgd" if schedule.kind == "fixed" else "sgd-diminishing"
    return log.result(name, x, config)


_EtaRule = Callable[
    [int, np.ndarray, np.ndarray | None, np.ndarray, np.ndarray | None, float],
    tuple[float, bool],
]


def _run_svrg_core(
    problem: Problem,
    data: Dataset,
    config: RunConfig,
    option: str,
    eta_rule: _EtaRule,
    algorithm: str,
    *,
    x0: np.ndarray | None,
    keep_snapshots: bool,
    stop_grad_norm: float | None,
) -> RunResult:
    """Shared epoch loop for fixed-step and BB-stepped SVRG.

    ``eta_rule(k, snap, snap_prev, g, g_prev, prev_eta)`` decides the epoch
    step; the inner-loop arithmetic is identical for every variant so runs
    that resolve to the same step sequence match bit for bit.
    """
    if option not in ("I", "II"):
        raise ValueError(f"option must be 'I' or 'II', got {option!r}")
    rng = np.random.default_rng(config.seed)
    snap = _start(data, x0)
    snap_prev: np.ndarray | None = None
    g_prev: np.ndarray | None = None
    prev_eta = config.eta0
    n, m = data.n, config.m
    log = _EpochLog(problem, data, config, keep_snapshots)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(config.epochs):
            g = full_gradient(problem, data, snap)
            if stop_grad_norm is not None and float(np.linalg.norm(g)) < stop_grad_norm:
                log.status = STATUS_CONVERGED
                break
            eta_k, fb = eta_rule(k, snap, snap_prev, g, g_prev, prev_eta)
            x = snap.copy()
            traj: list[np.ndarray] | None = [] if option == "II" else None
            for _ in range(m):
                i0 = _draw_index(rng, n)
                v = (
                    _component_gradient0(problem, data, i0, x)
                    - _component_gradient0(problem, data, i0, snap)
                    + g
                )
                x -= eta_k * v
                if traj is not None:
                    traj.append(x.copy())
            if traj is not None:
                t_pick = int(rng.integers(1, m + 1))
                new_snap = traj[t_pick - 1]
            else:
                new_snap = x
            snap_prev, g_prev, prev_eta = snap, g, eta_k
            snap = new_snap
            if not log.log(k, eta_k, eta_k, snap, n + 2 * m, fb):
                break
    return log.result(algorithm, snap, config)


def run_svrg(
    problem: Problem,
    data: Dataset,
    eta: float,
    option: str,
    config: RunConfig,
    *,
    x0: np.ndarray | None = None,
    keep_snapshots: bool = False,
    stop_grad_norm: float | None = None,
) -> RunResult:
    """SVRG with a fixed step: one full gradient per epoch plus m
    variance-reduced inner steps; the next snapshot is the last inner
    iterate (option I) or a uniformly random one (option II).

    Option II stores the epoch trajectory to realize the random draw, which
    is fine at desk scale but O(m*d) memory.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")

    def rule(k, snap, snap_prev, g, g_prev, prev_eta):
        return eta, False

    name = "svrg-i" if option == "I" else "svrg-ii"
    return _run_svrg_core(
        problem,
        data,
        config,
        option,
        rule,
        name,
        x0=x0,
        keep_snapshots=keep_snapshots,
        stop_grad_norm=stop_grad_norm,
    )


def run_svrg_bb(
    problem: Problem,
    data: Dataset,
    config: RunConfig,
    *,
    bypass_eta: float | None = None,
    x0: np.ndarray | None = None,
    keep_snapshots: bool = False,
    stop_grad_norm: float | None = None,
) -> RunResult:
    """SVRG whose epoch step is the BB step from the last two snapshots.

    Epoch 0 uses eta0; epoch k >= 1 uses the BB step computed from
    (x~_k, x~_{k-1}) and their full gradients, falling back to the previous
    step when the secant denominator degenerates. Snapshots are always the
    last inner iterate. ``bypass_eta`` disables the BB computation and uses
    the given constant for every epoch, which reproduces the fixed-step
    option-I runner exactly.
    """

    def rule(k, snap, snap_prev, g, g_prev, prev_eta):
        if bypass_eta is not None:
            return bypass_eta, False
        if k == 0:
            return config.eta0, False
        return svrg_bb_step(snap, snap_prev, g, g_prev, config.m, fallback=prev_eta)

    return _run_svrg_core(
        problem,
        data,
        config,
        "I",
        rule,
        "svrg-bb",
        x0=x0,
        keep_snapshots=keep_snapshots,
        stop_grad_norm=stop_grad_norm,
    )


def _warmup_or_bb_step(
    k: int,
    config: RunConfig,
    snap: np.ndarray,
    snap_prev: np.ndarray | None,
    ghat_cur: np.ndarray | None,
    ghat_prev: np.ndarray | None,
    prev_raw: float,
    smoother: SmootherState,
    phi: Decay,
    smoothing: bool,
) -> tuple[float, float, bool, SmootherState]:
    """Step-size schedule shared by the BB variants of SGD and SAG.

    Returns (raw, applied, fallback_used, smoother). Raw BB steps feed the
    smoother even on fallback epochs so its epoch bookkeeping stays aligned.
    """
    if k == 0:
        return config.eta0, config.eta0, False, smoother
    if k == 1:
        eta1 = config.resolved_eta1()
        return eta1, eta1, False, smoother
    raw, fb = sgd_bb_step(snap, snap_prev, ghat_cur, ghat_prev, config.m, fallback=prev_raw)
    if smoothing:
        smoother, applied = smooth_step(smoother, raw, k, phi)
    else:
        applied = raw
    return raw, applied, fb, smoother


def run_sgd_bb(
    problem: Problem,
    data: Dataset,
    config: RunConfig,
    smoothing: bool = True,
    *,
    x0: np.ndarray | None = None,
    keep_snapshots: bool = False,
) -> RunResult:
    """SGD whose epoch step comes from the BB formula on averaged gradients.

    During epoch k the inner loop both updates the iterate with the applied
    step and accumulates ghat_{k+1} = beta * grad f_i(x_t) + (1-beta) *
    ghat_{k+1} starting from zero; the BB step of epoch k >= 2 is computed
    from (x~_k - x~_{k-1}) and (ghat_k - ghat_{k-1}), absolute-valued. With
    smoothing on, the applied step is the smoothed one for the configured
    decay (harmonic by default); the raw BB step is still what enters the
    smoother and the record's eta_raw field.
    """
    rng = np.random.default_rng(config.seed)
    x = _start(data, x0)
    snap = x.copy()
    snap_prev: np.ndarray | None = None
    ghat_cur: np.ndarray | None = None
    ghat_prev: np.ndarray | None = None
    smoother = SmootherState()
    prev_raw = config.eta0
    beta = config.resolved_beta()
    omb = 1.0 - beta
    n, m = data.n, config.m
    log = _EpochLog(problem, data, config, keep_snapshots)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(config.epochs):
            raw, applied, fb, smoother = _warmup_or_bb_step(
                k, config, snap, snap_prev, ghat_cur, ghat_prev, prev_raw,
                smoother, config.phi, smoothing,
            )
            ghat_next = np.zeros(data.d)
            for _ in range(m):
                i0 = _draw_index(rng, n)
                g = _component_gradient0(problem, data, i0, x)
                x -= applied * g
                ghat_next *= omb
                ghat_next += beta * g
            snap_prev, snap = snap, x.copy()
            ghat_prev, ghat_cur = ghat_cur, ghat_next
            prev_raw = raw
            if not log.log(k, raw, applied, snap, m, fb):
                break
    return log.result("sgd-bb", x, config)


def run_sag(
    problem: Problem,
    data: Dataset,
    eta: float,
    config: RunConfig,
    *,
    x0: np.ndarray | None = None,
    keep_snapshots: bool = False,
) -> RunResult:
    """SAG with a fixed step: refresh one stored gradient per iteration and
    step along the mean of the table, x <- x - (eta/n) * sum_i y_i.

    The table starts at zero and its sum is maintained incrementally. Memory
    is O(n*d) for the dense gradient table.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    rng = np.random.default_rng(config.seed)
    x = _start(data, x0)
    n, m = data.n, config.m
    y = np.zeros((n, data.d))
    ysum = np.zeros(data.d)
    scale = eta / n
    log = _EpochLog(problem, data, config, keep_snapshots)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(config.epochs):
            for _ in range(m):
                i0 = _draw_index(rng, n)
                g = _component_gradient0(problem, data, i0, x)
                ysum += g - y[i0]
                y[i0] = g
                x -= scale * ysum
            if not log.log(k, eta, eta, x, m, False):
                break
    return log.result("sag", x, config)


def run_sag_bb(
    problem: Problem,
    data: Dataset,
    config: RunConfig,
    *,
    x0: np.ndarray | None = None,
    keep_snapshots: bool = False,
) -> RunResult:
    """SAG with BB epoch steps, smoothed by the geometric mean of all raw
    BB steps so far (constant decay target, since SAG does not need
    diminishing steps).

    Warm-up epochs 0 and 1 use eta0 and eta1; the averaged-gradient
    recursion and the absolute-valued BB formula are the same as in the
    BB-stepped SGD runner, while the inner update is the SAG table step.
    """
    rng = np.random.default_rng(config.seed)
    x = _start(data, x0)
    snap = x.copy()
    snap_prev: np.ndarray | None = None
    ghat_cur: np.ndarray | None = None
    ghat_prev: np.ndarray | None = None
    smoother = SmootherState()
    prev_raw = config.eta0
    beta = config.resolved_beta()
    omb = 1.0 - beta
    n, m = data.n, config.m
    y = np.zeros((n, data.d))
    ysum = np.zeros(data.d)
    log = _EpochLog(problem, data, config, keep_snapshots)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(config.epochs):
            raw, applied, fb, smoother = _warmup_or_bb_step(
                k, config, snap, snap_prev, ghat_cur, ghat_prev, prev_raw,
                smoother, Decay.CONSTANT, True,
            )
            scale = applied / n
            ghat_next = np.zeros(data.d)
            for _ in range(m):
                i0 = _draw_index(rng, n)
                g = _component_gradient0(problem, data, i0, x)
                ysum += g - y[i0]
                y[i0] = g
                x -= scale * ysum
                ghat_next *= omb
                ghat_next += beta * g
            snap_prev, snap = snap, x.copy()
            ghat_prev, ghat_cur = ghat_cur, ghat_next
            prev_raw = raw
            if not log.log(k, raw, applied, snap, m, fb):
                break
    return log.result("sag-bb", x, config)


def run_adagrad(
    problem: Problem,
    data: Dataset,
    eta: float,
    config: RunConfig,
    *,
    x0: np.ndarray | None = None,
    keep_snapshots: bool = False,
) -> RunResult:
    """Per-coordinate adaptive baseline: accumulate squared gradients and
    step x_j <- x_j - eta * g_j / (sqrt(G_j) + 1e-8)."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    rng = np.random.default_rng(config.seed)
    x = _start(data, x0)
    n, m = data.n, config.m
    G = np.zeros(data.d)
    log = _EpochLog(problem, data, config, keep_snapshots)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(config.epochs):
            for _ in range(m):
                i0 = _draw_index(rng, n)
                g = _component_gradient0(problem, data, i0, x)
                G += g * g
                x -= eta * g / (np.sqrt(G) + ADAGRAD_EPS)
            if not log.log(k, eta, eta, x, m, False):
                break
    return log.result("adagrad", x, config)
