"""Barzilai-Borwein step-size formulas and log-domain step smoothing.

The BB step approximates the inverse curvature along the last displacement:
with s = x_t - x_{t-1} and y = g_t - g_{t-1},

    bb1:  eta = ||s||^2 / (s.y)        bb2:  eta = (s.y) / ||y||^2

The epoch-level variants divide by the number m of inner iterations per
epoch, since an epoch adds m stochastic update terms to the iterate. All
denominators are protected by the relative guard 1e-14 * ||s|| * ||y||; the
epoch variants fall back to the previous step instead of raising so long
runs stay alive, and they flag the event.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

REL_DEN_GUARD = 1e-14


class DegenerateCurvatureError(ValueError):
    """Secant denominator too close to zero to define a BB step."""


def _norm(v: np.ndarray) -> float:
    return float(np.linalg.norm(v))


def bb1_step(s: np.ndarray, y: np.ndarray) -> float:
    """||s||^2 / (s.y); raises DegenerateCurvatureError near-orthogonal s, y."""
    if s.shape != y.shape:
        raise ValueError(f"shape mismatch: {s.shape} vs {y.shape}")
    den = float(np.dot(s, y))
    if abs(den) <= REL_DEN_GUARD * _norm(s) * _norm(y):
        raise DegenerateCurvatureError(f"s.y = {den} is degenerate")
    return float(np.dot(s, s)) / den


def bb2_step(s: np.ndarray, y: np.ndarray) -> float:
    """(s.y) / ||y||^2; raises DegenerateCurvatureError when y vanishes."""
    if s.shape != y.shape:
        raise ValueError(f"shape mismatch: {s.shape} vs {y.shape}")
    den = float(np.dot(y, y))
    if den < 1e-300:
        raise DegenerateCurvatureError("||y|| vanishes")
    return float(np.dot(s, y)) / den


def svrg_bb_step(
    x_cur: np.ndarray,
    x_prev: np.ndarray,
    g_cur: np.ndarray,
    g_prev: np.ndarray,
    m: int,
    fallback: float,
) -> tuple[float, bool]:
    """Epoch BB step (1/m) ||dx||^2 / (dx . dg) from consecutive snapshots.

    With exact full gradients of a strongly convex objective the denominator
    is positive; the fallback only guards finite-precision corner cases
    (e.g. a converged epoch with dx = 0). Returns (step, fallback_used).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    s = x_cur - x_prev
    y = g_cur - g_prev
    den = float(np.dot(s, y))
    if math.isfinite(den) and den > REL_DEN_GUARD * _norm(s) * _norm(y):
        return float(np.dot(s, s)) / den / m, False
    return fallback, True


def sgd_bb_step(
    x_cur: np.ndarray,
    x_prev: np.ndarray,
    ghat_cur: np.ndarray,
    ghat_prev: np.ndarray,
    m: int,
    fallback: float,
) -> tuple[float, bool]:
    """Epoch BB step from averaged stochastic gradients, absolute-valued.

    Averaged gradients are noisy estimates taken at different iterates, so
    the secant denominator can come out negative; its absolute value is
    used. Returns (step, fallback_used).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    s = x_cur - x_prev
    y = ghat_cur - ghat_prev
    den = abs(float(np.dot(s, y)))
    if math.isfinite(den) and den > REL_DEN_GUARD * _norm(s) * _norm(y):
        return float(np.dot(s, s)) / den / m, False
    return fallback, True


class Decay(enum.Enum):
    """Target decay family for step smoothing: steps ~ C / phi(k)."""

    HARMONIC = "harmonic"  # phi(k) = k + 1
    CONSTANT = "constant"  # phi(k) = 1

    def phi(self, k: int) -> float:
        if self is Decay.HARMONIC:
            return float(k + 1)
        return 1.0


@dataclass(frozen=True)
class SmootherState:
    """Running constant c_hat and the number of BB steps absorbed so far."""

    c_hat: float = 1.0
    count: int = 0

    def __post_init__(self):
        if not self.c_hat > 0:
            raise ValueError("c_hat must be positive")
        if self.count < 0:
            raise ValueError("count must be nonnegative")


def smooth_step(
    state: SmootherState, eta_k: float, k: int, phi: Decay
) -> tuple[SmootherState, float]:
    """Absorb the raw BB step of epoch k and return the smoothed step.

    Smoothing projects the raw steps eta_2..eta_k onto the family
    C / phi(j) by a least-squares fit in log space, whose minimizer is the
    geometric mean c_hat = prod_j [eta_j * phi(j)]^(1/(k-1)). It is updated
    recursively:

        c_hat_k = c_hat_{k-1}^((k-2)/(k-1)) * [eta_k * phi(k)]^(1/(k-1))

    and the smoothed step is c_hat_k / phi(k). BB steps start at epoch
    k = 2, so the state passed in must have absorbed exactly epochs
    2..k-1 (a fresh state for k = 2).
    """
    if eta_k <= 0:
        raise ValueError(f"step must be positive, got {eta_k}")
    if k < 2:
        raise ValueError("smoothing starts at epoch k = 2")
    if state.count != k - 2:
        raise ValueError(
            f"state has absorbed {state.count} steps; epoch {k} expects {k - 2}"
        )
    w = 1.0 / (k - 1)
    c_hat = state.c_hat ** ((k - 2) * w) * (eta_k * phi.phi(k)) ** w
    new_state = SmootherState(c_hat, state.count + 1)
    return new_state, c_hat / phi.phi(k)
