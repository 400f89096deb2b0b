"""Computable convergence-rate constants for the variance-reduced runners.

These are the quantities that certify linear convergence for epoch-snapshot
SVRG runs on mu-strongly convex objectives with L-smooth components. They
are used by tests and the CLI to validate recorded runs against the bounds,
not to prove anything symbolically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


def _check_mu_L(mu: float, L: float) -> None:
    if not (0 < mu <= L):
        raise ValueError(f"need 0 < mu <= L, got mu={mu}, L={L}")


def alpha_svrg_i(eta: float, mu: float, L: float, m: int) -> float:
    """Per-epoch contraction factor for last-iterate-snapshot SVRG:

        alpha = (1 - 2*eta*mu*(1 - eta*L))^m + 4*eta*L^2 / (mu*(1 - eta*L))

    Linear convergence of the squared snapshot distance holds when
    alpha < 1. Domain: 0 < eta < 1/L.
    """
    _check_mu_L(mu, L)
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0 < eta < 1.0 / L:
        raise ValueError(f"eta must lie in (0, 1/L) = (0, {1.0 / L}), got {eta}")
    base = 1.0 - 2.0 * eta * mu * (1.0 - eta * L)
    return base**m + 4.0 * eta * L * L / (mu * (1.0 - eta * L))


def alpha_svrg_ii(eta: float, mu: float, L: float, m: int) -> float:
    """Per-epoch contraction factor for random-snapshot SVRG (objective gap):

        alpha = 1 / (mu*eta*m*(1 - 2*L*eta)) + 2*L*eta / (1 - 2*L*eta)

    Domain: 0 < eta < 1/(2L).
    """
    _check_mu_L(mu, L)
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0 < eta < 1.0 / (2.0 * L):
        raise ValueError(f"eta must lie in (0, 1/(2L)) = (0, {1.0 / (2.0 * L)}), got {eta}")
    den = 1.0 - 2.0 * L * eta
    return 1.0 / (mu * eta * m * den) + 2.0 * L * eta / den


def theta_rate(mu: float, L: float) -> float:
    """Linear rate (1 - e^(-2*mu/L)) / 2 achieved by BB-stepped SVRG; in (0, 1/2)."""
    _check_mu_L(mu, L)
    return (1.0 - math.exp(-2.0 * mu / L)) / 2.0


def min_epoch_length(mu: float, L: float, theta_frac: float) -> int:
    """Smallest inner-loop length m certifying the rate theta_frac * theta_rate.

    The certified condition is

        m > max( 2 / (log(1 - 2*theta) + 2*mu/L),  4*L^2/(theta*mu^2) + L/mu )

    with theta = theta_frac * theta_rate(mu, L). At theta_frac = 1 the first
    denominator is exactly zero, so the slack factor must be strictly below
    one; it is exposed as a parameter rather than perturbed silently.
    """
    _check_mu_L(mu, L)
    if not 0 < theta_frac < 1:
        raise ValueError(f"theta_frac must lie strictly in (0, 1), got {theta_frac}")
    theta = theta_frac * theta_rate(mu, L)
    term1 = 2.0 / (math.log(1.0 - 2.0 * theta) + 2.0 * mu / L)
    term2 = 4.0 * L * L / (theta * mu * mu) + L / mu
    return int(math.floor(max(term1, term2))) + 1


def svrg_bb_step_bounds(mu: float, L: float, m: int) -> tuple[float, float]:
    """Interval [1/(m*L), 1/(m*mu)] that contains every BB epoch step
    computed from exact full gradients of a mu-strongly convex, L-smooth
    objective."""
    _check_mu_L(mu, L)
    if m < 1:
        raise ValueError("m must be >= 1")
    return 1.0 / (m * L), 1.0 / (m * mu)


@dataclass(frozen=True)
class TheoryConstants:
    """Bundle of constants used when validating a run against the bounds."""

    mu: float
    L: float
    m: int
    theta: float
    alpha: float

    def __post_init__(self):
        _check_mu_L(self.mu, self.L)
        if not 0 < self.theta < 0.5:
            raise ValueError("theta must lie in (0, 1/2)")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


def constants_for(mu: float, L: float, m: int, eta: float) -> TheoryConstants:
    """Convenience constructor evaluating theta and the SVRG contraction at eta."""
    return TheoryConstants(
        mu=mu, L=L, m=m, theta=theta_rate(mu, L), alpha=alpha_svrg_i(eta, mu, L, m)
    )
