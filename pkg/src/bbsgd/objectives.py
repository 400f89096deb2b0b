"""Finite-sum objectives: l2-regularized logistic regression and squared-hinge SVM.

The objective is F(x) = (1/n) * sum_i f_i(x) over n labeled samples
(a_i, b_i) with b_i in {+1, -1}:

    logistic ("lr"):      f_i(x) = log(1 + exp(-b_i a_i.x)) + (lam/2) ||x||^2
    squared hinge ("svm") f_i(x) = max(0, 1 - b_i a_i.x)^2  + (lam/2) ||x||^2

Sample indices in the public operations are 1-based, matching the 1-based
feature indices of the LIBSVM format. Iterates and gradients are plain
float64 numpy arrays of length d; feature rows are sparse. All operations
are pure, so a Dataset/Problem pair can be shared read-only across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

LOGISTIC_REGRESSION = "lr"
SQUARED_HINGE_SVM = "svm"
LOSS_KINDS = (LOGISTIC_REGRESSION, SQUARED_HINGE_SVM)


@dataclass(frozen=True, eq=False)
class SparseVector:
    """Sparse feature row: parallel arrays of 1-based indices and values.

    Indices must be strictly increasing (this also forbids duplicates).
    """

    indices: np.ndarray
    values: np.ndarray
    idx0: np.ndarray = field(init=False, repr=False)  # 0-based view for fancy indexing

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.ndim != 1 or val.ndim != 1 or idx.shape != val.shape:
            raise ValueError("indices and values must be 1-d arrays of equal length")
        if idx.size and idx[0] < 1:
            raise ValueError("feature indices are 1-based; got index < 1")
        if idx.size > 1 and not np.all(np.diff(idx) > 0):
            raise ValueError("feature indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        object.__setattr__(self, "idx0", idx - 1)

    @classmethod
    def from_pairs(cls, pairs) -> "SparseVector":
        pairs = list(pairs)
        return cls(
            np.array([i for i, _ in pairs], dtype=np.int64),
            np.array([v for _, v in pairs], dtype=np.float64),
        )

    def dot(self, x: np.ndarray) -> float:
        return float(np.dot(x[self.idx0], self.values))

    def norm_sq(self) -> float:
        return float(np.dot(self.values, self.values))

    def densify(self, d: int) -> np.ndarray:
        out = np.zeros(d)
        out[self.idx0] = self.values
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return np.array_equal(self.indices, other.indices) and np.array_equal(
            self.values, other.values
        )


class Sample(NamedTuple):
    features: SparseVector
    label: float  # +1.0 or -1.0


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable collection of n labeled sparse samples in dimension d."""

    samples: tuple[Sample, ...]
    d: int

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if len(self.samples) < 1:
            raise ValueError("empty dataset")
        if self.d < 0:
            raise ValueError("dimension must be nonnegative")
        for s in self.samples:
            if s.label not in (1.0, -1.0):
                raise ValueError(f"labels must be +1 or -1, got {s.label!r}")
            if s.features.indices.size and int(s.features.indices[-1]) > self.d:
                raise ValueError(
                    f"feature index {int(s.features.indices[-1])} exceeds dimension {self.d}"
                )

    @property
    def n(self) -> int:
        return len(self.samples)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.d == other.d
            and len(self.samples) == len(other.samples)
            and all(
                a.label == b.label and a.features == b.features
                for a, b in zip(self.samples, other.samples)
            )
        )


@dataclass(frozen=True)
class Problem:
    """Loss kind ("lr" or "svm") plus l2 regularization weight."""

    kind: str
    lam: float

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; expected one of {LOSS_KINDS}")
        if self.lam < 0:
            raise ValueError("regularization weight must be nonnegative")


@dataclass(frozen=True)
class CurvatureEstimates:
    """Strong-convexity modulus mu and component smoothness bound L, 0 < mu <= L."""

    mu: float
    L: float

    def __post_init__(self):
        if not (0 < self.mu <= self.L):
            raise ValueError(f"need 0 < mu <= L, got mu={self.mu}, L={self.L}")


def _log1pexp(u: float) -> float:
    # log(1 + e^u) without overflow for large |u|
    if u > 0:
        return u + math.log1p(math.exp(-u))
    return math.log1p(math.exp(u))


def _sigmoid(u: float) -> float:
    if u >= 0:
        return 1.0 / (1.0 + math.exp(-u))
    e = math.exp(u)
    return e / (1.0 + e)


def _check_index(data: Dataset, i: int) -> None:
    if not 1 <= i <= data.n:
        raise IndexError(f"sample index {i} out of range 1..{data.n}")


def _check_dim(data: Dataset, x: np.ndarray) -> None:
    if x.shape != (data.d,):
        raise ValueError(f"iterate has shape {x.shape}, expected ({data.d},)")


def _component_loss0(problem: Problem, data: Dataset, i0: int, x: np.ndarray) -> float:
    """Loss of component i0 (0-based), no argument validation."""
    s = data.samples[i0]
    z = s.label * s.features.dot(x)
    reg = 0.5 * problem.lam * float(np.dot(x, x))
    if problem.kind == LOGISTIC_REGRESSION:
        return _log1pexp(-z) + reg
    h = 1.0 - z
    return (h * h if h > 0.0 else 0.0) + reg


def _component_gradient0(problem: Problem, data: Dataset, i0: int, x: np.ndarray) -> np.ndarray:
    """Gradient of component i0 (0-based), densified, no argument validation."""
    s = data.samples[i0]
    sv = s.features
    z = s.label * float(np.dot(x[sv.idx0], sv.values))
    if problem.kind == LOGISTIC_REGRESSION:
        coef = -s.label * _sigmoid(-z)
    else:
        h = 1.0 - z
        # the squared hinge is C^1: gradient of the hinge term is 0 at the kink
        coef = -2.0 * s.label * h if h > 0.0 else 0.0
    out = problem.lam * x
    if coef != 0.0:
        out[sv.idx0] += coef * sv.values
    return out


def component_loss(problem: Problem, data: Dataset, i: int, x: np.ndarray) -> float:
    """f_i(x) for the i-th sample (1-based)."""
    _check_index(data, i)
    _check_dim(data, x)
    return _component_loss0(problem, data, i - 1, x)


def component_gradient(problem: Problem, data: Dataset, i: int, x: np.ndarray) -> np.ndarray:
    """grad f_i(x) for the i-th sample (1-based), returned as a dense array."""
    _check_index(data, i)
    _check_dim(data, x)
    return _component_gradient0(problem, data, i - 1, x)


def full_objective(problem: Problem, data: Dataset, x: np.ndarray) -> float:
    """F(x): mean of the component losses, summed in ascending sample order.

    The summation order is fixed so repeated evaluations are bit-identical.
    """
    _check_dim(data, x)
    acc = 0.0
    for i0 in range(data.n):
        acc += _component_loss0(problem, data, i0, x)
    return acc / data.n


def full_gradient(problem: Problem, data: Dataset, x: np.ndarray) -> np.ndarray:
    """grad F(x): mean of the component gradients, ascending sample order."""
    _check_dim(data, x)
    acc = np.zeros(data.d)
    for i0 in range(data.n):
        acc += _component_gradient0(problem, data, i0, x)
    return acc / data.n


def estimate_curvature(problem: Problem, data: Dataset) -> CurvatureEstimates:
    """Closed-form curvature bounds: mu = lam and a standard smoothness bound.

    For the logistic loss the component Hessian is bounded by ||a_i||^2 / 4,
    for the squared hinge by 2 ||a_i||^2; both get + lam from the regularizer.
    These are upper bounds on the true L, which makes downstream theory
    checks conservative. Requires lam > 0, otherwise there is no
    strong-convexity estimate to report.
    """
    if problem.lam <= 0:
        raise ValueError("lambda = 0: no strong-convexity estimate available")
    max_sq = max(s.features.norm_sq() for s in data.samples)
    if problem.kind == LOGISTIC_REGRESSION:
        L = max_sq / 4.0 + problem.lam
    else:
        L = 2.0 * max_sq + problem.lam
    return CurvatureEstimates(mu=problem.lam, L=L)
