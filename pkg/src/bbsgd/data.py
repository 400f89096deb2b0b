"""LIBSVM text format parsing/serialization and seeded synthetic datasets.

Grammar accepted per nonempty line:

    <label> <idx>:<val> <idx>:<val> ...

Labels must parse to +1/-1 ("1", "+1", "-1", "1.0", ...); with
``map01_labels=True`` the {0, 1} convention is also accepted and mapped to
{-1, +1}. Feature indices are 1-based and strictly increasing within a
line. Values may use decimal or scientific notation and must be finite.
Lines starting with '#' are skipped and counted.
"""

from __future__ import annotations

import gzip
import hashlib
import io
import math
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .objectives import Dataset, Sample, SparseVector


class ParseError(ValueError):
    """Malformed LIBSVM input; carries the offending 1-based line number."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class ParseReport:
    n_samples: int
    inferred_d: int  # maximum feature index seen (0 if no features at all)
    n_skipped_comments: int


def _label_value(tok: str, line_no: int, map01: bool) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"non-numeric label {tok!r}", line_no) from None
    if v == 1.0:
        return 1.0
    if v == -1.0:
        return -1.0
    if map01 and v == 0.0:
        return -1.0
    accepted = "{-1, 0, +1}" if map01 else "{-1, +1}"
    raise ParseError(f"label {tok!r} outside accepted set {accepted}", line_no)


def parse_libsvm(
    source: str | Iterable[str] | IO[str],
    *,
    d: int | None = None,
    map01_labels: bool = False,
) -> tuple[Dataset, ParseReport]:
    """Parse LIBSVM text into a Dataset plus a ParseReport.

    ``source`` may be a string, an open text stream or any iterable of
    lines. The dimension is inferred as the maximum feature index unless an
    explicit ``d`` is given, in which case indices beyond it are an error.
    """
    if isinstance(source, str):
        lines: Iterable[str] = io.StringIO(source)
    else:
        lines = source

    samples: list[Sample] = []
    max_index = 0
    n_comments = 0
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            n_comments += 1
            continue
        tokens = line.split()
        label = _label_value(tokens[0], line_no, map01_labels)
        idxs: list[int] = []
        vals: list[float] = []
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"expected <idx>:<val>, got {tok!r}", line_no)
            try:
                idx = int(idx_s)
            except ValueError:
                raise ParseError(f"non-numeric feature index {idx_s!r}", line_no) from None
            try:
                val = float(val_s)
            except ValueError:
                raise ParseError(f"non-numeric feature value {val_s!r}", line_no) from None
            if idx < 1:
                raise ParseError(f"feature index {idx} must be >= 1", line_no)
            if idx <= prev:
                raise ParseError(
                    f"non-increasing feature index {idx} after {prev}", line_no
                )
            if not math.isfinite(val):
                raise ParseError(f"non-finite feature value {val_s!r}", line_no)
            if d is not None and idx > d:
                raise ParseError(
                    f"feature index {idx} exceeds declared dimension {d}", line_no
                )
            idxs.append(idx)
            vals.append(val)
            prev = idx
        max_index = max(max_index, prev)
        samples.append(
            Sample(
                SparseVector(np.array(idxs, dtype=np.int64), np.array(vals)),
                label,
            )
        )

    if not samples:
        raise ParseError("empty dataset")
    dim = d if d is not None else max_index
    report = ParseReport(len(samples), max_index, n_comments)
    return Dataset(tuple(samples), dim), report


def serialize_libsvm(data: Dataset) -> str:
    """Write the dataset back in the same grammar; round-trips exactly.

    Values are emitted with repr(), the shortest decimal that reparses to
    the identical float.
    """
    out = []
    for s in data.samples:
        parts = ["+1" if s.label == 1.0 else "-1"]
        for idx, val in zip(s.features.indices, s.features.values):
            parts.append(f"{int(idx)}:{float(val)!r}")
        out.append(" ".join(parts))
    return "\n".join(out) + "\n"


def load_libsvm(path: str, *, d: int | None = None, map01_labels: bool = False):
    """Parse a LIBSVM file; files ending in .gz are decompressed transparently."""
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rt") as fh:  # type: ignore[operator]
        return parse_libsvm(fh, d=d, map01_labels=map01_labels)


def synthesize_dataset(seed: int, n: int, d: int, noise: float) -> Dataset:
    """Seeded linearly-separable-plus-noise dataset for desk-scale tests.

    The first draw from the seeded generator is the ground-truth direction
    w; features are standard Gaussian rows, labels are sign(a_i . w), and
    each label is then flipped independently with probability ``noise``.
    Identical seeds give identical datasets.
    """
    if n < 1 or d < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    if not 0.0 <= noise <= 1.0:
        raise ValueError(f"noise must be in [0, 1], got {noise}")
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(d)
    feats = rng.standard_normal((n, d))
    labels = np.where(feats @ w >= 0.0, 1.0, -1.0)
    flips = rng.random(n) < noise
    labels[flips] *= -1.0
    all_idx = np.arange(1, d + 1, dtype=np.int64)
    samples = tuple(
        Sample(SparseVector(all_idx, feats[i].copy()), float(labels[i])) for i in range(n)
    )
    return Dataset(samples, d)


def dataset_fingerprint(data: Dataset) -> str:
    """SHA-256 over a canonical byte encoding; used as a cache key."""
    h = hashlib.sha256()
    h.update(f"{data.n}:{data.d}".encode())
    for s in data.samples:
        h.update(b"+" if s.label == 1.0 else b"-")
        h.update(s.features.indices.tobytes())
        h.update(s.features.values.tobytes())
    return h.hexdigest()
