"""Shared domain types, constraint-set validation, RNG plumbing, and file formats.

Matrices are plain 2-d float64 ``numpy`` arrays throughout the package.
Indices are 0-based in memory; the CSV observation format on disk is 1-based.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

# Set-membership tolerances: relative on norms, absolute on entry bounds.
# Chosen to sit just above double-precision SVD accuracy.
REL_TOL_NORM = 1e-9
ABS_TOL_ENTRY = 1e-12


class ShapeMismatchError(ValueError):
    """Operands have incompatible dimensions."""


class RateFloorError(ValueError):
    """A Poisson rate fell below the admissible floor.

    ``index`` names the offending observation: an ``(i, j)`` pair for
    completion, a measurement index for recovery.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DegenerateInputError(ValueError):
    """Input is degenerate for the requested operation (e.g. no positive part)."""


def as_matrix(X):
    """Coerce to a 2-d float64 array, rejecting non-finite entries."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeMismatchError(f"expected a 2-d matrix, got ndim={X.ndim}")
    if not np.all(np.isfinite(X)):
        raise ValueError("matrix contains non-finite entries")
    return X


@dataclass(frozen=True)
class FeasibleSet:
    """Constraint-set parameters shared by recovery and completion.

    Parameters
    ----------
    alpha : float
        Entry-wise upper bound (> 0).
    beta : float
        Entry-wise lower bound (> 0, < alpha).
    rank_budget : int
        Rank surrogate r >= 1 entering the nuclear-norm radius.
    total_intensity : float
        Total intensity I > 0 used by the recovery constraint set.
    entry_floor : float
        Entry-wise floor c > 0 of the recovery candidate set.
    """

    alpha: float
    beta: float
    rank_budget: int = 1
    total_intensity: float = 1.0
    entry_floor: float = 1e-6

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.beta < self.alpha:
            raise ValueError(f"need beta < alpha, got beta={self.beta}, alpha={self.alpha}")
        if self.rank_budget < 1:
            raise ValueError(f"rank_budget must be >= 1, got {self.rank_budget}")
        if not self.total_intensity > 0:
            raise ValueError(f"total_intensity must be positive, got {self.total_intensity}")
        if not self.entry_floor > 0:
            raise ValueError(f"entry_floor must be positive, got {self.entry_floor}")

    def nuclear_radius(self, d1, d2):
        """Nuclear-norm radius alpha * sqrt(r * d1 * d2)."""
        return self.alpha * math.sqrt(self.rank_budget * d1 * d2)

    def lipschitz(self):
        """Gradient Lipschitz constant alpha / beta**2 of the completion objective."""
        return self.alpha / self.beta**2


@dataclass(frozen=True)
class CompletionObservations:
    """Poisson counts on an observed index set of a d1-by-d2 matrix.

    ``rows``/``cols`` are 0-based and sorted lexicographically by (row, col);
    ``counts`` is int64 and aligned with them.  ``sample_prob`` records the
    Bernoulli sampling parameter m / (d1*d2).
    """

    rows: np.ndarray
    cols: np.ndarray
    counts: np.ndarray
    dims: tuple
    sample_prob: float = 1.0

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        counts = np.asarray(self.counts, dtype=np.int64)
        if not (rows.shape == cols.shape == counts.shape) or rows.ndim != 1:
            raise ShapeMismatchError("rows, cols and counts must be aligned 1-d arrays")
        d1, d2 = self.dims
        if rows.size:
            if rows.min() < 0 or rows.max() >= d1 or cols.min() < 0 or cols.max() >= d2:
                raise ValueError("observation index outside the matrix")
            if counts.min() < 0:
                raise ValueError("counts must be nonnegative")
        order = np.lexsort((cols, rows))
        rows, cols, counts = rows[order], cols[order], counts[order]
        flat = rows * d2 + cols
        if rows.size and np.any(np.diff(flat) == 0):
            k = int(np.argmin(np.diff(flat)))
            raise ValueError(f"duplicate observation at ({rows[k]}, {cols[k]})")
        for name, val in (("rows", rows), ("cols", cols), ("counts", counts)):
            object.__setattr__(self, name, val)
        for arr in (rows, cols, counts):
            arr.flags.writeable = False

    def __len__(self):
        return self.rows.size

    def dense_counts(self):
        """Counts scattered into a dense d1-by-d2 float matrix (zeros off-support)."""
        Y = np.zeros(self.dims)
        Y[self.rows, self.cols] = self.counts
        return Y

    def mask(self):
        """Boolean d1-by-d2 indicator of the observed set."""
        mask = np.zeros(self.dims, dtype=bool)
        mask[self.rows, self.cols] = True
        return mask


@dataclass(frozen=True)
class CompressiveObservations:
    """Vector of m Poisson measurement counts from the compressive model."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1:
            raise ShapeMismatchError("counts must be a 1-d vector")
        if counts.size and counts.min() < 0:
            raise ValueError("counts must be nonnegative")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    def __len__(self):
        return self.counts.size


@dataclass
class SolverTrace:
    """Per-iteration audit record of a solver run."""

    objective_values: list = field(default_factory=list)
    step_control: list = field(default_factory=list)
    iterations_run: int = 0
    terminated_by: str = "max_iter"  # "max_iter" | "tolerance"

    def record(self, objective, t):
        self.objective_values.append(float(objective))
        self.step_control.append(float(t))
        self.iterations_run += 1

    def to_csv(self, path):
        """Write ``iter,objective,t`` rows for plotting/auditing."""
        lines = ["iter,objective,t"]
        for k, (f, t) in enumerate(zip(self.objective_values, self.step_control), start=1):
            lines.append(f"{k},{f!r},{t!r}")
        _atomic_write_text(path, "\n".join(lines) + "\n")


@dataclass
class MembershipReport:
    """Outcome of a constraint-set membership check."""

    ok: bool
    which: str
    violations: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def validate_membership(X, fset, which):
    """Check membership of ``X`` in one of the constraint sets.

    Parameters
    ----------
    X : array
        Candidate matrix.
    fset : FeasibleSet
        Set parameters (alpha, beta, rank budget, total intensity).
    which : str
        One of ``"S"`` (box + nuclear ball), ``"Gamma0"`` (nonnegative with
        total intensity I), ``"Gamma1"`` (box) or ``"Gamma2"`` (nuclear ball).

    Returns
    -------
    MembershipReport
        Truthy iff all invariants of the named set hold; ``violations`` names
        the first offending entry or norm.
    """
    X = as_matrix(X)
    d1, d2 = X.shape
    report = MembershipReport(ok=True, which=which)

    def _check_box():
        low = X < fset.beta - ABS_TOL_ENTRY
        high = X > fset.alpha + ABS_TOL_ENTRY
        if low.any():
            i, j = np.unravel_index(int(np.argmax(low)), X.shape)
            report.violations.append(
                f"entry ({i}, {j}) = {X[i, j]!r} below lower bound {fset.beta}")
        if high.any():
            i, j = np.unravel_index(int(np.argmax(high)), X.shape)
            report.violations.append(
                f"entry ({i}, {j}) = {X[i, j]!r} above upper bound {fset.alpha}")

    def _check_nuclear():
        radius = fset.nuclear_radius(d1, d2)
        nuc = float(np.linalg.svd(X, compute_uv=False).sum())
        if nuc > radius * (1 + REL_TOL_NORM):
            report.violations.append(f"nuclear norm {nuc!r} exceeds radius {radius!r}")

    if which == "Gamma1":
        _check_box()
    elif which == "Gamma2":
        _check_nuclear()
    elif which == "S":
        _check_box()
        _check_nuclear()
    elif which == "Gamma0":
        neg = X < -ABS_TOL_ENTRY
        if neg.any():
            i, j = np.unravel_index(int(np.argmax(neg)), X.shape)
            report.violations.append(f"entry ({i}, {j}) = {X[i, j]!r} is negative")
        total = float(np.abs(X).sum())
        target = fset.total_intensity
        if abs(total - target) > REL_TOL_NORM * max(abs(target), 1.0):
            report.violations.append(f"total intensity {total!r} != {target!r}")
    else:
        raise ValueError(f"unknown set {which!r}; expected S, Gamma0, Gamma1 or Gamma2")

    report.ok = not report.violations
    return report


def seeded_rng(seed):
    """Deterministic random stream from a 64-bit seed.

    Identical seeds yield identical uniform/Bernoulli/Poisson draws across
    runs (and across platforms for a fixed numpy version).
    """
    return np.random.Generator(np.random.PCG64(int(seed)))


# ---------------------------------------------------------------------------
# File formats.
# Dense matrices: CSV, one row per line, '.' decimal, no header.
# Sparse observations: CSV triplets with header `row,col,count`, 1-based.
# ---------------------------------------------------------------------------

def _atomic_write_text(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def save_dense_csv(path, X):
    """Write a dense matrix as header-less CSV; floats round-trip exactly."""
    X = as_matrix(X)
    lines = [",".join(repr(float(v)) for v in row) for row in X]
    _atomic_write_text(path, "\n".join(lines) + "\n")


def load_dense_csv(path):
    """Read a dense header-less CSV matrix written by :func:`save_dense_csv`."""
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ValueError(
                    f"{path}: line {lineno}: expected {width} columns, got {len(row)}")
            rows.append(row)
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    return np.array(rows)


def save_observations_csv(path, obs):
    """Write completion observations as 1-based `row,col,count` triplets."""
    lines = ["row,col,count"]
    for i, j, y in zip(obs.rows, obs.cols, obs.counts):
        lines.append(f"{i + 1},{j + 1},{y}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def load_observations_csv(path, dims, sample_prob=1.0):
    """Read `row,col,count` triplets (1-based) into CompletionObservations."""
    rows, cols, counts = [], [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "row,col,count":
            raise ValueError(f"{path}: line 1: expected header 'row,col,count', got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            toks = line.split(",")
            if len(toks) != 3:
                raise ValueError(f"{path}: line {lineno}: expected 3 fields, got {len(toks)}")
            try:
                i, j, y = int(toks[0]), int(toks[1]), int(toks[2])
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
            rows.append(i - 1)
            cols.append(j - 1)
            counts.append(y)
    return CompletionObservations(
        rows=np.array(rows, dtype=np.int64),
        cols=np.array(cols, dtype=np.int64),
        counts=np.array(counts, dtype=np.int64),
        dims=tuple(dims),
        sample_prob=sample_prob,
    )
