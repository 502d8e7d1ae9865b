"""Shared data model and dense linear-algebra primitives.

All containers are plain dataclasses holding numpy arrays.  Values are
treated as immutable after construction and are safe to share across
parallel workers; nothing in this module mutates its inputs.

Tolerances: solves are checked at 1e-8, symmetry at 1e-10 relative.
These are round-off scale for double precision at dimensions up to ~1000.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    NotPositiveDefinite,
)

SYMMETRY_RTOL = 1e-10
SOLVE_RTOL = 1e-8


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return the symmetric part (M + M') / 2."""
    return (m + m.T) / 2.0


def check_symmetric(m: np.ndarray, rtol: float = SYMMETRY_RTOL) -> None:
    scale = max(float(np.abs(m).max()), 1e-300)
    if float(np.abs(m - m.T).max()) > rtol * scale:
        raise DimensionMismatch("matrix is not symmetric within tolerance")


@dataclass
class ReturnsMatrix:
    """T x p panel of per-period log-returns with a date index.

    Rows are time (strictly increasing date labels), columns are assets.
    Ingestion drops incomplete rows before construction, so no missing
    values are allowed here.
    """

    values: np.ndarray
    dates: list[str]
    tickers: list[str]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise DimensionMismatch("returns must be a 2-d array")
        t, p = self.values.shape
        if t < 2 or p < 2:
            raise DimensionMismatch(f"need T >= 2 and p >= 2, got {t}x{p}")
        if not np.all(np.isfinite(self.values)):
            raise DimensionMismatch("returns contain missing or non-finite values")
        if len(self.dates) != t:
            raise DimensionMismatch("date index length does not match row count")
        if len(self.tickers) != p:
            raise DimensionMismatch("ticker list length does not match column count")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise DimensionMismatch("dates must be strictly increasing")

    @property
    def n_periods(self) -> int:
        return self.values.shape[0]

    @property
    def n_assets(self) -> int:
        return self.values.shape[1]

    def row_slice(self, rows: range) -> "ReturnsMatrix":
        """Sub-panel on a row range (kept order, same tickers)."""
        idx = list(rows)
        return ReturnsMatrix(self.values[idx], [self.dates[i] for i in idx], self.tickers)

    def drop_rows(self, rows: range) -> "ReturnsMatrix":
        """Complement panel: all rows except ``rows`` (order preserved)."""
        drop = set(rows)
        idx = [i for i in range(self.n_periods) if i not in drop]
        return ReturnsMatrix(self.values[idx], [self.dates[i] for i in idx], self.tickers)


@dataclass
class CovarianceEstimate:
    """Symmetric p x p covariance estimate plus estimator metadata.

    ``intensity`` is the shrinkage weight where applicable and
    ``threshold`` the threshold level.  Thresholded estimates may be
    indefinite; the minimum eigenvalue is reported, never silently
    repaired here (the portfolio layer decides).
    """

    matrix: np.ndarray
    method: str
    intensity: float | None = None
    threshold: float | None = None

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise DimensionMismatch("covariance must be square")
        check_symmetric(self.matrix)
        if self.intensity is not None and not (-1e-12 <= self.intensity <= 1 + 1e-12):
            raise DimensionMismatch("shrinkage intensity must lie in [0, 1]")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def is_psd(self, rtol: float = 1e-10) -> bool:
        lam = np.linalg.eigvalsh(self.matrix)
        return bool(lam[0] >= -rtol * max(lam[-1], 0.0))


@dataclass
class PrecisionEstimate:
    """Symmetric p x p precision estimate with hyperparameters and support.

    ``support`` holds unordered index pairs (i < j) of nonzero
    off-diagonal entries.  ``degenerate`` flags an all-zero fit (e.g. an
    L1-constrained solve whose feasible minimum is the zero matrix);
    degenerate estimates are excluded from tuning grids.
    """

    matrix: np.ndarray
    method: str
    hyperparams: dict = field(default_factory=dict)
    support: frozenset = frozenset()
    degenerate: bool = False

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise DimensionMismatch("precision must be square")
        check_symmetric(self.matrix)
        if not self.degenerate and np.any(np.diag(self.matrix) <= 0):
            raise DimensionMismatch("precision diagonal must be strictly positive")

    @classmethod
    def from_matrix(cls, matrix, method, hyperparams=None, degenerate=False):
        """Build an estimate from a raw matrix: symmetrize, extract support."""
        m = symmetrize(np.asarray(matrix, dtype=float))
        p = m.shape[0]
        support = frozenset(
            (i, j) for i in range(p) for j in range(i + 1, p) if m[i, j] != 0.0
        )
        return cls(m, method, dict(hyperparams or {}), support, degenerate)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def nonzeros(self) -> int:
        return int(np.count_nonzero(self.matrix))


@dataclass
class SpdSolveReport:
    """Solution of an SPD linear system plus a condition estimate."""

    solution: np.ndarray
    condition_estimate: float


def solve_spd(a: np.ndarray, b: np.ndarray) -> SpdSolveReport:
    """Solve A X = B for symmetric positive-definite A via Cholesky.

    Never forms an explicit inverse.  The 1-norm condition number is
    estimated from the factorization.

    Raises
    ------
    NotPositiveDefinite
        If the factorization hits a non-positive pivot.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch("A must be square")
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch("B row count must match A")
    check_symmetric(a)
    try:
        c, low = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    x = scipy.linalg.cho_solve((c, low), b, check_finite=False)
    anorm = float(np.abs(a).sum(axis=0).max())
    rcond, info = scipy.linalg.lapack.dpocon(c, anorm, uplo="L")
    cond = 1.0 / rcond if (info == 0 and rcond > 0) else float("inf")
    return SpdSolveReport(solution=x, condition_estimate=max(cond, 1.0))


def spectral_decompose(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecompose a symmetric matrix; eigenvalues sorted descending.

    Returns ``(eigenvalues, eigenvectors)`` with orthonormal eigenvector
    columns ordered to match, so that ``V @ diag(lam) @ V.T`` recovers A.
    """
    a = np.asarray(a, dtype=float)
    check_symmetric(a)
    try:
        lam, vec = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    order = np.argsort(lam)[::-1]
    return lam[order], vec[:, order]
