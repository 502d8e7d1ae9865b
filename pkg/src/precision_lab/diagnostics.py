"""Precision-matrix property reports: walk-summability, conditioning, sparsity.

A matrix is walk-summable when replacing every off-diagonal entry by the
negative of its magnitude leaves it positive definite (attractive models
trivially qualify).  The distance reported here is the relative Frobenius
gap to the nearest such matrix, found by Dykstra alternating projections
in the sign-flipped space: clip eigenvalues to the PSD cone, clamp
off-diagonals non-positive, repeat.  The projection is exact in the
flipped space because flipping is an isometry entry-wise once signs are
matched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PrecisionEstimate, spectral_decompose, symmetrize
from .errors import DimensionMismatch, ProjectionNonConvergence


@dataclass
class PrecisionDiagnostics:
    """One summary row for a tuned precision estimate."""

    cv_error: float
    nonzeros: int
    condition_number: float
    delta_ws: float


def _as_matrix(estimate) -> np.ndarray:
    if isinstance(estimate, PrecisionEstimate):
        return estimate.matrix
    m = np.asarray(estimate, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch("expected a square matrix")
    return m


def _flip(m: np.ndarray) -> np.ndarray:
    out = -np.abs(m)
    np.fill_diagonal(out, np.diag(m))
    return out


def walk_summability_delta(estimate, tol: float = 1e-10, max_iter: int = 1000) -> float:
    """Relative Frobenius distance to the nearest walk-summable matrix.

    Returns exactly 0 when the sign-flipped matrix is already PSD (up to
    -1e-10 on the minimum eigenvalue).  Otherwise Dykstra projections
    alternate between the PSD cone and the non-positive off-diagonal
    pattern until the iterate moves less than ``tol``.
    """
    theta = _as_matrix(estimate)
    if np.any(np.diag(theta) <= 0):
        raise DimensionMismatch("diagonal must be strictly positive")
    flipped = _flip(theta)
    if float(np.linalg.eigvalsh(flipped)[0]) >= -1e-10:
        return 0.0

    x = flipped.copy()
    p_mem = np.zeros_like(x)
    q_mem = np.zeros_like(x)
    off = ~np.eye(x.shape[0], dtype=bool)
    for _ in range(max_iter):
        z = x + p_mem
        lam, vec = np.linalg.eigh(z)
        y = symmetrize(vec @ np.diag(np.maximum(lam, 0.0)) @ vec.T)
        p_mem = z - y
        z2 = y + q_mem
        x_new = z2.copy()
        x_new[off] = np.minimum(x_new[off], 0.0)
        q_mem = z2 - x_new
        if float(np.abs(x_new - x).max()) < tol:
            x = x_new
            break
        x = x_new
    else:
        raise ProjectionNonConvergence("Dykstra projections did not settle")

    signs = np.sign(theta)
    signs[signs == 0] = 1.0
    nearest = signs * (-x)
    np.fill_diagonal(nearest, np.diag(x))
    denom = float(np.linalg.norm(theta))
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(nearest - theta)) / denom


def condition_number(estimate) -> float:
    """Spectral condition number; infinity when not positive definite."""
    lam, _ = spectral_decompose(_as_matrix(estimate))
    if lam[-1] <= 0.0:
        return float("inf")
    return float(lam[0] / lam[-1])


def nonzero_count(estimate, tol: float = 0.0) -> int:
    """Entries with magnitude above ``tol``, full matrix, diagonal included."""
    m = _as_matrix(estimate)
    return int((np.abs(m) > tol).sum())


def summarize_precision(estimate, tuning) -> PrecisionDiagnostics:
    """Assemble the standard diagnostics row for a tuned estimate."""
    return PrecisionDiagnostics(
        cv_error=float(tuning.best_score),
        nonzeros=nonzero_count(estimate),
        condition_number=condition_number(estimate),
        delta_ws=walk_summability_delta(estimate),
    )


def diagnostics_table_rows(rows: dict) -> list[list[str]]:
    """Serialize method -> PrecisionDiagnostics into the report layout."""
    out = [["Method", "CV Error", "Non-zeros", "Condition No.", "Delta WS"]]
    for method, diag in rows.items():
        out.append([
            method,
            repr(round(diag.cv_error, 10)),
            str(diag.nonzeros),
            repr(round(diag.condition_number, 6)),
            repr(diag.delta_ws),
        ])
    return out
