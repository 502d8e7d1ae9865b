"""Covariance matrix estimators.

Sample covariance, linear shrinkage toward a scaled identity (Ledoit-Wolf
2004 style, Rao-Blackwellized and oracle-approximating variants of Chen,
Wiesel, Eldar & Hero 2010, the general-target estimator of Bodnar, Gupta
& Parolya 2014), analytical nonlinear shrinkage (Ledoit & Wolf 2020),
hard/soft/adaptive thresholding, and rotationally invariant eigenvalue
cleaning of the sample correlation matrix.

Conventions: the sample covariance uses divisor T (maximum likelihood),
consistently everywhere.  All estimators emit exactly symmetric matrices.
Shrinkage intensities are clipped to [0, 1].  Thresholded estimates may
be indefinite and are not repaired here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CovarianceEstimate, ReturnsMatrix, symmetrize
from .errors import DegenerateSpectrum, DegenerateTarget, DimensionMismatch

COVARIANCE_METHODS = (
    "sample", "lwl", "rblw", "oas", "bdl", "lwnl", "hard", "soft", "adaptive", "rie",
)


@dataclass
class ShrinkageResult:
    """A shrunk covariance with its intensity and target description."""

    estimate: CovarianceEstimate
    intensity: float
    target_kind: str
    converged: bool = True


@dataclass
class CleanedSpectrum:
    """Raw and cleaned correlation eigenvalues, with aspect ratio q = p/T."""

    raw_eigenvalues: np.ndarray
    cleaned_eigenvalues: np.ndarray
    q: float


def _demeaned(r: ReturnsMatrix) -> np.ndarray:
    x = r.values
    return x - x.mean(axis=0, keepdims=True)


def sample_covariance(r: ReturnsMatrix) -> CovarianceEstimate:
    """Sample covariance S = (1/T) sum_t (x_t - xbar)(x_t - xbar)'."""
    x = _demeaned(r)
    t = x.shape[0]
    s = symmetrize(x.T @ x / t)
    return CovarianceEstimate(s, method="sample")


def sample_correlation(r: ReturnsMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Sample correlation matrix and the column standard deviations.

    Raises DegenerateSpectrum when a column has zero variance.
    """
    s = sample_covariance(r).matrix
    sd = np.sqrt(np.diag(s))
    if np.any(sd <= 0):
        raise DegenerateSpectrum("zero-variance column")
    corr = symmetrize(s / np.outer(sd, sd))
    np.fill_diagonal(corr, 1.0)
    return corr, sd


def shrink_lw_linear(r: ReturnsMatrix) -> ShrinkageResult:
    """Linear shrinkage toward the scaled identity (tr S / p) I.

    The intensity is the asymptotically optimal constant of Ledoit & Wolf
    (2004, J. Multivariate Anal. 88), estimated from the data and clipped
    to [0, 1].
    """
    x = _demeaned(r)
    t, p = x.shape
    s = symmetrize(x.T @ x / t)
    mu = np.trace(s) / p
    d2 = float(((s - mu * np.eye(p)) ** 2).sum())
    x2 = x**2
    b2bar = (float((x2.T @ x2).sum()) - t * float((s * s).sum())) / t**2
    b2 = min(max(b2bar, 0.0), d2)
    delta = 0.0 if d2 <= 0 else b2 / d2
    shrunk = symmetrize(delta * mu * np.eye(p) + (1.0 - delta) * s)
    est = CovarianceEstimate(shrunk, method="lwl", intensity=delta)
    return ShrinkageResult(est, delta, "scaled_identity")


def shrink_rblw(r: ReturnsMatrix) -> ShrinkageResult:
    """Rao-Blackwellized Ledoit-Wolf shrinkage for Gaussian samples.

    Closed-form intensity of Chen, Wiesel, Eldar & Hero (2010, IEEE
    Trans. Signal Process. 58), obtained by conditioning the Ledoit-Wolf
    estimator on the sample covariance sufficient statistic.
    """
    x = _demeaned(r)
    t, p = x.shape
    s = symmetrize(x.T @ x / t)
    tr_s = float(np.trace(s))
    tr_s2 = float((s * s).sum())
    denom = (t + 2.0) * (tr_s2 - tr_s**2 / p)
    if denom <= 0.0:
        rho = 1.0
    else:
        rho = (((t - 2.0) / t) * tr_s2 + tr_s**2) / denom
    rho = min(max(rho, 0.0), 1.0)
    target = (tr_s / p) * np.eye(p)
    est = CovarianceEstimate(symmetrize((1 - rho) * s + rho * target), "rblw", intensity=rho)
    return ShrinkageResult(est, rho, "scaled_identity")


def shrink_oas(r: ReturnsMatrix, tol: float = 1e-10, max_iter: int = 100) -> ShrinkageResult:
    """Oracle-approximating shrinkage via fixed-point iteration.

    Starts from the naive (unshrunk) estimate and iterates the oracle
    recursion of Chen et al. (2010) until the intensity moves by less
    than ``tol``.  With the trace-preserving target the recursion reduces
    to a scalar map; the iterates stay in [0, 1].
    """
    x = _demeaned(r)
    t, p = x.shape
    s = symmetrize(x.T @ x / t)
    a = float((s * s).sum())               # tr(S^2)
    c = float(np.trace(s)) ** 2 / p        # tr(S)^2 / p <= tr(S^2)
    b = p * c                              # tr(S)^2

    def step(rho):
        ar = (1.0 - rho) * a + rho * c     # tr(Sigma_j S)
        num = (1.0 - 2.0 / p) * ar + b
        den = (t + 1.0 - 2.0 / p) * ar + (1.0 - t / p) * b
        return num / den

    rho = 0.0
    converged = False
    trace = [rho]
    for _ in range(max_iter):
        nxt = step(rho)
        trace.append(nxt)
        if abs(nxt - rho) < tol:
            rho = nxt
            converged = True
            break
        rho = nxt
    rho = min(max(rho, 0.0), 1.0)
    target = (np.trace(s) / p) * np.eye(p)
    est = CovarianceEstimate(symmetrize((1 - rho) * s + rho * target), "oas", intensity=rho)
    result = ShrinkageResult(est, rho, "scaled_identity", converged=converged)
    result.trace = trace
    return result


def shrink_bodnar(r: ReturnsMatrix, target: np.ndarray | None = None) -> ShrinkageResult:
    """General-target linear shrinkage alpha*S + beta*Sigma0.

    Intensities follow the deterministic-equivalent formulas of Bodnar,
    Gupta & Parolya (2014, J. Multivariate Anal. 132): ||Sigma||_F^2 is
    estimated by ||S||_F^2 - tr(S)^2 / T and the oracle normal equations
    are solved with that plug-in.  ``target`` defaults to the identity
    and must be symmetric positive definite.
    """
    x = _demeaned(r)
    t, p = x.shape
    s = symmetrize(x.T @ x / t)
    if target is None:
        sigma0 = np.eye(p)
        target_kind = "identity"
    else:
        sigma0 = symmetrize(np.asarray(target, dtype=float))
        if sigma0.shape != (p, p):
            raise DimensionMismatch("target shape must match the panel")
        if np.linalg.eigvalsh(sigma0)[0] <= 0:
            raise DegenerateTarget("target must be positive definite")
        target_kind = "user_matrix"

    s2 = float((s * s).sum())
    t2 = float((sigma0 * sigma0).sum())
    st = float((s * sigma0).sum())
    proj = st**2 / t2
    denom = s2 - proj
    if denom <= 1e-14 * max(s2, 1e-300):
        # S proportional to the target: pure projection recovers S itself
        alpha = 0.0
        beta = st / t2
    else:
        sig2_hat = s2 - float(np.trace(s)) ** 2 / t
        alpha = (sig2_hat - proj) / denom
        alpha = min(max(alpha, 0.0), 1.0)
        beta = (1.0 - alpha) * st / t2
    shrunk = symmetrize(alpha * s + beta * sigma0)
    intensity = min(max(1.0 - alpha, 0.0), 1.0)
    est = CovarianceEstimate(shrunk, method="bdl", intensity=intensity)
    res = ShrinkageResult(est, intensity, target_kind)
    res.alpha = alpha
    res.beta = beta
    return res


def shrink_lw_nonlinear(r: ReturnsMatrix) -> CovarianceEstimate:
    """Analytical nonlinear shrinkage of the sample covariance.

    Keeps the sample eigenvectors and replaces each eigenvalue with the
    analytical formula of Ledoit & Wolf (2020, Ann. Statist. 48) built
    from an Epanechnikov kernel estimate of the sample spectral density
    and its Hilbert transform.  Needs at least 12 observations.  If all
    eigenvalues coincide there is nothing to shrink and S is returned
    unchanged.
    """
    x = _demeaned(r)
    t, p = x.shape
    if t < 12:
        raise DimensionMismatch("nonlinear shrinkage needs T >= 12")
    s = symmetrize(x.T @ x / t)
    lam_all, u = np.linalg.eigh(s)
    if lam_all[-1] - lam_all[0] <= 1e-12 * max(abs(lam_all[-1]), 1.0):
        return CovarianceEstimate(s, method="lwnl")

    lam = lam_all[max(0, p - t):]
    m = min(p, t)
    big_l = np.tile(lam, (m, 1)).T
    h = t ** (-1.0 / 3.0)
    big_h = h * big_l.T
    xx = (big_l - big_l.T) / big_h
    ftilde = (3.0 / 4.0 / np.sqrt(5.0)) * np.mean(np.maximum(1 - xx**2 / 5.0, 0) / big_h, axis=1)
    hftemp = (-3.0 / 10.0 / np.pi) * xx + (3.0 / 4.0 / np.sqrt(5.0) / np.pi) * (
        1 - xx**2 / 5.0
    ) * np.log(np.abs((np.sqrt(5.0) - xx) / (np.sqrt(5.0) + xx)))
    hftemp[np.abs(xx) == np.sqrt(5.0)] = (-3.0 / 10.0 / np.pi) * xx[np.abs(xx) == np.sqrt(5.0)]
    hftilde = np.mean(hftemp / big_h, axis=1)
    if p <= t:
        q = p / t
        dtilde = lam / (
            (np.pi * q * lam * ftilde) ** 2 + (1 - q - np.pi * q * lam * hftilde) ** 2
        )
    else:
        hftilde0 = (
            (1.0 / np.pi)
            * (
                3.0 / 10.0 / h**2
                + 3.0 / 4.0 / np.sqrt(5.0) / h * (1 - 1.0 / 5.0 / h**2)
                * np.log((1 + np.sqrt(5.0) * h) / (1 - np.sqrt(5.0) * h))
            )
            * np.mean(1.0 / lam)
        )
        dtilde0 = 1.0 / (np.pi * (p - t) / t * hftilde0)
        dtilde1 = lam / (np.pi**2 * lam**2 * (ftilde**2 + hftilde**2))
        dtilde = np.concatenate([dtilde0 * np.ones(p - t), dtilde1])
    cleaned = symmetrize(u @ np.diag(dtilde) @ u.T)
    return CovarianceEstimate(cleaned, method="lwnl")


def threshold_hard(s: CovarianceEstimate, tau: float) -> CovarianceEstimate:
    """Zero off-diagonal entries with magnitude at most tau."""
    if tau < 0:
        raise DimensionMismatch("tau must be >= 0")
    m = s.matrix.copy()
    off = ~np.eye(m.shape[0], dtype=bool)
    kill = off & (np.abs(m) <= tau)
    m[kill] = 0.0
    return CovarianceEstimate(symmetrize(m), method="hard", threshold=tau)


def threshold_soft(s: CovarianceEstimate, tau: float) -> CovarianceEstimate:
    """Soft-threshold off-diagonal entries: z -> sign(z) (|z| - tau)_+."""
    if tau < 0:
        raise DimensionMismatch("tau must be >= 0")
    m = s.matrix.copy()
    off = ~np.eye(m.shape[0], dtype=bool)
    m[off] = np.sign(m[off]) * np.maximum(np.abs(m[off]) - tau, 0.0)
    return CovarianceEstimate(symmetrize(m), method="soft", threshold=tau)


def threshold_adaptive(s: CovarianceEstimate, r: ReturnsMatrix, delta: float = 2.0) -> CovarianceEstimate:
    """Entry-adaptive soft thresholding in the style of Cai & Liu (2011).

    The per-entry level is lambda_ij = delta * sqrt(theta_ij log(p) / T)
    with theta_ij the sample variance of the products of centered
    returns, so noisier entries are thresholded harder.
    """
    if delta < 0:
        raise DimensionMismatch("delta must be >= 0")
    x = _demeaned(r)
    t, p = x.shape
    if s.matrix.shape != (p, p):
        raise DimensionMismatch("estimate and panel dimensions differ")
    sm = x.T @ x / t
    x2 = x**2
    theta = np.maximum((x2.T @ x2) / t - sm * sm, 0.0)
    lam = delta * np.sqrt(theta * np.log(p) / t)
    m = s.matrix.copy()
    off = ~np.eye(p, dtype=bool)
    m[off] = np.sign(m[off]) * np.maximum(np.abs(m[off]) - lam[off], 0.0)
    return CovarianceEstimate(symmetrize(m), method="adaptive", threshold=delta)


def rie_clean(r: ReturnsMatrix) -> tuple[CovarianceEstimate, CleanedSpectrum]:
    """Rotationally invariant cleaning of the sample correlation matrix.

    Each correlation eigenvalue lambda_k is replaced by the oracle value

        xi_k = lambda_k / |1 - q + q lambda_k g(lambda_k + i eta)|^2

    with q = p/T, g the empirical Stieltjes transform of the spectrum and
    eta = T^(-1/2), following Bun, Bouchaud & Potters (2016).  Eigenvectors
    are untouched.  The cleaned spectrum is rescaled to preserve the trace
    (sum xi = p), the correlation rebuilt in the original eigenbasis, and
    the sample standard deviations re-applied to recover a covariance.
    """
    t, p = r.values.shape
    if t <= 2 or p < 2:
        raise DimensionMismatch("need T > 2 and p >= 2")
    corr, sd = sample_correlation(r)
    lam_asc, vec_asc = np.linalg.eigh(corr)
    order = np.argsort(lam_asc)[::-1]
    lam = lam_asc[order]
    vec = vec_asc[:, order]
    if lam[0] - lam[-1] <= 1e-14:
        raise DegenerateSpectrum("flat correlation spectrum")
    q = p / t
    eta = t ** (-0.5)
    z = lam + 1j * eta
    # empirical Stieltjes transform at each shifted eigenvalue (self term included)
    g = np.mean(1.0 / (z[:, None] - lam[None, :]), axis=1)
    xi = lam / np.abs(1.0 - q + q * lam * g) ** 2
    xi *= p / xi.sum()
    cleaned_corr = symmetrize(vec @ np.diag(xi) @ vec.T)
    cleaned_cov = symmetrize(cleaned_corr * np.outer(sd, sd))
    est = CovarianceEstimate(cleaned_cov, method="rie")
    return est, CleanedSpectrum(raw_eigenvalues=lam, cleaned_eigenvalues=xi, q=q)
