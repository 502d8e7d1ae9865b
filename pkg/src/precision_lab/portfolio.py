"""Minimum-variance weights and rolling out-of-sample backtests.

The global minimum-variance weights under the budget constraint
1'w = 1 are Sigma^{-1} 1 / (1' Sigma^{-1} 1); short positions are
allowed (the optimization carries no sign constraint).  Covariance
inputs are solved by factorization, never inverted explicitly.
Indefinite thresholded inputs are repaired by eigenvalue clipping,
with a flag, before the solve; nothing is repaired silently upstream.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._pool import ordered_map
from .core import (
    CovarianceEstimate,
    PrecisionEstimate,
    ReturnsMatrix,
    solve_spd,
    spectral_decompose,
    symmetrize,
)
from .errors import (
    DegenerateDenominator,
    DimensionMismatch,
    HorizonTooLarge,
    IncomparableSeries,
    PrecisionLabError,
)
from .ingest import RollingWindowPlan, aggregate_horizon, rolling_windows

log = logging.getLogger(__name__)

EIG_CLIP_RATIO = 1e-8


@dataclass
class PortfolioWeights:
    """Budget-constrained weights (sum exactly one; shorts allowed)."""

    weights: np.ndarray
    method: str
    asof: str = ""
    repaired: bool = False

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if not np.all(np.isfinite(self.weights)):
            raise DegenerateDenominator("non-finite weights")
        if abs(self.weights.sum() - 1.0) > 1e-10:
            raise DegenerateDenominator("weights must sum to one")


@dataclass
class LossSeries:
    """Per-method time series of realized out-of-sample portfolio variances."""

    method: str
    losses: np.ndarray
    timestamps: list = field(default_factory=list)

    def __post_init__(self):
        self.losses = np.asarray(self.losses, dtype=float)
        if np.any(self.losses < 0) or np.any(~np.isfinite(self.losses)):
            raise IncomparableSeries("losses must be finite and non-negative")


def min_variance_weights(estimate, asof: str = "") -> PortfolioWeights:
    """Global minimum-variance weights from a precision or covariance.

    Precision input: w = Theta 1 / (1' Theta 1).  Covariance input: the
    system Sigma y = 1 is solved by Cholesky and normalized.  A
    covariance whose smallest eigenvalue is negative beyond round-off is
    clipped to EIG_CLIP_RATIO times its largest eigenvalue first and the
    weights flagged ``repaired``.
    """
    repaired = False
    if isinstance(estimate, PrecisionEstimate):
        theta1 = estimate.matrix.sum(axis=1)
        denom = float(theta1.sum())
        method = estimate.method
    elif isinstance(estimate, CovarianceEstimate):
        matrix = estimate.matrix
        lam_min = estimate.min_eigenvalue
        lam, vec = None, None
        if lam_min <= 0:
            lam, vec = spectral_decompose(matrix)
            if lam[0] <= 0:
                raise DegenerateDenominator("covariance has no positive eigenvalue")
            floor = EIG_CLIP_RATIO * lam[0]
            if lam[-1] < floor:
                matrix = symmetrize(vec @ np.diag(np.maximum(lam, floor)) @ vec.T)
                repaired = True
        y = solve_spd(matrix, np.ones(matrix.shape[0])).solution
        theta1 = y
        denom = float(y.sum())
        method = estimate.method
    else:
        raise DimensionMismatch("expected a CovarianceEstimate or PrecisionEstimate")
    if denom <= 1e-12:
        raise DegenerateDenominator(f"1' Theta 1 = {denom:.3e}")
    return PortfolioWeights(theta1 / denom, method, asof, repaired)


def equal_weights(p: int, asof: str = "") -> PortfolioWeights:
    """The 1/p portfolio."""
    if p < 1:
        raise DimensionMismatch("p must be >= 1")
    return PortfolioWeights(np.full(p, 1.0 / p), "ewp", asof)


def realized_loss(w: PortfolioWeights, test, center: bool = True) -> float:
    """Realized variance of the portfolio return over the test rows.

    ``test`` is a ReturnsMatrix or a plain (rows x p) array.  With
    ``center=False`` the variance is taken about zero (the convention
    used for short evaluation windows in the backtest); a single test row
    always yields the squared return.
    """
    values = test.values if hasattr(test, "values") else np.asarray(test, dtype=float)
    values = np.atleast_2d(values)
    if values.shape[1] != w.weights.shape[0]:
        raise DimensionMismatch("test columns must match the weight vector")
    series = values @ w.weights
    if series.shape[0] == 1:
        return float(series[0] ** 2)
    if center:
        return float(np.var(series))
    return float(np.mean(series**2))


def backtest(r: ReturnsMatrix, plan: RollingWindowPlan, methods: list[str],
             tuning_config: dict | None = None) -> dict[str, LossSeries]:
    """Rolling out-of-sample loss series for each method.

    Per window: the training rows (aggregated to the plan's horizon when
    weekly or monthly) feed each method -- GGM methods re-tune on the
    window, thresholding rules re-select their level, the remaining
    covariance estimators are self-contained -- and the realized loss is
    the variance about zero of the next ``h`` daily portfolio returns.

    The method ``ewp`` is the equal-weight baseline and ``oracle`` uses a
    known covariance supplied as ``tuning_config['oracle_sigma']``.  A
    window is skipped only if every method fails on it; a single failing
    method aborts the run so the emitted series stay comparable.
    """
    from . import tuning as tuning_mod

    cfg = dict(tuning_config or {})
    criterion = cfg.get("criterion", "cv1")
    search = cfg.get("search", "grid")
    grids = cfg.get("grids", {})
    budget = cfg.get("budget", 60)
    k = cfg.get("k", 5)

    windows = rolling_windows(r, plan)
    if not windows:
        raise HorizonTooLarge("plan yields no windows")
    if plan.period_rows == 1:
        log.info("no intra-day panel supplied; daily losses are squared "
                 "next-day portfolio returns")

    def run_window(window):
        train_rows, test_rows = window
        train = r.row_slice(train_rows)
        if plan.period_rows > 1:
            train = aggregate_horizon(train, plan.period_rows)
        test = r.values[list(test_rows)]
        stamp = r.dates[test_rows[0]]
        window_losses = {}
        failures = []
        for method in methods:
            try:
                if method == "ewp":
                    w = equal_weights(r.n_assets, stamp)
                elif method == "oracle":
                    est = CovarianceEstimate(np.asarray(cfg["oracle_sigma"], dtype=float),
                                             "oracle")
                    w = min_variance_weights(est, stamp)
                elif method in tuning_mod.GGM_METHODS:
                    est, _ = tuning_mod.tune_estimator(
                        train, method, criterion=criterion, search=search,
                        grid=grids.get(method), budget=budget, k=k)
                    w = min_variance_weights(est, stamp)
                elif method in ("hard", "soft", "adaptive"):
                    level, _ = tuning_mod.select_threshold(train, method, k=k)
                    key = "delta" if method == "adaptive" else "tau"
                    est = tuning_mod.fit_method(method, train, {key: level})
                    w = min_variance_weights(est, stamp)
                else:
                    est = tuning_mod.fit_method(method, train)
                    w = min_variance_weights(est, stamp)
                window_losses[method] = realized_loss(w, test, center=False)
            except PrecisionLabError as exc:
                failures.append((method, exc))
        return stamp, window_losses, failures

    results = ordered_map(run_window, windows, workers=cfg.get("workers"))
    losses: dict[str, list] = {m: [] for m in methods}
    stamps: list = []
    for stamp, window_losses, failures in results:
        if len(failures) == len(methods):
            continue  # gap: every method failed on this window
        if failures:
            method, exc = failures[0]
            raise IncomparableSeries(
                f"{method} failed on window at {stamp}: {exc}") from exc
        stamps.append(stamp)
        for method in methods:
            losses[method].append(window_losses[method])

    return {
        m: LossSeries(m, np.asarray(vals), list(stamps))
        for m, vals in losses.items()
    }
