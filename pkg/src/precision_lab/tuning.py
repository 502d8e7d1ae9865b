"""Hyperparameter selection for the precision estimators.

Two 5-fold cross-validation criteria: cv1 scores a candidate by the
out-of-fold variance of the minimum-variance portfolio it implies, cv2
by a per-node least-squares residual objective on standardized
coordinates.  Folds are contiguous time blocks, never shuffled; returns
are a time series and the backtest is strictly forward, so shuffled
folds would leak.

Grids are finite by default and can be extended to a continuous search
over (0, inf) with a Nelder-Mead simplex on log-transformed parameters,
seeded at the best grid point (so the refinement never does worse than
the grid).  Ties between grid points break toward the sparser fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import cov_estimators as cov
from .core import CovarianceEstimate, PrecisionEstimate, ReturnsMatrix
from .errors import (
    AllPointsFailed,
    DimensionMismatch,
    PrecisionLabError,
    TooFewRows,
    ZeroDiagonal,
)
from .ggm_estimators import GGM_METHODS, fit_ggm
from .portfolio import min_variance_weights

PENALTY_GRID = (0.01, 0.025, 0.05, 0.1, 0.2, 0.4)
GREEDY_NU_GRID = (0.01, 0.05, 0.1, 0.2)
GREEDY_T_GRID = (5, 10, 20)
ADAPTIVE_DELTA_GRID = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)


@dataclass
class FoldPlan:
    """Contiguous, order-preserving folds covering [0, T) exactly once."""

    k: int
    fold_slices: list

    def __post_init__(self):
        covered = [i for fold in self.fold_slices for i in fold]
        if sorted(covered) != list(range(len(covered))):
            raise DimensionMismatch("folds must partition the row range")


@dataclass
class TuneResult:
    """Outcome of a hyperparameter search."""

    best_params: dict
    best_score: float
    trace: list = field(default_factory=list)
    criterion: str = "cv1"
    search: str = "grid"
    exhausted: bool = False


def kfold_split(t: int, k: int = 5) -> FoldPlan:
    """Contiguous folds; sizes differ by at most one, remainder first."""
    if k < 2 or t < k:
        raise TooFewRows(f"need T >= k >= 2, got T={t}, k={k}")
    base, rem = divmod(t, k)
    sizes = [base + 1 if i < rem else base for i in range(k)]
    slices, start = [], 0
    for size in sizes:
        slices.append(range(start, start + size))
        start += size
    return FoldPlan(k=k, fold_slices=slices)


def default_grid(method: str) -> list[dict]:
    """Default hyperparameter grid for a GGM method (correlation scale)."""
    if method == "glasso":
        return [{"rho": v} for v in PENALTY_GRID]
    if method in ("mb", "clime", "hybridmb"):
        return [{"lambda": v} for v in PENALTY_GRID]
    if method == "greedy":
        return [{"T": t, "nu": nu} for nu in GREEDY_NU_GRID for t in GREEDY_T_GRID]
    raise DimensionMismatch(f"no default grid for {method!r}")


def _sparsity_rank(method: str, params: dict) -> tuple:
    """Sort key putting the sparser parameterization first."""
    if method == "glasso":
        return (-params["rho"],)
    if method in ("mb", "clime", "hybridmb"):
        return (-params["lambda"],)
    if method == "greedy":
        return (-params["nu"], params["T"])
    return ()


def fit_method(method: str, r: ReturnsMatrix, params: dict | None = None,
               warm: dict | None = None):
    """Fit any estimator by identifier; returns a covariance or precision.

    Covariance identifiers: sample, lwl, rblw, oas, bdl, lwnl, rie, and
    the thresholding rules hard/soft (params: tau) and adaptive (params:
    delta).  GGM identifiers are dispatched to :func:`fit_ggm`.  The
    identifier ``oracle`` wraps a known covariance passed as
    ``params['sigma']``.
    """
    params = params or {}
    if method in GGM_METHODS:
        return fit_ggm(method, r, params, warm=warm)
    if method == "sample":
        return cov.sample_covariance(r)
    if method == "lwl":
        return cov.shrink_lw_linear(r).estimate
    if method == "rblw":
        return cov.shrink_rblw(r).estimate
    if method == "oas":
        return cov.shrink_oas(r).estimate
    if method == "bdl":
        target = params.get("target")
        if isinstance(target, str):
            if target != "sample_diagonal":
                raise DimensionMismatch(f"unknown bdl target {target!r}")
            target = np.diag(np.diag(cov.sample_covariance(r).matrix))
        return cov.shrink_bodnar(r, target).estimate
    if method == "lwnl":
        return cov.shrink_lw_nonlinear(r)
    if method == "rie":
        return cov.rie_clean(r)[0]
    if method == "hard":
        return cov.threshold_hard(cov.sample_covariance(r), params["tau"])
    if method == "soft":
        return cov.threshold_soft(cov.sample_covariance(r), params["tau"])
    if method == "adaptive":
        return cov.threshold_adaptive(cov.sample_covariance(r), r,
                                      params.get("delta", 2.0))
    if method == "oracle":
        return CovarianceEstimate(np.asarray(params["sigma"], dtype=float), "oracle")
    raise DimensionMismatch(f"unknown method {method!r}")


def cv1_score(r_train: ReturnsMatrix, r_holdout: ReturnsMatrix, method: str,
              params: dict, warm: dict | None = None) -> float:
    """Held-out variance of the minimum-variance portfolio.

    Fit on the training rows, form the weights, and return the sample
    variance of the held-out portfolio return series.
    """
    est = fit_method(method, r_train, params, warm=warm)
    w = min_variance_weights(est)
    series = r_holdout.values @ w.weights
    return float(np.var(series))


def cv2_score(r_train: ReturnsMatrix, r_holdout: ReturnsMatrix, method: str,
              params: dict, warm: dict | None = None) -> float:
    """Per-node conditional-variance residual objective on standardized data.

    Coordinates are standardized to mean zero and unit variance on the
    training rows; the holdout reuses the training statistics.  For each
    node i the residual is x_i plus the precision-implied regression
    sum_{j != i} (Theta_ij + Theta_ji) / (2 Theta_ii) x_j, and the score
    averages the squared residuals over holdout rows and nodes.  The true
    precision minimizes this in the large-holdout limit.
    """
    if method not in GGM_METHODS:
        raise DimensionMismatch("cv2 needs precision entries; use a GGM method")
    x = r_train.values
    mu = x.mean(axis=0, keepdims=True)
    sd = x.std(axis=0)
    if np.any(sd <= 0):
        raise ZeroDiagonal("zero-variance training column")
    z_train = ReturnsMatrix((x - mu) / sd, r_train.dates, r_train.tickers)
    est = fit_ggm(method, z_train, params, warm=warm)
    theta = est.matrix
    diag = np.diag(theta)
    if np.any(diag <= 0):
        raise ZeroDiagonal("precision diagonal must be positive")
    z_hold = (r_holdout.values - mu) / sd
    residuals = z_hold @ (theta / diag[None, :])
    return float(np.mean(residuals**2))


_CRITERIA = {"cv1": cv1_score, "cv2": cv2_score}


def _fold_panels(r: ReturnsMatrix, plan: FoldPlan):
    return [(r.drop_rows(fold), r.row_slice(fold)) for fold in plan.fold_slices]


def grid_search(r: ReturnsMatrix, method: str, grid: list[dict],
                criterion: str = "cv1", k: int = 5) -> TuneResult:
    """Mean CV score over k folds for every grid point; argmin wins.

    Points whose fit fails or is flagged degenerate are excluded (scored
    inf in the trace).  Exact score ties break toward the sparser point,
    which is evaluated first.
    """
    if not grid:
        raise AllPointsFailed("empty grid")
    score_fn = _CRITERIA[criterion]
    plan = kfold_split(r.n_periods, k)
    panels = _fold_panels(r, plan)
    warms = [{} for _ in panels]

    def fold_scores(params):
        return [
            score_fn(train, hold, method, params, warm=warm)
            for (train, hold), warm in zip(panels, warms)
        ]

    ordered = sorted(grid, key=lambda g: _sparsity_rank(method, g))
    best_params, best_score = None, np.inf
    trace = []
    for params in ordered:
        try:
            score = float(np.mean(fold_scores(params)))
        except PrecisionLabError:
            trace.append((dict(params), np.inf))
            continue
        trace.append((dict(params), score))
        if score < best_score:
            best_params, best_score = dict(params), score
    if best_params is None:
        raise AllPointsFailed(f"every grid point failed for {method}")
    return TuneResult(best_params, best_score, trace, criterion, "grid")


def nelder_mead_minimize(objective, init: dict, budget: int = 100,
                         fixed: dict | None = None, tol: float = 1e-4,
                         bump: float = 0.25) -> TuneResult:
    """Derivative-free simplex minimization over positive parameters.

    Parameters live on (0, inf) and are searched in log space, where the
    standard moves (reflection 1, expansion 2, contraction 1/2, shrink
    1/2) apply.  ``fixed`` entries are held constant.  Stops when the
    simplex diameter in log space falls below ``tol`` or the evaluation
    budget runs out (flagged ``exhausted``).  The initial point is a
    vertex, so the result never scores worse than ``init``.
    """
    fixed = dict(fixed or {})
    names = sorted(init)
    if not names:
        raise DimensionMismatch("need at least one continuous parameter")
    if any(init[n] <= 0 for n in names):
        raise DimensionMismatch("parameters must be positive")

    trace: list = []
    evals = 0

    def params_of(vec):
        out = {n: float(np.exp(v)) for n, v in zip(names, vec)}
        out.update(fixed)
        return out

    def evaluate(vec):
        nonlocal evals
        evals += 1
        p = params_of(vec)
        try:
            val = float(objective(p))
        except PrecisionLabError:
            val = np.inf
        trace.append((p, val))
        return val

    x0 = np.array([np.log(init[n]) for n in names])
    verts = [x0]
    for i in range(len(names)):
        v = x0.copy()
        v[i] += bump
        verts.append(v)

    def result(exhausted):
        best_p, best_v = min(trace, key=lambda t: t[1])
        return TuneResult(dict(best_p), best_v, trace, search="nelder_mead",
                          exhausted=exhausted)

    values = []
    for v in verts:
        if evals >= budget:
            return result(True)
        values.append(evaluate(v))

    simplex = list(zip(verts, values))
    while True:
        simplex.sort(key=lambda t: t[1])
        pts = np.array([s[0] for s in simplex])
        diameter = max(
            float(np.linalg.norm(pts[i] - pts[j]))
            for i in range(len(pts)) for j in range(i + 1, len(pts))
        )
        if diameter < tol:
            return result(False)
        if evals >= budget:
            return result(True)
        centroid = pts[:-1].mean(axis=0)
        worst_x, worst_v = simplex[-1]
        best_v = simplex[0][1]
        second_worst_v = simplex[-2][1]

        refl = centroid + (centroid - worst_x)
        refl_v = evaluate(refl)
        if best_v <= refl_v < second_worst_v:
            simplex[-1] = (refl, refl_v)
            continue
        if refl_v < best_v:
            if evals >= budget:
                simplex[-1] = (refl, refl_v)
                return result(True)
            expd = centroid + 2.0 * (centroid - worst_x)
            expd_v = evaluate(expd)
            simplex[-1] = (expd, expd_v) if expd_v < refl_v else (refl, refl_v)
            continue
        if evals >= budget:
            return result(True)
        contr = centroid + 0.5 * (worst_x - centroid)
        contr_v = evaluate(contr)
        if contr_v < worst_v:
            simplex[-1] = (contr, contr_v)
            continue
        # shrink toward the best vertex
        best_x = simplex[0][0]
        new_simplex = [simplex[0]]
        for x, _ in simplex[1:]:
            if evals >= budget:
                return result(True)
            sx = best_x + 0.5 * (x - best_x)
            new_simplex.append((sx, evaluate(sx)))
        simplex = new_simplex


def tune_estimator(r: ReturnsMatrix, method: str, criterion: str = "cv1",
                   search: str = "grid", grid: list[dict] | None = None,
                   budget: int = 60, k: int = 5):
    """Select hyperparameters for a GGM method and refit on the full panel.

    Grid search always runs; with ``search='nm'`` the continuous
    parameters are then refined by Nelder-Mead seeded at the grid best
    (discrete parameters stay at their grid-selected values).  Returns
    the refit estimate and the tuning record.
    """
    if method not in GGM_METHODS:
        raise DimensionMismatch(f"tuning applies to GGM methods, got {method!r}")
    if criterion not in _CRITERIA:
        raise DimensionMismatch(f"unknown criterion {criterion!r}")
    grid = grid if grid is not None else default_grid(method)
    result = grid_search(r, method, grid, criterion, k)

    if search in ("nm", "nelder_mead"):
        plan = kfold_split(r.n_periods, k)
        panels = _fold_panels(r, plan)
        warms = [{} for _ in panels]
        score_fn = _CRITERIA[criterion]

        def objective(params):
            return float(np.mean([
                score_fn(train, hold, method, params, warm=warm)
                for (train, hold), warm in zip(panels, warms)
            ]))

        continuous = {k_: v for k_, v in result.best_params.items() if k_ != "T"}
        fixed = {k_: v for k_, v in result.best_params.items() if k_ == "T"}
        nm = nelder_mead_minimize(objective, continuous, budget=budget, fixed=fixed)
        if nm.best_score <= result.best_score:
            result = TuneResult(nm.best_params, nm.best_score,
                                result.trace + nm.trace, criterion,
                                "nelder_mead", nm.exhausted)
        else:
            result = TuneResult(result.best_params, result.best_score,
                                result.trace + nm.trace, criterion,
                                "nelder_mead", nm.exhausted)
    elif search != "grid":
        raise DimensionMismatch(f"unknown search {search!r}")

    est = fit_ggm(method, r, result.best_params)
    return est, result


def select_threshold(r: ReturnsMatrix, rule: str, grid=None, k: int = 5):
    """Pick a threshold level by 5-fold CV on covariance reconstruction.

    The score of a candidate is the Frobenius distance between the
    thresholded training-fold covariance and the held-out fold's sample
    covariance, averaged over folds.  For hard/soft rules the default
    grid is deciles of the absolute off-diagonal sample covariance; for
    the adaptive rule it is a fixed grid of noise multipliers.  Ties
    break toward the larger (sparser) level.
    """
    if rule not in ("hard", "soft", "adaptive"):
        raise DimensionMismatch(f"unknown thresholding rule {rule!r}")
    if grid is None:
        if rule == "adaptive":
            grid = list(ADAPTIVE_DELTA_GRID)
        else:
            s = cov.sample_covariance(r).matrix
            off = np.abs(s[~np.eye(s.shape[0], dtype=bool)])
            grid = sorted(set(float(np.quantile(off, q)) for q in np.linspace(0.1, 0.9, 9)))
    plan = kfold_split(r.n_periods, k)
    panels = _fold_panels(r, plan)
    trace = []
    best_level, best_score = None, np.inf
    for level in sorted(grid, reverse=True):
        scores = []
        for train, hold in panels:
            s_train = cov.sample_covariance(train)
            if rule == "hard":
                cand = cov.threshold_hard(s_train, level)
            elif rule == "soft":
                cand = cov.threshold_soft(s_train, level)
            else:
                cand = cov.threshold_adaptive(s_train, train, level)
            s_hold = cov.sample_covariance(hold).matrix
            scores.append(float(np.linalg.norm(cand.matrix - s_hold)))
        score = float(np.mean(scores))
        trace.append((level, score))
        if score < best_score:
            best_level, best_score = level, score
    return best_level, trace
