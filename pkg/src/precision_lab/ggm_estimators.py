"""Direct precision-matrix estimation via Gaussian graphical models.

Five methods: L1-penalized likelihood (glasso), nodewise lasso
neighborhood selection (mb, after Meinshausen & Buhlmann 2006), the
constrained L1 linear program (clime, after Cai, Liu & Luo 2011), and the
conditional-variance methods greedy prune and hybrid mb of Kelner,
Koehler, Meka & Moitra (2020).

All five are fit on the correlation scale: the driver ``fit_ggm``
standardizes columns to unit variance, fits, and maps the precision back
with Theta_ij / (sd_i * sd_j).  Penalties in the default tuning grids are
therefore comparable across panels.

Symmetrization: mb averages the two off-diagonal candidates, clime keeps
the entry of smaller magnitude, greedy prune and hybrid mb take a union
of neighborhoods followed by an OLS refit.  Conditional variances are
OLS residual variances with divisor T and a ridge fudge of 1e-10 on the
Gram matrix against near-collinearity.  Greedy argmin ties break toward
the lowest index, and the lasso sweeps coordinates in ascending order:
determinism over elegance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import HAVE_NUMBA, glasso_sweep, lasso_cd
from ._pool import ordered_map
from ._simplex import solve_lp
from .core import CovarianceEstimate, PrecisionEstimate, ReturnsMatrix, symmetrize
from .errors import (
    DegenerateSpectrum,
    DimensionMismatch,
    NonConvergence,
    SingularInput,
    SolverStall,
    ZeroResidualVariance,
)

GGM_METHODS = ("glasso", "mb", "clime", "greedy", "hybridmb")

RIDGE = 1e-10
DEFAULT_GREEDY_STEPS = 20


@dataclass
class LassoProblem:
    """One L1 regression problem, penalized or L1-ball constrained.

    Exactly one of ``penalty`` and ``l1_ball_radius`` selects the form:
    minimize ||y - Xw||^2 / (2T) + penalty * ||w||_1, or the same
    least-squares objective subject to ||w||_1 <= l1_ball_radius.
    """

    design: np.ndarray
    response: np.ndarray
    penalty: float | None = None
    l1_ball_radius: float | None = None

    def __post_init__(self):
        self.design = np.asarray(self.design, dtype=float)
        self.response = np.asarray(self.response, dtype=float)
        if self.design.shape[0] != self.response.shape[0]:
            raise DimensionMismatch("design and response row counts differ")
        if (self.penalty is None) == (self.l1_ball_radius is None):
            raise DimensionMismatch("set exactly one of penalty, l1_ball_radius")
        if self.penalty is not None and self.penalty < 0:
            raise DimensionMismatch("penalty must be >= 0")
        if self.l1_ball_radius is not None and self.l1_ball_radius <= 0:
            raise DimensionMismatch("l1_ball_radius must be > 0")


@dataclass
class NeighborhoodSet:
    """A node's selected neighbors with OLS refit weights."""

    node: int
    neighbors: tuple
    regression_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    residual_variance: float = 0.0


def _soft(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def _lasso_gram(q, b, lam, w0=None, tol=1e-7, max_sweeps=10_000):
    """Coordinate descent for min_w 0.5 w'Qw - b'w + lam ||w||_1.

    Active-set strategy: cycle (ascending index order) over the working
    set until no coordinate moves more than ``tol``, then screen all
    coordinates at once for KKT violations and absorb them.  Q must be
    symmetric.  Deterministic throughout; the hot loop is compiled.
    """
    k = q.shape[0]
    w = np.zeros(k) if w0 is None else np.asarray(w0, dtype=float).copy()
    if k == 0:
        return w
    q = np.ascontiguousarray(q)
    b = np.ascontiguousarray(b, dtype=float)
    sweeps = lasso_cd(q, b, float(lam), w, float(tol), max_sweeps)
    if sweeps < 0:
        raise NonConvergence("lasso coordinate descent hit the sweep cap")
    return w


def _project_l1(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto the L1 ball of the given radius."""
    if np.abs(v).sum() <= radius:
        return v.copy()
    u = np.sort(np.abs(v))[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, u.size + 1)
    cond = u > (css - radius) / idx
    rho = int(np.nonzero(cond)[0][-1])
    theta = (css[rho] - radius) / (rho + 1)
    return np.sign(v) * np.maximum(np.abs(v) - theta, 0.0)


def _constrained_ls_gram(q, b, radius, free=(), tol=1e-7, max_iter=10_000):
    """FISTA for min 0.5 v'Qv - b'v with ||v_restricted||_1 <= radius.

    Indices in ``free`` are exempt from the ball (used for the hybrid mb
    preconditioned regression, where the anchor coefficient is free).
    """
    k = q.shape[0]
    v = np.zeros(k)
    if k == 0:
        return v
    lam_max = float(np.linalg.eigvalsh(q)[-1])
    if lam_max <= 0:
        return v
    step = 1.0 / lam_max
    ball = np.array([i for i in range(k) if i not in set(free)], dtype=int)
    y = v.copy()
    t_acc = 1.0
    for _ in range(max_iter):
        grad = q @ y - b
        nxt = y - step * grad
        if ball.size:
            nxt[ball] = _project_l1(nxt[ball], radius)
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t_acc**2)) / 2.0
        y = nxt + ((t_acc - 1.0) / t_next) * (nxt - v)
        moved = float(np.abs(nxt - v).max())
        v = nxt
        t_acc = t_next
        if moved < tol:
            return v
    raise NonConvergence("projected solver hit the iteration cap")


def lasso_solve(prob: LassoProblem) -> np.ndarray:
    """Solve one lasso problem; see :class:`LassoProblem` for the forms."""
    x = prob.design
    t = max(x.shape[0], 1)
    q = x.T @ x / t
    b = x.T @ prob.response / t
    if prob.penalty is not None:
        return _lasso_gram(q, b, prob.penalty)
    return _constrained_ls_gram(q, b, prob.l1_ball_radius)


# --- graphical lasso --------------------------------------------------------

def glasso_objective(theta: np.ndarray, s: np.ndarray, rho: float) -> float:
    """Penalized Gaussian log-likelihood: logdet - tr(S Theta) - rho ||Theta||_1."""
    sign, logdet = np.linalg.slogdet(theta)
    if sign <= 0:
        return -np.inf
    return float(logdet - (s * theta).sum() - rho * np.abs(theta).sum())


def glasso_estimate(s: CovarianceEstimate, rho: float, tol: float = 1e-5,
                    max_sweeps: int = 2000, theta0: np.ndarray | None = None,
                    with_trace: bool = False):
    """L1-penalized precision estimation by block coordinate descent.

    Maximizes  logdet(Theta) - tr(S Theta) - rho ||Theta||_1  (the L1 norm
    runs over all entries, diagonal included) by cycling over columns of
    Theta.  Each column subproblem is an exact lasso in the partitioned
    variables, so the objective is monotone non-decreasing across sweeps
    and the iterate stays positive definite throughout.

    Parameters
    ----------
    s : CovarianceEstimate
        Symmetric PSD input; must be nonsingular when rho == 0.
    rho : float
        Penalty level, >= 0.
    theta0 : ndarray, optional
        Warm start (must be symmetric positive definite).
    with_trace : bool
        Also return the per-sweep objective values.
    """
    if rho < 0:
        raise DimensionMismatch("rho must be >= 0")
    sm = s.matrix
    p = sm.shape[0]
    if rho == 0.0:
        lam = np.linalg.eigvalsh(sm)
        if lam[0] <= 1e-12 * max(lam[-1], 1e-300):
            raise SingularInput("rho = 0 requires a nonsingular input")

    diag_pen = np.diag(sm) + rho
    if np.any(diag_pen <= 0):
        raise SingularInput("non-positive penalized diagonal")
    if theta0 is not None:
        theta = symmetrize(np.asarray(theta0, dtype=float).copy())
        w = np.linalg.inv(theta)
    else:
        theta = np.diag(1.0 / diag_pen)
        w = np.diag(diag_pen.copy())

    scale = float(np.max(1.0 / diag_pen))  # convergence measured on this scale
    idx_all = np.arange(p)
    trace = [glasso_objective(theta, sm, rho)] if with_trace else None

    inner_tol = 0.1 * tol * scale
    for _ in range(max_sweeps):
        w = np.linalg.inv(theta)  # refresh to curb drift from rank updates
        if HAVE_NUMBA:
            change = float(glasso_sweep(theta, sm, w, float(rho), inner_tol))
        else:
            change = _glasso_sweep_numpy(theta, sm, w, rho, inner_tol, idx_all)
        if with_trace:
            trace.append(glasso_objective(theta, sm, rho))
        if change < tol * scale:
            # finishing pass at a tiny tolerance: entries en route to zero
            # land exactly there, so the reported support is stable
            w = np.linalg.inv(theta)
            if HAVE_NUMBA:
                glasso_sweep(theta, sm, w, float(rho), 1e-12 * scale)
            else:
                _glasso_sweep_numpy(theta, sm, w, rho, 1e-12 * scale, idx_all)
            if with_trace:
                trace.append(glasso_objective(theta, sm, rho))
            off = ~np.eye(p, dtype=bool)
            theta[off & (np.abs(theta) < inner_tol)] = 0.0
            est = PrecisionEstimate.from_matrix(theta, "glasso", {"rho": rho})
            return (est, trace) if with_trace else est
    raise NonConvergence("glasso block descent hit the sweep cap")


def _glasso_sweep_numpy(theta, sm, w, rho, inner_tol, idx_all):
    """Reference sweep used when numba is unavailable; same updates."""
    p = theta.shape[0]
    max_change = 0.0
    for t in range(p):
        mask = idx_all != t
        w12 = w[mask, t]
        a = w[np.ix_(mask, mask)] - np.outer(w12, w12) / w[t, t]
        a = symmetrize(a)
        s12 = sm[mask, t]
        spen = sm[t, t] + rho
        # column subproblem: min_alpha spen a' A a + 2 s12'a + 2 rho |a|_1
        alpha = theta[mask, t]
        v = a @ alpha
        # vectorized one-step check: skip columns CD would not move
        diag_a = np.maximum(spen * np.diag(a), 1e-300)
        grad = spen * (v - np.diag(a) * alpha) + s12
        moved = np.abs(np.sign(-grad) * np.maximum(np.abs(grad) - rho, 0.0)
                       / diag_a - alpha)
        if float(moved.max()) >= inner_tol:
            alpha = _lasso_gram(spen * a, -s12, rho, w0=alpha,
                                tol=inner_tol, max_sweeps=2000)
            v = a @ alpha
        gamma = float(alpha @ v) + 1.0 / spen
        max_change = max(max_change,
                         float(np.abs(theta[mask, t] - alpha).max()),
                         abs(theta[t, t] - gamma))
        theta[mask, t] = alpha
        theta[t, mask] = alpha
        theta[t, t] = gamma
        # exact inverse refresh of the touched row/column
        w[np.ix_(mask, mask)] = a + spen * np.outer(v, v)
        w[mask, t] = -spen * v
        w[t, mask] = -spen * v
        w[t, t] = spen
    return max_change


# --- conditional-variance toolkit (Gram based) ------------------------------

def _gram(x: np.ndarray) -> np.ndarray:
    xc = x - x.mean(axis=0, keepdims=True)
    return xc.T @ xc / x.shape[0]


def _cond_variance(g: np.ndarray, i: int, subset) -> float:
    """OLS residual variance of node i on the subset, divisor T."""
    sub = list(subset)
    if not sub:
        return float(g[i, i])
    gss = g[np.ix_(sub, sub)] + RIDGE * np.eye(len(sub))
    gsi = g[sub, i]
    coef = np.linalg.solve(gss, gsi)
    return float(g[i, i] - 2.0 * coef @ gsi + coef @ (g[np.ix_(sub, sub)] @ coef))


def _ols_refit(g: np.ndarray, i: int, subset) -> tuple[np.ndarray, float]:
    """Refit weights and residual variance for node i on the subset."""
    sub = list(subset)
    if not sub:
        tau2 = float(g[i, i])
        if tau2 <= 1e-12 * max(float(np.diag(g).max()), 1e-300):
            raise ZeroResidualVariance(f"node {i} has zero marginal variance")
        return np.zeros(0), tau2
    gss = g[np.ix_(sub, sub)]
    coef = np.linalg.solve(gss + RIDGE * np.eye(len(sub)), g[sub, i])
    tau2 = float(g[i, i] - 2.0 * coef @ g[sub, i] + coef @ (gss @ coef))
    if tau2 <= 1e-12 * float(g[i, i]):
        raise ZeroResidualVariance(f"node {i} is exactly collinear with its neighbors")
    return coef, tau2


def support_and_refit(r: ReturnsMatrix, neighborhoods, method: str = "refit",
                      hyperparams=None) -> PrecisionEstimate:
    """Union-symmetrize neighborhoods, OLS-refit each node, assemble Theta.

    ``neighborhoods`` maps node -> iterable of neighbor indices (a list of
    :class:`NeighborhoodSet` works too).  Column j of the raw matrix is
    Gamma_j / tau_j^2 from the refit; the result is symmetrized by
    averaging, which preserves the union support.
    """
    if not isinstance(neighborhoods, dict):
        neighborhoods = {nb.node: set(nb.neighbors) for nb in neighborhoods}
    p = r.n_assets
    if set(neighborhoods) != set(range(p)):
        raise DimensionMismatch("neighborhoods must cover all nodes")
    final = {i: set(neighborhoods[i]) for i in range(p)}
    for i in range(p):
        for j in neighborhoods[i]:
            final[j].add(i)

    g = _gram(r.values)
    raw = np.zeros((p, p))
    for j in range(p):
        sub = sorted(final[j])
        coef, tau2 = _ols_refit(g, j, sub)
        raw[j, j] = 1.0 / tau2
        for pos, i in enumerate(sub):
            raw[i, j] = -coef[pos] / tau2
    return PrecisionEstimate.from_matrix(raw, method, hyperparams or {})


# --- Meinshausen-Buhlmann ----------------------------------------------------

def mb_estimate(r: ReturnsMatrix, lam: float) -> PrecisionEstimate:
    """Nodewise lasso neighborhood selection.

    Regresses each node on all others with penalty ``lam``, recovers the
    column Gamma_j / tau_j^2 from the coefficients and the residual
    variance, and symmetrizes by averaging.
    """
    if lam < 0:
        raise DimensionMismatch("lambda must be >= 0")
    x = r.values
    p = r.n_assets
    g = _gram(x)
    raw = np.zeros((p, p))
    for j in range(p):
        mask = np.arange(p) != j
        q = g[np.ix_(mask, mask)]
        b = g[mask, j]
        coef = _lasso_gram(q, b, lam)
        tau2 = float(g[j, j] - 2.0 * coef @ b + coef @ (q @ coef))
        if tau2 <= 1e-12 * float(g[j, j]):
            raise ZeroResidualVariance(f"node {j} has zero lasso residual variance")
        raw[j, j] = 1.0 / tau2
        raw[mask, j] = -coef / tau2
    return PrecisionEstimate.from_matrix(raw, "mb", {"lambda": lam})


# --- CLIME -------------------------------------------------------------------

def clime_estimate(s: CovarianceEstimate, lam: float,
                   feasibility_slack: float = 1e-8) -> PrecisionEstimate:
    """Constrained L1 minimization: min ||Theta||_1 s.t. |S Theta - I|_inf <= lam.

    Solved column by column as independent linear programs with split
    positive/negative parts on a bounded-variable simplex.  Columns are
    symmetrized by keeping, for each pair, the entry of smaller
    magnitude.  An all-zero solution (feasible once lam >= 1 on the
    correlation scale) is flagged degenerate.
    """
    if lam <= 0:
        raise DimensionMismatch("lambda must be > 0")
    sm = s.matrix
    p = sm.shape[0]
    a_ub = np.block([[sm, -sm], [-sm, sm]])
    cost = np.ones(2 * p)

    def column(j):
        ej = np.zeros(p)
        ej[j] = 1.0
        b_ub = np.concatenate([lam + ej, lam - ej])
        z, _ = solve_lp(cost, a_ub, b_ub)
        return z[:p] - z[p:]

    raw = np.column_stack(ordered_map(column, range(p)))
    residual = float(np.abs(sm @ raw - np.eye(p)).max())
    if residual > lam + feasibility_slack:
        raise SolverStall(f"feasibility residual {residual:.3e} exceeds lam + slack")
    # keep the smaller-magnitude entry of each off-diagonal pair
    take_transpose = np.abs(raw.T) < np.abs(raw)
    sym = np.where(take_transpose, raw.T, raw)
    sym = symmetrize(sym)
    degenerate = not np.any(sym)
    return PrecisionEstimate.from_matrix(
        sym, "clime",
        {"lambda": lam, "feasibility_residual": residual},
        degenerate=degenerate,
    )


# --- greedy prune ------------------------------------------------------------

def _greedy_neighborhood(g: np.ndarray, i: int, t_steps: int) -> list[int]:
    """Greedy forward selection of the ``t_steps`` best variance reducers."""
    p = g.shape[0]
    chosen: list[int] = []
    for _ in range(t_steps):
        rest = [j for j in range(p) if j != i and j not in chosen]
        if not rest:
            break
        rest_arr = np.array(rest)
        if chosen:
            sub = chosen
            gss = g[np.ix_(sub, sub)] + RIDGE * np.eye(len(sub))
            sol = np.linalg.solve(gss, g[np.ix_(sub, rest + [i])])
            m_rest = sol[:, :-1]
            m_i = sol[:, -1]
            var_i = float(g[i, i] - g[i, sub] @ m_i)
            cond_cov = g[i, rest_arr] - g[i, sub] @ m_rest
            cond_var = np.diag(g)[rest_arr] - np.einsum(
                "kj,kj->j", g[np.ix_(sub, rest)], m_rest
            )
        else:
            var_i = float(g[i, i])
            cond_cov = g[i, rest_arr]
            cond_var = np.diag(g)[rest_arr]
        valid = cond_var > 1e-14 * max(float(np.diag(g).max()), 1e-300)
        if not np.any(valid):
            break
        score = np.full(rest_arr.size, np.inf)
        score[valid] = var_i - cond_cov[valid] ** 2 / cond_var[valid]
        best = int(np.argmin(score))  # argmin takes the lowest index on ties
        if not np.isfinite(score[best]):
            break
        chosen.append(int(rest_arr[best]))
    return chosen


def _prune(g: np.ndarray, i: int, subset: list[int], nu: float) -> list[int]:
    """Drop members whose marginal variance reduction is below factor nu."""
    if not subset:
        return []
    var_full = _cond_variance(g, i, subset)
    kept = []
    for j in subset:
        var_without = _cond_variance(g, i, [k for k in subset if k != j])
        if not var_full > (1.0 - nu) * var_without:
            kept.append(j)
    return sorted(kept)


def greedy_growth_paths(r: ReturnsMatrix, t_max: int) -> dict:
    """Per-node greedy selection order up to ``t_max`` additions.

    The growth sequence is deterministic and nested in T, so one path
    computation serves every (T, nu) grid point: take a prefix, prune.
    """
    p = r.n_assets
    t_max = min(int(t_max), p - 1)
    g = _gram(r.values)
    return {i: _greedy_neighborhood(g, i, t_max) for i in range(p)}


def greedy_prune_estimate(r: ReturnsMatrix, t_steps: int = DEFAULT_GREEDY_STEPS,
                          nu: float = 0.05, paths: dict | None = None) -> PrecisionEstimate:
    """Greedy conditional-variance neighborhood selection with pruning.

    For each node, greedily add the ``t_steps`` conditioning variables
    that most reduce the estimated conditional variance, then prune any
    whose contribution falls below factor ``nu``.  Neighborhoods are
    union-symmetrized and the entries filled by an OLS refit.

    ``paths`` may carry precomputed growth orders (from
    :func:`greedy_growth_paths`) of length at least ``t_steps``.
    """
    if not 0.0 < nu < 1.0:
        raise DimensionMismatch("nu must lie in (0, 1)")
    p = r.n_assets
    t_steps = min(int(t_steps), p - 1)
    if t_steps < 1:
        raise DimensionMismatch("t_steps must be >= 1")
    g = _gram(r.values)
    hoods = {}
    for i in range(p):
        grown = paths[i][:t_steps] if paths is not None else _greedy_neighborhood(g, i, t_steps)
        hoods[i] = _prune(g, i, list(grown), nu)
    return support_and_refit(r, hoods, "greedy", {"T": float(t_steps), "nu": nu})


# --- hybrid mb ---------------------------------------------------------------

def hybrid_mb_estimate(r: ReturnsMatrix, lam: float, nu: float = 0.05) -> PrecisionEstimate:
    """Anchored lasso with implicit weak preconditioning, then pruning.

    Per node: pick the single best conditioning variable j, solve an
    L1-ball constrained least squares in the variables X_k scaled by
    1/sqrt(Var(X_k | X_j)) with a free coefficient on X_j, and prune the
    resulting support (j included) with the greedy-prune rule.
    """
    if lam <= 0:
        raise DimensionMismatch("lambda must be > 0")
    if not 0.0 < nu < 1.0:
        raise DimensionMismatch("nu must lie in (0, 1)")
    if r.n_periods < 3:
        raise DimensionMismatch("need T >= 3")
    p = r.n_assets
    g = _gram(r.values)
    gd = np.diag(g)
    tiny = 1e-14 * max(float(gd.max()), 1e-300)
    hoods = {}
    for i in range(p):
        others = np.array([j for j in range(p) if j != i])
        cond = gd[others] > tiny
        if not np.any(cond):
            hoods[i] = []
            continue
        var_ij = np.full(others.size, np.inf)
        var_ij[cond] = gd[i] - g[i, others[cond]] ** 2 / gd[others[cond]]
        j_star = int(others[np.argmin(var_ij)])
        ks = [k for k in range(p) if k not in (i, j_star)]
        precond = gd[np.array(ks)] - g[np.array(ks), j_star] ** 2 / gd[j_star] if ks else np.zeros(0)
        keep = [k for k, v in zip(ks, precond) if v > tiny]
        d = np.sqrt(np.array([gd[k] - g[k, j_star] ** 2 / gd[j_star] for k in keep]))
        cols = keep + [j_star]
        scalers = np.concatenate([1.0 / d, [1.0]]) if keep else np.array([1.0])
        q = g[np.ix_(cols, cols)] * np.outer(scalers, scalers)
        b = g[i, cols] * scalers
        v = _constrained_ls_gram(q, b, lam, free=(len(cols) - 1,))
        candidates = sorted({keep[t] for t in np.nonzero(v[:-1])[0]} | {j_star})
        hoods[i] = _prune(g, i, candidates, nu)
    return support_and_refit(r, hoods, "hybridmb", {"lambda": lam, "nu": nu})


# --- driver ------------------------------------------------------------------

def _standardized(r: ReturnsMatrix) -> tuple[ReturnsMatrix, np.ndarray]:
    x = r.values
    mu = x.mean(axis=0, keepdims=True)
    sd = x.std(axis=0)
    if np.any(sd <= 0):
        raise DegenerateSpectrum("zero-variance column; cannot standardize")
    z = (x - mu) / sd
    return ReturnsMatrix(z, r.dates, r.tickers), sd


def fit_ggm(method: str, r: ReturnsMatrix, params: dict,
            warm: dict | None = None) -> PrecisionEstimate:
    """Fit one GGM method on the correlation scale; rescale the output.

    ``params`` uses the method's hyperparameter names: rho (glasso),
    lambda (mb, clime, hybridmb), nu and T (greedy, hybridmb).

    ``warm`` is an optional scratch dict owned by the caller and reused
    across fits on the same panel (grid sweeps): glasso warm-starts from
    the previous solution, greedy prune reuses its growth paths.  Reuse
    is deterministic; fits agree with cold starts up to solver tolerance
    (greedy paths are exact).
    """
    if method not in GGM_METHODS:
        raise DimensionMismatch(f"unknown GGM method {method!r}")
    z, sd = _standardized(r)
    if method == "glasso":
        corr = CovarianceEstimate(_gram(z.values), method="sample")
        theta0 = warm.get("glasso_theta") if warm is not None else None
        est = glasso_estimate(corr, params["rho"], theta0=theta0)
        if warm is not None:
            warm["glasso_theta"] = est.matrix
    elif method == "mb":
        est = mb_estimate(z, params["lambda"])
    elif method == "clime":
        corr = CovarianceEstimate(_gram(z.values), method="sample")
        est = clime_estimate(corr, params["lambda"])
    elif method == "greedy":
        t_steps = int(params.get("T", DEFAULT_GREEDY_STEPS))
        paths = None
        if warm is not None:
            # growth paths are data derived: key them to the exact panel
            fp = (z.values.shape, hash(z.values.tobytes()))
            cached = warm.get("greedy_paths")
            if (cached is None or cached[0] != fp
                    or cached[1] < min(t_steps, r.n_assets - 1)):
                depth = max(t_steps, DEFAULT_GREEDY_STEPS)
                cached = (fp, min(depth, r.n_assets - 1),
                          greedy_growth_paths(z, depth))
                warm["greedy_paths"] = cached
            paths = cached[2]
        est = greedy_prune_estimate(z, t_steps, params["nu"], paths=paths)
    else:
        est = hybrid_mb_estimate(z, params["lambda"], params.get("nu", 0.05))
    rescaled = est.matrix / np.outer(sd, sd)
    return PrecisionEstimate.from_matrix(rescaled, method, dict(est.hyperparams),
                                         degenerate=est.degenerate)
