"""Statistical ranking of methods by predictive ability.

Model Confidence Set procedure (Hansen, Lunde & Nason 2011) with a
circular moving-block bootstrap, and the test for Superior Predictive
Ability (Hansen 2005) with the stationary bootstrap of Politis & Romano
(1994).

Block length for the MCS bootstrap is chosen by fitting AR processes to
every pairwise loss differential and taking the largest count of
significant coefficients (|t| > 1.96, lags up to 10), floored at one.
Bootstrap replicates are drawn once per run from seeded generators, so
results are bit-for-bit reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateVariance,
    DimensionMismatch,
    IncomparableSeries,
    SeriesTooShort,
)

AR_T_CRITICAL = 1.96
DEFAULT_MAX_LAG = 10


@dataclass
class LossDifferentials:
    """Pairwise and per-model loss differentials for a model set."""

    names: list
    losses: np.ndarray          # T x m
    d_ij: np.ndarray = field(init=False)    # T x m x m, antisymmetric
    d_i_dot: np.ndarray = field(init=False)  # T x m

    def __post_init__(self):
        self.losses = np.asarray(self.losses, dtype=float)
        if self.losses.ndim != 2:
            raise DimensionMismatch("losses must be T x m")
        t, m = self.losses.shape
        if m != len(self.names):
            raise DimensionMismatch("name count must match columns")
        if m < 1:
            raise DimensionMismatch("need at least one model")
        self.d_ij = self.losses[:, :, None] - self.losses[:, None, :]
        if m > 1:
            self.d_i_dot = self.d_ij.sum(axis=2) / (m - 1)
        else:
            self.d_i_dot = np.zeros((t, 1))

    @classmethod
    def from_losses(cls, losses: dict) -> "LossDifferentials":
        names = list(losses)
        arrays = []
        for name in names:
            series = losses[name]
            arrays.append(np.asarray(getattr(series, "losses", series), dtype=float))
        lengths = {a.shape[0] for a in arrays}
        if len(lengths) != 1:
            raise IncomparableSeries(f"unequal loss lengths: {sorted(lengths)}")
        return cls(names, np.column_stack(arrays))


@dataclass
class McsResult:
    """Model confidence set: survivors, elimination order and p-values."""

    ssm: list
    eliminated: list            # (model, round) pairs, worst first
    mcs_pvalues: dict           # model -> monotonized p-value
    statistic_kind: str
    alpha: float
    elimination_order: list = field(default_factory=list)  # full hypothetical order
    stats: dict = field(default_factory=dict)              # model -> v at elimination


@dataclass
class SpaResult:
    """SPA test outcome for one benchmark."""

    benchmark: str
    p_value: float
    statistic: float
    p_lower: float = float("nan")
    p_upper: float = float("nan")


def ar_block_length(d: LossDifferentials, max_lag: int = DEFAULT_MAX_LAG) -> int:
    """Block length from AR fits on every pairwise differential series.

    Each d_ij series is regressed on its first ``max_lag`` lags (plus an
    intercept) by least squares; the block length is the largest count of
    coefficients with |t| above 1.96 over all pairs, floored at one.
    """
    t, m = d.losses.shape
    if t <= 2 * max_lag:
        raise SeriesTooShort(f"need T > {2 * max_lag}, got {t}")
    best = 0
    for i in range(m):
        for j in range(i + 1, m):
            series = d.d_ij[:, i, j]
            if np.ptp(series) == 0.0:
                continue
            y = series[max_lag:]
            cols = [np.ones(t - max_lag)]
            cols += [series[max_lag - lag:t - lag] for lag in range(1, max_lag + 1)]
            x = np.column_stack(cols)
            coef, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
            resid = y - x @ coef
            dof = max(y.size - x.shape[1], 1)
            sigma2 = float(resid @ resid) / dof
            if sigma2 <= 0:
                continue
            xtx_inv = np.linalg.pinv(x.T @ x)
            se = np.sqrt(np.maximum(sigma2 * np.diag(xtx_inv), 1e-300))
            tstats = np.abs(coef[1:]) / se[1:]
            best = max(best, int((tstats > AR_T_CRITICAL).sum()))
    return max(best, 1)


def block_bootstrap_indices(t: int, block: int, seed) -> np.ndarray:
    """Circular moving-block resample indices of length ``t``.

    Blocks of fixed length start at uniform positions and wrap around;
    the concatenation is truncated to length ``t``.
    """
    if not 1 <= block <= t:
        raise DimensionMismatch("need 1 <= block <= T")
    rng = np.random.default_rng(seed)
    n_blocks = -(-t // block)
    starts = rng.integers(0, t, size=n_blocks)
    idx = (starts[:, None] + np.arange(block)[None, :]) % t
    return idx.reshape(-1)[:t]


def stationary_bootstrap_indices(t: int, mean_block: float, seed) -> np.ndarray:
    """Stationary-bootstrap indices: geometric blocks with circular wrap."""
    if mean_block < 1:
        raise DimensionMismatch("mean_block must be >= 1")
    rng = np.random.default_rng(seed)
    restart = rng.random(t) < 1.0 / mean_block
    restart[0] = True
    restart_at = np.flatnonzero(restart)
    starts = rng.integers(0, t, size=restart_at.size)
    block_of = np.searchsorted(restart_at, np.arange(t), side="right") - 1
    offsets = np.arange(t) - restart_at[block_of]
    return (starts[block_of] + offsets) % t


def _bootstrap_column_means(losses: np.ndarray, n_boot: int, block: int, seed,
                            sampler: str = "block") -> np.ndarray:
    """n_boot x m matrix of column means over resampled rows."""
    t = losses.shape[0]
    out = np.empty((n_boot, losses.shape[1]))
    for b in range(n_boot):
        if sampler == "block":
            idx = block_bootstrap_indices(t, block, (seed, b))
        else:
            idx = stationary_bootstrap_indices(t, float(block), (seed, b))
        out[b] = losses[idx].mean(axis=0)
    return out


def _safe_tstats(num: np.ndarray, var: np.ndarray, zero_ok: np.ndarray) -> np.ndarray:
    """num / sqrt(var) with exactly-degenerate entries forced to zero."""
    bad = var <= 0
    if np.any(bad & ~zero_ok):
        raise DegenerateVariance("zero bootstrap variance with nonzero mean loss gap")
    safe_var = np.where(bad, 1.0, var)
    out = num / np.sqrt(safe_var)
    out[bad] = 0.0
    return out


def mcs_run(losses: dict, alpha: float = 0.05, statistic_kind: str = "T_max",
            n_boot: int = 5000, seed=0, block_length: int | None = None,
            max_lag: int = DEFAULT_MAX_LAG) -> McsResult:
    """Model Confidence Set by sequential bootstrap elimination.

    The full elimination sequence is computed (the standard way MCS
    p-values are defined): at each round the equal-predictive-ability
    statistic of the surviving set is compared against its recentered
    bootstrap distribution, the worst model is removed, and each model's
    MCS p-value is the running maximum of the test p-values up to its
    elimination.  The surviving set at level ``alpha`` collects the
    models whose MCS p-value is at least ``alpha``, ranked by their
    elimination statistic.

    ``statistic_kind`` selects T_max (per-model contrasts against the set
    average) or T_R (the max absolute pairwise t-statistic), with the
    matching elimination rule.  A pair with identically zero loss
    differential contributes a zero t-statistic.
    """
    if statistic_kind not in ("T_max", "T_R"):
        raise DimensionMismatch(f"unknown statistic {statistic_kind!r}")
    if not 0 < alpha < 1:
        raise DimensionMismatch("alpha must lie in (0, 1)")
    diffs = LossDifferentials.from_losses(losses)
    names = diffs.names
    m_all = len(names)
    if m_all == 1:
        return McsResult(list(names), [], {names[0]: 1.0}, statistic_kind, alpha,
                         [names[0]], {names[0]: 0.0})
    if n_boot < 100:
        raise DimensionMismatch("need n_boot >= 100")

    if block_length is None:
        block_length = ar_block_length(diffs, max_lag)
    col_means = diffs.losses.mean(axis=0)
    boot_means = _bootstrap_column_means(diffs.losses, n_boot, block_length, seed)

    active = list(range(m_all))
    order: list = []
    round_pvals: list = []
    stats: dict = {}

    while active:
        if len(active) == 1:
            idx = active[0]
            order.append(idx)
            round_pvals.append(1.0)
            stats.setdefault(names[idx], stats.get(names[idx], 0.0))
            break
        sub = np.array(active)
        mu = col_means[sub]
        mu_star = boot_means[:, sub]
        dbar = mu[:, None] - mu[None, :]
        dbar_star = mu_star[:, :, None] - mu_star[:, None, :]
        dev = dbar_star - dbar[None, :, :]
        var_ij = (dev**2).mean(axis=0)
        zero_ok = np.abs(dbar) <= 1e-300
        np.fill_diagonal(zero_ok, True)
        k = len(active)
        if statistic_kind == "T_R":
            tstat = _safe_tstats(dbar, var_ij, zero_ok)
            stat = float(np.abs(tstat).max())
            dev_t = _safe_tstats_boot(dev, var_ij)
            boot_stat = np.abs(dev_t).max(axis=(1, 2))
            elim_stat = tstat.max(axis=1)
        else:
            di = dbar.sum(axis=1) / (k - 1)
            di_star = dbar_star.sum(axis=2) / (k - 1)
            dev_i = di_star - di[None, :]
            var_i = (dev_i**2).mean(axis=0)
            zero_i = np.abs(di) <= 1e-300
            ti = _safe_tstats(di, var_i, zero_i)
            stat = float(ti.max())
            safe = np.where(var_i <= 0, 1.0, var_i)
            dev_ti = dev_i / np.sqrt(safe)
            dev_ti[:, var_i <= 0] = 0.0
            boot_stat = dev_ti.max(axis=1)
            elim_stat = ti
        pval = float(np.mean(boot_stat >= stat))
        worst = int(np.argmax(elim_stat))
        for pos, model_idx in enumerate(sub):
            stats[names[model_idx]] = float(elim_stat[pos])
        order.append(active[worst])
        round_pvals.append(pval)
        active.pop(worst)

    mcs_p: dict = {}
    running = 0.0
    for model_idx, p in zip(order, round_pvals):
        running = max(running, p)
        mcs_p[names[model_idx]] = running

    ssm = [names[i] for i in order if mcs_p[names[i]] >= alpha]
    ssm.sort(key=lambda nm: stats[nm])
    eliminated = [
        (names[i], rnd) for rnd, i in enumerate(order) if mcs_p[names[i]] < alpha
    ]
    return McsResult(ssm, eliminated, mcs_p, statistic_kind, alpha,
                     [names[i] for i in order], stats)


def _safe_tstats_boot(dev: np.ndarray, var: np.ndarray) -> np.ndarray:
    safe = np.where(var <= 0, 1.0, var)
    out = dev / np.sqrt(safe)[None, :, :]
    out[:, var <= 0] = 0.0
    return out


def spa_test(losses: dict, benchmark: str, n_boot: int = 5000,
             mean_block: float = 2.0, seed=0) -> SpaResult:
    """Test whether the benchmark is beaten by any competitor.

    Relative performances are benchmark loss minus competitor loss; the
    null is that all their means are non-positive.  The statistic is the
    studentized maximum sqrt(T) mean / omega over competitors, with the
    kernel variance estimate matching the stationary bootstrap, and the
    null distribution is bootstrapped under the standard recentering
    triple.  The consistent p-value is reported (lower and upper carried
    alongside).
    """
    if benchmark not in losses:
        raise DimensionMismatch(f"benchmark {benchmark!r} not in the loss set")
    if len(losses) < 2:
        raise DimensionMismatch("need at least one competitor")
    diffs = LossDifferentials.from_losses(losses)
    names = diffs.names
    bench_col = names.index(benchmark)
    others = [i for i in range(len(names)) if i != bench_col]
    rel = diffs.losses[:, bench_col][:, None] - diffs.losses[:, others]
    t, k = rel.shape

    demeaned = rel - rel.mean(axis=0)
    p_restart = 1.0 / mean_block
    omega2 = (demeaned**2).sum(axis=0) / t
    for lag in range(1, t):
        kappa = (1.0 - lag / t) * (1 - p_restart) ** lag + (lag / t) * (
            1 - p_restart
        ) ** (t - lag)
        omega2 += 2.0 * kappa * (demeaned[: t - lag] * demeaned[lag:]).sum(axis=0) / t
    mean_rel = rel.mean(axis=0)
    dead = omega2 <= 0
    if np.any(dead & (np.abs(mean_rel) > 1e-300)):
        raise DegenerateVariance("zero long-run variance with nonzero mean")
    omega = np.sqrt(np.where(dead, 1.0, omega2))

    scaled = np.sqrt(t) * mean_rel / omega
    scaled[dead] = 0.0
    statistic = float(max(scaled.max(), 0.0))

    lower = mean_rel.copy()
    lower[lower < 0] = 0.0
    threshold = -np.sqrt((omega2 / t) * 2.0 * np.log(np.log(max(t, 3))))
    consistent = np.where(mean_rel >= threshold, mean_rel, 0.0)
    upper = mean_rel.copy()
    centers = np.stack([lower, consistent, upper])

    boot = np.empty((n_boot, 3))
    for b in range(n_boot):
        idx = stationary_bootstrap_indices(t, mean_block, (seed, b))
        rel_mean_star = rel[idx].mean(axis=0)
        for c in range(3):
            z = np.sqrt(t) * (rel_mean_star - centers[c]) / omega
            z[dead] = 0.0
            boot[b, c] = max(float(z.max()), 0.0)
    pvals = (boot >= statistic).mean(axis=0)
    return SpaResult(benchmark, float(pvals[1]), statistic,
                     p_lower=float(pvals[0]), p_upper=float(pvals[2]))


def mcs_report_rows(result_max: McsResult, result_r: McsResult) -> list[list[str]]:
    """Rows for the standard comparison table, one per model.

    Columns: Model, Rank_M, v_M, MCS_M, Rank_R, v_R, MCS_R.  Ranks order
    the elimination statistics ascending under each rule.
    """
    names = result_max.elimination_order
    if set(names) != set(result_r.elimination_order):
        raise DimensionMismatch("results cover different model sets")

    def ranks(result):
        ordered = sorted(names, key=lambda nm: result.stats[nm])
        return {nm: pos + 1 for pos, nm in enumerate(ordered)}

    rank_m = ranks(result_max)
    rank_r = ranks(result_r)
    rows = [["Model", "Rank_M", "v_M", "MCS_M", "Rank_R", "v_R", "MCS_R"]]
    for nm in sorted(names, key=lambda nm: rank_m[nm]):
        rows.append([
            nm,
            str(rank_m[nm]),
            repr(round(result_max.stats[nm], 6)),
            repr(round(result_max.mcs_pvalues[nm], 6)),
            str(rank_r[nm]),
            repr(round(result_r.stats[nm], 6)),
            repr(round(result_r.mcs_pvalues[nm], 6)),
        ])
    return rows
