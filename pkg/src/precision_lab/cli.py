"""Batch front-end: estimate, backtest, compare, synth, diagnose.

Configuration is key=value INI text organized in sections; command-line
flags override file values.  Every run writes a ``manifest.txt`` holding
the fully resolved configuration (sections and keys sorted) plus the
package version and seeds, which is sufficient to reproduce the outputs
byte for byte.  Nothing time- or host-dependent is ever written.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import compare as compare_mod
from . import diagnostics as diag_mod
from . import synthetic as synth_mod
from . import tuning as tuning_mod
from .cov_estimators import COVARIANCE_METHODS
from .errors import EmptyPanel, ParseError, PrecisionLabError
from .ggm_estimators import GGM_METHODS
from .ingest import RollingWindowPlan, load_panel, log_returns
from .portfolio import backtest

ALL_METHODS = tuple(COVARIANCE_METHODS) + tuple(GGM_METHODS) + ("ewp",)

_SCHEMA = {
    "run": {"seed", "workers", "out"},
    "data": {"prices", "returns", "start", "end"},
    "estimate": {"methods", "criterion", "search", "budget"},
    "backtest": {"methods", "horizon", "window", "step", "criterion", "search", "budget"},
    "compare": {"losses", "alpha", "n_boot", "benchmark", "mean_block", "block_length"},
    "synth": {"experiment", "methods", "criterion", "sizes", "d", "rho", "trials",
              "target", "p", "m", "reps"},
    "diagnose": {"methods", "criterion", "search", "budget"},
}


class ConfigError(Exception):
    pass


def _load_config(path: str | None) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    if path:
        read = cfg.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path}")
        for section in cfg.sections():
            if section not in _SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            unknown = set(cfg[section]) - _SCHEMA[section]
            if unknown:
                raise ConfigError(
                    f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    return cfg


def _get(cfg, section, key, override, default=None):
    if override is not None:
        return override
    if cfg.has_option(section, key):
        return cfg.get(section, key)
    return default


def _parse_methods(raw: str) -> list[str]:
    methods = [m.strip() for m in raw.split(",") if m.strip()]
    if not methods:
        raise ConfigError("no methods given")
    for m in methods:
        if m not in ALL_METHODS:
            raise ConfigError(
                f"unknown method {m!r}; valid identifiers: {', '.join(ALL_METHODS)}")
    return methods


def _load_returns(cfg, args):
    returns_path = _get(cfg, "data", "returns", getattr(args, "returns", None))
    prices_path = _get(cfg, "data", "prices", getattr(args, "prices", None))
    if returns_path:
        panel = load_panel(returns_path, schema="returns")
    elif prices_path:
        panel = log_returns(load_panel(prices_path, schema="prices"))
    else:
        raise ConfigError("no input data: set data.returns or data.prices")
    start = _get(cfg, "data", "start", None)
    end = _get(cfg, "data", "end", None)
    if start or end:
        keep = [
            i for i, d in enumerate(panel.dates)
            if (start is None or d >= start) and (end is None or d <= end)
        ]
        if len(keep) < 2:
            raise EmptyPanel("period filter leaves fewer than 2 rows")
        panel = panel.row_slice(range(keep[0], keep[-1] + 1))
    return panel


def _write_csv(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh).writerows(rows)


def _fmt(x) -> str:
    return repr(float(x))


def _write_matrix(path: Path, matrix: np.ndarray, labels) -> None:
    rows = [[""] + list(labels)]
    for label, row in zip(labels, matrix):
        rows.append([label] + [_fmt(v) for v in row])
    _write_csv(path, rows)


def _write_manifest(outdir: Path, command: str, resolved: dict) -> None:
    lines = [f"version = {__version__}", f"command = {command}"]
    for section in sorted(resolved):
        lines.append(f"[{section}]")
        for key in sorted(resolved[section]):
            lines.append(f"{key} = {resolved[section][key]}")
    (outdir / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _tuning_settings(cfg, args, section):
    return {
        "criterion": _get(cfg, section, "criterion", args.criterion, "cv1"),
        "search": {"nm": "nm", "nelder_mead": "nm", "grid": "grid"}[
            _get(cfg, section, "search", args.search, "grid")],
        "budget": int(_get(cfg, section, "budget", args.budget, 60)),
    }


def _parse_grid_file(path: str | None):
    """Custom grid file: one point per line, e.g. ``rho=0.1`` or ``nu=0.05,T=10``."""
    if not path:
        return None
    grid = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        point = {}
        for item in line.split(","):
            key, _, value = item.partition("=")
            if not _:
                raise ConfigError(f"bad grid line {line!r}")
            point[key.strip()] = float(value)
        grid.append(point)
    if not grid:
        raise ConfigError(f"grid file {path} holds no points")
    return grid


def cmd_estimate(cfg, args, outdir: Path) -> dict:
    panel = _load_returns(cfg, args)
    methods = _parse_methods(_get(cfg, "estimate", "methods", args.methods, "sample"))
    settings = _tuning_settings(cfg, args, "estimate")
    grid = _parse_grid_file(args.grid_file)
    diag_rows = {}
    for method in methods:
        if method == "ewp":
            raise ConfigError("ewp has no matrix to estimate")
        if method in GGM_METHODS:
            est, tune = tuning_mod.tune_estimator(
                panel, method, criterion=settings["criterion"],
                search=settings["search"], grid=grid, budget=settings["budget"])
            diag_rows[method] = diag_mod.summarize_precision(est, tune)
            _write_matrix(outdir / f"{method}.precision.csv", est.matrix, panel.tickers)
        elif method in ("hard", "soft", "adaptive"):
            level, _ = tuning_mod.select_threshold(panel, method)
            key = "delta" if method == "adaptive" else "tau"
            est = tuning_mod.fit_method(method, panel, {key: level})
            _write_matrix(outdir / f"{method}.covariance.csv", est.matrix, panel.tickers)
        else:
            est = tuning_mod.fit_method(method, panel)
            _write_matrix(outdir / f"{method}.covariance.csv", est.matrix, panel.tickers)
    if diag_rows:
        _write_csv(outdir / "diagnostics.csv", diag_mod.diagnostics_table_rows(diag_rows))
    return {"estimate": {"methods": ",".join(methods), **settings}}


def cmd_backtest(cfg, args, outdir: Path) -> dict:
    panel = _load_returns(cfg, args)
    methods = _parse_methods(_get(cfg, "backtest", "methods", args.methods, "sample,ewp"))
    horizon = _get(cfg, "backtest", "horizon", args.horizon, "daily")
    default_window = {"daily": 150, "weekly": 100, "monthly": 50}.get(horizon, 150)
    window = int(_get(cfg, "backtest", "window", args.window, default_window))
    step = int(_get(cfg, "backtest", "step", args.step, 1))
    settings = _tuning_settings(cfg, args, "backtest")
    plan = RollingWindowPlan(window_length=window, step=step, horizon=horizon)
    workers = _get(cfg, "run", "workers", args.workers)
    run_cfg = dict(settings, workers=int(workers) if workers else None)
    grid = _parse_grid_file(args.grid_file)
    if grid is not None:
        run_cfg["grids"] = {m: grid for m in methods if m in GGM_METHODS}
    series = backtest(panel, plan, methods, tuning_config=run_cfg)
    rows = [["timestamp", "method", "loss"]]
    any_series = next(iter(series.values()))
    for i, stamp in enumerate(any_series.timestamps):
        for method in methods:
            rows.append([stamp, method, _fmt(series[method].losses[i])])
    _write_csv(outdir / "losses.csv", rows)
    return {"backtest": {"methods": ",".join(methods), "horizon": horizon,
                         "window": str(window), "step": str(step), **settings}}


def _read_losses(path: str) -> dict:
    table: dict[str, list] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["timestamp", "method", "loss"]:
            raise ParseError(f"{path}: expected a timestamp,method,loss file")
        for rec in reader:
            table.setdefault(rec[1], []).append(float(rec[2]))
    if not table:
        raise EmptyPanel(f"{path}: no loss rows")
    return {m: np.asarray(v) for m, v in table.items()}


def cmd_compare(cfg, args, outdir: Path) -> dict:
    losses_path = _get(cfg, "compare", "losses", args.losses)
    if not losses_path:
        raise ConfigError("compare needs a losses file (compare.losses)")
    losses = _read_losses(losses_path)
    alpha = float(_get(cfg, "compare", "alpha", args.alpha, 0.05))
    n_boot = int(_get(cfg, "compare", "n_boot", args.n_boot, 5000))
    mean_block = float(_get(cfg, "compare", "mean_block", args.mean_block, 2.0))
    block_raw = _get(cfg, "compare", "block_length", args.block_length)
    block_length = int(block_raw) if block_raw is not None else None
    seed = int(_get(cfg, "run", "seed", args.seed, 0))
    if len(losses) == 1:
        name = next(iter(losses))
        _write_csv(outdir / "mcs_report.csv",
                   [["Model", "Rank_M", "v_M", "MCS_M", "Rank_R", "v_R", "MCS_R"],
                    [name, "1", "0.0", "1.0", "1", "0.0", "1.0"]])
    else:
        res_max = compare_mod.mcs_run(losses, alpha, "T_max", n_boot, seed,
                                      block_length=block_length)
        res_r = compare_mod.mcs_run(losses, alpha, "T_R", n_boot, seed,
                                    block_length=block_length)
        _write_csv(outdir / "mcs_report.csv",
                   compare_mod.mcs_report_rows(res_max, res_r))
    benchmark = _get(cfg, "compare", "benchmark", args.benchmark)
    if benchmark:
        spa = compare_mod.spa_test(losses, benchmark, n_boot, mean_block, seed)
        _write_csv(outdir / "spa.csv",
                   [["benchmark", "p_value", "statistic", "p_lower", "p_upper"],
                    [spa.benchmark, _fmt(spa.p_value), _fmt(spa.statistic),
                     _fmt(spa.p_lower), _fmt(spa.p_upper)]])
    return {"compare": {"losses": losses_path, "alpha": repr(alpha),
                        "n_boot": str(n_boot), "mean_block": repr(mean_block),
                        "benchmark": benchmark or ""}}


def cmd_synth(cfg, args, outdir: Path) -> dict:
    experiment = _get(cfg, "synth", "experiment", args.experiment, "recovery")
    methods = _parse_methods(_get(cfg, "synth", "methods", args.methods, "glasso"))
    criterion = _get(cfg, "synth", "criterion", args.criterion, "cv1")
    seed = int(_get(cfg, "run", "seed", args.seed, 0))
    d = int(_get(cfg, "synth", "d", args.d, 5))
    rho = float(_get(cfg, "synth", "rho", args.rho, 0.95))
    resolved = {"experiment": experiment, "methods": ",".join(methods),
                "criterion": criterion, "d": str(d), "rho": repr(rho)}
    if experiment == "recovery":
        sizes = [int(s) for s in _get(cfg, "synth", "sizes", args.sizes, "20").split(",")]
        for n in sizes:
            if n % 2 or (n // 2) % d:
                raise ConfigError(f"size {n}: need n even and n/2 a multiple of d={d}")
        trials = int(_get(cfg, "synth", "trials", args.trials, 3))
        target = float(_get(cfg, "synth", "target", args.target, 0.25))
        curves = synth_mod.sample_complexity_curve(
            methods, sizes, criterion=criterion, target=target, trials=trials,
            seed=seed, d=d, rho=rho)
        rows = [["method", "n", "m_star"]]
        for method in methods:
            for n in sizes:
                rows.append([method, str(n), str(curves[method][n])])
        _write_csv(outdir / "recovery_curve.csv", rows)
        resolved.update({"sizes": ",".join(map(str, sizes)), "trials": str(trials),
                         "target": repr(target)})
    elif experiment == "frobenius":
        p = int(_get(cfg, "synth", "p", args.p, 100))
        m = int(_get(cfg, "synth", "m", args.m, 150))
        reps = int(_get(cfg, "synth", "reps", args.reps, 100))
        truth = synth_mod.gen_factor_model_truth(p, seed=seed)
        table = synth_mod.frobenius_experiment(truth, methods, m, reps, seed=seed,
                                               criterion=criterion)
        rows = [["method", "mean_error", "std_error"]]
        for method in methods:
            mean, se = table[method]
            rows.append([method, _fmt(mean), _fmt(se)])
        _write_csv(outdir / "frobenius.csv", rows)
        resolved.update({"p": str(p), "m": str(m), "reps": str(reps)})
    else:
        raise ConfigError(f"unknown experiment {experiment!r}")
    return {"synth": resolved}


def cmd_diagnose(cfg, args, outdir: Path) -> dict:
    panel = _load_returns(cfg, args)
    methods = _parse_methods(_get(cfg, "diagnose", "methods", args.methods, "glasso"))
    settings = _tuning_settings(cfg, args, "diagnose")
    grid = _parse_grid_file(args.grid_file)
    rows = {}
    for method in methods:
        if method not in GGM_METHODS:
            raise ConfigError(f"diagnose applies to GGM methods, got {method!r}")
        est, tune = tuning_mod.tune_estimator(
            panel, method, criterion=settings["criterion"],
            search=settings["search"], grid=grid, budget=settings["budget"])
        rows[method] = diag_mod.summarize_precision(est, tune)
    _write_csv(outdir / "diagnostics.csv", diag_mod.diagnostics_table_rows(rows))
    return {"diagnose": {"methods": ",".join(methods), **settings}}


_COMMANDS = {
    "estimate": cmd_estimate,
    "backtest": cmd_backtest,
    "compare": cmd_compare,
    "synth": cmd_synth,
    "diagnose": cmd_diagnose,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="precision-lab")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="INI config file")
    parser.add_argument("--out", help="output directory (default: .)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--returns")
    parser.add_argument("--prices")
    parser.add_argument("--methods")
    parser.add_argument("--criterion", choices=["cv1", "cv2"])
    parser.add_argument("--search", choices=["grid", "nm"])
    parser.add_argument("--grid", dest="grid_file",
                        help="custom grid file, one name=value[,name=value] point per line")
    parser.add_argument("--budget", type=int)
    parser.add_argument("--horizon", choices=["daily", "weekly", "monthly"])
    parser.add_argument("--window", type=int)
    parser.add_argument("--step", type=int)
    parser.add_argument("--losses")
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--n-boot", dest="n_boot", type=int)
    parser.add_argument("--mean-block", dest="mean_block", type=float)
    parser.add_argument("--block-length", dest="block_length", type=int)
    parser.add_argument("--benchmark")
    parser.add_argument("--experiment", choices=["recovery", "frobenius"])
    parser.add_argument("--sizes")
    parser.add_argument("--d", type=int)
    parser.add_argument("--rho", type=float)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--target", type=float)
    parser.add_argument("--p", type=int)
    parser.add_argument("--m", type=int)
    parser.add_argument("--reps", type=int)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        outdir = Path(_get(cfg, "run", "out", args.out, "."))
        outdir.mkdir(parents=True, exist_ok=True)
        seed = int(_get(cfg, "run", "seed", args.seed, 0))
        workers = _get(cfg, "run", "workers", args.workers)
        resolved = _COMMANDS[args.command](cfg, args, outdir)
        resolved["run"] = {"seed": str(seed),
                           "workers": str(workers) if workers else "auto"}
        _write_manifest(outdir, args.command, resolved)
        return 0
    except (ParseError, EmptyPanel) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except PrecisionLabError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, configparser.Error, KeyError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
