"""Command-line front end: ``mmfs {fit,frontier,rank,compare}``.

Settings come from built-in defaults, then an optional flat ``key = value``
config file (``--config``), then command-line flags; keys are the flag names
with or without the leading dashes, '-' and '_' interchangeable.

Exit status: 0 on success, 1 on bad input (nothing is written), 2 when any
solve was flagged as not converged (all outputs are still written).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .comparators import compare, write_comparison_csv
from .data import DataError, load_csv, make_folds
from .pipeline import (CV_TOL, FINAL_TOL, FoldResult, GridSpec, aggregate, correlation_matrix, frontier,
                       rank_stability, write_correlation_csv, write_frontier_csv, write_frontier_summary_csv,
                       write_ranking_csv)

log = logging.getLogger("mmfs")


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "data": None,
    "label_col": "label",
    "seed": 0,
    "outer_k": 10,
    "inner_k": 5,
    "c2": None,
    "c2_grid": None,
    "c_grid": None,
    "gamma_grid": None,
    "jobs": 1,
    "out": "mmfs-out",
    "paper_scaling": False,
    "solve_eq17": False,
    "threshold": 0.01,
    "eq_tol": 1e-5,
    "opt_tol": 1e-5,
    "max_outer": 50,
    "max_inner": 500,
    "method": "reduced",
    "folds": None,
    "top_k": 5,
    "results": None,
    "verbose": False,
}
BOOL_KEYS = {"paper_scaling", "solve_eq17", "verbose"}
INT_KEYS = {"seed", "outer_k", "inner_k", "jobs", "max_outer", "max_inner", "top_k"}
FLOAT_KEYS = {"c2", "threshold", "eq_tol", "opt_tol"}


def _parse_bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _parse_list(v, name: str) -> tuple[float, ...]:
    if isinstance(v, (list, tuple)):
        return tuple(float(x) for x in v)
    parts = [p for p in str(v).replace(";", ",").split(",") if p.strip()]
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"{name}: expected a comma-separated list of numbers, got {v!r}") from None


def read_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"no such config file: {path}")
    out = {}
    for k, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{k}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{k}: unknown key {key!r}")
        out[key] = val
    return out


@dataclass
class RunConfig:
    command: str
    data: Path
    label_col: str
    seed: int
    outer_k: int
    inner_k: int
    grid: GridSpec
    c2: float | None
    jobs: int
    out: Path
    paper_scaling: bool
    solve_eq17: bool
    threshold: float
    nlp: dict
    folds: tuple | None
    top_k: int
    results: Path | None
    verbose: bool = False

    def manifest(self, ds_hash: str, n: int, m: int, c2_values) -> dict:
        return {
            "version": __version__,
            "command": self.command,
            "data": str(self.data),
            "data_sha256": ds_hash,
            "n_individuals": n,
            "n_features": m,
            "label_col": self.label_col,
            "seed": self.seed,
            "outer_k": self.outer_k,
            "inner_k": self.inner_k,
            "folds": list(self.folds) if self.folds is not None else None,
            "grids": {**self.grid.to_dict(), "C2_values": list(c2_values)},
            "tolerances": {**self.nlp, "grid_search_kkt": CV_TOL, "refit_kkt": FINAL_TOL},
            "threshold": self.threshold,
            "paper_scaling": self.paper_scaling,
            "solve_eq17": self.solve_eq17,
        }


def resolve(command: str, ns: argparse.Namespace) -> RunConfig:
    """Merge defaults, config file and flags, and validate the result."""
    vals = dict(DEFAULTS)
    if ns.config is not None:
        vals.update(read_config(ns.config))
    for k in DEFAULTS:
        v = getattr(ns, k, None)
        if v is not None:
            vals[k] = v
    try:
        for k in BOOL_KEYS:
            vals[k] = _parse_bool(vals[k])
        for k in INT_KEYS:
            vals[k] = int(vals[k])
        for k in FLOAT_KEYS:
            if vals[k] is not None:
                vals[k] = float(vals[k])
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None

    if vals["data"] is None:
        raise ConfigError("--data is required")
    data = Path(vals["data"])
    if not data.is_file():
        raise ConfigError(f"no such data file: {data}")
    grid_kw = {}
    if vals["c_grid"] is not None:
        grid_kw["C_values"] = _parse_list(vals["c_grid"], "c-grid")
    if vals["gamma_grid"] is not None:
        grid_kw["gamma_values"] = _parse_list(vals["gamma_grid"], "gamma-grid")
    if vals["c2_grid"] is not None:
        grid_kw["C2_values"] = _parse_list(vals["c2_grid"], "c2-grid")
    grid = GridSpec(**grid_kw)
    if command in ("fit", "compare") and vals["c2"] is None:
        raise ConfigError(f"{command} needs --c2")
    if vals["c2"] is not None and not 0.0 <= vals["c2"] <= 1.0:
        raise ConfigError("--c2 must lie in [0, 1]")
    if vals["jobs"] < 1:
        raise ConfigError("--jobs must be at least 1")
    if vals["outer_k"] < 2 or vals["inner_k"] < 2:
        raise ConfigError("fold counts must be at least 2")
    if vals["threshold"] <= 0:
        raise ConfigError("--threshold must be positive")
    if vals["method"] not in ("reduced", "multipliers"):
        raise ConfigError(f"unknown --method {vals['method']!r}")
    folds = None
    if vals["folds"] is not None:
        folds = tuple(int(f) for f in _parse_list(vals["folds"], "folds"))
        if not folds or any(f < 0 or f >= vals["outer_k"] for f in folds):
            raise ConfigError("--folds must list fold indices in [0, outer-k)")
    out = Path(vals["out"])
    if out.exists() and not out.is_dir():
        raise ConfigError(f"--out {out} exists and is not a directory")
    results = Path(vals["results"]) if vals["results"] is not None else None
    if results is not None and not results.is_dir():
        raise ConfigError(f"no such results directory: {results}")
    nlp = {"eq_tol": vals["eq_tol"], "opt_tol": vals["opt_tol"], "max_outer": vals["max_outer"],
           "max_inner": vals["max_inner"], "method": vals["method"]}
    return RunConfig(command, data, vals["label_col"], vals["seed"], vals["outer_k"], vals["inner_k"], grid,
                     vals["c2"], vals["jobs"], out, vals["paper_scaling"], vals["solve_eq17"], vals["threshold"],
                     nlp, folds, vals["top_k"], results, vals["verbose"])


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fold_json_name(r: FoldResult) -> str:
    return f"C2_{r.C2!r}_fold_{r.fold:02d}.json"


def _write_folds(results, out: Path) -> None:
    d = out / "folds"
    d.mkdir(parents=True, exist_ok=True)
    for r in results:
        _write_json(r.to_dict(), d / _fold_json_name(r))


def _load(cfg: RunConfig):
    ds = load_csv(cfg.data, cfg.label_col)
    if cfg.outer_k > ds.n:
        raise ConfigError(f"outer-k = {cfg.outer_k} exceeds the {ds.n} individuals")
    plan = make_folds(ds.n, cfg.outer_k, cfg.seed, ds.y)
    return ds, plan


def _sweep(cfg: RunConfig, ds, plan, c2_values):
    return frontier(ds, plan, cfg.grid, C2_values=c2_values, inner_k=cfg.inner_k, seed=cfg.seed,
                    paper_scaling=cfg.paper_scaling, nlp=cfg.nlp, solve_eq17=cfg.solve_eq17,
                    threshold=cfg.threshold, jobs=cfg.jobs, fold_indices=cfg.folds)


def cmd_fit(cfg: RunConfig) -> int:
    ds, plan = _load(cfg)
    report = _sweep(cfg, ds, plan, (cfg.c2,))
    cfg.out.mkdir(parents=True, exist_ok=True)
    rec = report.records[0]
    _write_folds(rec.folds, cfg.out)
    with open(cfg.out / "summary.csv", "w", encoding="utf-8") as fh:
        fh.write("fold,C_star,gamma_init,norm_gamma,n_selected,acc_test,flagged\n")
        for r in rec.folds:
            fh.write(f"{r.fold},{r.C_star!r},{r.gamma_init!r},{r.norm_gamma!r},{r.n_selected},"
                     f"{r.accuracy!r},{int(not r.converged)}\n")
    _write_json(cfg.manifest(_sha256(cfg.data), ds.n, ds.n_features, (cfg.c2,)), cfg.out / "manifest.json")
    print(f"C2={cfg.c2}: mean test accuracy {rec.mean_accuracy:.4f}, mean selected {rec.mean_n_selected:.2f}, "
          f"flagged {rec.n_flagged}")
    return 2 if rec.n_flagged else 0


def _write_ranking(report, cfg: RunConfig, names) -> None:
    table = rank_stability(report, cfg.top_k)
    write_ranking_csv(table, names, cfg.out / "ranking.csv")
    top = table.top(min(cfg.top_k, len(names)))
    with open(cfg.out / "ranking_top.csv", "w", encoding="utf-8") as fh:
        fh.write("rank," + ",".join(repr(c) for c in table.C2_values) + "\n")
        for pos, row in enumerate(top, start=1):
            fh.write(f"{pos}," + ",".join(names[j] for j in row) + "\n")


def cmd_frontier(cfg: RunConfig) -> int:
    ds, plan = _load(cfg)
    report = _sweep(cfg, ds, plan, cfg.grid.C2_values)
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_folds([r for rec in report.records for r in rec.folds], cfg.out)
    write_frontier_csv(report, cfg.out / "frontier.csv")
    write_frontier_summary_csv(report, cfg.out / "frontier_summary.csv")
    _write_ranking(report, cfg, ds.feature_names)
    write_correlation_csv(correlation_matrix(ds), ds.feature_names, cfg.out / "correlation.csv")
    _write_json(cfg.manifest(_sha256(cfg.data), ds.n, ds.n_features, cfg.grid.C2_values), cfg.out / "manifest.json")
    for rec in report.records:
        print(f"C2={rec.C2}: accuracy {rec.mean_accuracy:.4f}, |gamma|_1 {rec.mean_norm_gamma:.4g}, "
              f"selected {rec.mean_n_selected:.2f}, flagged {rec.n_flagged}")
    return 2 if report.n_flagged else 0


def cmd_rank(cfg: RunConfig) -> int:
    ds, plan = _load(cfg)
    if cfg.results is not None:
        files = sorted((cfg.results / "folds").glob("*.json")) or sorted(cfg.results.glob("*.json"))
        results = []
        for p in files:
            try:
                results.append(FoldResult.from_dict(json.loads(p.read_text(encoding="utf-8"))))
            except (KeyError, ValueError, TypeError) as e:
                raise ConfigError(f"{p}: not a fold result ({e})") from None
        if not results:
            raise ConfigError(f"no fold results under {cfg.results}")
        if any(len(r.point.gamma) != ds.n_features for r in results):
            raise ConfigError("fold results do not match the data set's feature count")
        c2s = tuple(sorted({r.C2 for r in results}))
        report = aggregate(results, c2s, ds.feature_names, cfg.threshold)
    else:
        report = _sweep(cfg, ds, plan, cfg.grid.C2_values)
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_ranking(report, cfg, ds.feature_names)
    _write_json(cfg.manifest(_sha256(cfg.data), ds.n, ds.n_features, [r.C2 for r in report.records]),
                cfg.out / "manifest.json")
    table = rank_stability(report, cfg.top_k)
    for c2, order in zip(table.C2_values, table.order):
        print(f"C2={c2}: " + ", ".join(ds.feature_names[j] for j in order[:cfg.top_k]))
    return 2 if report.n_flagged else 0


def cmd_compare(cfg: RunConfig) -> int:
    ds, plan = _load(cfg)
    if cfg.folds is not None:
        raise ConfigError("compare runs every outer fold; drop --folds")
    rows, mm = compare(ds, plan, cfg.grid, cfg.c2, inner_k=cfg.inner_k, seed=cfg.seed,
                       paper_scaling=cfg.paper_scaling, nlp=cfg.nlp, solve_eq17=cfg.solve_eq17,
                       threshold=cfg.threshold, jobs=cfg.jobs)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_comparison_csv(rows, cfg.out / "comparison.csv")
    _write_json(cfg.manifest(_sha256(cfg.data), ds.n, ds.n_features, (cfg.c2,)), cfg.out / "manifest.json")
    for method in ("MM-FS", "NO-FS", "L1-SVM"):
        rs = [r for r in rows if r.method == method]
        print(f"{method}: accuracy {np.mean([r.accuracy for r in rs]):.4f}, "
              f"selected {np.mean([r.n_selected for r in rs]):.2f}")
    return 2 if any(not r.converged for r in rows) else 0


COMMANDS = {"fit": cmd_fit, "frontier": cmd_frontier, "rank": cmd_rank, "compare": cmd_compare}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmfs", description="Min-max embedded feature selection for kernel SVMs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    a = common.add_argument
    a("--config", help="flat key = value settings file")
    a("--data", help="CSV file with a header row")
    a("--label-col", dest="label_col", help="name of the two-class label column (default: label)")
    a("--seed", type=int)
    a("--outer-k", dest="outer_k", type=int, help="outer folds (default 10)")
    a("--inner-k", dest="inner_k", type=int, help="inner cross-validation folds (default 5)")
    a("--c2", type=float, help="single trade-off value")
    a("--c2-grid", dest="c2_grid", help="comma-separated trade-off values")
    a("--c-grid", dest="c_grid", help="comma-separated SVM C values")
    a("--gamma-grid", dest="gamma_grid", help="comma-separated isotropic gamma values")
    a("--jobs", type=int, help="worker processes (default 1)")
    a("--out", help="output directory")
    a("--paper-scaling", dest="paper_scaling", action="store_const", const=True,
      help="fit the [-1, 1] scaling on the whole data set instead of each training part")
    a("--solve-eq17", dest="solve_eq17", action="store_const", const=True,
      help="compute warm-start multipliers by solving the lower-level dual iteratively")
    a("--threshold", type=float, help="gamma above which a feature counts as selected (default 0.01)")
    a("--eq-tol", dest="eq_tol", type=float)
    a("--opt-tol", dest="opt_tol", type=float)
    a("--max-outer", dest="max_outer", type=int)
    a("--max-inner", dest="max_inner", type=int)
    a("--method", choices=["reduced", "multipliers"], help="single-level solver (default reduced)")
    a("--folds", help="comma-separated subset of outer folds to run")
    a("--top-k", dest="top_k", type=int, help="features listed per C2 in ranking_top.csv (default 5)")
    a("--verbose", action="store_const", const=True)
    helps = {"fit": "all outer folds at one C2", "frontier": "sweep the C2 grid",
             "rank": "feature ranking per C2 (from --results or a fresh sweep)",
             "compare": "MM-FS vs NO-FS vs l1-SVM at one C2"}
    for name, h in helps.items():
        sp = sub.add_parser(name, parents=[common], help=h)
        if name == "rank":
            sp.add_argument("--results", help="output directory of an earlier frontier run")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = resolve(ns.command, ns)
    except (ConfigError, ValueError) as e:
        print(f"mmfs: error: {e}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if cfg.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[ns.command](cfg)
    except (ConfigError, DataError) as e:
        print(f"mmfs: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
