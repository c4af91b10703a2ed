"""Experiment driver: runs one process over the (d, lambda) grid of a config
and writes a CSV table, a JSON manifest and optionally a per-replica log.

Everything outside the manifest's ``volatile`` block is a function of the
config and seed, so reruns produce byte-identical CSV files.
"""

from __future__ import annotations

import csv
import json
import platform
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import outcome as oc
from .branching import estimate_branching_survival
from .config import ExperimentConfig, check_output_dir
from .coupling import estimate_coupling, extinction_gap
from .errors import IoFailure, OrlatError, SubcriticalRate
from .fgrid import branching_survival_d, limit_profile, solve_fgrid
from .lattice import Budget, estimate_survival
from .meanfield import critical_rate, limit_or_zero, solve_theta
from .rng import cell_seed, replica_stream
from .rwalk import collision_prob, survival_lower_bound

SURVIVAL_COLUMNS = ["d", "lambda", "point", "ci_lo", "ci_hi", "censored", "limit_survival", "abs_gap"]
SCHEMAS = {
    "contact": SURVIVAL_COLUMNS,
    "sir": SURVIVAL_COLUMNS,
    "branching": SURVIVAL_COLUMNS + ["oracle_fgrid"],
    "theta": ["lambda", "lambda_c", "theta", "limit_survival", "residual"],
    "fgrid": ["d", "lambda", "s", "F_d", "limit_profile", "abs_gap"],
    "couple": ["d", "lambda", "sigma", "target_steps", "p_success", "ci_lo", "ci_hi",
               "shared_target_hit", "extra_tree_birth"],
    "gap": ["d", "lambda", "layer", "p_beta_empty", "p_v_empty", "gap", "ci_width"],
    "rwalk-collide": ["d", "x", "y", "horizon", "estimate", "ci_lo", "ci_hi"],
    "rwalk-bound": ["d", "lambda", "horizon", "bound", "raw", "clipped", "mean_r", "se"],
}
DUMP_COLUMNS = ["d", "lambda", "x", "y", "T", "sum_h", "sum_f", "case", "truncated", "R"]
LOG_COLUMNS = ["d", "lambda", "replica", "outcome", "generations_or_time", "ever_infected"]


def schema_for(config: ExperimentConfig) -> list[str]:
    if config.process == "rwalk":
        return SCHEMAS["rwalk-" + config.options.get("mode", "collide")]
    return SCHEMAS[config.process]


def pad(vertex, d: int) -> tuple[int, ...]:
    """Vertices in configs may list only their leading coordinates."""
    v = [int(c) for c in vertex]
    if len(v) > d:
        raise OrlatError(f"vertex {vertex} has more than {d} coordinates")
    return tuple(v + [0] * (d - len(v)))


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list)):
        return " ".join(str(int(c)) for c in v)
    return str(v)


def _limit(spec, lam):
    return limit_or_zero(spec, lam)


class _Run:
    def __init__(self, config: ExperimentConfig, jobs: int, quenched: int | None, want_log: bool,
                 want_dump: bool = False):
        self.cfg = config
        self.want_dump = want_dump
        self.dump: list[dict] = []
        self.jobs = jobs
        self.quenched = quenched
        self.want_log = want_log
        self.rows: list[dict] = []
        self.log: list[dict] = []
        self.summary: list[dict] = []
        self.seeds: list[dict] = []

    def seed(self, *labels) -> int:
        s = cell_seed(self.cfg.master_seed, self.cfg.process, *labels)
        self.seeds.append({"cell": [_fmt(x) for x in labels], "seed": s})
        return s

    # per-process cells -------------------------------------------------

    def theta(self, lam):
        spec = self.cfg.weights
        lam_c = critical_rate(spec)
        try:
            sol = solve_theta(spec, lam)
            row = {"lambda": lam, "lambda_c": lam_c, "theta": sol.theta,
                   "limit_survival": sol.limit_survival, "residual": sol.residual}
        except SubcriticalRate:
            row = {"lambda": lam, "lambda_c": lam_c, "theta": 0.0, "limit_survival": 0.0, "residual": 0.0}
        self.rows.append(row)
        self.summary.append(dict(row))

    def survival(self, d, lam):
        cfg = self.cfg
        spec = cfg.weights
        seed = self.seed(d, lam)
        records: list = []
        oracle = None
        if cfg.process == "branching":
            horizon = cfg.horizon or 200
            est = estimate_branching_survival(
                spec, lam, d, None, horizon, cfg.pop_cap or 100_000, cfg.n_runs,
                cfg.confidence, seed, self.jobs, records,
            )
            try:
                grid = solve_fgrid(spec, lam, d, **_fgrid_opts(cfg))
                oracle = branching_survival_d(grid, spec)
            except OrlatError:
                oracle = float("nan")
        else:
            budget = Budget(cfg.horizon or 150, cfg.t_max, cfg.pop_cap or 50_000)
            initial = [pad(v, d) for v in cfg.initial] if cfg.initial else None
            est = estimate_survival(
                cfg.process, spec, lam, d, initial, budget, cfg.n_runs, cfg.confidence,
                seed, self.quenched, self.jobs, records,
            )
        limit = _limit(spec, lam)
        row = {"d": d, "lambda": lam, "point": est.point, "ci_lo": est.ci_lo, "ci_hi": est.ci_hi,
               "censored": est.censored, "limit_survival": limit, "abs_gap": abs(est.point - limit)}
        summary = {"d": d, "lambda": lam, "survived": est.survived, "died": est.died,
                   "censored_horizon": est.censored, "point": est.point,
                   "ci_lo": est.ci_lo, "ci_hi": est.ci_hi}
        if cfg.process == "branching":
            row["oracle_fgrid"] = oracle
            summary["oracle_fgrid"] = oracle
        self.rows.append(row)
        self.summary.append(summary)
        if self.want_log:
            for rec in records:
                i, code, gen = rec[0], rec[1], rec[2]
                ever = rec[3] if len(rec) > 3 else ""
                self.log.append({"d": d, "lambda": lam, "replica": i, "outcome": oc._REASONS[code],
                                 "generations_or_time": gen, "ever_infected": ever})

    def fgrid(self, d, lam):
        spec = self.cfg.weights
        grid = solve_fgrid(spec, lam, d, **_fgrid_opts(self.cfg))
        try:
            prof = limit_profile(spec, lam)(grid.s_nodes)
        except SubcriticalRate:
            prof = np.ones_like(grid.s_nodes)
        gaps = np.abs(grid.values - prof)
        for s, f, p, g in zip(grid.s_nodes, grid.values, prof, gaps):
            self.rows.append({"d": d, "lambda": lam, "s": s, "F_d": f, "limit_profile": p, "abs_gap": g})
        self.summary.append({"d": d, "lambda": lam, "sup_gap": float(gaps.max()),
                             "iterations": grid.iterations, "residual": grid.sup_residual,
                             "survival_d": branching_survival_d(grid, spec)})

    def couple(self, d, lam):
        opts = self.cfg.options
        est = estimate_coupling(
            self.cfg.weights, lam, d, opts.get("sigma"), self.cfg.n_runs, self.cfg.confidence,
            self.seed(d, lam), opts.get("steps"), self.jobs,
        )
        h = est.failure_histogram
        self.rows.append({"d": d, "lambda": lam, "sigma": est.sigma, "target_steps": est.target_steps,
                          "p_success": est.p_success, "ci_lo": est.ci[0], "ci_hi": est.ci[1],
                          "shared_target_hit": h["shared-target-hit"],
                          "extra_tree_birth": h["extra-tree-birth"]})
        self.summary.append(est.to_dict())

    def gap(self, d, lam):
        cfg = self.cfg
        opts = cfg.options
        budget = Budget(cfg.horizon or 150, cfg.t_max, cfg.pop_cap or 50_000)
        g = extinction_gap(cfg.weights, lam, d, opts.get("sigma"), cfg.n_runs, self.seed(d, lam),
                           cfg.confidence, budget, opts.get("steps"), self.jobs)
        self.rows.append({"d": d, "lambda": lam, "layer": g.layer, "p_beta_empty": g.beta_empty.point,
                          "p_v_empty": g.v_empty.point, "gap": g.gap, "ci_width": g.ci_width})
        self.summary.append(g.to_dict())

    def rwalk(self, d, lam):
        cfg = self.cfg
        opts = cfg.options
        horizon = int(opts.get("horizon", cfg.horizon or 1000))
        rng = replica_stream(self.seed(d, lam), 0)
        if opts.get("mode", "collide") == "collide":
            x = pad(opts.get("x", []), d)
            y = pad(opts.get("y", [1]), d)
            if sum(x) > sum(y):
                x, y = y, x
            est = collision_prob(d, x, y, horizon, cfg.n_runs, rng, cfg.confidence)
            self.rows.append({"d": d, "x": x, "y": y, "horizon": horizon, "estimate": est.estimate,
                              "ci_lo": est.ci[0], "ci_hi": est.ci[1]})
            self.summary.append({"d": d, "x": list(x), "y": list(y), "estimate": est.estimate,
                                 "ci": list(est.ci), "hits": est.hits, "n_runs": est.n_runs})
        else:
            A = [pad(v, d) for v in opts.get("A", [[]])]
            recs = [] if self.want_dump else None
            b = survival_lower_bound(A, cfg.weights, lam, d, horizon, cfg.n_runs, rng, recs)
            for x, y, r, v in recs or ():
                self.dump.append({"d": d, "lambda": lam, "x": x, "y": y, "T": r.T, "sum_h": sum(r.h),
                                  "sum_f": sum(r.f), "case": r.case_tag, "truncated": r.truncated, "R": v})
            self.rows.append({"d": d, "lambda": lam, "horizon": horizon, "bound": b.value, "raw": b.raw,
                              "clipped": b.clipped, "mean_r": b.mean_r, "se": b.se})
            self.summary.append(dict(b.to_dict(), d=d, **{"lambda": lam}))


def _fgrid_opts(cfg: ExperimentConfig) -> dict:
    opts = cfg.options if cfg.process == "fgrid" else {}
    return {"grid_points": int(opts.get("grid_points", 129)), "tol": float(opts.get("tol", 1e-10))}


def write_csv(path: Path, columns: list[str], rows: list[dict]):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(r[c]) for c in columns])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _versions() -> dict:
    import numba
    import scipy

    return {"orlat": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def run_experiment(
    config: ExperimentConfig,
    out: str | Path | None = None,
    jobs: int = 1,
    log: bool = False,
    quenched: int | None = None,
    dump: bool = False,
) -> dict:
    """Run every (d, lambda) cell; returns the JSON-able summary.

    On failure the rows finished so far are still written and the manifest
    carries ``status = "failed"`` before the error propagates.
    """
    out_dir = check_output_dir(out if out is not None else config.out)
    run = _Run(config, jobs, quenched, log, dump)
    started = time.time()
    started_iso = datetime.now(timezone.utc).isoformat()
    status, error = "ok", None
    try:
        if config.process == "theta":
            for lam in config.lambdas:
                run.theta(lam)
        else:
            for d in config.ds:
                for lam in config.lambdas:
                    if config.process in ("contact", "sir", "branching"):
                        run.survival(d, lam)
                    else:
                        getattr(run, config.process)(d, lam)
    except Exception as exc:
        status, error = "failed", f"{type(exc).__name__}: {exc}"
        raise
    finally:
        name = config.process if config.process != "rwalk" else "rwalk-" + config.options.get("mode", "collide")
        csv_path = out_dir / f"{name}.csv"
        write_csv(csv_path, schema_for(config), run.rows)
        files = {"table": csv_path.name}
        if log and config.process in ("contact", "sir", "branching"):
            write_csv(out_dir / f"{name}-replicas.csv", LOG_COLUMNS, run.log)
            files["replica_log"] = f"{name}-replicas.csv"
        if dump and name == "rwalk-bound":
            write_csv(out_dir / f"{name}-records.csv", DUMP_COLUMNS, run.dump)
            files["records"] = f"{name}-records.csv"
        manifest = {
            "status": status,
            "error": error,
            "config": config.echo(),
            "quenched_env_seed": quenched,
            "seeds": run.seeds,
            "versions": _versions(),
            "files": files,
            "summary": run.summary,
            "volatile": {"started": started_iso, "finished": datetime.now(timezone.utc).isoformat(),
                         "wall_time_s": time.time() - started, "jobs": jobs},
        }
        try:
            with open(out_dir / f"{name}-manifest.json", "w", encoding="utf-8") as fh:
                json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
                fh.write("\n")
        except OSError as exc:
            if status == "ok":
                raise IoFailure(f"cannot write manifest: {exc}") from exc
    return {"process": name, "status": status, "out": str(out_dir), "results": run.summary}


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, (np.ndarray, tuple)):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
