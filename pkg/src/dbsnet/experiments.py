"""Monte Carlo experiment driver producing the data behind the evaluation figures."""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentSpec
from .constraints import violations
from .orchestrator import Solution, run
from .scenario import compute_cov, generate_users

SCHEMA_VERSION = 1

log = logging.getLogger(__name__)

RATES_COLUMNS = ["run", "user_id", "bs_id", "tau", "rate", "cov_label", "cov", "ecdf", "schema_version"]
COUNTS_COLUMNS = ["cov_label", "cov", "mbs_users_mean", "dbs_users_mean", "std", "runs", "schema_version"]
SWEEP_COLUMNS = ["theta_b", "num_dbs", "total_dbs_rate_mean", "std", "runs", "schema_version"]
RUNS_COLUMNS = ["cov_label", "num_dbs", "theta_b", "run", "cov", "alpha", "utility", "mbs_users",
                "dbs_users", "total_dbs_rate", "median_rate", "feasible", "pso_monotone",
                "outer_monotone", "schema_version"]
ASSOCIATION_COLUMNS = ["user_id", "bs_id", "tau", "y_share", "rate", "schema_version"]


@dataclass(frozen=True)
class Task:
    spec: ExperimentSpec
    cov_label: str
    num_dbs: int
    theta_b: float
    run: int


def run_streams(master_seed: int, run: int):
    """Independent (scenario, algorithm) generators for one Monte Carlo run."""
    scen = np.random.SeedSequence(master_seed, spawn_key=(run, 0))
    algo = np.random.SeedSequence(master_seed, spawn_key=(run, 1))
    return np.random.default_rng(scen), np.random.default_rng(algo)


def solve_task(task: Task, keep_solution: bool = False) -> dict:
    spec = task.spec
    scen_rng, algo_rng = run_streams(spec.master_seed, task.run)
    users = generate_users(spec.preset(task.cov_label).matern, spec.region, spec.p_delay, scen_rng)
    network = spec.network_for(task.theta_b)
    sol = run(users, spec.region, task.num_dbs, spec.environment, spec.algorithm, spec.swarm,
              algo_rng, network)
    tau = np.array([u.tau for u in users])
    problems = violations(sol.association.x, sol.alpha, sol.link, tau, sol.dbs_positions,
                          network.theta_star)
    if problems:
        raise AssertionError(f"infeasible solution for {task}: {problems}")
    bs = sol.serving_bs
    rates = sol.report.per_user_rate
    checkpoints = sol.outer_checkpoints()
    out = {
        "cov_label": task.cov_label, "num_dbs": task.num_dbs, "theta_b": task.theta_b,
        "run": task.run, "cov": compute_cov(users, spec.region),
        "alpha": sol.alpha, "utility": sol.utility,
        "bs_id": bs.tolist(), "tau": tau.tolist(), "rate": rates.tolist(),
        "mbs_users": int(np.sum(bs == 0)), "dbs_users": int(np.sum(bs > 0)),
        "total_dbs_rate": float(rates[bs > 0].sum()),
        "median_rate": float(np.median(rates)),
        "feasible": True,
        "pso_monotone": all(np.all(np.diff(h) >= 0) for h in sol.pso_histories),
        "outer_monotone": bool(np.all(np.diff(checkpoints) >= 0)),
    }
    if keep_solution:
        mbs = (*spec.region.mbs_position, spec.environment.mbs_height)
        out["solution"] = solution_record(sol, users, network, mbs)
    return out


def solution_record(sol: Solution, users, network, mbs_position) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "alpha": sol.alpha,
        "utility": sol.utility,
        "theta_b": network.theta_b,
        "mbs_position": [float(v) for v in mbs_position],
        "dbs_positions": sol.dbs_positions.tolist(),
        "users": [{"id": u.id, "x_m": u.position[0], "y_m": u.position[1], "tau": u.tau,
                   "bs_id": int(b), "y_share": float(sol.report.shares[u.id, b]),
                   "rate": float(sol.report.per_user_rate[u.id])}
                  for u, b in zip(users, sol.serving_bs)],
        "backhaul_rate": sol.link.backhaul_rate.tolist(),
        "backhaul_slack": sol.report.backhaul_slack.tolist(),
        "trace": [{"stage": s, "t_outer": o, "t": t, "utility": u, "alpha": a}
                  for s, o, t, u, a in sol.trace],
        "pso_histories": [list(map(float, h)) for h in sol.pso_histories],
    }


def tasks_for(spec: ExperimentSpec) -> list[Task]:
    return [Task(spec, label, m, tb, r)
            for label in spec.target_cov
            for m in spec.num_dbs
            for tb in spec.theta_b
            for r in range(spec.seeds)]


def _solve_all(spec, tasks, keep_solution=False):
    if spec.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            return list(pool.map(solve_task, tasks, [keep_solution] * len(tasks), chunksize=4))
    return [solve_task(t, keep_solution) for t in tasks]


def _write_csv(path: Path, columns, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) if c != "schema_version" else SCHEMA_VERSION for c in columns])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def run_experiment(spec: ExperimentSpec, output_dir=None) -> list[Path]:
    """Run every Monte Carlo cell of ``spec`` and write its output files.

    Returns the written paths. Outputs depend only on the spec (including its
    master seed), never on wall-clock time or worker scheduling.
    """
    out = Path(output_dir if output_dir is not None else spec.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"cannot write to output directory {out}: {exc}") from exc

    tasks = tasks_for(spec)
    log.info("running %d solves for %s", len(tasks), spec.name)
    results = _solve_all(spec, tasks, keep_solution=spec.name == "single-run")
    written = []

    runs_path = out / "runs.csv"
    _write_csv(runs_path, RUNS_COLUMNS, results)
    written.append(runs_path)

    if spec.name == "rate-cdf":
        rows = []
        for label in spec.target_cov:
            cell = [
                {"run": r["run"], "user_id": i, "bs_id": b, "tau": t, "rate": rate,
                 "cov_label": label, "cov": r["cov"]}
                for r in results if r["cov_label"] == label
                for i, (b, t, rate) in enumerate(zip(r["bs_id"], r["tau"], r["rate"]))]
            cell.sort(key=lambda row: (row["rate"], row["run"], row["user_id"]))
            for k, row in enumerate(cell, 1):
                row["ecdf"] = k / len(cell)
            rows.extend(cell)
        path = out / "rates.csv"
        _write_csv(path, RATES_COLUMNS, rows)
        written.append(path)
    elif spec.name == "association-count":
        rows = []
        for label in spec.target_cov:
            cell = [r for r in results if r["cov_label"] == label]
            dbs = np.array([r["dbs_users"] for r in cell], dtype=float)
            rows.append({"cov_label": label, "cov": float(np.mean([r["cov"] for r in cell])),
                         "mbs_users_mean": float(np.mean([r["mbs_users"] for r in cell])),
                         "dbs_users_mean": float(dbs.mean()), "std": float(dbs.std(ddof=1)) if len(dbs) > 1 else 0.0,
                         "runs": len(cell)})
        path = out / "counts.csv"
        _write_csv(path, COUNTS_COLUMNS, rows)
        written.append(path)
    elif spec.name == "beamwidth-sweep":
        rows = []
        for tb in spec.theta_b:
            for m in spec.num_dbs:
                tot = np.array([r["total_dbs_rate"] for r in results
                                if r["theta_b"] == tb and r["num_dbs"] == m])
                rows.append({"theta_b": tb, "num_dbs": m, "total_dbs_rate_mean": float(tot.mean()),
                             "std": float(tot.std(ddof=1)) if len(tot) > 1 else 0.0, "runs": len(tot)})
        path = out / "sweep.csv"
        _write_csv(path, SWEEP_COLUMNS, rows)
        written.append(path)
    elif spec.name == "single-run":
        for r in results:
            suffix = "" if len(results) == 1 else f"_{r['cov_label']}_m{r['num_dbs']}_tb{r['theta_b']:g}_run{r['run']}"
            sol = r["solution"]
            path = out / f"solution{suffix}.json"
            _write_json(path, {"cov": r["cov"], "cov_label": r["cov_label"], "run": r["run"], **sol})
            written.append(path)
            path = out / f"association{suffix}.csv"
            _write_csv(path, ASSOCIATION_COLUMNS, [
                {"user_id": u["id"], "bs_id": u["bs_id"], "tau": u["tau"], "y_share": u["y_share"],
                 "rate": u["rate"]} for u in sol["users"]])
            written.append(path)

    config_path = out / "config.json"
    _write_json(config_path, {"schema_version": SCHEMA_VERSION, **spec.to_dict()})
    written.append(config_path)
    return written
