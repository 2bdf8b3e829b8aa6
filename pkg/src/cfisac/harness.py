"""Experiment runner: sweeps, seed batches, deterministic CSV emission."""

import csv
import dataclasses
import json
import os
import concurrent.futures
from pathlib import Path

import numpy as np

from . import centralized as ct
from . import jointopt as jo
from . import splitopt as so
from .channel import gen_comm_channels, sensing_paths
from .fronthaul import Bus, summarize, write_fronthaul_csv, centralized_exchange
from .metrics import metrics_rows
from .scenario import (ScenarioConfig, build_scenario, config_to_dict,
                       scenario_hash, validate_config)

RESULT_COLUMNS = ["scenario_hash", "seed", "algo", "n_ue", "m", "lambda",
                  "gamma_db", "min_sinr_db", "mean_sinr_db", "sens_snr_db",
                  "t_admm", "fronthaul_scalars", "status"]

TRACE_COLUMNS = ["scenario_hash", "seed", "lambda", "t", "gamma",
                 "max_residual", "min_sinr_db", "sens_snr_db", "xi",
                 "solver_iters"]

# sweepable cell parameters -> how they apply
SWEEP_KEYS = ("n_ue", "m", "n_ap", "gamma_db", "lambda", "seed")

PRESETS = {
    "fig2": {
        "algo": "splitopt",
        "base": {"ap_count": 4, "antennas_per_ap": 10, "ue_count": 6},
        "sweep": {"gamma_db": [10, 11, 12, 13, 14, 15, 16], "n_ue": [4, 5, 6]},
    },
    "fig3": {
        "algo": "jointopt",
        "base": {"ap_count": 4, "antennas_per_ap": 10, "ue_count": 6},
        "sweep": {"lambda": [0.3, 0.6, 0.9], "n_ue": [1, 2, 3, 4, 5, 6]},
    },
    "fig3-lowrank": {
        "algo": "jointopt,centralized",
        "base": {"ap_count": 11, "antennas_per_ap": 3, "ue_count": 6,
                 "lambda": 0.3},
        "sweep": {"n_ue": [4, 5, 6]},
    },
    "table1": {
        "algo": "splitopt,jointopt,centralized",
        "base": {"ap_count": 4, "antennas_per_ap": 10, "ue_count": 6},
        "sweep": {},
    },
}


def _apply_cell(config, cell):
    cfg = dataclasses.replace(config)
    cfg.solver = dataclasses.replace(config.solver)
    cfg.solver.admm = dataclasses.replace(config.solver.admm)
    if "n_ue" in cell:
        cfg.ue_count = int(cell["n_ue"])
    if "m" in cell:
        cfg.antennas_per_ap = int(cell["m"])
    if "n_ap" in cell:
        cfg.ap_count = int(cell["n_ap"])
    if "lambda" in cell:
        cfg.solver.admm.lambda_tradeoff = float(cell["lambda"])
    if "seed" in cell:
        cfg.seed = int(cell["seed"])
    return cfg


def run_cell(config, algo, cell):
    """One (scenario, seed, algo) execution; returns result/trace/fronthaul rows."""
    cfg = _apply_cell(config, cell)
    sh = scenario_hash(cfg)
    gamma_db = float(cell.get("gamma_db", 15.0))
    lam = cfg.solver.admm.lambda_tradeoff
    base = {
        "scenario_hash": sh, "seed": cfg.seed, "algo": algo,
        "n_ue": cfg.ue_count, "m": cfg.antennas_per_ap, "lambda": lam,
        "gamma_db": gamma_db if algo == "splitopt" else "",
        "t_admm": "", "fronthaul_scalars": "",
    }
    trace_rows = []
    fh_rows = []
    try:
        geo = build_scenario(cfg)
        channels = gen_comm_channels(geo, cfg)
        paths = sensing_paths(geo, cfg)
        if algo == "splitopt":
            beams, split, link, ledger = so.run_splitopt(
                cfg, geo, channels, gamma_db, paths=paths)
            status = "ok" if split.slack < 1e-6 else "slack"
        elif algo == "jointopt":
            beams, state, link, ledger = jo.run_jointopt(
                cfg, geo, channels, paths=paths)
            base["t_admm"] = state.t
            status = "ok" if state.converged else "not_converged"
            for r in state.trace:
                trace_rows.append({
                    "scenario_hash": sh, "seed": cfg.seed, "lambda": lam,
                    "t": r["t"], "gamma": repr(float(r["gamma"])),
                    "max_residual": repr(float(r["max_residual"])),
                    "min_sinr_db": repr(float(10 * np.log10(max(r["min_sinr"], 1e-30)))),
                    "sens_snr_db": repr(float(10 * np.log10(max(r["sens_snr"], 1e-30)))),
                    "xi": r["xi"],
                    "solver_iters": ";".join(str(v) for v in
                                             r["solver_iters"].values()),
                })
        elif algo == "centralized":
            bus = Bus()
            centralized_exchange(bus, [a for a in geo.tx_set],
                                 cfg.antennas_per_ap, cfg.n_streams)
            beams, floor, link, sca_trace = ct.solve_centralized(
                cfg, geo, channels, paths=paths)
            ledger = bus.ledger
            status = "ok"
        else:
            raise ValueError(f"unknown algo {algo!r}")

        table = summarize(ledger).get(algo, {})
        scal = max(table.values()) if table else 0
        base.update({
            "min_sinr_db": repr(float(link.sinr_db.min())),
            "mean_sinr_db": repr(float(link.sinr_db.mean())),
            "sens_snr_db": repr(float(link.sensing_snr_db())),
            "fronthaul_scalars": scal, "status": status,
        })
        for m in ledger.messages:
            fh_rows.append({"scenario_hash": sh, "seed": cfg.seed, "algo": algo,
                            "ap_id": m.ap_id, "phase": m.phase,
                            "direction": m.direction, "scalars": m.scalar_count,
                            "iteration": m.iteration})
    except Exception as exc:                      # keep the batch going
        base.update({"min_sinr_db": "", "mean_sinr_db": "", "sens_snr_db": "",
                     "status": f"failed:{type(exc).__name__}"})
    return base, trace_rows, fh_rows


def expand_cells(sweep, seeds):
    """Cross product of sweep values and seeds, deterministically ordered."""
    keys = sorted(sweep)
    cells = [{}]
    for k in keys:
        cells = [dict(c, **{k: v}) for c in cells for v in sweep[k]]
    return [dict(c, seed=s) for c in cells for s in seeds]


def run_batch(config, algos, sweep, seeds, out_dir, threads=None):
    """Execute the full grid and write results/trace/fronthaul CSVs + manifest."""
    problems = validate_config(config)
    if problems:
        raise ValueError("invalid config: " + "; ".join(problems))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = expand_cells(sweep, seeds)
    jobs = [(algo, cell) for algo in algos for cell in cells]
    jobs.sort(key=lambda j: (j[0], sorted(j[1].items())))

    threads = threads or int(os.environ.get("CFISAC_THREADS", "1"))
    if threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as ex:
            outputs = list(ex.map(_run_one, [(config, a, c) for a, c in jobs]))
    else:
        outputs = [_run_one((config, a, c)) for a, c in jobs]

    results = [o[0] for o in outputs]
    traces = [r for o in outputs for r in o[1]]
    fh = [r for o in outputs for r in o[2]]
    results.sort(key=lambda r: (r["scenario_hash"], r["algo"], str(r["lambda"]),
                                str(r["gamma_db"]), r["n_ue"], r["seed"]))

    _write_csv(out / "results.csv", RESULT_COLUMNS, results)
    if traces:
        _write_csv(out / "trace.csv", TRACE_COLUMNS, traces)
    if fh:
        _write_csv(out / "fronthaul.csv",
                   ["scenario_hash", "seed", "algo", "ap_id", "phase",
                    "direction", "scalars", "iteration"], fh)
    manifest = {
        "config": config_to_dict(config), "algos": list(algos),
        "sweep": {k: list(v) for k, v in sweep.items()},
        "seeds": list(seeds), "cells": len(jobs),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                  sort_keys=True))
    return results


def _run_one(job):
    config, algo, cell = job
    return run_cell(config, algo, cell)


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for r in rows:
            w.writerow({c: r.get(c, "") for c in columns})


def load_results(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def compare_results(path_a, path_b, sinr_tol_db=1.5, snr_tol_db=1.5):
    """Join two result files on their sweep cell and report metric deltas."""
    rows_a = load_results(path_a)
    rows_b = load_results(path_b)

    def key(r):
        return (r["seed"], r["n_ue"], r["m"], r["lambda"], r["gamma_db"])

    index_b = {key(r): r for r in rows_b}
    report = []
    for ra in rows_a:
        rb = index_b.get(key(ra))
        if rb is None:
            report.append({"key": key(ra), "status": "unmatched"})
            continue
        if not ra["min_sinr_db"] or not rb["min_sinr_db"]:
            report.append({"key": key(ra), "status": "failed-cell"})
            continue
        d_sinr = float(ra["min_sinr_db"]) - float(rb["min_sinr_db"])
        d_snr = float(ra["sens_snr_db"]) - float(rb["sens_snr_db"])
        ok = abs(d_sinr) <= sinr_tol_db and abs(d_snr) <= snr_tol_db
        report.append({"key": key(ra), "delta_min_sinr_db": d_sinr,
                       "delta_sens_snr_db": d_snr,
                       "status": "pass" if ok else "fail"})
    matched = [r for r in report if "delta_min_sinr_db" in r]
    passed = sum(1 for r in matched if r["status"] == "pass")
    summary = {"cells": len(report), "matched": len(matched), "passed": passed,
               "pass_fraction": passed / len(matched) if matched else 0.0}
    return report, summary
