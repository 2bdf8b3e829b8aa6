"""Command line front end: `cfisac run ...` and `cfisac compare ...`."""

import argparse
import json
import sys

from .harness import PRESETS, compare_results, run_batch
from .scenario import ScenarioConfig, config_from_dict, load_config, validate_config


def _parse_sweeps(items):
    sweep = {}
    for item in items or []:
        if "=" not in item:
            raise ValueError(f"bad sweep spec {item!r}, expected key=v1,v2,...")
        key, vals = item.split("=", 1)
        key = key.strip()
        parsed = []
        for v in vals.split(","):
            v = v.strip()
            parsed.append(int(v) if v.lstrip("+-").isdigit() else float(v))
        sweep[key] = parsed
    return sweep


def build_parser():
    p = argparse.ArgumentParser(prog="cfisac",
                                description="cell-free ISAC resource-optimization runner")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute an experiment batch")
    run.add_argument("--config", help="scenario JSON file")
    run.add_argument("--algo", default="splitopt",
                     help="splitopt|jointopt|centralized|all (comma list ok)")
    run.add_argument("--seeds", type=int, default=1,
                     help="run seeds 0..N-1")
    run.add_argument("--seed", type=int, action="append",
                     help="explicit seed (repeatable, overrides --seeds)")
    run.add_argument("--sweep", action="append",
                     help="key=v1,v2,... (n_ue, m, n_ap, gamma_db, lambda)")
    run.add_argument("--out", default="out", help="output directory")
    run.add_argument("--preset", choices=sorted(PRESETS),
                     help="predefined experiment grid")

    cmp_ = sub.add_parser("compare", help="compare two results.csv files")
    cmp_.add_argument("results_a")
    cmp_.add_argument("results_b")
    cmp_.add_argument("--sinr-tol-db", type=float, default=1.5)
    cmp_.add_argument("--snr-tol-db", type=float, default=1.5)
    return p


def _resolve_run(args):
    config = load_config(args.config) if args.config else ScenarioConfig()
    sweep = _parse_sweeps(args.sweep)
    algos = args.algo
    if args.preset:
        preset = PRESETS[args.preset]
        base = dict(preset["base"])
        lam = base.pop("lambda", None)
        for k, v in base.items():
            setattr(config, k, v)
        if lam is not None:
            config.solver.admm.lambda_tradeoff = lam
        merged = dict(preset["sweep"])
        merged.update(sweep)        # explicit sweeps override the preset grid
        sweep = merged
        algos = preset["algo"]
    if algos == "all":
        algos = "splitopt,jointopt,centralized"
    algos = [a.strip() for a in algos.split(",") if a.strip()]
    seeds = args.seed if args.seed else list(range(args.seeds))
    return config, algos, sweep, seeds


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "run":
        try:
            config, algos, sweep, seeds = _resolve_run(args)
        except (ValueError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        problems = validate_config(config)
        if problems:
            for v in problems:
                print(f"config violation: {v}", file=sys.stderr)
            return 2
        expected = 1
        for vals in sweep.values():
            expected *= len(vals)
        expected *= len(seeds) * len(algos)
        print(f"running {expected} cells "
              f"({len(algos)} algo(s) x sweep grid x {len(seeds)} seed(s))")
        results = run_batch(config, algos, sweep, seeds, args.out)
        bad = [r for r in results if str(r["status"]).startswith("failed")]
        print(f"wrote {len(results)} rows to {args.out}/results.csv "
              f"({len(bad)} failed cells)")
        return 0
    if args.command == "compare":
        report, summary = compare_results(args.results_a, args.results_b,
                                          args.sinr_tol_db, args.snr_tol_db)
        for row in report:
            print(json.dumps(row))
        print(f"matched={summary['matched']} passed={summary['passed']} "
              f"fraction={summary['pass_fraction']:.3f}")
        return 0 if summary["matched"] and summary["passed"] == summary["matched"] else 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
