"""Command-line entry point: ``adatrpo {gen,solve,plan,learn,rates,check}``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..geometry import Regularizer
from ..mdp import Mdp, optimal_value
from ..planners import PlannerConfig, uniform_trpo
from .experiment import ExperimentConfig, error_payload, execute, read_csv
from .generators import generate_chain, generate_garnet
from .rates import fit_rate

# flag dest -> ExperimentConfig field; only flags the user actually passed override the file
_OVERRIDES = {
    "geometry": "geometry", "lam": "lam", "schedule": "schedule", "fixed_step": "fixed_step",
    "iterations": "n_iterations", "seeds": "seeds", "mu": "mu", "nu": "nu",
    "output": "output", "support_epsilon": "support_epsilon",
    "check_invariants": "check_invariants", "epsilon": "epsilon", "delta": "delta",
    "m_override": "m_override", "horizon_override": "horizon_override",
    "m_variant": "m_variant", "workers": "workers", "seed_workers": "seed_workers",
    "rate_window": "rate_window", "metric": "metric", "timing": "timing",
    "trajectory_log": "trajectory_log", "vary_mdp_with_seed": "vary_mdp_with_seed",
}


def _dist(text: str):
    if text == "uniform":
        return text
    if text.startswith("point:"):
        return {"point": int(text.split(":", 1)[1])}
    return [float(x) for x in text.split(",")]


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON experiment config; flags below override it")
    p.add_argument("--mdp", help="MDP JSON file")
    p.add_argument("--garnet", nargs=3, type=int, metavar=("S", "A", "B"),
                   help="generate a Garnet MDP instead of reading a file")
    p.add_argument("--chain", type=int, metavar="S", help="generate a chain MDP")
    p.add_argument("--gamma", type=float)
    p.add_argument("--geometry", choices=["euclidean", "entropy"])
    p.add_argument("--lam", type=float)
    p.add_argument("--schedule", choices=["unregularized", "regularized", "fixed"])
    p.add_argument("--fixed-step", type=float)
    p.add_argument("-N", "--iterations", type=int)
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--mu", type=_dist, help="uniform | point:S | comma-separated weights")
    p.add_argument("--nu", type=_dist, help="uniform | point:S | comma-separated weights")
    p.add_argument("-o", "--output")
    p.add_argument("--support-epsilon", type=float)
    p.add_argument("--check-invariants", action="store_true", default=None)
    p.add_argument("--rate-window", type=int, nargs=2)
    p.add_argument("--metric", choices=["linf_gap", "mu_gap", "best_gap"])
    p.add_argument("--timing", action="store_true", default=None,
                   help="fill the wall_ms column (makes CSVs run-dependent)")
    p.add_argument("--vary-mdp-with-seed", action="store_true", default=None)
    p.add_argument("--seed-workers", type=int)


def _build_config(args, algorithm: str | None) -> ExperimentConfig:
    """``algorithm``: "planner" (uniform unless --exact or the config says exact),
    "sample", or None to keep whatever the config file specifies."""
    data = {}
    if args.config:
        data = ExperimentConfig.load(args.config).to_dict()
    if algorithm == "sample":
        data["algorithm"] = "sample"
    elif algorithm == "planner":
        if getattr(args, "exact", False):
            data["algorithm"] = "exact"
        elif data.get("algorithm") not in ("uniform", "exact"):
            data["algorithm"] = "uniform"
    gamma = args.gamma if args.gamma is not None else 0.9
    if args.mdp:
        data["mdp"] = {"file": args.mdp}
    elif args.garnet:
        S, A, B = args.garnet
        data["mdp"] = {"generator": {"kind": "garnet", "n_states": S, "n_actions": A,
                                     "branching": B, "gamma": gamma}}
    elif args.chain:
        data["mdp"] = {"generator": {"kind": "chain", "n_states": args.chain, "gamma": gamma}}
    for dest, key in _OVERRIDES.items():
        val = getattr(args, dest, None)
        if val is not None:
            data[key] = val
    return ExperimentConfig.from_dict(data)


def cmd_gen(args) -> dict:
    if args.kind == "garnet":
        mdp = generate_garnet(args.states, args.actions, args.branching, args.cost_seed,
                              args.transition_seed, args.gamma, args.c_max)
    else:
        mdp = generate_chain(args.states, args.slip, args.gamma)
    if args.output:
        mdp.save(args.output)
        return {"written": args.output, "n_states": mdp.n_states, "n_actions": mdp.n_actions}
    return mdp.to_dict()


def cmd_solve(args) -> dict:
    mdp = Mdp.load(args.mdp)
    v, pi = optimal_value(mdp, Regularizer(args.geometry, args.lam), tol=args.tol)
    return {"value": v.tolist(), "policy": pi.tolist()}


def cmd_run(args, algorithm: str) -> dict:
    res = execute(_build_config(args, algorithm))
    return {"csv": [str(p) for p in res.csv_paths], "summary": str(res.summary_path),
            "rate_fit": res.summary["rate_fit"]}


def cmd_rates(args) -> dict:
    if args.config:
        return cmd_run(args, None)
    paths = sorted(Path(args.runs).glob("run_*.csv")) if Path(args.runs).is_dir() \
        else [Path(args.runs)]
    if not paths:
        raise FileNotFoundError(f"no run_*.csv files under {args.runs}")
    column = args.metric or "linf_gap"
    by_k: dict[int, list[float]] = {}
    for p in paths:
        for row in read_csv(p):
            if row[column] is not None:
                by_k.setdefault(row["k"], []).append(row[column])
    ks = sorted(by_k)
    means = [float(np.mean(by_k[k])) for k in ks]
    window = args.rate_window or [max(1, ks[-1] // 100), ks[-1]]
    fit = fit_rate(means, tuple(window), ks=ks)
    return {"metric": column, "window": list(window), "runs": len(paths), **fit.to_dict()}


def cmd_check(args) -> dict:
    mdp = Mdp.load(args.mdp)
    report = {"mdp": args.mdp, "n_states": mdp.n_states, "n_actions": mdp.n_actions,
              "valid": True, "runs": []}
    for geometry in ("euclidean", "entropy"):
        for lam in (0.0, args.lam):
            cfg = PlannerConfig(args.iterations, Regularizer(geometry, lam),
                                check_invariants=True)
            res = uniform_trpo(mdp, cfg)
            fi = [r.fi_residual for r in res.records if r.fi_residual is not None]
            report["runs"].append({"geometry": geometry, "lam": lam, "ok": True,
                                   "max_fi_residual": max(fi) if fi else None})
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adatrpo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="emit an MDP as JSON")
    g.add_argument("kind", choices=["garnet", "chain"])
    g.add_argument("--states", type=int, required=True)
    g.add_argument("--actions", type=int, default=2)
    g.add_argument("--branching", type=int, default=2)
    g.add_argument("--cost-seed", type=int, default=0)
    g.add_argument("--transition-seed", type=int, default=1)
    g.add_argument("--slip", type=float, default=0.0)
    g.add_argument("--gamma", type=float, default=0.9)
    g.add_argument("--c-max", type=float, default=1.0)
    g.add_argument("-o", "--output")

    s = sub.add_parser("solve", help="regularized optimal value and policy")
    s.add_argument("mdp")
    s.add_argument("--geometry", choices=["euclidean", "entropy"], default="euclidean")
    s.add_argument("--lam", type=float, default=0.0)
    s.add_argument("--tol", type=float, default=1e-12)

    p = sub.add_parser("plan", help="Uniform or Exact TRPO with the true model")
    _add_run_flags(p)
    p.add_argument("--exact", action="store_true", help="restrict updates to the nu-support")

    ln = sub.add_parser("learn", help="sample-based TRPO through a restart model")
    _add_run_flags(ln)
    ln.add_argument("--epsilon", type=float)
    ln.add_argument("--delta", type=float)
    ln.add_argument("--m-override", type=int)
    ln.add_argument("--horizon-override", type=int)
    ln.add_argument("--m-variant", choices=["appendix", "main"])
    ln.add_argument("--workers", type=int)
    ln.add_argument("--trajectory-log", action="store_true", default=None)

    r = sub.add_parser("rates", help="fit log-gap vs log-k from run CSVs or a config")
    r.add_argument("runs", nargs="?", default=".", help="run CSV or directory of run_*.csv")
    _add_run_flags(r)

    c = sub.add_parser("check", help="validate an MDP and run planner invariant checks")
    c.add_argument("mdp")
    c.add_argument("-N", "--iterations", type=int, default=200)
    c.add_argument("--lam", type=float, default=0.5)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            out = cmd_gen(args)
        elif args.command == "solve":
            out = cmd_solve(args)
        elif args.command == "plan":
            out = cmd_run(args, "planner")
        elif args.command == "learn":
            out = cmd_run(args, "sample")
        elif args.command == "rates":
            out = cmd_rates(args)
        else:
            out = cmd_check(args)
    except Exception as exc:  # report every failure as JSON with a nonzero exit
        print(json.dumps(error_payload(exc)), file=sys.stderr)
        return 1
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
