"""Compare the compiled rollout kernel with the numpy fallback.

    python3 benchmarks/bench_rollout.py [--trajectories 20000] [--horizon 60] [--repeats 5]

Both kernels consume the same uniform block, so outputs are also checked for
bit equality.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from adatrpo import _rollout_py, kernels
from adatrpo.geometry import Regularizer
from adatrpo.harness import generate_garnet
from adatrpo.sampler import chunk_uniforms

try:
    from adatrpo import _rollout as compiled
except ImportError:
    compiled = None


def best_of(fn, args, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trajectories", type=int, default=20000)
    ap.add_argument("--horizon", type=int, default=60)
    ap.add_argument("--states", type=int, default=20)
    ap.add_argument("--actions", type=int, default=5)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)

    mdp = generate_garnet(args.states, args.actions, 3, 0, 1)
    reg = Regularizer("entropy", 0.5)
    pi = np.random.default_rng(0).dirichlet(np.ones(args.actions), size=args.states)
    reg_cost = reg.lam * (np.sum(pi * np.log(pi), axis=1) + np.log(args.actions))
    u = chunk_uniforms(0, 0, 0, args.trajectories, kernels.uniform_width(args.horizon))
    call = (u, kernels.sampling_cdf(np.full(args.states, 1 / args.states)),
            kernels.sampling_cdf(pi), kernels.sampling_cdf(mdp.transition),
            np.ascontiguousarray(mdp.cost), reg_cost, mdp.gamma, args.horizon)

    print(f"{args.trajectories} trajectories, T={args.horizon}, S={args.states}, "
          f"A={args.actions}, best of {args.repeats}")
    t_py, out_py = best_of(_rollout_py.simulate_trajectories, call, args.repeats)
    print(f"  numpy fallback : {t_py * 1e3:9.2f} ms")
    if compiled is None:
        print("  compiled kernel: not built")
        return 0
    t_c, out_c = best_of(compiled.simulate_trajectories, call, args.repeats)
    same = all(np.array_equal(a, b) for a, b in zip(out_py, out_c))
    print(f"  compiled kernel: {t_c * 1e3:9.2f} ms")
    print(f"  speedup        : {t_py / t_c:9.2f}x   identical outputs: {same}")
    return 0 if same else 1


if __name__ == "__main__":
    raise SystemExit(main())
