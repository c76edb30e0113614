"""Benchmark: compiled kernel core vs the pure-numpy fallback.

Times the per-call kernels at the shapes the policies actually use
(d=8 contexts, 16-wide network, 144x144 gradient design), plus one short
end-to-end neural-policy episode per backend.

Usage: python benchmarks/bench_kernels.py [--episode-steps N]
"""

import argparse
import math
import time

import numpy as np

from mpbandits._kernels import _py

try:
    from mpbandits._kernels import _core
except ImportError:
    _core = None


def timeit(fn, repeat):
    start = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - start) / repeat


def bench_kernels():
    rng = np.random.default_rng(0)
    d, width = 8, 16
    p_total = width * d + width
    weights = [np.ascontiguousarray(rng.normal(size=(width, d))),
               np.ascontiguousarray(rng.normal(size=(1, width)))]
    x = rng.random(d) / math.sqrt(d)
    grad = np.empty(p_total)
    small_inv = np.eye(d)
    big_inv = np.eye(p_total)
    g = rng.normal(size=p_total)
    g /= np.linalg.norm(g) * math.sqrt(width)
    p = rng.random(10)
    allowance = rng.random(10)

    cases = [
        ("sm_update 8x8", lambda impl: impl.sm_update(small_inv, x), 20000),
        ("sm_update 144x144", lambda impl: impl.sm_update(big_inv, g), 2000),
        ("quad_form 144x144", lambda impl: impl.quad_form(big_inv, g), 5000),
        ("mlp_forward d8 w16", lambda impl: impl.mlp_forward(weights, x), 50000),
        ("mlp_grad d8 w16", lambda impl: impl.mlp_grad(weights, x, grad), 50000),
        ("klucb_solve K=10", lambda impl: impl.klucb_solve(p, allowance), 5000),
    ]

    impls = [("python", _py)] + ([("compiled", _core)] if _core else [])
    print(f"{'kernel':22s}" + "".join(f"{name:>14s}" for name, _ in impls)
          + ("       speedup" if _core else ""))
    for label, fn, repeat in cases:
        times = [timeit(lambda impl=impl: fn(impl), repeat) for _, impl in impls]
        row = f"{label:22s}" + "".join(f"{t * 1e6:12.2f}us" for t in times)
        if len(times) == 2 and times[1] > 0:
            row += f"{times[0] / times[1]:12.1f}x"
        print(row)


def bench_episode(steps):
    import os

    print(f"\nend-to-end neural policy episode, S1, T={steps}:")
    results = {}
    for backend, env_flag in [("python", "1"), ("compiled", "")]:
        if backend == "compiled" and _core is None:
            continue
        # backend selection happens at import, so run in a subprocess
        import subprocess
        import sys

        code = (
            "import time; t0=time.perf_counter();"
            "from mpbandits.harness import RunConfig, run_episode;"
            f"run_episode(RunConfig(scenario='S1', policy='nucb', T={steps}, seeds=(1,)), 1);"
            "print(time.perf_counter()-t0)"
        )
        env = dict(os.environ)
        if env_flag:
            env["MPBANDITS_PURE_PYTHON"] = env_flag
        else:
            env.pop("MPBANDITS_PURE_PYTHON", None)
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True, check=True)
        results[backend] = float(out.stdout.strip().splitlines()[-1])
        print(f"  {backend:9s} {results[backend]:7.2f}s")
    if len(results) == 2:
        print(f"  speedup   {results['python'] / results['compiled']:7.1f}x")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--episode-steps", type=int, default=2000)
    args = parser.parse_args()
    if _core is None:
        print("note: compiled core unavailable; timing the fallback only\n")
    bench_kernels()
    bench_episode(args.episode_steps)


if __name__ == "__main__":
    main()
