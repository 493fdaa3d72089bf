"""Throughput comparison of the numba and numpy kernel paths.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Times the two hot kernels (batched blob rendering and mixture reward terms)
and one full planner step on both implementations. Run with
DIFFREWARD_NUMBA=0 to confirm the package works end-to-end on the numpy path.
"""

import argparse
import time

import numpy as np

from diffreward import kernels
from diffreward.config import RunConfig
from diffreward.envs import EnvSpec, default_prompts, make_prompt_prior, reset
from diffreward.harness import build_experiment


def _time(fn, repeats):
    fn()  # warm-up (jit compilation on the numba path)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_blobs(repeats):
    rng = np.random.default_rng(0)
    cx = rng.uniform(0, 16, 512)
    cy = rng.uniform(0, 16, 512)
    rows = []
    for name, fn in (("numpy", kernels.blob_images_numpy),
                     ("numba", kernels.blob_images_numba)):
        if fn is None:
            rows.append((name, None))
            continue
        rows.append((name, _time(lambda: fn(cx, cy, 16, 16, 2.0), repeats)))
    return "blob_images (B=512, 16x16)", rows


def bench_reward_terms(repeats):
    rng = np.random.default_rng(1)
    B, D, K = 256, 256, 2
    x0 = rng.uniform(0, 1, (B, D))
    eps0 = rng.standard_normal((B, D))
    s = np.full(B, 0.35)
    v = 1.0 - s**2
    means = rng.uniform(0, 1, (K, D))
    sig2 = np.full(K, 0.05**2)
    logw = np.log(np.full(K, 0.5))
    rows = []
    for name, fn in (("numpy", kernels.gm_reward_terms_numpy),
                     ("numba", kernels.gm_reward_terms_numba)):
        if fn is None:
            rows.append((name, None))
            continue
        rows.append((name, _time(
            lambda: fn(x0, eps0, s, v, means, sig2, logw, 0, 1), repeats)))
    return "gm_reward_terms (B=256, D=256, K=2)", rows


def bench_planner_step(repeats):
    # exercises the full candidate-scoring loop through whichever kernel
    # path was selected at import time
    cfg = RunConfig(episode_length=1)
    exp = build_experiment(cfg)
    state = reset(exp.spec)
    rng = np.random.default_rng(2)

    def step():
        exp.actor.reset()
        exp.actor.act(state, 0, rng)

    return (f"planner step ({kernels.active_backend()} path)",
            [(kernels.active_backend(), _time(step, repeats))])


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()
    print(f"active kernel backend: {kernels.active_backend()}")
    for title, rows in (bench_blobs(args.repeats),
                        bench_reward_terms(args.repeats),
                        bench_planner_step(args.repeats)):
        print(f"\n{title}")
        base = None
        for name, secs in rows:
            if secs is None:
                print(f"  {name:>6}: unavailable")
                continue
            if base is None:
                base = secs
            print(f"  {name:>6}: {secs * 1e3:8.3f} ms   ({base / secs:4.1f}x vs first row)")


if __name__ == "__main__":
    main()
