"""Time the numba kernels against the pure-numpy fallback.

Each mode runs in a fresh interpreter because GENEAPERC_DISABLE_JIT is read
at import time. Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, sys, time
import numpy as np
from geneaperc import kernels, mc
from geneaperc.branching import GrowthBudget, example_law, sample_bgw_tree
from geneaperc.genealogy import complete_tree
from geneaperc.percolation import clusters, percolate

repeat = int(sys.argv[1])
law = example_law()
big = sample_bgw_tree(law, GrowthBudget(17, 10**7), seed=0).tree
cfg = percolate(big, 0.5, seed=1)
plan = mc.ExperimentPlan(model="dac", d=3, grid=(0.25,), replicates=2000, depth=50, seed=0)
binary = complete_tree(2, 16)
keep = np.random.default_rng(2).random(len(binary)) < 0.5
draw = np.random.default_rng(3).random(len(binary))

cases = {
    "grow_bfs (example law, 17 generations)": lambda: sample_bgw_tree(law, GrowthBudget(17, 10**7), seed=0),
    f"cluster_labels ({len(big)} vertices)": lambda: clusters(big, cfg),
    f"propagate_types ({len(binary)} vertices)": lambda: kernels.propagate_types(binary.parent, keep, draw, 3, 0, True, binary.levels),
    "bottleneck_profile (2000 replicates, depth 50)": lambda: mc.simulate(plan),
    "component_size (2000 replicates, depth 30)": lambda: mc.sample_component_sizes(
        mc.ModelSpec("dac", {"p": 0.4, "colors": (1 / 3, 2 / 3), "root_color": 1}), 2, 30, 2000, 0),
}
out = {"jit": kernels.USE_NUMBA, "times": {}}
for name, fn in cases.items():
    fn()  # warm-up, includes compilation
    runs = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        runs.append(time.perf_counter() - t0)
    out["times"][name] = min(runs)
print(json.dumps(out))
"""


def run_mode(disable: bool, repeat: int) -> dict:
    env = {**os.environ, "GENEAPERC_DISABLE_JIT": "1" if disable else "0"}
    res = subprocess.run([sys.executable, "-c", WORKLOAD, str(repeat)], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", metavar="PATH", help="also write the timings as JSON")
    args = ap.parse_args()
    jit = run_mode(False, args.repeat)
    plain = run_mode(True, args.repeat)
    if not jit["jit"]:
        print("warning: numba unavailable, both columns use the fallback", file=sys.stderr)
    width = max(len(k) for k in jit["times"])
    print(f"{'kernel':<{width}}  {'numba [s]':>10}  {'numpy [s]':>10}  {'speedup':>8}")
    for name, t_jit in jit["times"].items():
        t_np = plain["times"][name]
        print(f"{name:<{width}}  {t_jit:>10.4f}  {t_np:>10.4f}  {t_np / t_jit:>7.1f}x")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as f:
            json.dump({"numba": jit["times"], "numpy": plain["times"]}, f, indent=2)


if __name__ == "__main__":
    main()
