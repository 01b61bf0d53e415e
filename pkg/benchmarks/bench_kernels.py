"""Time the hot kernels with numba and with the interpreted fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each backend runs in its own interpreter because the switch is read at
import time. The numba figures exclude compilation (one warm-up call).
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from wristsim import _accel, kernels as K, rig as R
from wristsim.stats import wilcoxon_signed_rank

repeat = int(sys.argv[1])

def best(fn, n):
    fn()
    times = []
    for _ in range(n):
        t0 = time.perf_counter(); fn(); times.append(time.perf_counter() - t0)
    return min(times)

rg = R.Rig()
g = rg.gains
program = [R.hold_walls("settle", 0.0, 1.0, g),
           R.gap_ramp("ramp", 0.0, 30.0, 60.0, g, hold_s=1.0),
           R.walls_to("back", 30.0, 0.0, 1.0, g)]

def trial():
    rg.reset(0.0)
    rg.run(program)

steps = sum(rg.steps_for(s.duration_s) for s in program)
rng = np.random.default_rng(0)
x, y = rng.normal(size=20), rng.normal(size=20)
out = {
    "backend": _accel.backend(),
    "rig_trial_s": best(trial, repeat),
    "rig_steps": steps,
    "wilcoxon_n20_s": best(lambda: wilcoxon_signed_rank(x, y), repeat),
}
print(json.dumps(out))
"""


def run(disable: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("WRISTSIM_DISABLE_NUMBA", None)
    if disable:
        env["WRISTSIM_DISABLE_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    fast, slow = run(False, args.repeat), run(True, args.repeat)
    print(f"{'kernel':<22}{fast['backend']:>12}{slow['backend']:>12}{'speedup':>10}")
    for key, label in (("rig_trial_s", f"rig trial ({fast['rig_steps']} steps)"),
                       ("wilcoxon_n20_s", "wilcoxon exact n=20")):
        a, b = fast[key], slow[key]
        print(f"{label:<22}{a * 1e3:>10.3f}ms{b * 1e3:>10.3f}ms{b / a:>9.1f}x")


if __name__ == "__main__":
    main()
