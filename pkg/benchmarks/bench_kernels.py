"""Time the hot kernels with numba and with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--json out.json]

Each backend runs in its own interpreter because the switch is read at import.
Compilation happens in an untimed warm-up call.
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from equicone import NUMBA_ENABLED, OrbitParams, integrate_from_axis
from equicone import kernels
from equicone.geodesic import _gauss01

repeat = int(sys.argv[1])
p = OrbitParams(1, 5)
gx, gw = _gauss01(p)
rng = np.random.default_rng(0)
P = np.cumsum(rng.uniform(0.01, 0.05, size=(256, 2)), axis=0) + 0.1
w = np.linspace(0.0, 1.0, 2000)
q = rng.uniform(0.0, 1.0, 100000)

cases = {
    "integrate (1,5) from v-axis to r=1e3": lambda: integrate_from_axis(p, "v", 1.0, 1e3),
    "polyline length+gradient, 256 nodes x20": lambda: [kernels.polyline_length_grad(P, 1.0, 5.0, gx, gw) for _ in range(20)],
    "trapezoid length, 256 nodes x200": lambda: [kernels.trapezoid_weighted_length(P, 1.0, 5.0) for _ in range(200)],
    "hermite lookup, 1e5 queries": lambda: kernels.hermite_radius_lookup(w, np.sin(w), np.cos(w), q),
}
out = {"numba": NUMBA_ENABLED, "times": {}}
for name, fn in cases.items():
    fn()
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    out["times"][name] = best
print(json.dumps(out))
"""


def run(disable: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("EQUICONE_DISABLE_NUMBA", None)
    if disable:
        env["EQUICONE_DISABLE_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="also write the raw timings here")
    args = ap.parse_args(argv)
    fast = run(False, args.repeat)
    slow = run(True, args.repeat)
    if not fast["numba"]:
        print("numba unavailable; both columns use the fallback")
    width = max(len(k) for k in fast["times"])
    print(f"{'kernel':<{width}}  {'numba [s]':>10}  {'python [s]':>10}  {'speedup':>8}")
    for name, t_fast in fast["times"].items():
        t_slow = slow["times"][name]
        print(f"{name:<{width}}  {t_fast:10.4f}  {t_slow:10.4f}  {t_slow / t_fast:8.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"numba": fast, "python": slow}, fh, indent=2)


if __name__ == "__main__":
    main()
