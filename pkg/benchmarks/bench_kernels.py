"""Compare the numba and pure-numpy integrator backends.

    python benchmarks/bench_kernels.py [--starts 4] [--T 5] [--repeat 3]

Each backend is timed in a fresh interpreter so that ``MAGTORUS_DISABLE_NUMBA``
selects the implementation exactly as it would for a user.  Compilation
time of the numba path is reported separately from steady-state timings.
"""

import argparse
import json
import os
import subprocess
import sys
import time

WORKER = r"""
import json, sys, time
import numpy as np
from magtorus.assembly import magnetic_system
from magtorus.deformation import DEFAULT_DATA, ck_jet, evaluate_trusted, liouville_initial_state
from magtorus.dynamics import IntegratorSettings, _packed, integrate, start_lattice
from magtorus.kernels import ANGLE, kernels

args = json.loads(sys.argv[1])
jet = ck_jet(liouville_initial_state(DEFAULT_DATA, args["N"]), args["K"], args["N"])
sys_ = magnetic_system(evaluate_trusted(jet, 0.01))
C = _packed(sys_)
s, out, buf = np.array([0.3, 0.37, 0.4]), np.empty(3), np.empty(4)

t0 = time.perf_counter()
kernels.rhs(ANGLE, C, s, out, buf)
integrate(sys_, start_lattice()[0], 0.1)
warmup = time.perf_counter() - t0

n = args["rhs_calls"]
best_rhs = float("inf")
for _ in range(args["repeat"]):
    t0 = time.perf_counter()
    for _ in range(n):
        kernels.rhs(ANGLE, C, s, out, buf)
    best_rhs = min(best_rhs, (time.perf_counter() - t0) / n)

starts = start_lattice()[: args["starts"]]
settings = IntegratorSettings(scheme=args["scheme"], tol=1e-10, sample_dt=0.05)
best_traj, steps = float("inf"), 0
for _ in range(args["repeat"]):
    t0 = time.perf_counter()
    steps = sum(integrate(sys_, p, args["T"], settings).stats["accepted"] for p in starts)
    best_traj = min(best_traj, time.perf_counter() - t0)

print(json.dumps({"backend": kernels.name, "warmup_s": warmup, "rhs_us": best_rhs * 1e6,
                  "trajectories_s": best_traj, "steps": steps}))
"""


def run_backend(disable_numba, params):
    env = dict(os.environ, MAGTORUS_DISABLE_NUMBA="1" if disable_numba else "0")
    t0 = time.perf_counter()
    out = subprocess.run([sys.executable, "-c", WORKER, json.dumps(params)], env=env,
                         capture_output=True, text=True, check=True)
    rec = json.loads(out.stdout.strip().splitlines()[-1])
    rec["process_s"] = time.perf_counter() - t0
    return rec


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--starts", type=int, default=4, help="trajectories per timing (default 4)")
    p.add_argument("--T", type=float, default=5.0, help="integration horizon (default 5)")
    p.add_argument("--scheme", choices=("dopri5", "rk4"), default="dopri5")
    p.add_argument("--K", type=int, default=12)
    p.add_argument("--N", type=int, default=64, help="band limit of the fields")
    p.add_argument("--rhs-calls", type=int, default=2000)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--json", action="store_true", help="print raw JSON records")
    args = p.parse_args(argv)
    params = {"starts": args.starts, "T": args.T, "scheme": args.scheme, "K": args.K,
              "N": args.N, "rhs_calls": args.rhs_calls, "repeat": args.repeat}

    rows = [run_backend(False, params), run_backend(True, params)]
    if args.json:
        print(json.dumps(rows, indent=2))
        return 0
    print(f"N={args.N} K={args.K} scheme={args.scheme} starts={args.starts} T={args.T:g}")
    print(f"{'backend':<8} {'warmup s':>9} {'rhs us':>9} {'traj s':>9} {'accepted':>9}")
    for r in rows:
        print(f"{r['backend']:<8} {r['warmup_s']:9.2f} {r['rhs_us']:9.1f} "
              f"{r['trajectories_s']:9.3f} {r['steps']:9d}")
    fast, slow = rows
    if fast["backend"] == "numba":
        print(f"speed-up: rhs x{slow['rhs_us'] / fast['rhs_us']:.1f}, "
              f"trajectories x{slow['trajectories_s'] / fast['trajectories_s']:.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
