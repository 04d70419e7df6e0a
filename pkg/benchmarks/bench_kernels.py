"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--n 2000] [--repeat 3]

Both backends are imported directly, so the result does not depend on
DIVBENCH_PURE_PYTHON. Outputs are compared before timing.
"""
import argparse
import timeit

import numpy as np

from divbench import _pykernels, domains

try:
    from divbench import _ckernels
except ImportError:
    _ckernels = None


def workloads(n, rng):
    maze = domains.builtin_maze("medium")
    seg = np.ascontiguousarray(maze.segments)
    genes = rng.uniform(-1, 1, size=(n, 32))
    knights = rng.integers(0, 8, size=(n, 24)).astype(np.int64)
    sx, sy = maze.start
    gx, gy = maze.goal
    paths = [_pykernels.simulate_open_loop(g, seg, sx, sy, 12.0, gx, gy, maze.goal_radius, 1e-6)[0]
             for g in genes[:200]]

    def sim(mod):
        return lambda: [mod.simulate_open_loop(g, seg, sx, sy, 12.0, gx, gy, maze.goal_radius, 1e-6)
                        for g in genes]

    def resample(mod):
        return lambda: [mod.resample_arclength(p, 16, 384.0) for p in paths]

    def knight(mod):
        return lambda: [mod.knights_walk(k, 5) for k in knights]

    return {"maze simulation": (sim, n), "arc-length resample": (resample, len(paths)),
            "knight walk": (knight, n)}


def check_equal(mods, jobs):
    for name, (make, _) in jobs.items():
        outs = [make(m)() for m in mods]
        for a, b in zip(outs[0], outs[1]):
            a = a if isinstance(a, tuple) else (a,)
            b = b if isinstance(b, tuple) else (b,)
            for x, y in zip(a, b):
                if np.asarray(x).tobytes() != np.asarray(y).tobytes():
                    raise SystemExit(f"backends disagree on {name}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    jobs = workloads(args.n, np.random.default_rng(0))
    mods = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    if len(mods) == 2:
        check_equal([m for _, m in mods], jobs)
        print("outputs are bit-identical across backends")
    else:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':<22}" + "".join(f"{name + ' us/call':>18}" for name, _ in mods) + f"{'speedup':>10}")
    for name, (make, calls) in jobs.items():
        per = []
        for _, mod in mods:
            best = min(timeit.repeat(make(mod), number=1, repeat=args.repeat))
            per.append(best / calls * 1e6)
        speed = f"{per[0] / per[1]:10.1f}" if len(per) == 2 else ""
        print(f"{name:<22}" + "".join(f"{v:18.2f}" for v in per) + speed)


if __name__ == "__main__":
    main()
