"""Wall-clock comparison of the numba and numpy integration backends.

    python benchmarks/bench_backends.py [--preset NAME] [--repeat N]

The numba column excludes the one-off JIT compile, which is reported
separately (it is near zero once the on-disk cache is warm).
"""

import argparse
import statistics
import time

import numpy as np

from privbess.config import PRESET_NAMES, load_scenario
from privbess.engine import run


def _time(sc, backend, repeat):
    times = []
    for _ in range(repeat):
        tic = time.perf_counter()
        tr = run(sc, backend)
        times.append(time.perf_counter() - tic)
    return times, tr


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="attack_privacy", choices=PRESET_NAMES)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    sc = load_scenario(args.preset)

    tic = time.perf_counter()
    run(sc.replace(horizon=sc.step, sample_every=1), "numba")
    compile_s = time.perf_counter() - tic

    rows = {}
    traces = {}
    for backend in ("numba", "numpy"):
        times, traces[backend] = _time(sc, backend, args.repeat)
        rows[backend] = times
    diff = np.max(np.abs(traces["numba"].states - traces["numpy"].states))
    scale = np.max(np.abs(traces["numpy"].states))

    print(f"preset {args.preset}: {sc.n_steps} RK4 steps, state size {traces['numba'].states.shape[1]}")
    print(f"numba first call (compile or cache load): {compile_s:.2f} s")
    print(f"{'backend':<8} {'median s':>10} {'min s':>10}")
    for backend, times in rows.items():
        print(f"{backend:<8} {statistics.median(times):10.4f} {min(times):10.4f}")
    speedup = statistics.median(rows["numpy"]) / statistics.median(rows["numba"])
    print(f"speedup numba vs numpy: {speedup:.1f}x")
    print(f"max |numba - numpy| / max |state| = {diff / scale:.2e}")


if __name__ == "__main__":
    main()
