"""Compare the compiled kernels with the numpy fallback.

Times the pruning kernels directly on random vector sets and then runs a few
epochs of exact value iteration end to end under each backend (the backend is
chosen at import, so each end-to-end run is a separate interpreter).

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from dialogpomdp import _pykernels

try:
    from dialogpomdp import _ckernels
except ImportError:
    _ckernels = None

END_TO_END = """
import json, time
from dialogpomdp import kernels
from dialogpomdp.model import tiger85
from dialogpomdp.solvers import SolverConfig, solve_exact_vi
t0 = time.perf_counter()
res = solve_exact_vi(tiger85(), SolverConfig(max_epochs=25))
print(json.dumps({"backend": kernels.BACKEND, "seconds": time.perf_counter() - t0,
                  "vectors": len(res.vector_set)}))
"""


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_cases(rng):
    for n, dim in ((200, 5), (1000, 10), (3000, 40)):
        yield f"pointwise_dominated n={n} |S|={dim}", "pointwise_dominated", (
            np.ascontiguousarray(rng.normal(size=(n, dim))),)
    for k, dim in ((10, 5), (40, 10), (120, 40)):
        kept = np.ascontiguousarray(rng.normal(size=(k, dim)))
        alpha = np.ascontiguousarray(rng.normal(size=dim) + 0.5)
        yield f"witness_lp K={k} |S|={dim}", "witness_lp", (alpha, kept)


def end_to_end(pure: bool):
    env = dict(os.environ, DIALOGPOMDP_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True,
                         text=True, check=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; only the numpy fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<36}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for label, name, inputs in kernel_cases(rng):
        py = best_of(lambda: getattr(_pykernels, name)(*inputs), args.repeat) * 1e3
        if _ckernels is None:
            print(f"{label:<36}{py:>12.3f}{'-':>12}{'-':>10}")
            continue
        cy = best_of(lambda: getattr(_ckernels, name)(*inputs), args.repeat) * 1e3
        print(f"{label:<36}{py:>12.3f}{cy:>12.3f}{py / cy:>9.1f}x")
    print()
    for pure in (True, False):
        r = end_to_end(pure)
        print(f"exact VI on tiger, 25 epochs, {r['backend']:<7} {r['seconds']:.3f}s ({r['vectors']} vectors)")


if __name__ == "__main__":
    main()
