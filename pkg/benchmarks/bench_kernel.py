"""Compare the compiled and pure-Python Dormand-Prince kernels.

Workloads: one Mathieu monodromy period (2x2), the example-system monodromy
(4x4) and a full mismatch evaluation.  Prints median wall time per call and
the max difference between the two backends' results.

    python3 benchmarks/bench_kernel.py [--repeat N]
"""
import argparse
import time

import numpy as np

from embedded_spectra import _backend
from embedded_spectra.floquet import monodromy, periodic_schrodinger
from embedded_spectra.ode import IntegratorConfig
from embedded_spectra.potentials import make_example5
from embedded_spectra.spectral import MatchingConfig, mismatch

LAM0 = -0.2826937105515


def workloads(kernel):
    cfg = IntegratorConfig(kernel=kernel)
    mathieu = periodic_schrodinger(lambda x: 2 * np.cos(2 * x), 1, np.pi, 1.0)
    ex = make_example5(LAM0).potential
    coupled = periodic_schrodinger(ex.Ap, 2, np.pi, LAM0)
    mc = MatchingConfig(integrator=cfg)
    return {
        "mathieu monodromy": lambda: monodromy(mathieu, cfg),
        "example monodromy": lambda: monodromy(coupled, cfg),
        "mismatch (T=15)": lambda: np.array([mismatch(ex, LAM0 + 0.01, None, mc).sigma]),
    }


def timeit(fn, repeat):
    fn()
    ts = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t)
    return float(np.median(ts))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    kernels = sorted(_backend.KERNELS)
    if "cython" not in kernels:
        print("compiled kernel not built; only the Python fallback is available")
    results = {k: workloads(k) for k in kernels}
    print(f"{'workload':<22}" + "".join(f"{k:>12}" for k in kernels) + f"{'speedup':>10}{'max diff':>12}")
    for name in results[kernels[0]]:
        times = {k: timeit(results[k][name], args.repeat) for k in kernels}
        vals = {k: results[k][name]() for k in kernels}
        row = f"{name:<22}" + "".join(f"{times[k] * 1e3:>10.2f}ms" for k in kernels)
        if len(kernels) == 2:
            diff = float(np.max(np.abs(vals["cython"] - vals["python"])))
            row += f"{times['python'] / times['cython']:>9.1f}x{diff:>12.2e}"
        print(row)


if __name__ == "__main__":
    main()
