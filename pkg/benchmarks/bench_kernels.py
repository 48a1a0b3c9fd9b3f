"""Time the numpy and numba kernel backends on 1D and 2D meshes.

    python benchmarks/bench_kernels.py [--repeat 20] [--sizes 1000 10000]

Also runs one full J/I minimization per backend on a fixed configuration;
the solver is switched by re-importing the package in a subprocess with
DPEIG_NUMBA set, since the backend is chosen at import time.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from dpeig import kernels
from dpeig._backend import HAVE_NUMBA
from dpeig.exponents import exponent_from_spec
from dpeig.mesh import build_interval_mesh, build_rectangle_mesh, random_smooth_function

SOLVE_SNIPPET = """
import time
from dpeig import build_interval_mesh, exponent_from_spec, minimize_rayleigh, SolverOptions
from dpeig import kernels
m = build_interval_mesh(0, 1, 200)
f = [exponent_from_spec(s, m) for s in ("3 + 0.3*sin(3*x)", "1.5", "2.2")]
minimize_rayleigh("J_over_I", *f, opts=SolverOptions(restarts=1))  # warm-up / JIT
t = time.perf_counter()
est = minimize_rayleigh("J_over_I", *f, opts=SolverOptions(restarts=4))
print(kernels.ACTIVE, time.perf_counter() - t, est.lambda_hat)
"""


def _args(mesh):
    specs = ("3 + 0.3*sin(3*x)", "1.5 + 0.1*x", "2.2")
    p1, p2, q = (exponent_from_spec(s, mesh) for s in specs)
    return (np.ascontiguousarray(mesh.elements), np.ascontiguousarray(mesh.dphi),
            np.ascontiguousarray(mesh.phi), np.ascontiguousarray(mesh.weights),
            p1.grid, p2.grid, q.grid)


def bench_mesh(label, mesh, repeat):
    u = random_smooth_function(mesh, np.random.default_rng(0)).values
    args = _args(mesh)
    row = {}
    for name, impl in kernels.BACKENDS.items():
        fn = impl["energies_and_gradients"]
        fn(u, *args, 1e-10, False)  # compile
        t = min(timeit.repeat(lambda: fn(u, *args, 1e-10, False), number=5, repeat=repeat)) / 5
        row[name] = t
    ratio = row["numpy"] / row["numba"]
    print(f"{label:<22} elements={mesh.n_elements:<7} numpy={row['numpy'] * 1e3:8.3f} ms  "
          f"numba={row['numba'] * 1e3:8.3f} ms  speedup={ratio:5.1f}x")


def bench_solver():
    for flag in ("0", "1"):
        env = dict(os.environ, DPEIG_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"minimize_rayleigh 1D/200  backend={out[0]:<6} {float(out[1]):7.3f} s  "
              f"lambda_hat={float(out[2]):.10g}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--sizes", type=int, nargs="+", default=[200, 2000, 20000])
    ap.add_argument("--no-solver", action="store_true", help="skip the end-to-end timing")
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; the 'numba' column runs the same loops uncompiled")
    print("energies_and_gradients, best of repeats")
    for n in args.sizes:
        bench_mesh("interval", build_interval_mesh(0, 1, n), args.repeat)
        side = max(2, int(round((n / 2) ** 0.5)))
        bench_mesh("unit square", build_rectangle_mesh((0, 1), (0, 1), side, side), args.repeat)
    if not args.no_solver:
        bench_solver()


if __name__ == "__main__":
    main()
