"""Compare the compiled and pure-Python banded LDL^T kernels.

Factors and solves the assembled layer system of the straight guide at
several mesh sizes with each kernel, checks that both produce the same
solution and reports the best of ``--repeat`` wall-clock timings.

    python benchmarks/bench_banded.py --levels 10 20 40 --repeat 3
"""

import argparse
import time

import numpy as np

from waveguide_pml.assembly import SourceSpec, assemble_rhs, assemble_system, build_mesh
from waveguide_pml.cross_section import CrossSection, neumann_eigenpairs
from waveguide_pml.geometry import MetricField
from waveguide_pml.pml import PmlSpec
from waveguide_pml.sparse import BandedLDLT
from waveguide_pml.sparse import _banded_py
from waveguide_pml.sparse import kernel

try:
    from waveguide_pml.sparse import _banded as _banded_c
except ImportError:
    _banded_c = None


def _use(module):
    kernel.ldlt_factor = module.ldlt_factor
    kernel.ldlt_solve = module.ldlt_solve


def _best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run(levels, repeat, R=14.0):
    basis = neumann_eigenpairs(CrossSection(1.0), 8)
    field, spec = MetricField("straight"), PmlSpec(6.0, 2.0, 0.4j)
    kernels = [("python", _banded_py)] + ([("compiled", _banded_c)] if _banded_c else [])
    print(f"{'nx_per_unit':>11} {'unknowns':>9} {'band':>5} " + " ".join(f"{n:>12}" for n, _ in kernels)
          + f" {'speedup':>8} {'max rel diff':>13}")
    for level in levels:
        system = assemble_system(build_mesh(R, level, level), field, spec, 20.0)
        b = assemble_rhs(system, [SourceSpec(1, 3.0, 4.0)], basis)
        times, sols = [], []
        for _, module in kernels:
            _use(module)
            t, x = _best_time(lambda: BandedLDLT(system.A).solve(b), repeat)
            times.append(t)
            sols.append(x)
        diff = np.max(np.abs(sols[-1] - sols[0])) / np.max(np.abs(sols[0]))
        speed = times[0] / times[-1]
        print(f"{level:>11} {system.A.n:>9} {system.A.bandwidth():>5} "
              + " ".join(f"{t:>11.4f}s" for t in times) + f" {speed:>7.1f}x {diff:>13.2e}")
        assert diff < 1e-10, "kernels disagree"
    if _banded_c is None:
        print("compiled kernel not built; only the Python kernel was timed")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--levels", type=int, nargs="+", default=[10, 20, 40])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    run(args.levels, args.repeat)


if __name__ == "__main__":
    main()
