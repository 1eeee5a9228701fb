"""Compare the compiled and pure-Python Dormand-Prince kernels.

Times the bare kernel call and the full trajectory (kernel plus crossing
location and constant evaluation) on the default figure parameters.

Usage: python benchmarks/bench_integrator.py [--periods N] [--repeat R]
"""

import argparse
import math
import timeit

import numpy as np

from dampho import _backend, dynamics
from dampho._dopri_py import FLOW_AA, FLOW_XV
from dampho.dynamics import IntegratorConfig, _time_grid
from dampho.model import FIGURE_PARAMS, ActionAngleState, PhaseState

P = FIGURE_PARAMS


def trajectory(backend, coords, span):
    if coords == "xv":
        return dynamics.integrate_xv(PhaseState(1.0, 0.0), P, span, backend=backend)
    return dynamics.integrate_action_angle(ActionAngleState(0.0, 0.5), P, span,
                                           backend=backend)


def kernel_call(backend, coords, span):
    cfg = IntegratorConfig()
    grid = _time_grid(span, cfg.dense_output_dt)
    flow, y0 = (FLOW_XV, (1.0, 0.0)) if coords == "xv" else (FLOW_AA, (0.0, 0.5))
    max_step = 0.25 * math.pi / math.sqrt(P.omega**2 - P.omega_alpha**2)
    return _backend.get(backend).integrate(flow, y0, grid, P.omega, P.omega_alpha,
                                           cfg.rel_tol, *cfg.abs_tols, max_step)


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--periods", type=int, default=100)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    span = (0.0, 2 * math.pi * args.periods)
    backends = sorted(_backend.available(), key=lambda b: b != "python")
    print(f"{args.periods} periods, best of {args.repeat}")
    print(f"{'flow':<5}{'backend':<9}{'steps':>8}{'kernel [s]':>12}{'x':>7}"
          f"{'full [s]':>11}{'x':>7}")
    for coords in ("xv", "aa"):
        ref = {}
        results = {}
        for b in backends:
            steps = len(kernel_call(b, coords, span)[0])
            tk = best_of(lambda: kernel_call(b, coords, span), args.repeat)
            tf = best_of(lambda: trajectory(b, coords, span), args.repeat)
            ref.setdefault("k", tk)
            ref.setdefault("f", tf)
            results[b] = trajectory(b, coords, span)
            print(f"{coords:<5}{b:<9}{steps:>8}{tk:>12.4f}{ref['k'] / tk:>7.1f}"
                  f"{tf:>11.4f}{ref['f'] / tf:>7.1f}")
        if len(results) == 2:
            same = np.array_equal(results["python"].y, results["cython"].y)
            print(f"{coords:<5}outputs bit-identical across backends: {same}")


if __name__ == "__main__":
    main()
