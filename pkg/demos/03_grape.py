"""Constrained GRAPE seeded with an optimized DRAG pulse.

Runs 50-segment GRAPE with slew and endpoint constraints, then smooths the
result with a Savitzky-Golay filter and re-simulates it. Controls are
written to ``grape_controls.csv``.
"""

from __future__ import annotations

import time

import numpy as np
from _common import TWO_PI, budgets, parser

from superatom import (
    GrapeProblem,
    PhysicalParams,
    PulseParams,
    Shape,
    build_model,
    evolve,
    grape_optimize,
    leak_target,
    optimize_parametrized,
    savitzky_golay,
    write_controls,
)
from superatom.optimizer import initial_from_pulse
from superatom.pulses import samples_from_piecewise


def main() -> None:
    ap = parser(__doc__)
    ap.add_argument("--segments", type=int, default=50)
    args = ap.parse_args()
    de, local = budgets(args.quick)
    T = 0.25
    model = build_model(PhysicalParams(T=T, sigma=4.6))
    drag = optimize_parametrized(Shape.NON_PERTURBATIVE_DRAG, model, None, de, local, args.seed, T=T,
                                 targets=leak_target(model, 3))
    print(f"DRAG guess R0 = {100 * drag.final_populations['R0']:.2f}%")
    prob = GrapeProblem(T, args.segments, initial=initial_from_pulse(drag.pulse, T, args.segments),
                        maxiter=50 if args.quick else 500)
    t0 = time.perf_counter()
    res = grape_optimize(prob, model, seed=args.seed)
    print(f"GRAPE R0 = {100 * res.final_populations['R0']:.2f}% after {res.n_evals} evaluations, "
          f"{time.perf_counter() - t0:.0f} s")
    u = res.pulse.segments
    print(f"max slew {np.max(np.abs(np.diff(u, axis=0))) / TWO_PI:.3f} 2π·MHz per segment, "
          f"violation {prob.violation(u):.1e}")
    smooth = savitzky_golay(res.controls, 7, 3)
    sg = PulseParams(Shape.PIECEWISE_CONSTANT, segments=smooth.channels, edges=prob.edges)
    print(f"after smoothing R0 = {100 * evolve(model, sg, T).final_populations['R0']:.2f}%")
    write_controls(samples_from_piecewise(res.pulse, T), "grape_controls.csv")


if __name__ == "__main__":
    main()
