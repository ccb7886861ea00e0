"""Sweep of pulse duration and ensemble radius, before and after DRAG.

Each cell runs the sine-squared pulse, picks its dominant leakage channel
and optimizes a non-perturbative DRAG pulse against it. Results go to
``sweep.csv``; cells run in a process pool with ``--threads``.
"""

from __future__ import annotations

import numpy as np
from _common import budgets, parser

from superatom import SweepSpec, run_sweep, write_sweep


def main() -> None:
    ap = parser(__doc__)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--grid", type=int, default=3, help="points per axis")
    args = ap.parse_args()
    de, local = budgets(args.quick)
    spec = SweepSpec(tuple(np.linspace(0.1, 0.9, args.grid)), tuple(np.linspace(3.0, 5.4, args.grid)),
                     seed=args.seed, de=de, local=local)
    cells = run_sweep(spec, args.threads)
    print(f"{'T':>5} {'sigma':>5} {'leak':>4} {'R0 sin2':>8} {'R0 DRAG':>8} {'M sin2':>7} {'M DRAG':>7}")
    for c in cells:
        if c.failed:
            print(f"{c.T:5.2f} {c.sigma:5.2f} failed: {c.error}")
            continue
        a, b = c.populations["SineSquared"], c.populations["NonPerturbativeDrag"]
        print(f"{c.T:5.2f} {c.sigma:5.2f} {c.dominant:>4} {100 * a['R0']:8.2f} {100 * b['R0']:8.2f} "
              f"{100 * a['M']:7.2f} {100 * b['M']:7.2f}")
    write_sweep(cells, "sweep.csv")


if __name__ == "__main__":
    main()
