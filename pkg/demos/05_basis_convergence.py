"""Basis-size convergence harness.

Only the n_max = 8 table is bundled. To show the mechanics this demo builds
smaller tables by truncating it, which is an illustration and not a
physical convergence study; pass real tables with ``--tables`` for that.
"""

from __future__ import annotations

import numpy as np
from _common import parser

from superatom import LeakageTables, convergence_scan, read_tables


def truncated(tab: LeakageTables, n: int) -> LeakageTables:
    return LeakageTables(n, tab.beta[: n + 1, :n].copy(), tab.delta_s_raw[:n].copy(), tab.gamma_s_raw[:n].copy())


def main() -> None:
    ap = parser(__doc__)
    ap.add_argument("--tables", nargs="*", default=[], help="leakage table files for other n_max")
    args = ap.parse_args()
    base = LeakageTables.bundled()
    if args.tables:
        tables = [read_tables(p) for p in args.tables] + [base]
    else:
        tables = [truncated(base, n) for n in (2, 4, 6)] + [base]
    scales = np.linspace(0.5, 3.0, 6)
    res = convergence_scan(tables, scales)
    print("scale " + " ".join(f"n={n:>3}" for n in res.curves))
    for i, s in enumerate(scales):
        print(f"{s:5.2f} " + " ".join(f"{c[i]:5.3f}" for c in res.curves.values()))
    for n, v in res.metric.items():
        print(f"mean |difference| to n_max={res.reference} at n_max={n}: {v:.4f}")


if __name__ == "__main__":
    main()
