"""Sine-squared π pulse on the 20-level superatom model.

Prints the final populations at the experimental operating point, the
dominant doubly-excited channel and where the lost population ends up, then
writes the full trajectory to ``baseline_trajectory.csv``.
"""

from __future__ import annotations

from _common import parser, show

from superatom import PhysicalParams, PulseParams, build_model, dominant_leakage, evolve
from superatom.propagator import write_trajectory


def main() -> None:
    parser(__doc__).parse_args()
    model = build_model(PhysicalParams(T=0.25, sigma=4.6))
    traj = evolve(model, PulseParams(), 0.25)
    p = traj.final_populations
    print("final:", show(p))
    print("dominant leakage:", dominant_leakage(p))
    s = sum(v for k, v in p.items() if k.startswith("S"))
    ladder = sum(v for k, v in p.items() if (k.startswith("R") and k != "R0") or k == "Mth")
    print(f"S total {100 * s:.2f}%, decayed M {100 * p['M']:.2f}%, ladder+Mth {100 * ladder:.2f}%")
    i = traj.populations[:, model.space.r(0)].argmax()
    print(f"R0 peaks at t = {traj.times[i]:.3f} µs with {100 * traj.populations[i, 1]:.2f}%")
    write_trajectory(traj, "baseline_trajectory.csv")


if __name__ == "__main__":
    main()
