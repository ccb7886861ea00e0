"""Effect of a stronger van der Waals coefficient.

Repeats the sine-squared run with C6 values of higher principal quantum
numbers; a larger C6 pushes the doubly excited states further out of
resonance.
"""

from __future__ import annotations

from _common import TWO_PI, parser, show

from superatom import PhysicalParams, high_n_scenarios


def main() -> None:
    parser(__doc__).parse_args()
    cases = [
        ("default", PhysicalParams().c6, 0.25, 4.6),
        ("C6 = 2π·4.62e8", TWO_PI * 4.62e8, 0.5, 4.6),
        ("C6 = 2π·1.55563e11", TWO_PI * 1.55563e11, 0.25, 4.6),
    ]
    for name, c6, T, sigma in cases:
        print(f"{name:>20} (T={T}, σ={sigma}): {show(high_n_scenarios(c6, T, sigma))}")


if __name__ == "__main__":
    main()
