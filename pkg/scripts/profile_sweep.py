"""Sweep deficiency profiles across a roster of small spaces.

For each space the profile is estimated over k = 1..K and printed as a
compact table: certified lower (when a grid fits), swept upper, and the
construction-backed ceiling where one applies.  The interesting reading is
vertical: a column whose upper stays glued to 2/k is behaving like a pure
averaging system, while a stubborn plateau above 2/k signals structure the
partition route cannot reach.
"""

import argparse
import time

from hullgap.dkprofile import constructive_dk_upper, estimate_dk
from hullgap.errors import ParameterError
from hullgap.spaces import format_space, parse_space

ROSTER = [
    "lp(2,1)",
    "lp(2,2)",
    "lp(1,2)",
    "lp(inf,2)",
    "lp(inf,3)",
    "sup(2, lp(inf,2))",
]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--spaces", nargs="*", default=ROSTER)
    ap.add_argument("--n", type=int, default=2)
    ap.add_argument("--eps", type=float, default=0.2)
    ap.add_argument("--kmax", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ks = tuple(range(1, args.kmax + 1))
    for text in args.spaces:
        space = parse_space(text)
        t0 = time.perf_counter()
        prof = estimate_dk(space, args.n, args.eps, k_range=ks, seed=args.seed)
        try:
            ceil = constructive_dk_upper(space, args.n, args.eps, ks, seed=args.seed)
        except ParameterError:
            ceil = {}
        dt = time.perf_counter() - t0
        print(f"\n{format_space(space)}   n={args.n} eps={args.eps}   ({dt:.1f}s)")
        print(f"  {'k':>2}  {'lower':>10}  {'upper':>10}  {'ceiling':>10}  method")
        for k in ks:
            b = prof.bracket(k)
            low = f"{b.lower:.6f}" if b.lower_method != "none" else "-"
            top = f"{ceil[k]:.6f}" if k in ceil else "-"
            print(
                f"  {k:>2}  {low:>10}  {b.upper:>10.6f}  {top:>10}"
                f"  {b.meta.get('method', '?')}"
            )


if __name__ == "__main__":
    main()
