#!/usr/bin/env python3
"""Sweep the (a, p) gain plane for the one-dimensional dither scheme and
write a CSV performance map (speed of search, asymptotic error, feasibility),
with the tuned gain point evaluated for comparison."""
import argparse

import numpy as np

from esgain.contraction import build_ledger
from esgain.metaopt import solve_strategy3_closed_form
from esgain.sim import performance_map
from esgain.symexpr import Domain1D, parse_expr


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", default="-cos(x) + 0.16666666666666666*x^3",
                    help="objective expression in x")
    ap.add_argument("--a-range", nargs=2, type=float, default=[0.02, 1.0])
    ap.add_argument("--p-range", nargs=2, type=float, default=[0.1, 10.0])
    ap.add_argument("--points", type=int, default=20,
                    help="grid points per axis (log-spaced)")
    ap.add_argument("--horizon", type=int, default=1000,
                    help="horizon in dither periods")
    ap.add_argument("--out", default="perfmap.csv")
    args = ap.parse_args()

    h = parse_expr(args.h)
    a_grid = np.geomspace(args.a_range[0], args.a_range[1], args.points)
    p_grid = np.geomspace(args.p_range[0], args.p_range[1], args.points)
    pm = performance_map(h, a_grid, p_grid, horizon_periods=args.horizon)
    pm.write_csv(args.out)
    n_feasible = int(pm.feasible.sum())
    print(f"wrote {args.out}: {a_grid.size}x{p_grid.size} cells, "
          f"{n_feasible} feasible")

    ledger = build_ledger(h, Domain1D(-1.0, 1.0))
    sol = solve_strategy3_closed_form(ledger, 0.01, 0.01)
    tuned = performance_map(h, np.array([sol.gains["a"]]),
                            np.array([sol.gains["p"]]),
                            horizon_periods=args.horizon)
    print(f"tuned point a={sol.gains['a']:.4f}, p={sol.gains['p']:.4f}: "
          f"speed={tuned.speed[0, 0]:.3e}, error={tuned.error[0, 0]:.4f}, "
          f"feasible={bool(tuned.feasible[0, 0])}")


if __name__ == "__main__":
    main()
