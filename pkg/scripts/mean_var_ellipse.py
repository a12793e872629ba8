"""Sweep (alpha, beta) for the mean-variance class and compare the ellipse
test with a windowed grid search and with the LP maximality verdict."""
import argparse

import numpy as np

from evarkit.adversary import MAXIMAL, maximality_check, worst_case_expectation
from evarkit.constraints import builtin_constraints
from evarkit.finite import MeanVarParams, candidate_evar, mean_var_grid_minimum, mean_var_maximal
from evarkit.measure import SampleGrid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--n", type=int, default=11, help="points per axis")
    args = ap.parse_args()

    s = args.sigma
    H = builtin_constraints("mean_var", {"sigma": s}, SampleGrid(s * np.arange(-4, 4.5, 0.5)))
    print(f"{'alpha':>8} {'beta':>8} {'ellipse':>8} {'grid':>8} {'lp':>10}")
    for a in np.linspace(-1.2 / s, 1.2 / s, args.n):
        for b in np.linspace(-0.1, 1.1, args.n):
            p = MeanVarParams(s, a, b)
            ell = mean_var_maximal(p)
            grid_ok = mean_var_grid_minimum(p) >= 0
            lp = "-"
            if b >= 0:
                h = candidate_evar(p.pi(), H)
                if worst_case_expectation(h, H).worst_value <= 1 + 1e-9:
                    lp = "maximal" if maximality_check(h, H).verdict == MAXIMAL else "dominated"
                else:
                    lp = "violated"
            print(f"{a:8.3f} {b:8.3f} {str(ell):>8} {str(grid_ok):>8} {lp:>10}")


if __name__ == "__main__":
    main()
