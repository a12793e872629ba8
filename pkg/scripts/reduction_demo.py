"""Reduce random measures to m + 1 atoms and report support size and residual."""
import argparse

import numpy as np

from evarkit.measure import DiscreteMeasure, SampleGrid
from evarkit.reduction import MomentSpec, barycenter_reduce, moment_residual, nat_counterexample


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    for _ in range(args.trials):
        n, m = int(rng.integers(5, 51)), int(rng.integers(1, 6))
        g = SampleGrid(np.sort(rng.uniform(-3, 3, n)))
        mu = DiscreteMeasure(g, rng.dirichlet(np.ones(n)))
        spec = MomentSpec.from_measure(mu, np.vstack([g.points**k for k in range(1, m + 1)]))
        nu = barycenter_reduce(mu, spec)
        print(f"n={n:3d} m={m} atoms={len(nu.support)} residual={moment_residual(nu, spec):.2e}")
    d = nat_counterexample(40)
    print(f"countable example: partial sum at N=40 is {d.f0_partial_sums[-1]:g}, "
          f"relaxed membership {d.phi0_relaxed}, strict {d.phi0_strict}")


if __name__ == "__main__":
    main()
