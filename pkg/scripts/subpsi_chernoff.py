"""Chernoff bound versus the tail of the extremal two-point sub-psi measure."""
import argparse
import math

import numpy as np

from evarkit import subpsi as S


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--psi", choices=["gaussian", "exponential", "gamma"], default="gaussian")
    ap.add_argument("--xmax", type=float, default=3.0)
    args = ap.parse_args()

    psi = {"gaussian": S.gaussian(1.0), "exponential": S.exponential(1.0),
           "gamma": S.gamma(2.0, 0.5)}[args.psi]
    print(f"{'x':>6} {'psi*':>10} {'bound':>12} {'tail':>12} {'ratio':>7}")
    for x in np.linspace(0.25, args.xmax, 12):
        star = S.psi_star(psi, x)
        nu = S.two_point_subpsi(psi, x, 0.5 * math.exp(-star))
        bound, tail = S.chernoff_bound(psi, x), S.tail_probability(nu, x)
        print(f"{x:6.2f} {star:10.4f} {bound:12.4e} {tail:12.4e} {tail / bound:7.3f}")


if __name__ == "__main__":
    main()
