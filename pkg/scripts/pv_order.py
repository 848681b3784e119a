"""Kirchhoff-Routh drift of RK4 point-vortex trajectories against the time step."""

import argparse
import math

from steady_vortex import Disc, GreenOperator, build_domain
from steady_vortex.pointvortex import PointVortexState, pv_integrate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=float, default=2.0)
    ap.add_argument("--dt", type=float, nargs="+", default=[0.08, 0.04, 0.02, 0.01])
    args = ap.parse_args()

    op = GreenOperator(build_domain(Disc((0.0, 0.0), 1.0), 128), "analytic-disc")
    st = PointVortexState.from_arrays([[0.3, 0.1], [-0.2, 0.35], [0.05, -0.4]], [1.0, 0.7, -0.5])
    prev = None
    for dt in args.dt:
        d = pv_integrate(op, st, dt, args.T).drift()
        tail = f"  ratio {prev / d:7.2f}  order {math.log2(prev / d):.3f}" if prev else ""
        print(f"dt {dt:.4f}  drift {d:.3e}{tail}")
        prev = d


if __name__ == "__main__":
    main()
