"""Compare the front speed measured by time stepping with the minimal speed
from the eigenvalue route, for a few drift amplitudes."""
import argparse
import time

from frontspeed.fields import catalog_defs, sample_fields
from frontspeed.grid import CellSpec, build_grid
from frontspeed.speed import minimal_speed
from frontspeed.verify import SimulationOptions, direct_front_speed


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--field", default="shear_sin")
    ap.add_argument("--nx", type=int, default=8)
    ap.add_argument("--ny", type=int, default=16)
    ap.add_argument("--M", nargs="+", type=float, default=[0.5, 1.0, 2.0])
    ap.add_argument("--T", type=float, default=40.0)
    ap.add_argument("--repeats", type=int, default=120)
    args = ap.parse_args()

    grid = build_grid(CellSpec(nx=args.nx, ny=args.ny))
    fields = sample_fields(grid, catalog_defs(args.field))
    sim = SimulationOptions(T_final=args.T, domain_repeats=args.repeats)
    for M in args.M:
        t0 = time.perf_counter()
        eig = minimal_speed(grid, fields, M, refine=False).c_star
        d = direct_front_speed(grid, fields, M, sim)
        print(f"M = {M:5g}   eigen c* = {eig:.5f}   direct = {d.speed:.5f}   "
              f"gap {abs(d.speed - eig) / eig:.2%}   ({time.perf_counter() - t0:.0f} s)")


if __name__ == "__main__":
    main()
