"""Command-line entry point.

Subcommands:
  solve <config> [--out DIR] [--max-steps K] [--summary CSV]
  convergence <config> --levels L [--out DIR]

Exit code 0 on success; 1 on an inadmissibility abort; 2 on config errors.
Thread count for the underlying BLAS is taken from OMP_NUM_THREADS.
"""

import argparse
import sys

import numpy as np

from . import driver

__all__ = ["main"]


def _build_parser():
    p = argparse.ArgumentParser(prog="lwfr")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="run one configured simulation")
    ps.add_argument("config")
    ps.add_argument("--out", default=None, help="output directory (overrides config)")
    ps.add_argument("--max-steps", type=int, default=None)
    ps.add_argument("--summary", default=None, help="write per-step report CSV here")

    pc = sub.add_parser("convergence", help="mesh-refinement error study")
    pc.add_argument("config")
    pc.add_argument("--levels", type=int, required=True)
    pc.add_argument("--out", default=None, help="output directory (overrides config)")
    return p


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = driver.load_config(args.config)
    except (OSError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "solve":
        try:
            res, _, _ = driver.run(
                cfg,
                out_dir=args.out,
                max_steps=args.max_steps,
                summary_path=args.summary,
            )
        except ValueError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        print(
            f"{cfg.case}: {res.steps} steps ({res.failed_steps} failed), "
            f"t = {res.t:.6g}, {res.n_elements} elements, "
            f"wall {res.wall_time:.1f}s, max drift {np.abs(res.conservation_drift).max():.3e}"
        )
        if res.status:
            print("aborted: inadmissible state / time step underflow", file=sys.stderr)
            return 1
        return 0

    out_dir = args.out or cfg.out_dir
    try:
        cells, errs, rates = driver.convergence(cfg, args.levels, out_dir=out_dir)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    names = ["rho", "rho_vx", "rho_vy", "E"]
    head = "cells " + " ".join(f"{n:>12s}" for n in names)
    print(head)
    for m, row in zip(cells, errs):
        print(f"{m:5d} " + " ".join(f"{v:12.4e}" for v in row))
    print("rates " + " ".join(f"{v:12.3f}" for v in rates))
    return 0


if __name__ == "__main__":
    sys.exit(main())
