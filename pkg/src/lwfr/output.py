"""Delimited output and rendered figures.

Snapshots are CSV point clouds (one row per solution node, conserved +
primitive + blending coefficient) with a PNG density rendering next to
them.  Formatting uses %.17g so identical runs produce byte-identical
files.
"""

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "write_snapshot",
    "write_run_summary",
    "write_step_report",
    "write_convergence",
]

_FIELDS = ["x", "y", "rho", "rho_vx", "rho_vy", "E", "vx", "vy", "p", "alpha"]


def _fmt(v):
    return "%.17g" % v


def write_snapshot(solver, path_base):
    """Write <base>.csv (point cloud) and <base>.png (density plot)."""
    os.makedirs(os.path.dirname(path_base) or ".", exist_ok=True)
    xy, u = solver.geom.xy, solver.u
    prim = solver.eq.primitive(u)
    alpha = solver.compute_alpha()
    E = u.shape[0]
    with open(path_base + ".csv", "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(_FIELDS)
        for e in range(E):
            for i in range(xy.shape[1]):
                for j in range(xy.shape[2]):
                    row = (
                        [xy[e, i, j, 0], xy[e, i, j, 1]]
                        + list(u[e, i, j])
                        + list(prim[e, i, j, 1:])
                        + [alpha[e]]
                    )
                    wr.writerow([_fmt(v) for v in row])
    _render_density(solver, path_base + ".png")
    return [path_base + ".csv", path_base + ".png"]


def _render_density(solver, path):
    xy, u = solver.geom.xy, solver.u
    fig, ax = plt.subplots(figsize=(7, 6))
    rho = u[..., 0]
    vmin, vmax = rho.min(), rho.max()
    for e in range(xy.shape[0]):
        ax.pcolormesh(
            xy[e, ..., 0],
            xy[e, ..., 1],
            rho[e],
            vmin=vmin,
            vmax=vmax,
            cmap="viridis",
            shading="gouraud",
            rasterized=True,
        )
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(f"density, t = {solver.t:.6g}, {xy.shape[0]} elements")
    sm = plt.cm.ScalarMappable(cmap="viridis", norm=plt.Normalize(vmin, vmax))
    fig.colorbar(sm, ax=ax)
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)


def write_run_summary(path, res):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(
            [
                "steps",
                "failed_steps",
                "final_time",
                "n_elements",
                "wall_time",
                "drift_rho",
                "drift_rho_vx",
                "drift_rho_vy",
                "drift_E",
            ]
        )
        wr.writerow(
            [res.steps, res.failed_steps, _fmt(res.t), res.n_elements, "%.3f" % res.wall_time]
            + [_fmt(v) for v in res.conservation_drift]
        )


def write_step_report(path, rows):
    """Per-step report: step, t, dt, controller factor, accepted, effective CFL."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["step", "t", "dt", "factor", "accepted", "eff_cfl"])
        for step, t, dt, factor, acc, ecfl in rows:
            wr.writerow([step, _fmt(t), _fmt(dt), _fmt(factor), acc, _fmt(ecfl)])


def write_convergence(out_dir, cells, errs, rates):
    """Error table CSV plus a log-log error-vs-resolution figure."""
    os.makedirs(out_dir, exist_ok=True)
    names = ["rho", "rho_vx", "rho_vy", "E"]
    with open(os.path.join(out_dir, "convergence.csv"), "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["cells"] + [f"err_{n}" for n in names])
        for m, row in zip(cells, errs):
            wr.writerow([m] + [_fmt(v) for v in row])
        wr.writerow(["ls_rate"] + [_fmt(v) for v in rates])
    fig, ax = plt.subplots(figsize=(6, 5))
    h = 1.0 / np.asarray(cells, dtype=float)
    for v, n in enumerate(names):
        ax.loglog(h, errs[:, v], "o-", label=f"{n} (rate {rates[v]:.2f})")
    ax.set_xlabel("h")
    ax.set_ylabel("relative L2 error")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.savefig(os.path.join(out_dir, "convergence.png"), dpi=130, bbox_inches="tight")
    plt.close(fig)
