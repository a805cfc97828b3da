"""Run driver: config ingestion, the main time loop, and the convergence harness.

The config is a flat INI file; every key has a case-provided default, so a
minimal file only names the case.  The loop owns step acceptance (CFL or
embedded-error PID with redo), AMR callbacks, and the per-step report rows.
"""

import configparser
import math
import os
import time

import numpy as np

from . import amr, output
from .cases import make_case
from .solver import Solver
from .timestep import PIDController, effective_cfl, stable_dt

__all__ = ["RunConfig", "load_config", "run", "convergence", "l2_errors"]

_DT_SEED_CFL = 0.05  # CFL used to seed the first error-mode step


class RunConfig:
    """Typed view of one run configuration file."""

    def __init__(self):
        self.case = None
        self.case_args = {}
        self.degree = None
        self.cells = None
        self.gamma = None
        self.blend = True
        self.alpha_min = 0.001
        self.alpha_max = None
        self.mode = "cfl"
        self.cfl = 0.1
        self.tolE = 1e-6
        self.dt_seed = None
        self.final_time = None
        self.amr_enabled = None
        self.amr_interval = 1
        self.amr_params = None
        self.out_dir = "out"
        self.out_interval = 0


def _getbool(sec, key, default):
    return sec.getboolean(key, fallback=default)


def load_config(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read(path)
    cfg = RunConfig()

    case = cp["case"] if cp.has_section("case") else None
    if case is None or "name" not in case:
        raise ValueError("config must have a [case] section with a 'name' key")
    cfg.case = case["name"]
    cfg.degree = case.getint("degree", fallback=None)
    cfg.cells = case.getint("cells", fallback=None)
    for k in case:
        if k not in ("name", "degree", "cells"):
            cfg.case_args[k] = case.getint(k)

    if cp.has_section("limiter"):
        sec = cp["limiter"]
        cfg.blend = _getbool(sec, "blend", True)
        cfg.alpha_min = sec.getfloat("alpha_min", fallback=0.001)
        cfg.alpha_max = sec.getfloat("alpha_max", fallback=None)

    if cp.has_section("time"):
        sec = cp["time"]
        cfg.mode = sec.get("mode", fallback="cfl").strip().lower()
        cfg.cfl = sec.getfloat("cfl", fallback=0.1)
        cfg.tolE = sec.getfloat("tolE", fallback=1e-6)
        cfg.dt_seed = sec.getfloat("dt_seed", fallback=None)
        cfg.final_time = sec.getfloat("final_time", fallback=None)
    if cfg.mode not in ("cfl", "error"):
        raise ValueError(f"unknown time-stepping mode '{cfg.mode}'")

    if cp.has_section("amr"):
        sec = cp["amr"]
        cfg.amr_enabled = _getbool(sec, "enabled", None)
        cfg.amr_interval = sec.getint("interval", fallback=1)
        keys = ("base_level", "med_level", "max_level")
        if all(k in sec for k in keys):
            cfg.amr_params = (
                sec.getint("base_level"),
                sec.getint("med_level"),
                sec.getint("max_level"),
                sec.getfloat("med_threshold", fallback=0.05),
                sec.getfloat("max_threshold", fallback=0.1),
            )

    if cp.has_section("output"):
        sec = cp["output"]
        cfg.out_dir = sec.get("directory", fallback="out")
        cfg.out_interval = sec.getint("interval", fallback=0)
    return cfg


def build(cfg):
    """Instantiate the case and solver described by a RunConfig."""
    kwargs = dict(cfg.case_args)
    if cfg.degree is not None:
        kwargs["degree"] = cfg.degree
    if cfg.cells is not None:
        kwargs["cells"] = cfg.cells
    case = make_case(cfg.case, **kwargs)
    if cfg.final_time is not None:
        case.final_time = cfg.final_time
    if cfg.alpha_max is not None:
        case.alpha_max = cfg.alpha_max
    if cfg.amr_params is not None:
        case.amr = cfg.amr_params
    solver = Solver(
        case.mesh,
        case.eq,
        bcs=case.bcs,
        blend=cfg.blend,
        alpha_min=cfg.alpha_min,
        alpha_max=case.alpha_max,
        tol_abs=cfg.tolE,
        tol_rel=cfg.tolE,
    )
    solver.set_state(case.initial)
    return case, solver


class RunResult:
    def __init__(self):
        self.status = 0
        self.steps = 0
        self.failed_steps = 0
        self.t = 0.0
        self.wall_time = 0.0
        self.conservation_drift = np.zeros(4)
        self.eff_cfl = []
        self.rows = []
        self.n_elements = 0


def _totals(solver):
    b = solver.mesh.basis
    w2 = (b.w[:, None] * b.w[None, :])[None, :, :, None]
    return np.sum(solver.geom.J[..., None] * w2 * solver.u, axis=(0, 1, 2))


def _adapt_mesh(case, solver, s=None):
    """One refine/coarsen pass driven by the density smoothness indicator."""
    base, med, mx, med_thr, max_thr = case.amr
    ind = amr.lohner_indicator(solver.u[..., 0])
    targets = amr.level_targets(ind, base, med, mx, med_thr, max_thr)
    ref, coa = amr.plan_adaptation(solver.mesh, solver.leaf_ids, targets)
    if not ref and not coa:
        return False
    solver.u = amr.adapt(solver.mesh, solver.leaf_ids, solver.u, ref, coa, solver.eq)
    solver.rebuild()
    return True


def run(cfg, out_dir=None, max_steps=None, summary_path=None, step_hook=None):
    """Execute one configured run; returns a RunResult.

    step_hook(solver, result, accepted) is called after every attempted
    step, for tests that want to watch the loop without re-implementing it.
    """
    case, solver = build(cfg)
    res = RunResult()
    t_final = case.final_time
    t_start = time.time()
    out_dir = cfg.out_dir if out_dir is None else out_dir

    use_amr = case.amr is not None if cfg.amr_enabled is None else cfg.amr_enabled
    if use_amr and case.amr is None:
        raise ValueError(f"case '{case.name}' has no AMR parameter defaults")
    if use_amr:
        # pre-refine the initial condition until the plan is stable
        for _ in range(case.amr[2] + 1):
            if not _adapt_mesh(case, solver):
                break
            solver.set_state(case.initial)
    # baseline after pre-refinement: drift measures the evolution, not the
    # change of quadrature resolution when the initial condition is re-sampled
    totals0 = _totals(solver)

    ctrl = PIDController(solver.mesh.basis.degree + 1)
    if cfg.mode == "error":
        dt = cfg.dt_seed or stable_dt(
            solver.eq, solver.geom, solver.u, solver.mesh.basis.degree, _DT_SEED_CFL
        )
    else:
        dt = None

    snap_id = 0
    while solver.t < t_final * (1.0 - 1e-13):
        if max_steps is not None and res.steps >= max_steps:
            break
        if cfg.mode == "cfl":
            dt = stable_dt(
                solver.eq, solver.geom, solver.u, solver.mesh.basis.degree, cfg.cfl
            )
        dt_try = min(dt, t_final - solver.t)
        if not (dt_try > 1e-14 * t_final):
            res.status = 1
            break

        r = solver.step(dt_try)
        if cfg.mode == "error":
            factor, eps_new = ctrl.factor(r.error_weight)
            accepted = r.ok and ctrl.accepts(factor)
            # on an admissibility failure the controller factor may still be
            # large; cut the step decisively instead
            dt = dt_try * (factor if r.ok else min(factor, 0.5))
        else:
            factor, eps_new = 1.0, None
            accepted = r.ok
            if not accepted:
                res.status = 1  # CFL mode has no redo path

        ecfl = effective_cfl(
            solver.eq, solver.geom, solver.u, solver.mesh.basis.degree, dt_try
        )
        res.rows.append(
            (res.steps, solver.t, dt_try, factor, int(accepted), ecfl)
        )
        res.steps += 1
        if accepted:
            solver.u = r.u_new
            solver.t += dt_try
            res.eff_cfl.append(ecfl)
            if cfg.mode == "error":
                ctrl.push(eps_new)
        else:
            res.failed_steps += 1
            if res.status:
                break
        if step_hook is not None:
            step_hook(solver, r, accepted)
        if accepted and use_amr and res.steps % cfg.amr_interval == 0:
            _adapt_mesh(case, solver)
        if (
            accepted
            and cfg.out_interval
            and out_dir
            and res.steps % cfg.out_interval == 0
        ):
            output.write_snapshot(solver, os.path.join(out_dir, f"snap_{snap_id:05d}"))
            snap_id += 1

    res.t = solver.t
    res.n_elements = solver.n_elements()
    res.wall_time = time.time() - t_start
    tot = _totals(solver)
    # a conserved total that starts at zero (e.g. net transverse momentum) is
    # normalized by the largest total so the drift stays a meaningful ratio
    big = np.abs(totals0).max() + 1e-300
    scale = np.where(np.abs(totals0) > 1e-8 * big, np.abs(totals0), big)
    res.conservation_drift = (tot - totals0) / scale

    if out_dir:
        output.write_snapshot(solver, os.path.join(out_dir, "final"))
        output.write_run_summary(os.path.join(out_dir, "run_summary.csv"), res)
    if summary_path:
        output.write_step_report(summary_path, res.rows)
    return res, solver, case


def l2_errors(solver, exact):
    """Relative L2 error of each conserved variable.

    Uses an oversampled (2N+2)-point Gauss rule per direction; collocated
    GLL quadrature under-samples the error on coarse meshes and skews
    measured convergence rates.
    """
    b = solver.mesh.basis
    N = b.degree
    xg, wg = np.polynomial.legendre.leggauss(2 * N + 2)
    L = b.interp_to(xg)
    uq = np.einsum("pi,qj,eijv->epqv", L, L, solver.u)
    xyq = np.einsum("pi,qj,eijc->epqc", L, L, solver.geom.xy)
    Jq = np.einsum("pi,qj,eij->epq", L, L, solver.geom.J)
    ue = exact(xyq[..., 0], xyq[..., 1], solver.t)
    jw = (Jq * (wg[:, None] * wg[None, :])[None])[..., None]
    num = np.sum(jw * (uq - ue) ** 2, axis=(0, 1, 2))
    den = np.sum(jw * ue**2, axis=(0, 1, 2))
    return np.sqrt(num / den)


def convergence(cfg, levels, out_dir=None):
    """Run the configured case on a sequence of refined meshes.

    Levels double the base resolution each time; returns (cells, errors,
    rates) where rates are least-squares slopes per conserved variable.
    """
    base = cfg.cells or 8
    cells = [base * 2**l for l in range(levels)]
    errs = []
    for m in cells:
        c = _copy_config(cfg)
        c.cells = m
        c.out_interval = 0
        case, solver = build(c)
        t_final = case.final_time
        while solver.t < t_final * (1.0 - 1e-13):
            dt = min(
                stable_dt(solver.eq, solver.geom, solver.u, solver.mesh.basis.degree, c.cfl),
                t_final - solver.t,
            )
            r = solver.step(dt)
            if not r.ok:
                raise RuntimeError(f"inadmissible step in convergence run ({m} cells)")
            solver.u = r.u_new
            solver.t += dt
        if case.exact is None:
            raise ValueError(f"case '{case.name}' has no exact solution")
        errs.append(l2_errors(solver, case.exact))
    errs = np.array(errs)
    logh = np.log(1.0 / np.asarray(cells, dtype=float))
    rates = np.array([np.polyfit(logh, np.log(errs[:, v]), 1)[0] for v in range(4)])
    if out_dir:
        output.write_convergence(out_dir, cells, errs, rates)
    return cells, errs, rates


def _copy_config(cfg):
    c = RunConfig()
    c.__dict__.update(cfg.__dict__)
    c.case_args = dict(cfg.case_args)
    return c
