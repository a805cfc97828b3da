"""End-to-end acceptance runs.

Each test prints a single "criterion N: PASS/FAIL" line with the measured
numbers, then asserts the stated tolerance.  These are full solver runs and
take considerably longer than the unit suites; the jet and reflection cases
dominate the wall time.
"""

import time

import numpy as np
import pytest

from lwfr import amr
from lwfr.basis import Basis
from lwfr.blending import element_means, inner_low_fluxes, low_order_update
from lwfr.cases import make_case
from lwfr.driver import RunConfig, build, convergence, run
from lwfr.equations import Euler
from lwfr.mesh import (
    annulus_map,
    build_geometry,
    cartesian_map,
    distorted_box_map,
    make_mesh,
    warped_square_map,
)
from lwfr.scheme import face_trace
from lwfr.solver import Solver
from lwfr.timestep import stable_dt


def _report(num, ok, detail):
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}")


def _cfg(**kw):
    cfg = RunConfig()
    cfg.out_dir = None
    for k, v in kw.items():
        setattr(cfg, k, v)
    return cfg


# -- criterion 1: free-stream preservation ----------------------------------


def test_criterion_1_free_stream():
    t0 = time.time()
    eq = Euler()
    ref = eq.conserved(np.array([1.0, 0.1, -0.2, 10.0]))

    def deviation(solver):
        return np.abs(solver.u - ref).max()

    # (a) curved-boundary mesh
    case = make_case("free_stream", degree=6, cells=4, mesh_kind="warped_square")
    solver = Solver(case.mesh, case.eq, bcs=case.bcs)
    solver.set_state(case.initial)
    for _ in range(50):
        dt = stable_dt(solver.eq, solver.geom, solver.u, 6, 0.1)
        r = solver.step(dt)
        assert r.ok
        solver.u = r.u_new
        solver.t += dt
    dev_a = deviation(solver)

    # (b) non-conformal mesh with one refine/coarsen cycle mid-run
    case = make_case("free_stream", degree=6, cells=4, mesh_kind="distorted_box")
    solver = Solver(case.mesh, case.eq, bcs=case.bcs)
    solver.set_state(case.initial)

    def advance(n):
        for _ in range(n):
            dt = stable_dt(solver.eq, solver.geom, solver.u, 6, 0.1)
            r = solver.step(dt)
            assert r.ok
            solver.u = r.u_new
            solver.t += dt

    advance(15)
    parents = list(solver.leaf_ids[:2])
    solver.u = amr.adapt(solver.mesh, solver.leaf_ids, solver.u, parents, [], solver.eq)
    solver.rebuild()
    advance(20)
    solver.u = amr.adapt(solver.mesh, solver.leaf_ids, solver.u, [], parents, solver.eq)
    solver.rebuild()
    advance(15)
    dev_b = deviation(solver)

    wall = time.time() - t0
    ok = dev_a <= 1e-11 and dev_b <= 1e-11 and wall < 10.0
    _report(1, ok, f"deviation warped {dev_a:.2e}, adaptive {dev_b:.2e}, {wall:.1f}s")
    assert dev_a <= 1e-11
    assert dev_b <= 1e-11
    assert wall < 10.0


# -- criterion 2: isentropic vortex convergence ------------------------------


def test_criterion_2_vortex_convergence():
    # Known red: on the 8/16/32 window the vortex core (r_v = 0.005, half an
    # element wide on the coarsest mesh) is below the resolution where the
    # degree-3 approximation space itself converges at design order.  The L2
    # projection of the exact solution -- a lower bound for any numerical
    # error -- measures rates 3.21/3.45/3.48/3.36 on this window, so the 3.7
    # target is unattainable here.  On 16/32/64 the solver reaches 3.8-4.8.
    # See README ("Acceptance status") for the full analysis.
    t0 = time.time()
    cfg = _cfg(case="isentropic_vortex", degree=3, cells=8, cfl=0.2)
    cells, errs, rates = convergence(cfg, 3)
    wall = time.time() - t0
    ok = bool((rates >= 3.7).all()) and wall < 300.0
    _report(2, ok, f"rates {np.round(rates, 2)}, {wall:.0f}s")
    assert wall < 300.0
    assert (rates >= 3.7).all(), (
        "preasymptotic window: projection-error rates on 8/16/32 are below "
        "3.7, so no degree-3 scheme can reach it; see README"
    )


def test_criterion_2_supplement_asymptotic_window():
    # Same vortex on 16/32/64 over a shorter horizon: inside the asymptotic
    # range the measured rates clear the 3.7 target with margin.
    cfg = _cfg(
        case="isentropic_vortex", degree=3, cells=16, cfl=0.2, final_time=None
    )
    cfg.final_time = 0.1 / (0.5 * np.sqrt(1.4 * 287.15 * 300.0)) * 0.2
    cells, errs, rates = convergence(cfg, 3)
    _report("2s", bool((rates >= 3.7).all()), f"rates {np.round(rates, 2)}")
    assert (rates >= 3.7).all()


# -- criterion 3: Couette convergence ----------------------------------------


def test_criterion_3_couette_convergence():
    t0 = time.time()
    details = []
    ok = True
    for deg in (2, 3):
        cfg = _cfg(case="couette", degree=deg, cells=4, cfl=0.2, blend=False)
        cfg.final_time = 1.0
        cells, errs, rates = convergence(cfg, 3)
        details.append(f"N={deg} rates {np.round(rates, 2)}")
        ok = ok and bool((rates >= deg + 0.7).all())
    wall = time.time() - t0
    ok = ok and wall < 300.0
    _report(3, ok, "; ".join(details) + f", {wall:.0f}s")
    assert ok


# -- criterion 4: conservation under adaptive remeshing ----------------------


def test_criterion_4_kelvin_helmholtz_conservation():
    cfg = _cfg(case="kelvin_helmholtz", degree=4, cells=16, cfl=0.2)
    cfg.alpha_max = 0.002
    cfg.amr_enabled = True
    cfg.amr_interval = 1
    res, solver, case = run(cfg, max_steps=200)
    drift = np.abs(res.conservation_drift).max()
    ok = res.status == 0 and drift <= 1e-11
    _report(4, ok, f"max relative drift {drift:.2e} over {res.steps} steps")
    assert res.status == 0
    assert drift <= 1e-11


# -- criteria 5 and 6: Mach-2000 jet -----------------------------------------


@pytest.fixture(scope="module")
def jet_run():
    # seed the controller far below the stability limit: the run must
    # discover the admissible step size on its own, as in production use
    cfg = _cfg(
        case="m2000_jet", degree=4, cells=64, mode="error", tolE=1e-6,
        dt_seed=1e-13,
    )
    stats = {"accepted": 0, "neg_nodal": 0, "mean_gap": []}

    def hook(solver, r, accepted):
        if not accepted:
            return
        stats["accepted"] += 1
        p = solver.eq.pressure(solver.u)
        if solver.u[..., 0].min() <= 0.0 or p.min() <= 0.0:
            stats["neg_nodal"] += 1
        if stats["accepted"] % 50 == 0 and len(stats["mean_gap"]) < 10:
            # re-take a small step keeping both update paths; their
            # element means must agree because they share interface fluxes
            dt = 0.25 * stable_dt(solver.eq, solver.geom, solver.u, 4, 0.05)
            rr = solver.step(dt, keep_updates=True)
            mh = element_means(solver.geom, solver.mesh.basis, rr.u_high)
            ml = element_means(solver.geom, solver.mesh.basis, rr.u_low)
            if np.isfinite(mh).all() and np.isfinite(ml).all():
                gap = np.abs(mh - ml) / np.maximum(1.0, np.abs(mh))
                stats["mean_gap"].append(gap.max())

    res, solver, case = run(cfg, step_hook=hook)
    return res, stats


def test_criterion_5_jet_admissibility(jet_run):
    res, stats = jet_run
    acc = np.asarray(res.eff_cfl)
    grew = acc[-20:].mean() >= 10.0 * acc[:20].mean() if len(acc) >= 40 else False
    ok = (
        res.status == 0
        and res.t >= 1e-3 * (1.0 - 1e-9)
        and stats["neg_nodal"] == 0
        and grew
    )
    _report(
        5,
        ok,
        f"t={res.t:.3e}, {res.steps} steps ({res.failed_steps} rejected), "
        f"negative-state steps {stats['neg_nodal']}, "
        f"eff. CFL {acc[:20].mean():.2e} -> {acc[-20:].mean():.2e}",
    )
    assert res.status == 0
    assert res.t >= 1e-3 * (1.0 - 1e-9)
    assert stats["neg_nodal"] == 0
    assert grew


def test_criterion_6_mean_equivalence(jet_run):
    res, stats = jet_run
    gaps = np.asarray(stats["mean_gap"])
    ok = len(gaps) >= 10 and (gaps <= 1e-12).all()
    worst = gaps.max() if len(gaps) else np.nan
    _report(6, ok, f"{len(gaps)} sampled steps, worst mean gap {worst:.2e}")
    assert len(gaps) >= 10
    assert (gaps <= 1e-12).all()


# -- criterion 7: operator identities ----------------------------------------


def test_criterion_7_operator_suite():
    t0 = time.time()
    rng = np.random.default_rng(7)
    worst = {}

    # quadrature exactness to 2N-1 and derivative exactness to N
    qerr = derr = 0.0
    for deg in range(1, 7):
        b = Basis(deg)
        for k in range(2 * deg):
            exact = (1.0 - (-1.0) ** (k + 1)) / (k + 1)
            qerr = max(qerr, abs(b.w @ b.x**k - exact))
        for k in range(deg + 1):
            dk = b.D @ b.x**k - (k * b.x ** max(k - 1, 0) if k else 0.0)
            derr = max(derr, np.abs(dk).max())
    worst["quadrature"] = qerr
    worst["derivative"] = derr

    # projection/interpolation pair: sum_s P_s V_s = I, and the projected
    # pair of fine-face integrals matches the coarse-face integral
    perr = merr = 0.0
    for deg in (2, 3, 4):
        b = Basis(deg)
        eye = b.P[0] @ b.V[0] + b.P[1] @ b.V[1]
        perr = max(perr, np.abs(eye - np.eye(deg + 1)).max())
        for f0, f1 in (
            (np.ones(deg + 1), np.ones(deg + 1)),
            (rng.normal(size=deg + 1), rng.normal(size=deg + 1)),
        ):
            coarse = b.w @ (b.P[0] @ f0 + b.P[1] @ f1)
            fine = 0.5 * (b.w @ f0 + b.w @ f1)
            merr = max(merr, abs(coarse - fine))
    worst["mortar"] = merr
    worst["partition"] = perr

    # subcell-normal telescoping: a constant state is a fixed point of the
    # first-order subcell update on a warped mesh
    eq = Euler()
    mesh = make_mesh(warped_square_map(3.0), 3, 3, 4)
    geom = build_geometry(mesh)
    u = np.broadcast_to(
        eq.conserved(np.array([1.0, 0.1, -0.2, 10.0])), geom.xy.shape[:-1] + (4,)
    ).copy()
    inner = inner_low_fluxes(eq, geom, u)
    # element-face fluxes of the constant state, oriented toward +xi/+eta
    f = eq.contravariant_flux(u, geom.Ja)
    fstar = {s: face_trace(f[:, s // 2], s) for s in range(4)}
    du = low_order_update(mesh.basis, geom, u, 1e-2, inner, fstar)
    worst["telescoping"] = np.abs(du - u).max()

    # metric identity on every mesh builder
    mres = 0.0
    for mapfn in (
        cartesian_map(0.0, 3.0, 0.0, 3.0),
        warped_square_map(3.0),
        annulus_map(1.0, 4.0),
        distorted_box_map(1.0, 1.0, 0.1, 0.1),
    ):
        g = build_geometry(make_mesh(mapfn, 4, 4, 4))
        mres = max(mres, g.metric_identity_residual())
    worst["metric"] = mres

    wall = time.time() - t0
    # telescoping accumulates a few more rounding steps than the others
    tol = {"telescoping": 1e-11}
    ok = all(v <= tol.get(k, 1e-12) for k, v in worst.items()) and wall < 10.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    _report(7, ok, detail + f", {wall:.1f}s")
    assert ok, worst


# -- criterion 8: time stepping modes on the reflected shock -----------------


def test_criterion_8_stepping_comparison():
    def dmr_cfg(**kw):
        cfg = _cfg(case="double_mach_reflection", degree=4, **kw)
        cfg.case_args = {"nx": 16, "ny": 5}
        cfg.final_time = 0.2
        cfg.amr_enabled = True
        cfg.amr_interval = 1
        return cfg

    res_err, _, _ = run(dmr_cfg(mode="error", tolE=1e-6))
    fail_frac = res_err.failed_steps / max(res_err.steps, 1)

    best = None
    cfl_lines = []
    for cfl in (0.2, 0.4, 0.6):
        r, _, _ = run(dmr_cfg(mode="cfl", cfl=cfl))
        done = r.status == 0 and r.t >= 0.2 * (1.0 - 1e-9)
        cfl_lines.append(f"cfl {cfl}: {r.steps} steps{'' if done else ' (aborted)'}")
        if done and (best is None or r.steps < best):
            best = r.steps

    ok = (
        res_err.status == 0
        and res_err.t >= 0.2 * (1.0 - 1e-9)
        and fail_frac <= 0.01
        and best is not None
        and res_err.steps <= 2 * best
    )
    _report(
        8,
        ok,
        f"error mode {res_err.steps} steps ({100 * fail_frac:.2f}% rejected); "
        + "; ".join(cfl_lines),
    )
    assert res_err.status == 0
    assert fail_frac <= 0.01
    assert best is not None, "no hand-tuned run completed"
    assert res_err.steps <= 2 * best
