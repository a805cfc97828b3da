"""Volume kernel, interface flux, lift, and full-step conservation."""

import numpy as np
import pytest

from lwfr import kernels
from lwfr.basis import Basis
from lwfr.blending import element_means
from lwfr.equations import Euler
from lwfr.mesh import (
    build_geometry,
    cartesian_map,
    distorted_box_map,
    make_mesh,
    warped_square_map,
)
from lwfr.scheme import face_trace, lw_numerical_flux, lw_volume, set_face
from lwfr.solver import Solver


@pytest.fixture
def eq():
    return Euler()


def _smooth_state(x, y, eq):
    rho = 1.0 + 0.2 * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y)
    vx = 0.3 + 0.1 * np.cos(2 * np.pi * x)
    vy = -0.2 + 0.1 * np.sin(2 * np.pi * y)
    p = 2.0 + 0.3 * np.cos(2 * np.pi * (x + y))
    return eq.conserved(np.stack([rho, vx, vy, p], axis=-1))


def test_constant_state_gives_constant_update(eq):
    # time-averaged flux of a constant state is the instantaneous flux and
    # the volume divergence vanishes by the metric identity
    mesh = make_mesh(warped_square_map(3.0), 3, 3, 4)
    geom = build_geometry(mesh)
    u0 = eq.conserved(np.array([1.0, 0.1, -0.2, 10.0]))
    u = np.broadcast_to(u0, geom.xy.shape[:-1] + (4,)).copy()
    vol = lw_volume(eq, mesh.basis, geom, u, dt=1e-3)
    assert vol.ok.all()
    assert np.abs(vol.u_loc - u).max() < 1e-11
    assert np.abs(vol.U - u).max() < 1e-13
    f = eq.contravariant_flux(u, geom.Ja)
    assert np.abs(vol.Ftilde - f).max() < 1e-10


def test_time_average_matches_series_on_linear_field(eq):
    # for spatially linear data inside one element the FD-in-time predictions
    # are exact polynomial evaluations; U must equal u + sum dt^k u^(k)/(k+1)!
    mesh = make_mesh(cartesian_map(0.0, 1.0, 0.0, 1.0), 2, 2, 3, periodic=(True, True))
    geom = build_geometry(mesh)
    xy = geom.xy
    u = _smooth_state(xy[..., 0], xy[..., 1], eq)
    # consistency oracle: U - u - (dt/2) u_t = O(dt^2) with u_t = -div f / J,
    # the k=1 term of the series; verify the order by halving dt
    D = mesh.basis.D
    f = eq.contravariant_flux(u, geom.Ja)
    divf = np.einsum("pi,eijv->epjv", D, f[:, 0]) + np.einsum(
        "qj,eijv->eiqv", D, f[:, 1]
    )
    ut = -divf / geom.J[..., None]
    res = []
    for dt in (1e-5, 5e-6):
        vol = lw_volume(eq, mesh.basis, geom, u, dt)
        res.append(np.abs((vol.U - u) - 0.5 * dt * ut).max())
    assert res[0] / res[1] > 3.5


def test_numba_and_numpy_paths_agree(eq, monkeypatch):
    if not kernels.HAVE_NUMBA:
        pytest.skip("numba not available")
    mesh = make_mesh(distorted_box_map(), 3, 3, 3, periodic=(True, True))
    geom = build_geometry(mesh)
    xy = geom.xy
    u = _smooth_state(xy[..., 0], xy[..., 1], eq)
    dt = 2e-3
    fast = lw_volume(eq, mesh.basis, geom, u, dt)
    monkeypatch.setattr(kernels, "HAVE_NUMBA", False)
    ref = lw_volume(eq, mesh.basis, geom, u, dt)
    assert np.abs(fast.Ftilde - ref.Ftilde).max() < 1e-12
    assert np.abs(fast.u_loc - ref.u_loc).max() < 1e-12
    assert (fast.ok == ref.ok).all()


def test_embedded_flux_differs_at_highest_order(eq):
    # u_loc and u_low_order_loc differ by the k=N term only: difference
    # shrinks by ~2^N when dt halves
    mesh = make_mesh(cartesian_map(0.0, 1.0, 0.0, 1.0), 4, 4, 3, periodic=(True, True))
    geom = build_geometry(mesh)
    xy = geom.xy
    u = _smooth_state(xy[..., 0], xy[..., 1], eq)
    d = []
    for dt in (2e-3, 1e-3):
        vol = lw_volume(eq, mesh.basis, geom, u, dt)
        d.append(np.abs(vol.u_loc - vol.u_low_order_loc).max() / dt)
    # remaining factor dt^N with N = 3
    assert d[0] / d[1] > 2.0**2.5


def test_face_trace_set_face_roundtrip():
    a = np.arange(2 * 4 * 4 * 3, dtype=float).reshape(2, 4, 4, 3)
    for side in range(4):
        tr = face_trace(a, side).copy()
        b = np.zeros_like(a)
        set_face(b, side, tr)
        assert np.array_equal(face_trace(b, side), tr)


def test_numerical_flux_central_and_dissipation(eq):
    u = eq.conserved(np.array([[1.0, 0.3, -0.1, 2.0]]))
    F = np.array([[0.5, 1.0, -0.2, 3.0]])
    nu = np.array([[1.0, 0.0]])
    js = np.array([1.0])
    # identical traces: dissipation vanishes, central part is the shared flux
    out = lw_numerical_flux(eq, F, F, u, u, u, u, nu, js)
    assert np.abs(out - F).max() == 0.0
    # jump in U only: flux moves against the jump (dissipative sign)
    U2 = u + 0.01
    out2 = lw_numerical_flux(eq, F, F, u, U2, u, u, nu, js)
    assert (out2 < F).all()


def test_periodic_step_conserves_totals(eq):
    mesh = make_mesh(distorted_box_map(), 4, 4, 3, periodic=(True, True))
    sol = Solver(mesh, eq, blend=True)
    xy = sol.geom.xy
    sol.u = _smooth_state(xy[..., 0], xy[..., 1], eq)
    w = sol.mesh.basis.w
    wj = (w[:, None] * w[None, :])[None] * sol.geom.J
    tot0 = np.einsum("eij,eijv->v", wj, sol.u)
    for _ in range(5):
        r = sol.step(5e-3)
        assert r.ok
        sol.u = r.u_new
    tot1 = np.einsum("eij,eijv->v", wj, sol.u)
    assert np.abs(tot1 - tot0).max() < 1e-13 * np.abs(tot0).max()


def test_high_and_low_updates_share_means(eq):
    # interface fluxes are shared, so per-element means of the blended
    # low-order update and the pure high-order update coincide
    mesh = make_mesh(cartesian_map(-1.0, 1.0, -1.0, 1.0), 4, 4, 4, periodic=(True, True))
    sol = Solver(mesh, eq, blend=True)
    xy = sol.geom.xy
    x, y = xy[..., 0], xy[..., 1]
    B = np.tanh(15 * y + 7.5) - np.tanh(15 * y - 7.5)
    prim = np.stack(
        [0.5 + 0.75 * B, 0.5 * (B - 1.0), 0.1 * np.sin(2 * np.pi * x), np.ones_like(x)],
        axis=-1,
    )
    sol.u = eq.conserved(prim)
    r = sol.step(1e-3, keep_updates=True)
    assert r.ok
    mh = element_means(sol.geom, mesh.basis, r.u_high)
    ml = element_means(sol.geom, mesh.basis, r.u_low)
    assert np.abs(mh - ml).max() < 1e-12 * np.abs(mh).max()


def test_slip_wall_step_conserves_mass_and_energy(eq):
    # walls admit no mass or energy flux; x-momentum feels wall pressure
    from lwfr.bc import SlipWall

    mesh = make_mesh(cartesian_map(0.0, 1.0, 0.0, 1.0), 4, 4, 3, periodic=(False, True))
    sol = Solver(mesh, eq, bcs={"boundary": SlipWall()}, blend=True)
    xy = sol.geom.xy
    sol.u = _smooth_state(xy[..., 0], xy[..., 1], eq)
    w = sol.mesh.basis.w
    wj = (w[:, None] * w[None, :])[None] * sol.geom.J
    tot0 = np.einsum("eij,eijv->v", wj, sol.u)
    for _ in range(4):
        r = sol.step(2e-3)
        assert r.ok
        sol.u = r.u_new
    tot1 = np.einsum("eij,eijv->v", wj, sol.u)
    for v in (0, 2, 3):  # mass, tangential momentum, energy
        assert abs(tot1[v] - tot0[v]) < 1e-12 * max(1.0, abs(tot0[v]))
