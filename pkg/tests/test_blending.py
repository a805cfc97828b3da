"""Smoothness indicator, subcell FV update, and admissibility limiters."""

import numpy as np
import pytest

from lwfr.basis import Basis
from lwfr.blending import (
    element_means,
    inner_low_fluxes,
    limit_face_flux,
    scale_to_admissible,
    smooth_alpha_with_neighbors,
    smoothness_alpha,
)
from lwfr.equations import Euler
from lwfr.mesh import build_geometry, cartesian_map, make_mesh


@pytest.fixture
def eq():
    return Euler()


def _geom(n=4, deg=3, periodic=(True, True)):
    mesh = make_mesh(cartesian_map(0.0, 1.0, 0.0, 1.0), n, n, deg, periodic=periodic)
    return mesh, build_geometry(mesh)


def test_alpha_zero_on_smooth_data(eq):
    mesh, geom = _geom()
    xy = geom.xy
    rho = 1.0 + 0.1 * np.sin(2 * np.pi * xy[..., 0])
    prim = np.stack([rho, 0.2 * rho, np.zeros_like(rho), np.ones_like(rho)], axis=-1)
    a = smoothness_alpha(eq, mesh.basis, eq.conserved(prim))
    assert (a == 0.0).all()


def test_alpha_saturates_on_jump(eq):
    mesh, geom = _geom()
    xy = geom.xy
    rho = np.where(xy[..., 0] > 0.5, 10.0, 1.0)
    prim = np.stack(
        [rho, np.zeros_like(rho), np.zeros_like(rho), rho.copy()], axis=-1
    )
    a = smoothness_alpha(eq, mesh.basis, eq.conserved(prim))
    # elements straddling the jump flag strongly (below 1 only via alpha_max)
    assert a.max() > 0.5


def test_alpha_max_cap(eq):
    mesh, geom = _geom()
    xy = geom.xy
    rho = np.where(xy[..., 0] > 0.5, 10.0, 1.0)
    prim = np.stack([rho, 0 * rho, 0 * rho, rho.copy()], axis=-1)
    a = smoothness_alpha(eq, mesh.basis, eq.conserved(prim), alpha_max=0.002)
    assert a.max() <= 0.002 + 1e-15


def test_alpha_neighbor_smoothing():
    a = np.array([0.0, 1.0, 0.0, 0.0])
    pa = np.array([0, 1, 2])
    pb = np.array([1, 2, 3])
    out = smooth_alpha_with_neighbors(a, pa, pb)
    assert np.allclose(out, [0.5, 1.0, 0.5, 0.0])
    # one sweep only: element 3 sees nothing from element 1
    assert out[3] == 0.0


def test_inner_low_fluxes_antisymmetric_shape(eq):
    mesh, geom = _geom(n=2, deg=3)
    xy = geom.xy
    rho = 1.0 + 0.3 * xy[..., 0]
    prim = np.stack([rho, 0.1 + 0 * rho, -0.2 + 0 * rho, 1.0 + 0 * rho], axis=-1)
    u = eq.conserved(prim)
    g = inner_low_fluxes(eq, geom, u)
    ns = mesh.basis.n
    assert g[0].shape == (4, ns - 1, ns, 4)
    assert g[1].shape == (4, ns - 1, ns, 4)
    # swapping the two states and the normal flips the flux (conservation)
    ua, ub = u[:, :1], u[:, 1:2]
    n = geom.sub_n[0][:, :1]
    nn = np.linalg.norm(n, axis=-1, keepdims=True)
    f1 = eq.rusanov(ua, ub, (n / nn)[..., 0], (n / nn)[..., 1])
    f2 = eq.rusanov(ub, ua, -(n / nn)[..., 0], -(n / nn)[..., 1])
    assert np.abs(f1 + f2).max() < 1e-12


def test_subcell_normal_telescoping(eq):
    # interior subcell normals telescope to the element-face metric terms:
    # the low-order residual of a constant state vanishes on a curved mesh
    from lwfr.blending import low_order_update
    from lwfr.mesh import warped_square_map

    mesh = make_mesh(warped_square_map(3.0), 3, 3, 4)
    geom = build_geometry(mesh)
    u0 = eq.conserved(np.array([1.0, 0.1, -0.2, 10.0]))
    u = np.broadcast_to(u0, geom.xy.shape[:-1] + (4,)).copy()
    inner = inner_low_fluxes(eq, geom, u)
    # element-face fluxes of the constant state, oriented toward +xi/+eta
    fstar = {}
    from lwfr.scheme import face_trace

    f = eq.contravariant_flux(u, geom.Ja)
    for s in range(4):
        fstar[s] = face_trace(f[:, s // 2], s)
    out = low_order_update(mesh.basis, geom, u, 1e-2, inner, fstar)
    assert np.abs(out - u).max() < 1e-11


def test_element_means_weighting(eq):
    mesh, geom = _geom(n=2, deg=2)
    u = np.ones(geom.xy.shape[:-1] + (4,))
    m = element_means(geom, mesh.basis, u)
    assert np.abs(m - 1.0).max() < 1e-14


def test_scale_to_admissible_fixes_negative_pressure(eq):
    mesh, geom = _geom(n=1, deg=2)
    u = np.broadcast_to(
        eq.conserved(np.array([1.0, 0.0, 0.0, 1.0])), geom.xy.shape[:-1] + (4,)
    ).copy()
    u[0, 0, 0] = [0.01, 2.0, 0.0, 0.1]  # negative pressure node
    means = element_means(geom, mesh.basis, u)
    assert eq.is_admissible(means).all()
    fixed = scale_to_admissible(eq, u, means)
    assert eq.is_admissible(fixed).all()
    # mean preserved
    m2 = element_means(geom, mesh.basis, fixed)
    assert np.abs(m2 - means).max() < 1e-12


def test_limit_face_flux_density_floor(eq):
    # manufactured near-vacuum boundary subcell: the limited flux must keep
    # the candidate density at or above relax * low-order value
    relax = 0.1
    ub = eq.conserved(np.array([[1e-3, 0.0, 0.0, 1e-3]]))[None]
    Jb = np.full((1, 1), 1.0)
    g = np.zeros((1, 1, 4))
    w0 = 0.1
    flow = np.zeros((1, 1, 4))
    F = np.zeros((1, 1, 4))
    F[..., 0] = 1.0  # strong mass outflow drives density negative
    dt = 1e-3
    Fl, redo = limit_face_flux(eq, F, flow, dt, minus=(ub, Jb, g, w0), relax=relax)
    assert not redo.any()
    cand = ub - (2.0 * dt / (Jb * w0))[..., None] * (Fl - g)
    low = ub - (2.0 * dt / (Jb * w0))[..., None] * (flow - g)
    assert (cand[..., 0] >= relax * low[..., 0] - 1e-15).all()
    assert eq.is_admissible(cand).all()


def test_limit_face_flux_keeps_admissible_flux(eq):
    # far from vacuum the theta-limit is inactive
    ub = eq.conserved(np.array([[1.0, 0.1, 0.0, 1.0]]))[None]
    Jb = np.full((1, 1), 1.0)
    g = np.zeros((1, 1, 4))
    flow = np.full((1, 1, 4), 0.01)
    F = np.full((1, 1, 4), 0.02)
    Fl, redo = limit_face_flux(eq, F, flow, 1e-4, minus=(ub, Jb, g, 0.5))
    assert not redo.any()
    assert np.abs(Fl - F).max() < 1e-15
