"""Built-in test problems: meshes, initial data, boundary conditions.

Each setup function returns a Case with everything the driver needs.  Exact
solutions are provided where available so the convergence harness can
measure errors without duplicating formulas.
"""

import numpy as np

from .bc import Dirichlet, Outflow, SlipWall
from .equations import Euler
from .mesh import (
    annulus_map,
    cartesian_map,
    distorted_box_map,
    make_mesh,
    warped_square_map,
)

__all__ = ["Case", "make_case", "CASE_NAMES"]


class Case:
    """Bundle of problem data consumed by the run driver."""

    def __init__(
        self,
        name,
        mesh,
        eq,
        initial,
        bcs=None,
        exact=None,
        final_time=None,
        alpha_max=1.0,
        amr=None,
    ):
        self.name = name
        self.mesh = mesh
        self.eq = eq
        self.initial = initial
        self.bcs = bcs or {}
        self.exact = exact
        self.final_time = final_time
        self.alpha_max = alpha_max
        # (base_level, med_level, max_level, med_threshold, max_threshold)
        self.amr = amr


def _constant_state(prim, eq):
    ref = eq.conserved(np.asarray(prim, dtype=float))

    def fn(x, y):
        return np.broadcast_to(ref, x.shape + (4,)).copy()

    return fn


def free_stream(degree=6, cells=4, mesh_kind="warped_square"):
    """Constant state on curved meshes; the solution must stay constant."""
    eq = Euler()
    prim = (1.0, 0.1, -0.2, 10.0)
    if mesh_kind == "warped_square":
        mapfn = warped_square_map(3.0)
    elif mesh_kind == "distorted_box":
        mapfn = distorted_box_map(3.0, 3.0, 1.0 / 24.0, 1.0 / 24.0)
    else:
        mapfn = cartesian_map(0.0, 3.0, 0.0, 3.0)
    mesh = make_mesh(mapfn, cells, cells, degree)
    ic = _constant_state(prim, eq)
    bc = Dirichlet(lambda x, y, t: ic(x, y))
    return Case(
        "free_stream",
        mesh,
        eq,
        ic,
        bcs={"boundary": bc},
        exact=lambda x, y, t: ic(x, y),
        final_time=10.0,
    )


def isentropic_vortex(degree=3, cells=8):
    """Smooth vortex advecting through a periodic sine-distorted box."""
    eq = Euler()
    gamma, rgas = eq.gamma, 287.15
    t0, p0, mach0, beta, rv = 300.0, 1e5, 0.5, 0.2, 0.005
    lx = ly = 0.1
    u0 = mach0 * np.sqrt(gamma * rgas * t0)
    rho0 = p0 / (rgas * t0)
    cp = gamma * rgas / (gamma - 1.0)

    def exact(x, y, t):
        dx = np.mod(x - 0.5 * lx - u0 * t, lx) - 0.5 * lx
        dy = np.mod(y - 0.5 * ly, ly) - 0.5 * ly
        r2 = (dx * dx + dy * dy) / rv**2
        temp = t0 - (u0 * beta) ** 2 / (2.0 * cp) * np.exp(-r2)
        rho = rho0 * (temp / t0) ** (1.0 / (gamma - 1.0))
        vx = u0 * (1.0 - beta * dy / rv * np.exp(-r2 / 2.0))
        vy = u0 * beta * dx / rv * np.exp(-r2 / 2.0)
        p = rho * rgas * temp
        return eq.conserved(np.stack([rho, vx, vy, p], axis=-1))

    mesh = make_mesh(
        distorted_box_map(lx, ly, 0.1, 0.1), cells, cells, degree, periodic=(True, True)
    )
    return Case(
        "isentropic_vortex",
        mesh,
        eq,
        lambda x, y: exact(x, y, 0.0),
        exact=exact,
        final_time=lx / u0,
    )


def couette(degree=2, cells=8):
    """Steady rotating flow between concentric circles, inner r=1, outer r=4.

    The tangential velocity (16/r - r)/75 balances the prescribed radial
    pressure gradient, so the state is a steady Euler solution; boundaries
    are Dirichlet from the same formulas.
    """
    eq = Euler()

    def exact(x, y, t):
        r = np.sqrt(x * x + y * y)
        vt = (16.0 / r - r) / 75.0
        p = 1.0 + (r * r / 2.0 - 32.0 * np.log(r) - 128.0 / (r * r)) / 75.0**2
        rho = np.ones_like(r)
        return eq.conserved(np.stack([rho, -vt * y / r, vt * x / r, p], axis=-1))

    mesh = make_mesh(annulus_map(1.0, 4.0), cells, cells, degree, periodic=(False, True))
    bc = Dirichlet(exact)
    return Case(
        "couette",
        mesh,
        eq,
        lambda x, y: exact(x, y, 0.0),
        bcs={"boundary": bc},
        exact=exact,
        final_time=1.0,
    )


def m2000_jet(degree=4, cells=64):
    """Mach 2000 astrophysical jet entering a quiescent ambient gas."""
    eq = Euler()
    ambient = eq.conserved(np.array([0.5, 0.0, 0.0, 0.4127]))
    jet = eq.conserved(np.array([5.0, 800.0, 0.0, 0.4127]))

    def inflow(x, y, t):
        out = np.broadcast_to(ambient, x.shape + (4,)).copy()
        out[np.abs(y) <= 0.05] = jet
        return out

    mesh = make_mesh(
        cartesian_map(0.0, 1.0, -0.5, 0.5),
        cells,
        cells,
        degree,
        tag_of=lambda side, x, y: "inflow" if side == "left" else "outflow",
    )
    return Case(
        "m2000_jet",
        mesh,
        eq,
        _constant_state((0.5, 0.0, 0.0, 0.4127), eq),
        bcs={"inflow": Dirichlet(inflow), "outflow": Outflow()},
        final_time=1e-3,
    )


def kelvin_helmholtz(degree=4, cells=16):
    """Periodic shear layer; mild blending cap keeps the smooth rollup clean."""
    eq = Euler()

    def ic(x, y):
        b = np.tanh(15.0 * y + 7.5) - np.tanh(15.0 * y - 7.5)
        rho = 0.5 + 0.75 * b
        vx = 0.5 * (b - 1.0)
        vy = 0.1 * np.sin(2.0 * np.pi * x)
        return eq.conserved(np.stack([rho, vx, vy, np.ones_like(x)], axis=-1))

    mesh = make_mesh(
        cartesian_map(-1.0, 1.0, -1.0, 1.0), cells, cells, degree, periodic=(True, True)
    )
    return Case(
        "kelvin_helmholtz",
        mesh,
        eq,
        ic,
        final_time=3.0,
        alpha_max=0.002,
        amr=(0, 1, 2, 0.0003, 0.003),
    )


def double_mach_reflection(degree=4, nx=16, ny=5):
    """Mach 10 shock at 60 degrees hitting a reflecting wall at y=0, x>1/6."""
    eq = Euler()
    ang = np.pi / 6.0
    post = eq.conserved(
        np.array([8.0, 8.25 * np.cos(ang), -8.25 * np.sin(ang), 116.5])
    )
    pre = eq.conserved(np.array([1.4, 0.0, 0.0, 1.0]))

    def moving(x, y, t):
        behind = x < 1.0 / 6.0 + (y + 20.0 * t) / np.sqrt(3.0)
        out = np.broadcast_to(pre, x.shape + (4,)).copy()
        out[behind] = post
        return out

    def tag_of(side, x, y):
        if side == "left" or side == "top":
            return "inflow"
        if side == "bottom" and x > 1.0 / 6.0:
            return "wall"
        return "outflow"

    mesh = make_mesh(cartesian_map(0.0, 4.0, 0.0, 1.0), nx, ny, degree, tag_of=tag_of)
    return Case(
        "double_mach_reflection",
        mesh,
        eq,
        lambda x, y: moving(x, y, 0.0),
        bcs={"inflow": Dirichlet(moving), "wall": SlipWall(), "outflow": Outflow()},
        final_time=0.2,
        amr=(0, 2, 3, 0.05, 0.1),
    )


def forward_facing_step(degree=4, base=5):
    """Mach 3 channel flow over a step; L-shaped domain from a masked grid."""
    eq = Euler()
    nx, ny = 15 * (base // 5), 5 * (base // 5)
    nx, ny = max(nx, 15), max(ny, 5)

    def active(ix, iy):
        # cells below the step top and right of the corner are excluded
        x0, y1 = 3.0 * ix / nx, 1.0 * (iy + 1) / ny
        return not (x0 >= 0.6 - 1e-12 and y1 <= 0.2 + 1e-12)

    def tag_of(side, x, y):
        if side == "left":
            return "inflow"
        if side == "right" and x > 2.99:
            return "outflow"
        return "wall"

    mesh = make_mesh(
        cartesian_map(0.0, 3.0, 0.0, 1.0), nx, ny, degree, tag_of=tag_of, active=active
    )
    ic = _constant_state((1.4, 3.0, 0.0, 1.0), eq)
    return Case(
        "forward_facing_step",
        mesh,
        eq,
        ic,
        bcs={"inflow": Dirichlet(lambda x, y, t: ic(x, y)), "wall": SlipWall(), "outflow": Outflow()},
        final_time=3.0,
        amr=(0, 1, 2, 0.05, 0.1),
    )


_BUILDERS = {
    "free_stream": free_stream,
    "isentropic_vortex": isentropic_vortex,
    "couette": couette,
    "m2000_jet": m2000_jet,
    "kelvin_helmholtz": kelvin_helmholtz,
    "double_mach_reflection": double_mach_reflection,
    "forward_facing_step": forward_facing_step,
}

CASE_NAMES = sorted(_BUILDERS)


def make_case(name, **kwargs):
    if name not in _BUILDERS:
        raise ValueError(f"unknown case '{name}'; choose from {CASE_NAMES}")
    return _BUILDERS[name](**kwargs)
