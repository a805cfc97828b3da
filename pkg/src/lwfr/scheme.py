"""Single-stage Lax-Wendroff flux-reconstruction kernels on curved elements.

The volume kernel builds the time-averaged contravariant flux by the
approximate Lax-Wendroff procedure: the k-th time derivative of the flux is
obtained from symmetric finite differences in time of the flux evaluated at
Taylor-predicted states, truncated so that every derivative retains the
accuracy the degree-N scheme needs.  Working quantities are the scaled
derivatives s_k = dt^k u^(k) / k! and G_k = dt^k (d/dt)^k f / k!, so no
power of dt is ever divided back out.
"""

import math

import numpy as np

from . import kernels
from .basis import central_fd_weights

__all__ = [
    "VolumeData",
    "lw_volume",
    "face_trace",
    "set_face",
    "apply_lift",
    "lw_numerical_flux",
]


def _stencils(degree):
    """FD offsets/weights per derivative order k = 1..N (accuracy N+1-k).

    Central stencils only come in even orders, so an odd requirement is
    rounded up; rounding down would lose a full order of convergence.
    """
    out = {}
    for k in range(1, degree + 1):
        need = max(degree + 1 - k, 2)
        out[k] = central_fd_weights(k, need + (need % 2))
    return out


_STENCIL_CACHE = {}


class VolumeData:
    """Element-local results of one Lax-Wendroff volume pass.

    Ftilde: (E, 2, ns, ns, 4) time-averaged contravariant flux.
    U:      (E, ns, ns, 4) time-averaged solution.
    u_loc:  update from the volume divergence of Ftilde only.
    u_low_order_loc: same for the one-order-lower embedded flux.
    ok:     (E,) admissibility of every predicted state used.
    """

    __slots__ = ("Ftilde", "U", "u_loc", "u_low_order_loc", "ok")


def lw_volume(eq, basis, geom, u, dt):
    N = basis.degree
    D = basis.D
    J = geom.J[..., None]
    key = N
    if key not in _STENCIL_CACHE:
        _STENCIL_CACHE[key] = _stencils(N)
    stencils = _STENCIL_CACHE[key]

    def div(G):
        # D applied along each reference direction; tensordot hits BLAS
        a = np.tensordot(G[:, 0], D, axes=(1, 1))
        b = np.tensordot(G[:, 1], D, axes=(2, 1))
        return np.moveaxis(a, -1, 1) + np.moveaxis(b, -1, 2)

    s = [u]
    G = eq.contravariant_flux(u, geom.Ja)
    Fsum = G / 1.0
    Fhat = G.copy() if N >= 1 else G
    U = u.copy()
    ok = np.ones(u.shape[0], dtype=bool)

    E, ns = u.shape[0], basis.n
    ja_flat = np.ascontiguousarray(geom.Ja.reshape(E, 2, ns * ns, 2))
    for k in range(1, N + 1):
        sk = -dt / k * div(G) / J
        s.append(sk)
        U = U + sk / (k + 1.0)
        offs, c = stencils[k]
        if kernels.HAVE_NUMBA:
            sf = np.ascontiguousarray(
                np.stack(s, axis=0).reshape(k + 1, E, ns * ns, 4)
            )
            Gk = np.empty((E, 2, ns, ns, 4))
            okk = np.ones(E, dtype=np.bool_)
            kernels.flux_derivative(
                sf,
                np.asarray(offs, dtype=np.int64),
                np.asarray(c, dtype=np.float64),
                ja_flat,
                eq.gamma,
                1.0 / math.factorial(k),
                Gk.reshape(E, 2, ns * ns, 4),
                okk,
            )
            ok &= okk
        else:
            Gk = None
            for m, cm in zip(offs, c):
                if cm == 0.0:
                    continue
                w = s[0].copy()
                acc = 1.0
                for j in range(1, k + 1):
                    acc *= m
                    if acc != 0.0:
                        w = w + acc * s[j]
                if m != 0:
                    ok &= eq.is_admissible(w).all(axis=(1, 2))
                term = eq.contravariant_flux(w, geom.Ja)
                term *= cm
                Gk = term if Gk is None else Gk + term
            Gk /= float(math.factorial(k))
        G = Gk
        Fsum = Fsum + Gk / (k + 1.0)
        if k <= N - 1:
            Fhat = Fhat + Gk / (k + 1.0)

    out = VolumeData()
    out.Ftilde = Fsum
    out.U = U
    out.u_loc = u - dt * div(Fsum) / J
    out.u_low_order_loc = u - dt * div(Fhat) / J
    out.ok = ok
    return out


def face_trace(arr, side):
    """Trace of an (E, ns, ns, ...) nodal array on one side, index = transverse node."""
    if side == 0:
        return arr[:, 0]
    if side == 1:
        return arr[:, -1]
    if side == 2:
        return arr[:, :, 0]
    return arr[:, :, -1]


def set_face(arr, side, values):
    if side == 0:
        arr[:, 0] = values
    elif side == 1:
        arr[:, -1] = values
    elif side == 2:
        arr[:, :, 0] = values
    else:
        arr[:, :, -1] = values


def lw_numerical_flux(eq, Fm, Fp, Um, Up, um, up, nu, js):
    """Rusanov-type flux for the time-averaged quantities, minus-to-plus.

    Central part averages the contravariant normal flux traces; dissipation
    uses the time-averaged solution traces scaled by the surface Jacobian,
    with the signal speed evaluated from the current-time solution traces.
    """
    lam = eq.wave_speed(um, up, nu[..., 0], nu[..., 1])
    return 0.5 * (Fm + Fp) - 0.5 * (lam * js)[..., None] * (Up - Um)


def apply_lift(u_new, geom, basis, dt, fstar, ftr):
    """Add the flux-reconstruction correction terms to the volume update.

    fstar/ftr: dicts side -> (E, ns, 4) arrays oriented toward +xi/+eta.
    Modifies u_new in place.
    """
    w0 = basis.w[0]
    wN = basis.w[-1]
    for side in range(4):
        sgn = 1.0 if side % 2 else -1.0  # plus side subtracts, minus side adds
        wf = wN if side % 2 else w0
        Jf = face_trace(geom.J, side)
        corr = (dt / (Jf * wf))[..., None] * (fstar[side] - ftr[side])
        if side == 0:
            u_new[:, 0] += corr
        elif side == 1:
            u_new[:, -1] -= corr
        elif side == 2:
            u_new[:, :, 0] += corr
        else:
            u_new[:, :, -1] -= corr
