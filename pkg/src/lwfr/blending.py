"""Subcell finite-volume blending and admissibility enforcement.

A modal smoothness indicator on rho*p picks a per-element blending
coefficient alpha; troubled elements mix the high-order update with a
first-order finite-volume update on the GLL subcells.  Interface fluxes are
shared by both updates, so element means of the two agree to round-off.
Face fluxes are additionally theta-limited toward the first-order flux so
that the boundary-subcell updates stay admissible, and a Zhang-Shu-type
scaling limiter enforces nodal positivity about the (admissible) element
mean.
"""

import numpy as np

__all__ = [
    "smoothness_alpha",
    "smooth_alpha_with_neighbors",
    "inner_low_fluxes",
    "low_order_update",
    "limit_face_flux",
    "element_means",
    "scale_to_admissible",
]

ALPHA_SHARPNESS = 9.21024  # log(1/0.0001 - 1): alpha(E=0) == 0.0001


def smoothness_alpha(
    eq,
    basis,
    u,
    alpha_min=0.001,
    alpha_max=1.0,
    amplitude=0.5,
    decay=1.8,
    threshold_exponent=0.25,
):
    """Per-element blending coefficient from the modal energy of rho*p."""
    N = basis.degree
    q = u[..., 0] * eq.pressure(u)
    A = (basis.VL * basis.w[:, None]).T  # A[p, i] = L_p(x_i) w_i
    qh = np.einsum("pi,eij,qj->epq", A, q, A)
    e2 = qh * qh
    cum = np.cumsum(np.cumsum(e2, axis=1), axis=2)
    total = cum[:, -1, -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(total > 0, (total - cum[:, -2, -2]) / total, 0.0)
        ind = r1
        if N >= 2:
            sub = cum[:, -2, -2]
            r2 = np.where(sub > 0, (sub - cum[:, -3, -3]) / sub, 0.0)
            ind = np.maximum(r1, r2)
    T = amplitude * 10.0 ** (-decay * (N + 1.0) ** threshold_exponent)
    alpha = 1.0 / (1.0 + np.exp(-ALPHA_SHARPNESS / T * (ind - T)))
    alpha[alpha < alpha_min] = 0.0
    alpha[alpha > 1.0 - alpha_min] = 1.0
    return np.minimum(alpha, alpha_max)


def smooth_alpha_with_neighbors(alpha, pair_a, pair_b):
    """One sweep of alpha_e = max(alpha_e, alpha_neighbor / 2) over face pairs."""
    out = alpha.copy()
    if len(pair_a):
        np.maximum.at(out, pair_a, 0.5 * alpha[pair_b])
        np.maximum.at(out, pair_b, 0.5 * alpha[pair_a])
    return out


def inner_low_fluxes(eq, geom, u):
    """First-order Rusanov fluxes on interior subcell faces, per direction.

    Returns [G0, G1], each (E, N, ns, 4) with axes (element, along, transverse),
    oriented toward increasing coordinate and scaled by the subcell normal.
    """
    out = []
    for d in range(2):
        ua = u if d == 0 else np.swapaxes(u, 1, 2)
        n = geom.sub_n[d]
        nn = np.linalg.norm(n, axis=-1)
        nu = n / nn[..., None]
        g = eq.rusanov(ua[:, :-1], ua[:, 1:], nu[..., 0], nu[..., 1])
        out.append(nn[..., None] * g)
    return out


def low_order_update(basis, geom, u, dt, inner, fstar):
    """First-order subcell FV update using blended fluxes at element faces.

    inner: output of inner_low_fluxes; fstar: dict side -> (E, ns, 4) final
    face fluxes oriented toward +xi/+eta (shared with the high-order lift).
    """
    w = basis.w
    res = np.zeros_like(u)
    for d in range(2):
        G = np.concatenate(
            [fstar[2 * d][:, None], inner[d], fstar[2 * d + 1][:, None]], axis=1
        )
        r = (G[:, 1:] - G[:, :-1]) / w[None, :, None, None]
        res += r if d == 0 else np.swapaxes(r, 1, 2)
    return u - dt * res / geom.J[..., None]


def _theta_pass(val_cand, val_low, eps):
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = val_cand - val_low
        theta = np.where(
            np.abs(denom) > 1e-300, np.abs((eps - val_low) / denom), 1.0
        )
    return np.minimum(theta, 1.0)


def limit_face_flux(eq, F, flow, dt, minus=None, plus=None, relax=0.1):
    """Theta-limit a face flux toward the first-order flux for admissibility.

    minus/plus: (u_b, J_b, g_adj, w_face) for the boundary subcells on each
    side; g_adj is the adjacent interior subcell flux, w_face the GLL weight
    of the boundary node.  Updates are the direction-split halves (factor 2)
    of the subcell FV update.  Returns (F_limited, redo) where redo flags
    face nodes whose pure low-order update is itself inadmissible.
    """

    def cand_minus(Fv):
        ub, Jb, g, wf = minus
        return ub - (2.0 * dt / (Jb * wf))[..., None] * (Fv - g)

    def cand_plus(Fv):
        ub, Jb, g, wf = plus
        return ub - (2.0 * dt / (Jb * wf))[..., None] * (g - Fv)

    sides = []
    if minus is not None:
        sides.append(cand_minus)
    if plus is not None:
        sides.append(cand_plus)

    lows = [c(flow) for c in sides]
    redo = np.zeros(F.shape[:-1], dtype=bool)
    for lo in lows:
        redo |= ~eq.is_admissible(lo)

    for mode in ("rho", "p"):
        theta = np.ones(F.shape[:-1])
        for c, lo in zip(sides, lows):
            ca = c(F)
            if mode == "rho":
                vc, vl = ca[..., 0], lo[..., 0]
            else:
                vc, vl = eq.pressure(ca), eq.pressure(lo)
            theta = np.minimum(theta, _theta_pass(vc, vl, relax * vl))
        F = theta[..., None] * F + (1.0 - theta[..., None]) * flow
    return F, redo


def element_means(geom, basis, u):
    """Jacobian-weighted element means, shape (E, 4)."""
    ww = basis.w[:, None] * basis.w[None, :]
    wj = ww[None] * geom.J
    num = np.einsum("eij,eijv->ev", wj, u)
    return num / wj.sum(axis=(1, 2))[:, None]


def scale_to_admissible(
    eq, u, means, eps_rho=None, eps_p=None, rho_floor_frac=1e-10,
    p_floor_frac=1e-10, tol=1e-12
):
    """Scale nodal values toward the element mean until rho and p positive.

    means must be admissible.  eps_rho/eps_p are per-element absolute floors
    (e.g. a fraction of the low-order update, which keeps the corrected
    states far enough from vacuum that the next step's predicted states stay
    admissible); the default is a round-off-level fraction of the mean.
    Mean-preserving; returns the corrected copy.
    """
    u = u.copy()
    if eps_rho is None:
        eps_rho = rho_floor_frac * means[:, 0]
    eps_rho = np.minimum(eps_rho, 0.5 * means[:, 0])
    rho_min = u[..., 0].min(axis=(1, 2))
    need = rho_min < eps_rho
    if need.any():
        th = (means[need, 0] - eps_rho[need]) / (means[need, 0] - rho_min[need])
        th = np.clip(th, 0.0, 1.0)
        u[need] = means[need, None, None, :] + th[:, None, None, None] * (
            u[need] - means[need, None, None, :]
        )
    pm = eq.pressure(means)
    if eps_p is None:
        eps_p = p_floor_frac * pm
    eps_p = np.minimum(eps_p, 0.5 * pm)
    pmin = eq.pressure(u).min(axis=(1, 2))
    need = pmin < eps_p
    if need.any():
        idx = np.where(need)[0]
        lo = np.zeros(idx.size)
        hi = np.ones(idx.size)
        um = means[idx, None, None, :]
        du = u[idx] - um
        while (hi - lo).max() > tol:
            mid = 0.5 * (lo + hi)
            pmid = eq.pressure(um + mid[:, None, None, None] * du).min(axis=(1, 2))
            good = pmid >= eps_p[idx]
            lo = np.where(good, mid, lo)
            hi = np.where(good, hi, mid)
        u[idx] = um + lo[:, None, None, None] * du
    return u
