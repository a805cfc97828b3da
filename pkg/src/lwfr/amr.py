"""Adaptive refinement: indicators, level controller, and solution transfer.

Transfer works on the Jacobian-weighted solution: refinement interpolates
J*u to the children (whose stored Jacobian is the interpolated parent
Jacobian), coarsening applies the L2 projection; both are conservative to
round-off and mutually inverse on polynomial data.
"""

import numpy as np

from . import blending

__all__ = [
    "lohner_indicator",
    "level_targets",
    "plan_adaptation",
    "adapt",
]


def lohner_indicator(q, f_wave=0.2):
    """Smoothed second-difference indicator on nodal data q: (E, ns, ns).

    Needs at least 3 nodes per direction (degree >= 2); the caller falls
    back to a modal indicator otherwise.
    """
    out = np.zeros(q.shape[0])
    for d in (1, 2):
        a = np.moveaxis(q, d, 1)
        num = np.abs(a[:, 2:] - 2.0 * a[:, 1:-1] + a[:, :-2])
        den = (
            np.abs(a[:, 2:] - a[:, 1:-1])
            + np.abs(a[:, 1:-1] - a[:, :-2])
            + f_wave * (np.abs(a[:, 2:]) + 2.0 * np.abs(a[:, 1:-1]) + np.abs(a[:, :-2]))
        )
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(den > 0, num / den, 0.0)
        out = np.maximum(out, r.max(axis=(1, 2)))
    return out


def level_targets(ind, base_level, med_level, max_level, med_threshold, max_threshold):
    """Three-band controller: indicator bands pick the target refinement level."""
    t = np.full(ind.shape, base_level, dtype=int)
    t[ind > med_threshold] = med_level
    t[ind > max_threshold] = max_level
    return t


def plan_adaptation(mesh, leaf_ids, targets):
    """Refine/coarsen flags satisfying the 2:1 balance.

    Returns (refine_ids, coarsen_parent_ids) of tree node ids.  Coarsening
    happens only when all four siblings are leaves wanting a level at or
    below the parent's, and never when it would break the balance.
    """
    tgt = {nid: int(t) for nid, t in zip(leaf_ids, targets)}
    eff = {}
    for nid in leaf_ids:
        nd = mesh.nodes[nid]
        eff[nid] = nd.level + (1 if tgt[nid] > nd.level else 0)

    def face_neighbors(nd):
        out = []
        for side in range(4):
            nb = mesh.neighbor_coords(nd, side)
            if nb is None:
                continue
            key = (nd.level, nb[0], nb[1])
            if key in mesh.index:
                other = mesh.nodes[mesh.index[key]]
                if other.children is None:
                    out.append(mesh.index[key])
                else:
                    for cid in other.children:
                        kid = mesh.nodes[cid]
                        # only the two children actually touching this face
                        d = side // 2
                        want = (0 if side % 2 else 1)
                        comp = kid.ix % 2 if d == 0 else kid.iy % 2
                        if comp == want:
                            out.append(cid)
            else:
                up = (nd.level - 1, nb[0] >> 1, nb[1] >> 1)
                if up in mesh.index:
                    out.append(mesh.index[up])
        return out

    # propagate refinement for 2:1 balance
    changed = True
    while changed:
        changed = False
        for nid in leaf_ids:
            nd = mesh.nodes[nid]
            for on in face_neighbors(nd):
                if eff[nid] - eff[on] > 1:
                    eff[on] += 1
                    changed = True

    refine_ids = [nid for nid in leaf_ids if eff[nid] > mesh.nodes[nid].level]

    # coarsen sibling groups
    coarsen = []
    by_parent = {}
    for nid in leaf_ids:
        nd = mesh.nodes[nid]
        if nd.parent is not None and eff[nid] == nd.level and tgt[nid] < nd.level:
            by_parent.setdefault(nd.parent, []).append(nid)
    for pid, kids in sorted(by_parent.items()):
        if len(kids) != 4:
            continue
        pl = mesh.nodes[pid].level
        ok = True
        for nid in kids:
            for on in face_neighbors(mesh.nodes[nid]):
                if on not in kids and eff.get(on, pl) - pl > 1:
                    ok = False
        if ok:
            coarsen.append(pid)
    return refine_ids, coarsen


def adapt(mesh, leaf_ids, u, refine_ids, coarsen_parent_ids, eq=None):
    """Apply topology changes and transfer the solution; returns new u.

    Transfer is through the interpolant of J*u; after refinement any child
    whose nodal values lost admissibility is scaled (jointly with its
    siblings) toward the parent mean.
    """
    pos = {nid: k for k, nid in enumerate(leaf_ids)}
    b = mesh.basis
    old = {}
    for nid in refine_ids:
        nd = mesh.nodes[nid]
        old[nid] = (u[pos[nid]], nd.J.copy())
        mesh.refine(nid)
    for pid in coarsen_parent_ids:
        nd = mesh.nodes[pid]
        kids = list(nd.children)
        old[pid] = [(u[pos[c]], mesh.nodes[c].J.copy()) for c in kids]
        mesh.coarsen(pid)

    new_leaves = mesh.leaves()
    ns = b.n
    out = np.empty((len(new_leaves), ns, ns, 4))
    for k, nid in enumerate(new_leaves):
        nd = mesh.nodes[nid]
        if nid in pos and nid not in old:
            out[k] = u[pos[nid]]
        elif nd.parent is not None and nd.parent in old:
            up, Jp = old[nd.parent]
            s1, s2 = nd.ix % 2, nd.iy % 2
            ut = np.einsum("pi,qj,ijv->pqv", b.V[s1], b.V[s2], Jp[..., None] * up)
            out[k] = ut / (4.0 * nd.J[..., None])
        else:
            acc = np.zeros((ns, ns, 4))
            for (uk, Jk), cidx in zip(old[nid], range(4)):
                s1, s2 = cidx % 2, cidx // 2
                acc += np.einsum(
                    "pi,qj,ijv->pqv", b.P[s1], b.P[s2], 4.0 * Jk[..., None] * uk
                )
            out[k] = acc / nd.J[..., None]

    if eq is not None:
        _fix_refined_admissibility(mesh, new_leaves, out, refine_ids, eq)
    return out


def _fix_refined_admissibility(mesh, new_leaves, u, refine_ids, eq):
    pos = {nid: k for k, nid in enumerate(new_leaves)}
    b = mesh.basis
    ww = b.w[:, None] * b.w[None, :]
    for nid in refine_ids:
        kids = mesh.nodes[nid].children
        idx = [pos[c] for c in kids]
        if eq.is_admissible(u[idx]).all():
            continue
        Js = np.stack([mesh.nodes[c].J for c in kids])
        wj = ww[None] * Js
        mean = np.einsum("eij,eijv->v", wj, u[idx]) / wj.sum()
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if eq.is_admissible(mean + mid * (u[idx] - mean)).all():
                lo = mid
            else:
                hi = mid
        u[idx] = mean + lo * (u[idx] - mean)
