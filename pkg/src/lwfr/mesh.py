"""Curvilinear quadrilateral meshes on a 2:1-balanced quadtree forest.

Every element carries a degree-N tensor-product Lagrange reference map given
by its nodal coordinates on the GLL grid.  Children created by refinement get
their map (and volume Jacobian) by interpolating the parent map, which keeps
metric interpolants consistent across non-conforming faces; internal tree
nodes retain their geometry so coarsening restores it exactly.

Sides are encoded 0..3 = left, right, bottom, top; dir = side // 2 and
side % 2 == 1 on the plus (right/top) side.
"""

import numpy as np

from .basis import Basis

__all__ = [
    "Mesh",
    "Geometry",
    "FaceSets",
    "build_geometry",
    "build_faces",
    "cartesian_map",
    "warped_square_map",
    "annulus_map",
    "distorted_box_map",
    "make_mesh",
    "save_text",
    "load_text",
]

SIDE_NAMES = ("left", "right", "bottom", "top")


class TreeNode:
    __slots__ = ("level", "ix", "iy", "parent", "children", "xy", "J")

    def __init__(self, level, ix, iy, parent, xy, J):
        self.level = level
        self.ix = ix
        self.iy = iy
        self.parent = parent
        self.children = None  # or list of 4 node ids, order (s1,s2)=(0,0),(1,0),(0,1),(1,1)
        self.xy = xy  # (ns, ns, 2) nodal coordinates
        self.J = J  # (ns, ns) volume Jacobian used in the scheme


class Mesh:
    """Quadtree forest of curved quadrilateral elements."""

    def __init__(self, degree, root_nx, root_ny, periodic=(False, False)):
        self.basis = Basis(degree)
        self.degree = degree
        self.root_nx = root_nx
        self.root_ny = root_ny
        self.periodic = tuple(periodic)
        self.nodes = []
        self.index = {}  # (level, ix, iy) -> node id
        self.roots = []  # root node ids in y-major order
        self.root_tags = {}  # (rx, ry, side) -> boundary tag for root boundary faces

    # -- construction -----------------------------------------------------

    def add_root(self, ix, iy, xy, J):
        nid = len(self.nodes)
        self.nodes.append(TreeNode(0, ix, iy, None, xy, J))
        self.index[(0, ix, iy)] = nid
        self.roots.append(nid)
        return nid

    def refine(self, nid):
        """Split a leaf into 4 children with interpolated geometry."""
        nd = self.nodes[nid]
        if nd.children is not None:
            raise ValueError("node already refined")
        V = self.basis.V
        kids = []
        for s2 in range(2):
            for s1 in range(2):
                xy = np.einsum("pi,qj,ijc->pqc", V[s1], V[s2], nd.xy)
                J = 0.25 * np.einsum("pi,qj,ij->pq", V[s1], V[s2], nd.J)
                cid = len(self.nodes)
                kid = TreeNode(nd.level + 1, 2 * nd.ix + s1, 2 * nd.iy + s2, nid, xy, J)
                self.nodes.append(kid)
                self.index[(kid.level, kid.ix, kid.iy)] = cid
                kids.append(cid)
        nd.children = kids
        return kids

    def coarsen(self, nid):
        """Remove the 4 leaf children of an internal node."""
        nd = self.nodes[nid]
        if nd.children is None:
            raise ValueError("node has no children")
        for cid in nd.children:
            kid = self.nodes[cid]
            if kid.children is not None:
                raise ValueError("children must be leaves")
            del self.index[(kid.level, kid.ix, kid.iy)]
            self.nodes[cid] = None
        nd.children = None

    def leaves(self):
        """Leaf node ids in depth-first order (deterministic)."""
        out = []
        stack = list(reversed(self.roots))
        while stack:
            nid = stack.pop()
            nd = self.nodes[nid]
            if nd.children is None:
                out.append(nid)
            else:
                stack.extend(reversed(nd.children))
        return out

    # -- topology queries -------------------------------------------------

    def wrap(self, level, ix, iy):
        nx, ny = self.root_nx << level, self.root_ny << level
        if self.periodic[0]:
            ix %= nx
        if self.periodic[1]:
            iy %= ny
        if 0 <= ix < nx and 0 <= iy < ny:
            return ix, iy
        return None

    def in_domain(self, level, ix, iy):
        w = self.wrap(level, ix, iy)
        if w is None:
            return None
        ix, iy = w
        if (0, ix >> level, iy >> level) in self.index:
            return ix, iy
        return None

    def neighbor_coords(self, nd, side):
        d, pl = side // 2, side % 2
        step = 1 if pl else -1
        ix = nd.ix + (step if d == 0 else 0)
        iy = nd.iy + (step if d == 1 else 0)
        return self.in_domain(nd.level, ix, iy)

    def boundary_tag(self, nd, side):
        rx, ry = nd.ix >> nd.level, nd.iy >> nd.level
        return self.root_tags.get((rx, ry, side))

    def is_balanced(self):
        for nid in self.leaves():
            nd = self.nodes[nid]
            for side in range(4):
                nb = self.neighbor_coords(nd, side)
                if nb is None:
                    continue
                key = (nd.level, nb[0], nb[1])
                if key in self.index:
                    other = self.nodes[self.index[key]]
                    if other.children is not None:
                        for cid in other.children:
                            if self.nodes[cid].children is not None:
                                return False
                elif (nd.level - 1, nb[0] >> 1, nb[1] >> 1) not in self.index:
                    return False
        return True


# -- analytic reference maps ----------------------------------------------


def cartesian_map(x0, x1, y0, y1):
    def f(u, v):
        return x0 + (x1 - x0) * u, y0 + (y1 - y0) * v

    return f


def warped_square_map(length=3.0):
    """Sine-warped square [0, L]^2 with straight outer boundary."""

    def f(u, v):
        xi, eta = length * u, length * v
        a = (2 * xi - length) / length
        # y is warped first; the x warp then uses the warped y
        y = eta + 0.125 * length * np.cos(1.5 * np.pi * a) * np.cos(
            0.5 * np.pi * (2 * eta - length) / length
        )
        x = xi + 0.125 * length * np.cos(0.5 * np.pi * a) * np.cos(
            2.0 * np.pi * (2 * y - length) / length
        )
        return x, y

    return f


def annulus_map(r_inner=1.0, r_outer=4.0):
    """Full annulus; radial coordinate exponential, angular coordinate periodic."""

    def f(u, v):
        r = r_inner * np.exp(u * np.log(r_outer / r_inner))
        th = 2.0 * np.pi * v
        return r * np.cos(th), r * np.sin(th)

    return f


def distorted_box_map(lx=1.0, ly=1.0, ax=0.1, ay=0.1):
    """Periodically sine-distorted box [0, lx] x [0, ly]."""

    def f(u, v):
        x = u * lx - ax * ly * np.sin(2.0 * np.pi * v)
        y = v * ly + ay * lx * np.sin(2.0 * np.pi * u)
        return x, y

    return f


def make_mesh(
    mapfn,
    nx,
    ny,
    degree,
    periodic=(False, False),
    tag_of=None,
    active=None,
):
    """Build a root mesh from a global analytic map over the unit square.

    tag_of(side_name, x, y) classifies root boundary faces by their physical
    midpoint; active optionally restricts the root grid to a subset of cells
    (y-major iteration order), enabling L-shaped domains.
    """
    mesh = Mesh(degree, nx, ny, periodic)
    b = mesh.basis
    s = 0.5 * (b.x + 1.0)
    for iy in range(ny):
        for ix in range(nx):
            if active is not None and not active(ix, iy):
                continue
            u = (ix + s[:, None]) / nx + 0.0 * s[None, :]
            v = (iy + s[None, :]) / ny + 0.0 * s[:, None]
            x, y = mapfn(u, v)
            xy = np.stack([x, y], axis=-1)
            J = _jacobian_of(b, xy)
            mesh.add_root(ix, iy, xy, J)
    # boundary tags on root faces (also interior holes of an active subset)
    for nid in mesh.roots:
        nd = mesh.nodes[nid]
        for side in range(4):
            if mesh.neighbor_coords(nd, side) is None:
                xm, ym = _face_midpoint(mesh, nd, side)
                tag = tag_of(SIDE_NAMES[side], xm, ym) if tag_of else "boundary"
                mesh.root_tags[(nd.ix, nd.iy, side)] = tag
    return mesh


def _face_midpoint(mesh, nd, side):
    b = mesh.basis
    mid = b.interp_to([0.0])[0]
    if side == 0:
        line = nd.xy[0]
    elif side == 1:
        line = nd.xy[-1]
    elif side == 2:
        line = nd.xy[:, 0]
    else:
        line = nd.xy[:, -1]
    return mid @ line[:, 0], mid @ line[:, 1]


def _jacobian_of(b, xy):
    dxi = np.einsum("pi,ijc->pjc", b.D, xy)
    deta = np.einsum("qj,ijc->iqc", b.D, xy)
    return dxi[..., 0] * deta[..., 1] - deta[..., 0] * dxi[..., 1]


# -- stacked geometry ------------------------------------------------------


class Geometry:
    """Per-leaf geometric data stacked over the active elements.

    Attributes (E = number of leaves, ns = degree + 1):
        xy:   (E, ns, ns, 2) physical node coordinates.
        J:    (E, ns, ns) volume Jacobian used by the scheme.
        Ja:   (E, 2, ns, ns, 2) contravariant metric vectors J a^i.
        dJa:  (E, 2, ns, ns, 2) derivative of I_N(J a^i) in direction i.
        sub_n: [2] arrays (E, N, ns, 2): interior subcell face normals in
               each direction, oriented toward increasing coordinate; the
               transverse index is last-but-one.
    """

    def __init__(self, mesh, leaf_ids):
        b = mesh.basis
        ns = b.n
        E = len(leaf_ids)
        self.xy = np.empty((E, ns, ns, 2))
        self.J = np.empty((E, ns, ns))
        for k, nid in enumerate(leaf_ids):
            nd = mesh.nodes[nid]
            self.xy[k] = nd.xy
            self.J[k] = nd.J
        dxi = np.einsum("pi,eijc->epjc", b.D, self.xy)
        deta = np.einsum("qj,eijc->eiqc", b.D, self.xy)
        self.Ja = np.empty((E, 2, ns, ns, 2))
        self.Ja[:, 0, ..., 0] = deta[..., 1]
        self.Ja[:, 0, ..., 1] = -deta[..., 0]
        self.Ja[:, 1, ..., 0] = -dxi[..., 1]
        self.Ja[:, 1, ..., 1] = dxi[..., 0]
        self.dJa = np.empty_like(self.Ja)
        self.dJa[:, 0] = np.einsum("pi,eijc->epjc", b.D, self.Ja[:, 0])
        self.dJa[:, 1] = np.einsum("qj,eijc->eiqc", b.D, self.Ja[:, 1])
        # interior subcell normals by cumulative telescoping from the left face
        N = b.degree
        self.sub_n = []
        for d in range(2):
            Jad = self.Ja[:, d] if d == 0 else np.swapaxes(self.Ja[:, d], 1, 2)
            dJad = self.dJa[:, d] if d == 0 else np.swapaxes(self.dJa[:, d], 1, 2)
            # axes now (E, along, transverse, 2)
            n = Jad[:, :1] + np.cumsum(b.w[None, :N, None, None] * dJad[:, :N], axis=1)
            self.sub_n.append(n)

    def metric_identity_residual(self):
        return np.abs(self.dJa[:, 0] + self.dJa[:, 1]).max() if len(self.J) else 0.0


def build_geometry(mesh, leaf_ids=None):
    if leaf_ids is None:
        leaf_ids = mesh.leaves()
    return Geometry(mesh, leaf_ids)


# -- face classification ---------------------------------------------------


class FaceSets:
    """Interior, mortar and boundary faces of the current leaf set.

    conforming: arrays em, ep, fdir — minus/plus leaf positions per face.
    mortar: arrays coarse, fine0, fine1, fdir, coarse_is_minus.
    boundary: arrays elem, side, and a list of tag strings.
    """

    def __init__(self):
        self.conf_em = []
        self.conf_ep = []
        self.conf_dir = []
        self.mort_coarse = []
        self.mort_fine = []
        self.mort_dir = []
        self.mort_cmin = []
        self.bdry_elem = []
        self.bdry_side = []
        self.bdry_tag = []

    def finalize(self):
        self.conf_em = np.asarray(self.conf_em, dtype=int)
        self.conf_ep = np.asarray(self.conf_ep, dtype=int)
        self.conf_dir = np.asarray(self.conf_dir, dtype=int)
        self.mort_coarse = np.asarray(self.mort_coarse, dtype=int)
        self.mort_fine = np.asarray(self.mort_fine, dtype=int).reshape(-1, 2)
        self.mort_dir = np.asarray(self.mort_dir, dtype=int)
        self.mort_cmin = np.asarray(self.mort_cmin, dtype=bool)
        self.bdry_elem = np.asarray(self.bdry_elem, dtype=int)
        self.bdry_side = np.asarray(self.bdry_side, dtype=int)
        return self


def build_faces(mesh, leaf_ids=None):
    """Classify all faces of the leaf set; mortars registered from the coarse side."""
    if leaf_ids is None:
        leaf_ids = mesh.leaves()
    pos = {nid: k for k, nid in enumerate(leaf_ids)}
    fs = FaceSets()
    for nid in leaf_ids:
        nd = mesh.nodes[nid]
        for side in range(4):
            d, pl = side // 2, side % 2
            nb = mesh.neighbor_coords(nd, side)
            if nb is None:
                fs.bdry_elem.append(pos[nid])
                fs.bdry_side.append(side)
                fs.bdry_tag.append(mesh.boundary_tag(nd, side))
                continue
            key = (nd.level, nb[0], nb[1])
            if key in mesh.index:
                other = mesh.nodes[mesh.index[key]]
                if other.children is None:
                    if pl:  # register conforming faces from the minus side only
                        fs.conf_em.append(pos[nid])
                        fs.conf_ep.append(pos[mesh.index[key]])
                        fs.conf_dir.append(d)
                else:
                    # neighbor refined: this leaf is the coarse side of a mortar
                    kids = other.children
                    if d == 0:
                        sel = (0, 2) if pl else (1, 3)  # children at ix even/odd
                    else:
                        sel = (0, 1) if pl else (2, 3)
                    f0, f1 = kids[sel[0]], kids[sel[1]]
                    fs.mort_coarse.append(pos[nid])
                    fs.mort_fine.extend([pos[f0], pos[f1]])
                    fs.mort_dir.append(d)
                    fs.mort_cmin.append(bool(pl))
            # else: coarser neighbor owns the mortar; skip
    return fs.finalize()


# -- text format ------------------------------------------------------------


def save_text(mesh, path):
    """Write the full forest (geometry, topology, boundary tags) as text."""
    lines = []
    lines.append(
        "lwfr-mesh 1 %d %d %d %d %d"
        % (mesh.degree, mesh.root_nx, mesh.root_ny, int(mesh.periodic[0]), int(mesh.periodic[1]))
    )
    order = []
    stack = list(reversed(mesh.roots))
    while stack:
        nid = stack.pop()
        nd = mesh.nodes[nid]
        order.append(nid)
        if nd.children is not None:
            stack.extend(reversed(nd.children))
    lines.append("nodes %d" % len(order))
    for nid in order:
        nd = mesh.nodes[nid]
        lines.append(
            "elem %d %d %d %d" % (nd.level, nd.ix, nd.iy, int(nd.children is not None))
        )
        lines.append(" ".join("%.17g" % v for v in nd.xy.reshape(-1)))
    lines.append("tags %d" % len(mesh.root_tags))
    for (rx, ry, side), tag in sorted(mesh.root_tags.items()):
        lines.append("tag %d %d %d %s" % (rx, ry, side, tag))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_text(path):
    """Rebuild a mesh written by save_text (bit-identical geometry)."""
    with open(path) as fh:
        toks = fh.read().split("\n")
    head = toks[0].split()
    if head[0] != "lwfr-mesh":
        raise ValueError("not a mesh file")
    degree, nx, ny = int(head[2]), int(head[3]), int(head[4])
    periodic = (bool(int(head[5])), bool(int(head[6])))
    mesh = Mesh(degree, nx, ny, periodic)
    ns = degree + 1
    i = 1
    nnodes = int(toks[i].split()[1])
    i += 1
    for _ in range(nnodes):
        _, lv, ix, iy, has_kids = toks[i].split()
        lv, ix, iy = int(lv), int(ix), int(iy)
        xy = np.fromstring(toks[i + 1], sep=" ").reshape(ns, ns, 2)
        i += 2
        if lv == 0:
            J = _jacobian_of(mesh.basis, xy)
            nid = mesh.add_root(ix, iy, xy, J)
        else:
            nid = mesh.index[(lv, ix, iy)]
            # verify stored coordinates match the replayed refinement
            if not np.allclose(mesh.nodes[nid].xy, xy, rtol=0, atol=1e-12):
                raise ValueError("mesh file inconsistent with refinement replay")
        if int(has_kids):
            mesh.refine(nid)
    ntags = int(toks[i].split()[1])
    i += 1
    for _ in range(ntags):
        _, rx, ry, side, tag = toks[i].split()
        mesh.root_tags[(int(rx), int(ry), int(side))] = tag
        i += 1
    return mesh
