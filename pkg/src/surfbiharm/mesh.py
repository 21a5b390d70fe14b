"""Background tetrahedral mesh and extraction of the cut complex.

The background mesh is a uniform cube grid with the Kuhn 6-tetrahedron
split of each cell (face-consistent across cells).  The discrete surface
is the zero set of the piecewise linear interpolated level set; cutting
it against the active tetrahedra yields planar polygons, surface edges
with co-normals, and the interior facets used for stabilization.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "BackgroundMesh",
    "CutPolygon",
    "CutComplex",
    "build_background_mesh",
    "interpolate_levelset",
    "cut_tet",
    "extract_cut_complex",
    "export_surface",
]


@dataclass
class BackgroundMesh:
    vertices: np.ndarray  # (nv, 3)
    tets: np.ndarray  # (nt, 4) vertex indices, positively oriented
    h: float
    n_cells: int
    box: tuple  # (lo, hi)

    def boundary_vertex_mask(self):
        lo, hi = self.box
        v = self.vertices
        eps = 1e-12 * (hi - lo)
        return np.any((np.abs(v - lo) < eps) | (np.abs(v - hi) < eps), axis=1)


def build_faces(tets):
    """Unique triangular faces of a tet array with parent adjacency.

    Returns (faces, parents): faces (nf, 3) sorted vertex triples and
    parents (nf, 2) with the adjacent tet positions (second entry -1 on
    the boundary).  The tet with the lower position is the plus side.
    """
    nt = len(tets)
    local = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
    tris = np.sort(tets[:, local], axis=2).reshape(-1, 3)  # (4*nt, 3)
    owner = np.repeat(np.arange(nt), 4)
    order = np.lexsort((tris[:, 2], tris[:, 1], tris[:, 0]))
    tris, owner = tris[order], owner[order]
    new = np.ones(len(tris), dtype=bool)
    new[1:] = np.any(tris[1:] != tris[:-1], axis=1)
    fid = np.cumsum(new) - 1
    nf = fid[-1] + 1
    faces = tris[new]
    parents = np.full((nf, 2), -1, dtype=np.int64)
    # within each face group owners arrive in ascending order
    parents[fid[new], 0] = owner[new]
    dup = ~new
    parents[fid[dup], 1] = owner[dup]
    counts = np.bincount(fid, minlength=nf)
    if np.any(counts > 2):
        raise ValueError("non-manifold tet connectivity")
    return faces, parents


# Kuhn split: six tets around the main diagonal of the unit cube, one per
# permutation of the axes.  Shared cube faces are split the same way in
# neighboring cells, so the triangulation is conforming.
_KUHN_OFFSETS = []
for perm in itertools.permutations(range(3)):
    offs = [np.zeros(3, dtype=np.int64)]
    cur = np.zeros(3, dtype=np.int64)
    for ax in perm:
        cur = cur.copy()
        cur[ax] = 1
        offs.append(cur)
    _KUHN_OFFSETS.append(np.array(offs))
_KUHN_OFFSETS = np.array(_KUHN_OFFSETS)  # (6, 4, 3) integer corner offsets


def build_background_mesh(box, n_cells) -> BackgroundMesh:
    """Uniform Kuhn-split tetrahedral mesh of an axis-aligned cube."""
    lo, hi = float(box[0]), float(box[1])
    if not hi > lo:
        raise ValueError("degenerate box")
    if n_cells < 2:
        raise ValueError("need at least 2 cells per axis")
    n = int(n_cells)
    h = (hi - lo) / n
    coords = lo + h * np.arange(n + 1)
    X, Y, Z = np.meshgrid(coords, coords, coords, indexing="ij")
    vertices = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    ci, cj, ck = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    ci, cj, ck = ci.ravel(), cj.ravel(), ck.ravel()
    tets = np.empty((len(ci), 6, 4), dtype=np.int64)
    # all tets of one Kuhn type are translates of each other, so orientation
    # is decided once per type instead of per tet
    for t, offs in enumerate(_KUHN_OFFSETS):
        p = offs.astype(float)
        vol6 = np.cross(p[1] - p[0], p[2] - p[0]) @ (p[3] - p[0])
        order = (0, 1, 3, 2) if vol6 < 0 else (0, 1, 2, 3)
        for v, o in zip(order, offs):
            tets[:, t, v] = vid(ci + o[0], cj + o[1], ck + o[2])
    tets = tets.reshape(-1, 4)
    return BackgroundMesh(vertices=vertices, tets=tets, h=h, n_cells=n, box=(lo, hi))


def interpolate_levelset(phi, mesh: BackgroundMesh, eps_guard=1e-10):
    """Vertex values of the level set, pushed away from exact zeros.

    Any value with \\|phi\\| < eps_guard * h is replaced by
    sign(phi) * eps_guard * h, with the sign of zero taken positive, so
    that no tetrahedron touches the discrete surface in a degenerate way.
    """
    if eps_guard < 0:
        raise ValueError("eps_guard must be nonnegative")
    vals = np.asarray(phi(mesh.vertices), dtype=float).copy()
    floor = eps_guard * mesh.h
    sign = np.where(vals >= 0.0, 1.0, -1.0)
    small = np.abs(vals) < floor
    vals[small] = sign[small] * floor
    return vals


@dataclass
class CutPolygon:
    parent_tet: int
    vertices: np.ndarray  # (3 or 4, 3), ordered around the boundary
    n_h: np.ndarray  # unit normal along grad(phi_h)
    area: float


# Edge-root patterns for the marching-tetrahedron cases, as (from, to)
# local vertex pairs listed in boundary order.
_TRI_EDGES = {1: [(0, 1), (0, 2), (0, 3)]}


def _edge_roots(verts, phi, pairs):
    pts = []
    for a, b in pairs:
        t = phi[a] / (phi[a] - phi[b])
        pts.append(verts[a] + t * (verts[b] - verts[a]))
    return np.array(pts)


def cut_tet(tet_vertices, phi_values) -> Optional[CutPolygon]:
    """Zero set of the linear interpolant inside one tetrahedron.

    Returns None when all values share a sign, a triangle for a 1-3 sign
    split, and an ordered planar quadrilateral for a 2-2 split.
    """
    verts = np.asarray(tet_vertices, dtype=float)
    phi = np.asarray(phi_values, dtype=float)
    if np.any(phi == 0.0):
        raise ValueError("level-set value of exactly zero; apply the guard first")
    neg = np.nonzero(phi < 0)[0]
    pos = np.nonzero(phi > 0)[0]
    if len(neg) == 0 or len(pos) == 0:
        return None
    if len(neg) == 1 or len(pos) == 1:
        lone = neg[0] if len(neg) == 1 else pos[0]
        others = [i for i in range(4) if i != lone]
        pts = _edge_roots(verts, phi, [(lone, o) for o in others])
    else:
        (a, b), (c, d) = neg, pos
        pts = _edge_roots(verts, phi, [(a, c), (b, c), (b, d), (a, d)])

    # gradient of the linear interpolant gives the oriented normal
    mat = np.column_stack([verts[1] - verts[0], verts[2] - verts[0], verts[3] - verts[0]])
    grad = np.linalg.solve(mat.T, phi[1:] - phi[0])
    n_h = grad / np.linalg.norm(grad)

    area = 0.0
    for k in range(1, len(pts) - 1):
        area += 0.5 * np.linalg.norm(np.cross(pts[k] - pts[0], pts[k + 1] - pts[0]))
    return CutPolygon(parent_tet=-1, vertices=pts, n_h=n_h, area=float(area))


@dataclass
class CutComplex:
    """Active mesh, cut polygons, surface edges and interior facets."""

    background: BackgroundMesh
    active_tets: np.ndarray  # (na,) global tet indices
    # polygons, one per active tet (aligned with active_tets); triangles are
    # padded to four vertices by repeating the last one (zero-area fan tail)
    poly_verts: np.ndarray  # (na, 4, 3)
    poly_nvert: np.ndarray  # (na,) 3 or 4
    poly_normal: np.ndarray  # (na, 3)
    poly_area: np.ndarray  # (na,)
    # interior facets of the active mesh (the stabilization set)
    facet_verts: np.ndarray  # (nF, 3) global vertex triples
    facet_tet_plus: np.ndarray  # (nF,) positions into active_tets
    facet_tet_minus: np.ndarray
    facet_normal: np.ndarray  # (nF, 3) oriented plus -> minus
    facet_area: np.ndarray
    # surface edges (subset of facets where the level set changes sign)
    edge_points: np.ndarray  # (nE, 2, 3)
    edge_facet: np.ndarray  # (nE,) positions into the facet arrays
    edge_poly_plus: np.ndarray  # (nE,) positions into the polygon arrays
    edge_poly_minus: np.ndarray
    edge_tangent: np.ndarray  # (nE, 3)
    edge_mu_plus: np.ndarray  # (nE, 3)
    edge_mu_minus: np.ndarray
    edge_mu: np.ndarray  # combined co-normal
    edge_length: np.ndarray

    @property
    def h(self):
        return self.background.h

    def total_area(self):
        return float(np.sum(self.poly_area))


def _tet_gradients(verts, values):
    """Gradient of the linear interpolant per tet, vectorized.

    verts (n, 4, 3), values (n, 4) -> (n, 3).
    """
    e = verts[:, 1:] - verts[:, :1]  # (n, 3, 3) rows are edge vectors
    rhs = values[:, 1:] - values[:, :1]
    return np.linalg.solve(e, rhs[..., None])[..., 0]


def extract_cut_complex(mesh: BackgroundMesh, phi_h) -> CutComplex:
    """Build the cut complex from guarded vertex level-set values."""
    phi_h = np.asarray(phi_h, dtype=float)
    if np.any(phi_h == 0.0):
        raise ValueError("phi_h contains exact zeros; apply the guard first")

    tet_phi = phi_h[mesh.tets]  # (nt, 4)
    neg = tet_phi < 0
    nneg = neg.sum(axis=1)
    active_mask = (nneg > 0) & (nneg < 4)
    active_tets = np.nonzero(active_mask)[0]
    if len(active_tets) == 0:
        raise ValueError("level set does not intersect the mesh")

    averts = mesh.vertices[mesh.tets[active_tets]]  # (na, 4, 3)
    aphi = tet_phi[active_tets]
    na = len(active_tets)

    grads = _tet_gradients(averts, aphi)
    normals = grads / np.linalg.norm(grads, axis=1, keepdims=True)

    poly_verts = np.empty((na, 4, 3))
    poly_nvert = np.empty(na, dtype=np.int64)

    aneg = aphi < 0
    count_neg = aneg.sum(axis=1)

    def roots(rows, pairs):
        # pairs: (m, k, 2) local index pairs per row
        out = np.empty((len(rows), pairs.shape[1], 3))
        v = averts[rows]
        p = aphi[rows]
        ia, ib = pairs[..., 0], pairs[..., 1]
        pa = np.take_along_axis(p, ia, axis=1)
        pb = np.take_along_axis(p, ib, axis=1)
        va = np.take_along_axis(v, ia[..., None], axis=1)
        vb = np.take_along_axis(v, ib[..., None], axis=1)
        t = (pa / (pa - pb))[..., None]
        return va + t * (vb - va)

    # 1-3 splits (either one negative or one positive vertex)
    lone_mask = (count_neg == 1) | (count_neg == 3)
    rows = np.nonzero(lone_mask)[0]
    if len(rows):
        lone_is_neg = count_neg[rows] == 1
        pattern = np.where(lone_is_neg[:, None], aneg[rows], ~aneg[rows])
        lone = np.argmax(pattern, axis=1)
        others = np.argsort(~pattern, axis=1)[:, 1:]  # the three remaining
        others = np.sort(others, axis=1)
        pairs = np.stack([np.repeat(lone[:, None], 3, axis=1), others], axis=-1)
        pts = roots(rows, pairs)
        poly_verts[rows, :3] = pts
        poly_verts[rows, 3] = pts[:, 2]
        poly_nvert[rows] = 3

    # 2-2 splits
    rows = np.nonzero(count_neg == 2)[0]
    if len(rows):
        order = np.argsort(~aneg[rows], axis=1, kind="stable")
        a, b = order[:, 0], order[:, 1]
        c, d = np.sort(order[:, 2:], axis=1).T
        pairs = np.stack(
            [
                np.stack([a, c], axis=-1),
                np.stack([b, c], axis=-1),
                np.stack([b, d], axis=-1),
                np.stack([a, d], axis=-1),
            ],
            axis=1,
        )
        poly_verts[rows] = roots(rows, pairs)
        poly_nvert[rows] = 4

    fan_a = poly_verts[:, 1] - poly_verts[:, 0]
    fan_b = poly_verts[:, 2] - poly_verts[:, 0]
    fan_c = poly_verts[:, 3] - poly_verts[:, 0]
    poly_area = 0.5 * (
        np.linalg.norm(np.cross(fan_a, fan_b), axis=1)
        + np.linalg.norm(np.cross(fan_b, fan_c), axis=1)
    )

    # facets of the active mesh
    faces, parents = build_faces(mesh.tets[active_tets])
    interior = parents[:, 1] >= 0
    face_phi = phi_h[faces]
    face_cut = (face_phi.min(axis=1) < 0) & (face_phi.max(axis=1) > 0)
    if np.any(face_cut & ~interior):
        # a sign-changing face can only be one-sided on the box boundary
        raise ValueError("surface leaves background domain")

    facet_ids = np.nonzero(interior)[0]
    facet_verts = faces[facet_ids]
    fplus = parents[facet_ids, 0]
    fminus = parents[facet_ids, 1]
    fv = mesh.vertices[facet_verts]
    raw_n = np.cross(fv[:, 1] - fv[:, 0], fv[:, 2] - fv[:, 0])
    facet_area = 0.5 * np.linalg.norm(raw_n, axis=1)
    facet_normal = raw_n / np.linalg.norm(raw_n, axis=1, keepdims=True)
    # orient plus -> minus (away from the plus tet centroid)
    cent_plus = averts[fplus].mean(axis=1)
    fcent = fv.mean(axis=1)
    s = np.sign(np.einsum("ij,ij->i", facet_normal, fcent - cent_plus))
    facet_normal *= s[:, None]

    # surface edges on sign-changing interior facets
    eids = np.nonzero(face_cut[facet_ids])[0]
    ev = fv[eids]  # (nE, 3, 3)
    ep = face_phi[facet_ids][eids]  # (nE, 3)
    nE = len(eids)
    edge_points = np.empty((nE, 2, 3))
    # of the three triangle edges, exactly two change sign
    tri_pairs = np.array([[0, 1], [0, 2], [1, 2]])
    pa = ep[:, tri_pairs[:, 0]]
    pb = ep[:, tri_pairs[:, 1]]
    change = (pa * pb) < 0  # (nE, 3) exactly two True per row
    idx = np.argsort(~change, axis=1)[:, :2]
    idx = np.sort(idx, axis=1)
    for k in range(2):
        prs = tri_pairs[idx[:, k]]
        va = ev[np.arange(nE), prs[:, 0]]
        vb = ev[np.arange(nE), prs[:, 1]]
        fa = ep[np.arange(nE), prs[:, 0]]
        fb = ep[np.arange(nE), prs[:, 1]]
        t = (fa / (fa - fb))[:, None]
        edge_points[:, k] = va + t * (vb - va)

    edge_facet = facet_ids[eids]
    epl = fplus[eids]
    emi = fminus[eids]
    edge_vec = edge_points[:, 1] - edge_points[:, 0]
    edge_length = np.linalg.norm(edge_vec, axis=1)
    t_e = edge_vec / edge_length[:, None]

    def conormal(poly_idx):
        n = normals[poly_idx]
        mu = np.cross(t_e, n)
        mu /= np.linalg.norm(mu, axis=1, keepdims=True)
        # centroid of the (padded) polygon: average distinct vertices
        nv = poly_nvert[poly_idx]
        cent = np.where(
            (nv == 4)[:, None],
            poly_verts[poly_idx].mean(axis=1),
            poly_verts[poly_idx, :3].mean(axis=1),
        )
        mid = edge_points.mean(axis=1)
        s = np.sign(np.einsum("ij,ij->i", mu, mid - cent))
        return mu * s[:, None]

    mu_plus = conormal(epl)
    mu_minus = conormal(emi)
    dot = np.einsum("ij,ij->i", mu_plus, mu_minus)
    edge_mu = (mu_plus - mu_minus) / (1.0 - dot)[:, None]

    # remap facet tet positions (they already index active_tets)
    return CutComplex(
        background=mesh,
        active_tets=active_tets,
        poly_verts=poly_verts,
        poly_nvert=poly_nvert,
        poly_normal=normals,
        poly_area=poly_area,
        facet_verts=facet_verts,
        facet_tet_plus=fplus,
        facet_tet_minus=fminus,
        facet_normal=facet_normal,
        facet_area=facet_area,
        edge_points=edge_points,
        edge_facet=np.searchsorted(facet_ids, edge_facet),
        edge_poly_plus=epl,
        edge_poly_minus=emi,
        edge_tangent=t_e,
        edge_mu_plus=mu_plus,
        edge_mu_minus=mu_minus,
        edge_mu=edge_mu,
        edge_length=edge_length,
    )


def export_surface(complex_: CutComplex, path):
    """ASCII triangle-soup dump of the discrete surface for visualization.

    One polygon per line: ``K <tet_id> <n_vertices> x y z ...``.
    """
    with open(path, "w") as fh:
        for k in range(len(complex_.active_tets)):
            nv = int(complex_.poly_nvert[k])
            coords = " ".join(
                f"{c:.17g}" for c in complex_.poly_verts[k, :nv].ravel()
            )
            fh.write(f"K {int(complex_.active_tets[k])} {nv} {coords}\n")
