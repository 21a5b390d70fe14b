"""Continuous quadratic Lagrange space on the active mesh.

Degrees of freedom sit at active-mesh vertices and edge midpoints; basis
values, gradients and (per-tet constant) Hessians are obtained from
barycentric coordinates through the constant affine map of each tet.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import CutComplex
from .quadrature import QuadRule, map_to_triangles

__all__ = ["P2Space", "build_p2_space", "eval_basis", "eval_basis_batch",
           "mean_vector", "tet_basis_hessians"]

# local edges of a tetrahedron, in the dof ordering used after the 4 vertices
_LOCAL_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])


@dataclass
class P2Space:
    complex: CutComplex
    ndof: int
    n_vertex_dofs: int
    tet_dof_map: np.ndarray  # (na, 10): 4 vertex dofs then 6 edge dofs

    @property
    def tet_vertices(self):
        mesh = self.complex.background
        return mesh.vertices[mesh.tets[self.complex.active_tets]]


def build_p2_space(complex_: CutComplex) -> P2Space:
    """Number the dofs of the quadratic Lagrange space deterministically.

    Vertex dofs come first (sorted by global vertex index), then edge
    dofs (sorted by vertex-index pair), so the numbering is independent
    of traversal order.
    """
    mesh = complex_.background
    tets = mesh.tets[complex_.active_tets]  # (na, 4)
    if len(tets) == 0:
        raise ValueError("empty active mesh")

    verts = np.unique(tets)
    vmap = {int(v): i for i, v in enumerate(verts)}
    nv = len(verts)

    edges = np.sort(tets[:, _LOCAL_EDGES], axis=2).reshape(-1, 2)
    uedges = np.unique(edges, axis=0)
    # lexicographic order of (v0, v1) pairs
    emap = {(int(a), int(b)): nv + i for i, (a, b) in enumerate(uedges)}

    na = len(tets)
    dof_map = np.empty((na, 10), dtype=np.int64)
    vert_lookup = np.full(mesh.tets.max() + 1, -1, dtype=np.int64)
    vert_lookup[verts] = np.arange(nv)
    dof_map[:, :4] = vert_lookup[tets]
    tet_edges = np.sort(tets[:, _LOCAL_EDGES], axis=2)  # (na, 6, 2)
    flat = tet_edges.reshape(-1, 2)
    # vectorized lookup of edge ids via searchsorted on the unique rows
    keys = uedges[:, 0] * (mesh.tets.max() + 1) + uedges[:, 1]
    fk = flat[:, 0] * (mesh.tets.max() + 1) + flat[:, 1]
    pos = np.searchsorted(keys, fk)
    dof_map[:, 4:] = (nv + pos).reshape(na, 6)

    return P2Space(
        complex=complex_,
        ndof=nv + len(uedges),
        n_vertex_dofs=nv,
        tet_dof_map=dof_map,
    )


def _barycentric(tet_verts, x):
    """Barycentric coordinates and their (constant) gradients.

    tet_verts (..., 4, 3), x (..., q, 3) -> lam (..., q, 4), grads (..., 4, 3).
    """
    v0 = tet_verts[..., 0, :]
    e = tet_verts[..., 1:, :] - v0[..., None, :]  # (..., 3, 3) rows edges
    einv = np.linalg.inv(e)  # columns are gradients of lam_1..3
    rel = x - v0[..., None, :]
    lam123 = np.einsum("...qj,...jk->...qk", rel, einv)
    lam0 = 1.0 - lam123.sum(axis=-1, keepdims=True)
    lam = np.concatenate([lam0, lam123], axis=-1)
    g123 = np.swapaxes(einv, -1, -2)  # (..., 3, 3) rows are gradients
    g0 = -g123.sum(axis=-2, keepdims=True)
    grads = np.concatenate([g0, g123], axis=-2)
    return lam, grads


def eval_basis_batch(tet_verts, x):
    """P2 basis values, gradients and Hessians, batched.

    tet_verts (..., 4, 3) and x (..., q, 3) give values (..., q, 10),
    gradients (..., q, 10, 3) and per-tet Hessians (..., 10, 3, 3).
    """
    lam, g = _barycentric(np.asarray(tet_verts, float), np.asarray(x, float))
    q = lam.shape[-2]
    base = lam.shape[:-2]

    vals = np.empty(base + (q, 10))
    grads = np.empty(base + (q, 10, 3))
    hess = np.empty(base + (10, 3, 3))

    for i in range(4):
        li = lam[..., i]
        gi = g[..., i, :]
        vals[..., i] = li * (2.0 * li - 1.0)
        grads[..., i, :] = (4.0 * li - 1.0)[..., None] * gi[..., None, :]
        hess[..., i, :, :] = 4.0 * gi[..., :, None] * gi[..., None, :]
    for k, (i, j) in enumerate(_LOCAL_EDGES):
        li, lj = lam[..., i], lam[..., j]
        gi, gj = g[..., i, :], g[..., j, :]
        vals[..., 4 + k] = 4.0 * li * lj
        grads[..., 4 + k, :] = 4.0 * (
            li[..., None] * gj[..., None, :] + lj[..., None] * gi[..., None, :]
        )
        hess[..., 4 + k, :, :] = 4.0 * (
            gi[..., :, None] * gj[..., None, :] + gj[..., :, None] * gi[..., None, :]
        )
    return vals, grads, hess


def tet_basis_hessians(tet_verts):
    """Constant basis Hessians per tet: (..., 10, 3, 3)."""
    tet_verts = np.asarray(tet_verts, float)
    dummy = tet_verts[..., :1, :]  # one arbitrary point
    _, _, hess = eval_basis_batch(tet_verts, dummy)
    return hess


def eval_basis(tet_verts, x):
    """Basis data of a single tet at a single point.

    Returns (values (10,), gradients (10, 3), hessians (10, 3, 3)).
    """
    tet_verts = np.asarray(tet_verts, float)
    e = tet_verts[1:] - tet_verts[0]
    if abs(np.linalg.det(e)) < 1e-300:
        raise ValueError("degenerate tetrahedron")
    v, gr, h = eval_basis_batch(tet_verts[None], np.asarray(x, float)[None, None])
    return v[0, 0], gr[0, 0], h[0]


def mean_vector(space: P2Space, complex_: CutComplex, rule: QuadRule):
    """Coefficients of the surface-mean functional: c_i = int_Gh phi_i."""
    if rule.degree < 2:
        raise ValueError("mean vector needs a rule of degree >= 2")
    tv = space.tet_vertices
    c = np.zeros(space.ndof)
    pts_w = _polygon_quadrature(complex_, rule)
    for tri_pts, tri_w, poly_idx in pts_w:
        vals, _, _ = eval_basis_batch(tv[poly_idx], tri_pts)
        contrib = np.einsum("pq,pqd->pd", tri_w, vals)
        np.add.at(c, space.tet_dof_map[poly_idx], contrib)
    return c


def _polygon_quadrature(complex_: CutComplex, rule: QuadRule):
    """Quadrature over the fan triangles of all cut polygons.

    Yields (points (n, q, 3), weights (n, q), polygon indices (n,)) for the
    two fan triangles; the padded tail of triangular polygons has zero
    weight and contributes nothing.
    """
    v = complex_.poly_verts
    idx = np.arange(len(v))
    for tri in ((0, 1, 2), (0, 2, 3)):
        tv = v[:, tri, :]
        pts, wts = map_to_triangles(tv, rule)
        yield pts, wts, idx
