"""Assembly of the interior penalty forms and the load vector.

The operator is the sum of a surface form (Laplace-Beltrami products on
the cut polygons with symmetric consistency terms and a scaled co-normal
penalty on the surface edges) and a bulk facet stabilization penalizing
gradient and/or Hessian jumps across interior facets of the active mesh.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fespace import P2Space, eval_basis_batch, tet_basis_hessians, _polygon_quadrature
from .mesh import CutComplex
from .quadrature import gauss_segment, gauss_triangle, map_to_triangles

__all__ = [
    "FormParams",
    "assemble_a",
    "assemble_s",
    "assemble_rhs",
    "surface_laplace_matrix",
    "edge_matrices",
    "facet_jump_matrices",
    "export_matrix",
    "SURFACE_QUAD_DEGREE",
    "EDGE_QUAD_DEGREE",
]

SURFACE_QUAD_DEGREE = 6  # smooth non-polynomial data on the cut polygons
EDGE_QUAD_DEGREE = 3  # integrands degree <= 2, one extra degree of safety
GRAD_JUMP_DEGREE = 2  # products of linears, exact


@dataclass(frozen=True)
class FormParams:
    sigma: float
    gamma: float
    h: float
    variant: int = 0
    beta: float = 0.0

    def __post_init__(self):
        if self.sigma <= 0 or self.gamma <= 0:
            raise ValueError("penalty parameters must be positive")
        if self.variant not in (0, 1, 2):
            raise ValueError("variant must be 0, 1 or 2")
        if self.variant == 1 and self.beta <= 0:
            raise ValueError("variant 1 requires beta > 0")


ASSEMBLY_CHUNK = 32768  # entities per local-block batch, bounds peak memory


def _accumulate(ndof, rows, cols, data):
    mat = sp.coo_matrix(
        (data.ravel(), (rows.ravel(), cols.ravel())), shape=(ndof, ndof)
    ).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()
    return mat


def _pair_indices(dof_a, dof_b=None):
    """COO index arrays for dense local blocks over (possibly paired) dofs."""
    if dof_b is None:
        dof_b = dof_a
    rows = np.repeat(dof_a, dof_b.shape[1], axis=1)
    cols = np.tile(dof_b, (1, dof_a.shape[1]))
    return rows, cols


def _poly_laplace_rows(space: P2Space, complex_: CutComplex):
    """Per-polygon row vectors b with b_k = P_h : hess(basis_k), (na, 10)."""
    hess = tet_basis_hessians(space.tet_vertices)  # (na, 10, 3, 3)
    n = complex_.poly_normal
    lap = np.einsum("adii->ad", hess) - np.einsum(
        "ai,adij,aj->ad", n, hess, n
    )
    return lap, hess


def surface_laplace_matrix(space: P2Space, complex_: CutComplex):
    """(Delta_Gh v, Delta_Gh w) over the cut polygons (constant per polygon)."""
    lap, _ = _poly_laplace_rows(space, complex_)
    local = complex_.poly_area[:, None, None] * lap[:, :, None] * lap[:, None, :]
    rows, cols = _pair_indices(space.tet_dof_map)
    return _accumulate(space.ndof, rows, cols, local)


def edge_matrices(space: P2Space, complex_: CutComplex):
    """Edge penalty and consistency matrices over the surface edges.

    Returns (penalty, consistency) where penalty discretizes
    (mu . [grad_Gh v], mu . [grad_Gh w]) and consistency discretizes
    ({Delta_Gh v}, mu . [grad_Gh w]); neither carries a scaling factor.
    """
    ndof = space.ndof
    dof = space.tet_dof_map
    lap, _ = _poly_laplace_rows(space, complex_)

    ne = len(complex_.edge_points)
    if ne == 0:
        empty = sp.csr_matrix((ndof, ndof))
        return empty, empty
    rule = gauss_segment(EDGE_QUAD_DEGREE)
    qp = rule.points
    if np.any(complex_.edge_poly_plus < 0) or np.any(complex_.edge_poly_minus < 0):
        raise ValueError("surface edge with missing neighbor polygon")

    def tangential(g, n):
        return g - np.einsum("eqdj,ej->eqd", g, n)[..., None] * n[:, None, None, :]

    pen_total = sp.csr_matrix((ndof, ndof))
    cons_total = sp.csr_matrix((ndof, ndof))
    for lo in range(0, ne, ASSEMBLY_CHUNK):
        sl = slice(lo, lo + ASSEMBLY_CHUNK)
        ep = complex_.edge_points[sl]
        pts = (
            ep[:, 0, None, :]
            + qp[None, :, None] * (ep[:, 1] - ep[:, 0])[:, None, :]
        )  # (e, q, 3)
        w = complex_.edge_length[sl, None] * rule.weights[None, :]

        pl, mi = complex_.edge_poly_plus[sl], complex_.edge_poly_minus[sl]
        _, gp, _ = eval_basis_batch(space.tet_vertices[pl], pts)  # (e, q, 10, 3)
        _, gm, _ = eval_basis_batch(space.tet_vertices[mi], pts)

        mu = complex_.edge_mu[sl]
        jp = np.einsum("eqdj,ej->eqd", tangential(gp, complex_.poly_normal[pl]), mu)
        jm = np.einsum("eqdj,ej->eqd", tangential(gm, complex_.poly_normal[mi]), mu)
        jump = np.concatenate([jp, -jm], axis=2)  # (e, q, 20)

        avg = 0.5 * np.concatenate([lap[pl], lap[mi]], axis=1)  # (e, 20), const on E

        pen = np.einsum("eq,eqa,eqb->eab", w, jump, jump)
        jw = np.einsum("eq,eqa->ea", w, jump)
        cons = avg[:, :, None] * jw[:, None, :]

        dpair = np.concatenate([dof[pl], dof[mi]], axis=1)
        rows, cols = _pair_indices(dpair)
        pen_total += _accumulate(ndof, rows, cols, pen)
        cons_total += _accumulate(ndof, rows, cols, cons)
    return pen_total, cons_total


def assemble_a(space: P2Space, complex_: CutComplex, params: FormParams):
    """The surface C0 interior penalty form (consistency + edge penalty)."""
    surf = surface_laplace_matrix(space, complex_)
    pen, cons = edge_matrices(space, complex_)
    return surf - cons - cons.T + (params.sigma / params.h) * pen


def facet_jump_matrices(space: P2Space, complex_: CutComplex):
    """Gradient-jump and Hessian-jump penalty matrices over interior facets.

    Jumps are of the full Euclidean gradient and Hessian, contracted with
    the Frobenius inner product; no scaling factors applied.
    """
    ndof = space.ndof
    dof = space.tet_dof_map
    mesh = complex_.background
    hess = tet_basis_hessians(space.tet_vertices)  # (na, 10, 3, 3)
    rule = gauss_triangle(GRAD_JUMP_DEGREE)

    grad_total = sp.csr_matrix((ndof, ndof))
    hess_total = sp.csr_matrix((ndof, ndof))
    nf = len(complex_.facet_verts)
    for lo in range(0, nf, ASSEMBLY_CHUNK):
        sl = slice(lo, lo + ASSEMBLY_CHUNK)
        fp, fm = complex_.facet_tet_plus[sl], complex_.facet_tet_minus[sl]
        hj = np.concatenate([hess[fp], -hess[fm]], axis=1)  # (f, 20, 3, 3)
        hess_local = complex_.facet_area[sl, None, None] * np.einsum(
            "faij,fbij->fab", hj, hj
        )

        fv = mesh.vertices[complex_.facet_verts[sl]]  # (f, 3, 3)
        pts, wts = map_to_triangles(fv, rule)
        _, gp, _ = eval_basis_batch(space.tet_vertices[fp], pts)
        _, gm, _ = eval_basis_batch(space.tet_vertices[fm], pts)
        gj = np.concatenate([gp, -gm], axis=2)  # (f, q, 20, 3)
        grad_local = np.einsum("fq,fqaj,fqbj->fab", wts, gj, gj)

        dpair = np.concatenate([dof[fp], dof[fm]], axis=1)
        rows, cols = _pair_indices(dpair)
        grad_total += _accumulate(ndof, rows, cols, grad_local)
        hess_total += _accumulate(ndof, rows, cols, hess_local)
    return grad_total, hess_total


def assemble_s(space: P2Space, complex_: CutComplex, params: FormParams):
    """Facet stabilization: jump penalties across interior facets.

    variant 0: gamma * (gradient jumps + Hessian jumps)
    variant 1: beta/h^2 * gradient jumps + gamma * Hessian jumps
    variant 2: gamma * Hessian jumps only
    """
    grad_mat, hess_mat = facet_jump_matrices(space, complex_)
    if params.variant == 0:
        return params.gamma * (grad_mat + hess_mat)
    if params.variant == 1:
        return (params.beta / params.h**2) * grad_mat + params.gamma * hess_mat
    return params.gamma * hess_mat


def assemble_rhs(space: P2Space, complex_: CutComplex, f, chunk=8192):
    """Load vector b_i = int_Gh f phi_i with high-order surface quadrature.

    Polygons are processed in chunks: evaluating the source through its
    nested-jet definition is vectorized but memory-hungry.
    """
    b = np.zeros(space.ndof)
    tv = space.tet_vertices
    rule = gauss_triangle(SURFACE_QUAD_DEGREE)
    for pts, wts, idx in _polygon_quadrature(complex_, rule):
        nz = np.any(wts > 0, axis=1)
        pts, wts, idx = pts[nz], wts[nz], idx[nz]
        for lo in range(0, len(idx), chunk):
            cp, cw, ci = pts[lo : lo + chunk], wts[lo : lo + chunk], idx[lo : lo + chunk]
            if not len(ci):
                continue
            fv = f.value(cp.reshape(-1, 3)).reshape(cp.shape[:2])
            vals, _, _ = eval_basis_batch(tv[ci], cp)
            contrib = np.einsum("pq,pq,pqd->pd", cw, fv, vals)
            np.add.at(b, space.tet_dof_map[ci], contrib)
    return b


def export_matrix(mat, path):
    """Coordinate-format text dump (``i j value``, 17 significant digits)."""
    coo = sp.coo_matrix(mat)
    with open(path, "w") as fh:
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")
