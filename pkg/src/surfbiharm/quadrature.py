"""Gauss rules on the unit segment and reference triangle, and polygon
integration by fan triangulation."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

__all__ = ["QuadRule", "gauss_segment", "gauss_triangle", "integrate_polygon",
           "map_to_triangles"]


@dataclass(frozen=True)
class QuadRule:
    """Reference-element quadrature nodes and weights.

    Segment rules live on [0, 1]; triangle rules use the first two
    barycentric-style coordinates (x, y) on the reference triangle
    {x, y >= 0, x + y <= 1} with weights summing to 1/2.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int


@lru_cache(maxsize=None)
def gauss_segment(degree: int) -> QuadRule:
    """Gauss-Legendre rule on [0, 1] exact for polynomials of the degree."""
    if degree < 0 or degree > 11:
        raise ValueError(f"unsupported segment degree {degree}")
    npts = (degree + 2) // 2
    x, w = np.polynomial.legendre.leggauss(npts)
    return QuadRule(points=0.5 * (x + 1.0), weights=0.5 * w, degree=degree)


@lru_cache(maxsize=None)
def gauss_triangle(degree: int) -> QuadRule:
    """Positive-weight rule on the reference triangle.

    Degrees 1 and 2 use the classical symmetric rules; higher degrees use
    the conical product of a Gauss-Jacobi and a Gauss-Legendre rule
    (collapsed-square construction), which is exact for the stated degree
    with all weights positive.
    """
    if degree == 1:
        pts = np.array([[1.0 / 3.0, 1.0 / 3.0]])
        wts = np.array([0.5])
    elif degree == 2:
        pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
        wts = np.array([1 / 6, 1 / 6, 1 / 6])
    elif degree in (4, 6, 8):
        n = degree // 2 + 1
        # x = a (1 - b), y = b with Jacobi(1,0) in b absorbing the Jacobian
        ga, wa = np.polynomial.legendre.leggauss(n)
        ga = 0.5 * (ga + 1.0)
        wa = 0.5 * wa
        gb, wb = roots_jacobi(n, 1.0, 0.0)
        gb = 0.5 * (gb + 1.0)
        wb = wb / 4.0  # scale Jacobi weight (1-x)/2 onto [0,1]
        A, B = np.meshgrid(ga, gb, indexing="ij")
        WA, WB = np.meshgrid(wa, wb, indexing="ij")
        pts = np.stack([(A * (1.0 - B)).ravel(), B.ravel()], axis=1)
        wts = (WA * WB).ravel()
    else:
        raise ValueError(f"unsupported triangle degree {degree}")
    return QuadRule(points=pts, weights=wts, degree=degree)


def map_to_triangles(tri_verts, rule: QuadRule):
    """Physical quadrature points and weights for triangles in R^3.

    tri_verts: (n, 3, 3).  Returns points (n, q, 3) and weights (n, q);
    weights already include the area Jacobian (2 * area).
    """
    tri_verts = np.asarray(tri_verts, dtype=float)
    v0 = tri_verts[:, 0]
    e1 = tri_verts[:, 1] - v0
    e2 = tri_verts[:, 2] - v0
    r = rule.points
    pts = (
        v0[:, None, :]
        + r[None, :, 0, None] * e1[:, None, :]
        + r[None, :, 1, None] * e2[:, None, :]
    )
    jac = np.linalg.norm(np.cross(e1, e2), axis=1)  # = 2 * area
    wts = jac[:, None] * rule.weights[None, :]
    return pts, wts


def _fan(polygon_vertices):
    v = np.asarray(polygon_vertices, dtype=float)
    return np.stack(
        [np.stack([v[0], v[k], v[k + 1]]) for k in range(1, len(v) - 1)]
    )


def integrate_polygon(polygon, integrand, rule: QuadRule) -> float:
    """Integral of a pointwise function over a planar cut polygon.

    The polygon is fan-triangulated from its first vertex; exact for
    polynomial integrands up to the rule degree.
    """
    verts = np.asarray(polygon.vertices, dtype=float)
    if len(verts) not in (3, 4):
        raise ValueError("polygon must have 3 or 4 vertices")
    tris = _fan(verts)
    pts, wts = map_to_triangles(tris, rule)
    vals = np.asarray([integrand(p) for p in pts.reshape(-1, 3)])
    return float(np.sum(wts.ravel() * vals))
