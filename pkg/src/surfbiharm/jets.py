"""Second-order forward-mode Taylor (jet) arithmetic in three variables.

A :class:`Jet2` carries a value, a 3-component gradient and a symmetric
3x3 Hessian.  The coefficients may be floats, numpy arrays (for batched
evaluation over many points) or other ``Jet2`` instances, which makes the
arithmetic nestable: evaluating a jet-valued expression on jet-valued
inputs yields derivatives of derivatives.  This is how fourth- and
higher-order derivatives of composite fields (e.g. a Laplacian of a
Laplacian through a closest-point map) are obtained without any
hand-derived formulas.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Jet2",
    "seed",
    "seed_point",
    "jsqrt",
    "jexp",
    "jcos",
    "jsin",
    "laplacian",
    "hessian_trace",
]


def _zero_like(x):
    if isinstance(x, Jet2):
        return x * 0.0
    return x * 0.0


class Jet2:
    """Truncated second-order Taylor expansion of a scalar in 3 variables."""

    __slots__ = ("val", "grad", "hess")

    # Make ndarray <op> Jet2 defer to the reflected Jet2 operator instead of
    # broadcasting element-wise into an object array.
    __array_ufunc__ = None

    def __init__(self, val, grad, hess):
        self.val = val
        self.grad = grad  # list of 3 coefficients
        self.hess = hess  # 3x3 nested list, symmetric

    @staticmethod
    def constant(v):
        z = _zero_like(v) if not np.isscalar(v) else 0.0 * v
        return Jet2(v, [z, z, z], [[z, z, z], [z, z, z], [z, z, z]])

    # -- ring operations -------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.val + other, list(self.grad), [list(r) for r in self.hess])
        return Jet2(
            self.val + other.val,
            [self.grad[i] + other.grad[i] for i in range(3)],
            [[self.hess[i][j] + other.hess[i][j] for j in range(3)] for i in range(3)],
        )

    __radd__ = __add__

    def __neg__(self):
        return Jet2(
            -self.val,
            [-g for g in self.grad],
            [[-h for h in row] for row in self.hess],
        )

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet2) else -1.0 * other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(
                self.val * other,
                [g * other for g in self.grad],
                [[h * other for h in row] for row in self.hess],
            )
        a, b = self, other
        val = a.val * b.val
        grad = [a.grad[i] * b.val + a.val * b.grad[i] for i in range(3)]
        hess = [
            [
                a.hess[i][j] * b.val
                + a.grad[i] * b.grad[j]
                + a.grad[j] * b.grad[i]
                + a.val * b.hess[i][j]
                for j in range(3)
            ]
            for i in range(3)
        ]
        return Jet2(val, grad, hess)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet2):
            return self * (1.0 / other)
        return self * other._reciprocal()

    def __rtruediv__(self, other):
        return self._reciprocal() * other

    def _reciprocal(self):
        inv = 1.0 / self.val
        return self._compose(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __pow__(self, n):
        if n == 2:
            return self * self
        if n == 3:
            return self * self * self
        p = float(n)
        f0 = self.val ** p
        f1 = p * self.val ** (p - 1.0)
        f2 = p * (p - 1.0) * self.val ** (p - 2.0)
        return self._compose(f0, f1, f2)

    # -- univariate composition (chain rule to second order) -------------

    def _compose(self, f0, f1, f2):
        grad = [f1 * g for g in self.grad]
        hess = [
            [f2 * self.grad[i] * self.grad[j] + f1 * self.hess[i][j] for j in range(3)]
            for i in range(3)
        ]
        return Jet2(f0, grad, hess)


def _dispatch(x, plain, deriv):
    """Apply a univariate function to a jet (recursively) or a plain value."""
    if isinstance(x, Jet2):
        f0, f1, f2 = deriv(x.val)
        return x._compose(f0, f1, f2)
    return plain(x)


def jsqrt(x):
    def deriv(v):
        s = jsqrt(v)
        return s, 0.5 / s, -0.25 / (s * v)

    return _dispatch(x, np.sqrt, deriv)


def jexp(x):
    def deriv(v):
        e = jexp(v)
        return e, e, e

    return _dispatch(x, np.exp, deriv)


def jcos(x):
    def deriv(v):
        c, s = jcos(v), jsin(v)
        return c, -s, -c

    return _dispatch(x, np.cos, deriv)


def jsin(x):
    def deriv(v):
        c, s = jcos(v), jsin(v)
        return s, c, -s

    return _dispatch(x, np.sin, deriv)


# -- seeding -------------------------------------------------------------


def seed(x0, x1, x2):
    """Seed three coordinates as independent jet variables.

    The coordinate values may be floats, arrays or jets; in the latter
    case the result supports nested differentiation.
    """
    out = []
    for k, c in enumerate((x0, x1, x2)):
        grad = [1.0 if i == k else 0.0 for i in range(3)]
        hess = [[0.0] * 3 for _ in range(3)]
        out.append(Jet2(c, grad, hess))
    return tuple(out)


def seed_point(x):
    """Seed a batch of points, shape (n, 3), as jet variables."""
    x = np.asarray(x, dtype=float)
    return seed(x[..., 0], x[..., 1], x[..., 2])


def hessian_trace(jet):
    return jet.hess[0][0] + jet.hess[1][1] + jet.hess[2][2]


def laplacian(expr, x0, x1, x2):
    """Euclidean Laplacian of ``expr(x0, x1, x2)`` via one extra jet level.

    The coordinates may themselves be jets, in which case the returned
    Laplacian is a jet and carries its own derivatives.
    """
    j0, j1, j2 = seed(x0, x1, x2)
    return hessian_trace(expr(j0, j1, j2))
