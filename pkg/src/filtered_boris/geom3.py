"""Exact 3-vector helpers and a fixed-size 3x3 solver.

Vectors are plain ``numpy`` arrays of shape ``(3,)``; matrices have shape
``(3, 3)``. Skew matrices are never built except where a dense solve is
unavoidable: ``hat_apply(B, v)`` is ``B x v``.
"""
import math

import numpy as np

from .errors import SingularMatrix

__all__ = ["vec3", "cross", "dot", "norm", "hat_apply", "hat_matrix", "solve3"]


def vec3(x, y=None, z=None):
    """Build a finite float64 3-vector from three scalars or one sequence."""
    if y is None and z is None:
        a = np.array(x, dtype=float).reshape(3)
    else:
        a = np.array((x, y, z), dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite vector component: {a}")
    return a


def cross(a, b):
    """Right-handed cross product ``a x b``."""
    a0, a1, a2 = a
    b0, b1, b2 = b
    return np.array((a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0))


def dot(a, b):
    return float(a[0] * b[0] + a[1] * b[1] + a[2] * b[2])


def norm(a):
    return math.sqrt(dot(a, a))


def hat_apply(B, v):
    """Apply the skew matrix of ``B`` to ``v``; equals ``B x v = -(v x B)``."""
    return cross(B, v)


def hat_matrix(B):
    b1, b2, b3 = B
    return np.array(((0.0, -b3, b2), (b3, 0.0, -b1), (-b2, b1, 0.0)))


def solve3(A, rhs):
    """Solve ``A s = rhs`` for a 3x3 ``A`` by Gaussian elimination with partial pivoting.

    Raises
    ------
    SingularMatrix
        If ``|det A| <= 1e-13 * (max row norm)**3``.
    """
    M = np.array(A, dtype=float)
    r = np.array(rhs, dtype=float)
    scale = max(norm(M[i]) for i in range(3))
    deg_tol = 1e-13 * scale**3
    det = 1.0
    for col in range(3):
        p = col + int(np.argmax(np.abs(M[col:, col])))
        if p != col:
            M[[col, p]] = M[[p, col]]
            r[[col, p]] = r[[p, col]]
            det = -det
        pivot = M[col, col]
        det *= pivot
        if pivot == 0.0:
            break
        for row in range(col + 1, 3):
            f = M[row, col] / pivot
            if f != 0.0:
                M[row, col:] -= f * M[col, col:]
                r[row] -= f * r[col]
    if not abs(det) > deg_tol:
        raise SingularMatrix(f"|det A| = {abs(det):.3g} <= {deg_tol:.3g}")
    s = np.empty(3)
    s[2] = r[2] / M[2, 2]
    s[1] = (r[1] - M[1, 2] * s[2]) / M[1, 1]
    s[0] = (r[0] - M[0, 1] * s[1] - M[0, 2] * s[2]) / M[0, 0]
    return s
