"""Quadrature on the reference triangle and on edges."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@lru_cache(maxsize=None)
def triangle_rule(degree: int):
    """Conical-product (Stroud) rule exact for polynomials of ``degree``.

    Returns barycentric points ``(nq, 3)`` and weights summing to 1, so that
    the integral over T is ``|T| * sum(w * f(points))``.
    """
    degree = max(int(degree), 1)
    n = (degree + 2) // 2
    # Duffy map: x = s, y = (1 - s) t with Jacobian (1 - s)
    s, ws = roots_jacobi(n, 1.0, 0.0)   # weight (1 - s) on [-1, 1]
    t, wt = roots_legendre(n)
    s = 0.5 * (s + 1.0)
    ws = ws / 4.0
    t = 0.5 * (t + 1.0)
    wt = wt / 2.0
    S, Tt = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt) * 2.0           # reference area 1/2
    x = S.ravel()
    y = ((1.0 - S) * Tt).ravel()
    bary = np.stack([1.0 - x - y, x, y], axis=1)
    w = W.ravel()
    w.flags.writeable = False
    bary.flags.writeable = False
    return bary, w


@lru_cache(maxsize=None)
def edge_rule(npts: int = 2):
    """Gauss-Legendre points on [0, 1] and weights summing to 1."""
    x, w = roots_legendre(npts)
    return 0.5 * (x + 1.0), 0.5 * w
