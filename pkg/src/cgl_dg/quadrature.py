"""Quadrature on the reference triangle and reference segment.

Triangle rules are collapsed (Duffy) tensor products of Gauss-Legendre and
Gauss-Jacobi points, so any exactness degree up to ``MAX_DEGREE`` is
available with positive weights and interior points.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 40


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights on a reference domain.

    For the triangle ``points`` has shape (nq, 2) and lives on
    ``{(x, y): x, y >= 0, x + y <= 1}``; for the segment it has shape
    (nq,) on ``[0, 1]``.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self) -> int:
        return self.weights.size


def _check(degree: int) -> int:
    degree = int(degree)
    if degree < 0 or degree > MAX_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree} (0..{MAX_DEGREE})")
    return degree


@lru_cache(maxsize=None)
def edge_rule(degree: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1], exact to ``degree``."""
    degree = _check(degree)
    k = degree // 2 + 1
    t, w = np.polynomial.legendre.leggauss(k)
    pts = 0.5 * (t + 1.0)
    wts = 0.5 * w
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(pts, wts, degree)


@lru_cache(maxsize=None)
def volume_rule(degree: int) -> QuadratureRule:
    """Collapsed Gauss rule on the reference triangle, exact to ``degree``."""
    degree = _check(degree)
    k = degree // 2 + 1
    t, wx = np.polynomial.legendre.leggauss(k)
    s, wy = roots_jacobi(k, 1.0, 0.0)
    u = 0.5 * (t + 1.0)
    v = 0.5 * (s + 1.0)
    # x = u (1 - v), y = v, dx dy = (1 - v) du dv; the (1 - v) sits in the Jacobi weight
    U, V = np.meshgrid(u, v, indexing="ij")
    pts = np.column_stack([(U * (1.0 - V)).ravel(), V.ravel()])
    wts = np.outer(0.5 * wx, 0.25 * wy).ravel()
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(pts, wts, degree)
