"""Quadrature rules on the reference triangle and the unit interval.

Reference triangle: vertices (0, 0), (1, 0), (0, 1), area 1/2.
Reference interval: [0, 1].
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

MAX_TRIANGLE_DEGREE = 6
MAX_INTERVAL_DEGREE = 9


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int
    domain: str

    def __len__(self):
        return len(self.weights)


def _interval(degree):
    npts = max(1, (degree + 2) // 2)
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def _collapsed_triangle(degree):
    # Gauss-Legendre in the collapsed direction, Gauss-Jacobi (weight 1-v)
    # in the other; exact for total degree 2k-1.
    k = max(1, (degree + 2) // 2)
    u, wu = np.polynomial.legendre.leggauss(k)
    u, wu = 0.5 * (u + 1.0), 0.5 * wu
    v, wv = roots_jacobi(k, 1.0, 0.0)
    v, wv = 0.5 * (v + 1.0), 0.25 * wv
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ww = np.outer(wu, wv)
    pts = np.column_stack([(uu * (1.0 - vv)).ravel(), vv.ravel()])
    return pts, ww.ravel()


def quadrature(domain, degree):
    """Return a rule on ``"triangle"`` or ``"interval"`` exact to ``degree``.

    Triangle degree 0 and 1 use the centroid, degree 2 the three edge
    midpoints; higher degrees use collapsed Gauss rules.
    """
    degree = int(degree)
    if degree < 0:
        raise ValueError(f"quadrature degree must be nonnegative, got {degree}")
    if domain == "interval":
        if degree > MAX_INTERVAL_DEGREE:
            raise ValueError(f"interval rules support degree <= {MAX_INTERVAL_DEGREE}")
        pts, w = _interval(degree)
        return QuadratureRule(pts, w, degree, domain)
    if domain == "triangle":
        if degree > MAX_TRIANGLE_DEGREE:
            raise ValueError(f"triangle rules support degree <= {MAX_TRIANGLE_DEGREE}")
        if degree <= 1:
            pts = np.array([[1.0 / 3.0, 1.0 / 3.0]])
            w = np.array([0.5])
        elif degree == 2:
            pts = np.array([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])
            w = np.full(3, 1.0 / 6.0)
        else:
            pts, w = _collapsed_triangle(degree)
        return QuadratureRule(pts, w, degree, domain)
    raise ValueError(f"unknown quadrature domain {domain!r}")
