"""Quadrature rules on triangles and line segments.

Triangle rules are stored in barycentric coordinates with weights summing
to one; the physical element area scales the result.  Segment rules live on
the parameter interval [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TriangleRule:
    """Quadrature rule on the reference triangle, barycentric points."""

    points: np.ndarray  # (nq, 3) barycentric coordinates
    weights: np.ndarray  # (nq,), sums to 1
    degree: int


@dataclass(frozen=True)
class SegmentRule:
    """Gauss rule on [0, 1]."""

    points: np.ndarray  # (nq,) parameters in [0, 1]
    weights: np.ndarray  # (nq,), sums to 1
    degree: int


def triangle_rule(degree: int) -> TriangleRule:
    """Return a symmetric triangle rule exact to the requested degree.

    Supported degrees: 1 (centroid), 2 (3 interior points), 5 (7 points).
    Higher requests fall back to the degree-5 rule capped check.
    """
    if degree <= 1:
        pts = np.array([[1.0, 1.0, 1.0]]) / 3.0
        w = np.array([1.0])
        return TriangleRule(pts, w, 1)
    if degree <= 2:
        pts = np.array(
            [
                [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
                [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
                [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
            ]
        )
        w = np.full(3, 1.0 / 3.0)
        return TriangleRule(pts, w, 2)
    if degree <= 5:
        s15 = np.sqrt(15.0)
        a = (6.0 - s15) / 21.0
        b = (6.0 + s15) / 21.0
        wa = (155.0 - s15) / 1200.0
        wb = (155.0 + s15) / 1200.0
        pts = [[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]]
        w = [9.0 / 40.0]
        for c, wc in ((a, wa), (b, wb)):
            pts += [
                [1.0 - 2.0 * c, c, c],
                [c, 1.0 - 2.0 * c, c],
                [c, c, 1.0 - 2.0 * c],
            ]
            w += [wc, wc, wc]
        return TriangleRule(np.array(pts), np.array(w), 5)
    raise ValueError(f"no triangle rule of degree {degree} available")


def segment_rule(n_points: int = 2) -> SegmentRule:
    """Gauss-Legendre rule with ``n_points`` nodes mapped to [0, 1]."""
    if n_points < 1:
        raise ValueError("segment rule needs at least one point")
    x, w = np.polynomial.legendre.leggauss(n_points)
    return SegmentRule(0.5 * (x + 1.0), 0.5 * w, 2 * n_points - 1)


def triangle_area(tri: np.ndarray) -> float:
    """Signed area of a triangle given as a (3, 2) array."""
    (x0, y0), (x1, y1), (x2, y2) = tri
    return 0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))


def integrate_triangle(rule: TriangleRule, tri, g) -> float:
    """Integrate a scalar field ``g(x, y)`` over one triangle."""
    tri = np.asarray(tri, dtype=float)
    area = triangle_area(tri)
    if area == 0.0:
        raise ValueError("degenerate triangle")
    pts = rule.points @ tri  # (nq, 2)
    vals = g(pts[:, 0], pts[:, 1])
    return abs(area) * float(np.dot(rule.weights, vals))


def integrate_segment(rule: SegmentRule, a, b, g) -> float:
    """Integrate a scalar field ``g(x, y)`` along the segment a->b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.hypot(*(b - a)))
    if length == 0.0:
        raise ValueError("zero-length segment")
    pts = a[None, :] + rule.points[:, None] * (b - a)[None, :]
    vals = g(pts[:, 0], pts[:, 1])
    return length * float(np.dot(rule.weights, vals))
