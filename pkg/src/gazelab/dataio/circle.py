"""Minimum enclosing circle of a 2-D point set (Welzl's algorithm)."""

from __future__ import annotations

import numpy as np

from ..seeding import rng

_EPS = 1e-9


def _circle_two(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    center = (a + b) / 2.0
    return center, float(np.linalg.norm(a - center))


def _circle_three(a: np.ndarray, b: np.ndarray, c: np.ndarray):
    # Circumscribed circle; returns None for (near-)collinear triples.
    d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
    if abs(d) < 1e-14:
        return None
    ax2, bx2, cx2 = (a * a).sum(), (b * b).sum(), (c * c).sum()
    ux = (ax2 * (b[1] - c[1]) + bx2 * (c[1] - a[1]) + cx2 * (a[1] - b[1])) / d
    uy = (ax2 * (c[0] - b[0]) + bx2 * (a[0] - c[0]) + cx2 * (b[0] - a[0])) / d
    center = np.array([ux, uy])
    return center, float(np.linalg.norm(a - center))


def _covers(center: np.ndarray, radius: float, p: np.ndarray) -> bool:
    return float(np.linalg.norm(p - center)) <= radius + _EPS


def _circle_from_boundary(boundary: list[np.ndarray]):
    if not boundary:
        return np.zeros(2), 0.0
    if len(boundary) == 1:
        return boundary[0].copy(), 0.0
    if len(boundary) == 2:
        return _circle_two(boundary[0], boundary[1])
    circ = _circle_three(*boundary)
    if circ is None:
        # Collinear boundary: widest pair diameter still covers all three.
        best = None
        for i in range(3):
            for j in range(i + 1, 3):
                c, r = _circle_two(boundary[i], boundary[j])
                if all(_covers(c, r, p) for p in boundary) and (
                    best is None or r < best[1]
                ):
                    best = (c, r)
        return best
    return circ


def min_enclosing_circle(points) -> tuple[tuple[float, float], float]:
    """Smallest circle containing all given points.

    Parameters
    ----------
    points:
        Iterable of at least two finite (x, y) pairs.

    Returns
    -------
    ((cx, cy), radius) such that every input point lies within
    radius + 1e-9 of the center.
    """
    pts = np.asarray(list(points), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ValueError("min_enclosing_circle needs >= 2 two-dimensional points")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")

    # Iterative move-to-front Welzl with a seeded shuffle for its expected
    # linear running time; the shuffle does not change the result.
    order = rng("mec", pts.shape[0]).permutation(pts.shape[0])
    pts = pts[order]

    center, radius = _circle_from_boundary([pts[0], pts[1]])
    for i in range(2, len(pts)):
        if _covers(center, radius, pts[i]):
            continue
        center, radius = _circle_from_boundary([pts[i]])
        for j in range(i):
            if _covers(center, radius, pts[j]):
                continue
            center, radius = _circle_two(pts[i], pts[j])
            for k in range(j):
                if _covers(center, radius, pts[k]):
                    continue
                circ = _circle_from_boundary([pts[i], pts[j], pts[k]])
                if circ is not None:
                    center, radius = circ
    return (float(center[0]), float(center[1])), float(radius)
