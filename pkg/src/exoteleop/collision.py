"""Capsule collision primitives.

Arm links are wrapped in capsules (swept spheres).  The signed distance
between two capsules is the distance between their core segments minus the
radius sum; negative values mean penetration.  Degenerate segments (zero
length) reduce to spheres and are handled by the same closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidRangeError, SchemaError

_EPS = 1e-12


@dataclass(frozen=True)
class Capsule:
    """Swept sphere: segment from ``a`` to ``b`` with the given radius."""

    a: np.ndarray
    b: np.ndarray
    radius: float

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if a.shape != (3,) or b.shape != (3,):
            raise SchemaError("capsule endpoints must be 3-vectors")
        if not (self.radius > 0.0):
            raise InvalidRangeError(f"capsule radius must be > 0, got {self.radius}")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def z_min(self) -> float:
        return float(min(self.a[2], self.b[2])) - self.radius


def segment_closest_points(p1, q1, p2, q2):
    """Closest points between segments [p1,q1] and [p2,q2].

    Clamped-quadratic solver; exact for all non-degenerate segments and
    stable for point-degenerate ones.  Returns (c1, c2).
    """
    p1 = np.asarray(p1, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    q2 = np.asarray(q2, dtype=np.float64)
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = float(np.dot(d1, d1))
    e = float(np.dot(d2, d2))
    f = float(np.dot(d2, r))

    if a <= _EPS and e <= _EPS:
        return p1, p2
    if a <= _EPS:
        t = np.clip(f / e, 0.0, 1.0)
        return p1, p2 + t * d2
    c = float(np.dot(d1, r))
    if e <= _EPS:
        s = np.clip(-c / a, 0.0, 1.0)
        return p1 + s * d1, p2

    b = float(np.dot(d1, d2))
    denom = a * e - b * b
    if denom > _EPS:
        s = np.clip((b * f - c * e) / denom, 0.0, 1.0)
    else:
        s = 0.0  # parallel: pick one end, then re-clamp below
    t = (b * s + f) / e
    if t < 0.0:
        t = 0.0
        s = np.clip(-c / a, 0.0, 1.0)
    elif t > 1.0:
        t = 1.0
        s = np.clip((b - c) / a, 0.0, 1.0)
    return p1 + s * d1, p2 + t * d2


def segment_distance(p1, q1, p2, q2) -> float:
    c1, c2 = segment_closest_points(p1, q1, p2, q2)
    return float(np.linalg.norm(c1 - c2))


def capsule_distance(c1: Capsule, c2: Capsule) -> float:
    """Signed clearance between two capsules; negative means penetration."""
    return segment_distance(c1.a, c1.b, c2.a, c2.b) - c1.radius - c2.radius


def point_segment_distance(point, a, b) -> float:
    """Distance from a point to segment [a, b] (any dimension)."""
    point = np.asarray(point, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = b - a
    dd = float(np.dot(d, d))
    if dd <= _EPS:
        return float(np.linalg.norm(point - a))
    t = np.clip(float(np.dot(point - a, d)) / dd, 0.0, 1.0)
    return float(np.linalg.norm(point - (a + t * d)))


def point_in_capsule(point, cap: Capsule) -> bool:
    return point_segment_distance(point, cap.a, cap.b) <= cap.radius


def points_segment_distance_2d(points: np.ndarray, a, b) -> np.ndarray:
    """Vectorized 2-D point-to-segment distances for ball pushing.

    Args:
        points: (n, 2) array of ball centers.
        a, b: segment endpoints, 2-vectors.

    Returns:
        (n,) distances.
    """
    points = np.asarray(points, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = b - a
    dd = float(np.dot(d, d))
    if dd <= _EPS:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ d / dd, 0.0, 1.0)
    closest = a + t[:, None] * d
    return np.linalg.norm(points - closest, axis=1)
