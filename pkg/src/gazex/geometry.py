"""Planar angle and frame conventions.

Angles are yaw in degrees, counter-clockwise from +x, wrapped to the
half-open interval (-180, 180].  Points are ``(x, y)`` in meters.
"""
import math

import numpy as np

from .errors import DegenerateLineError, InvalidInputError

MIN_WALKING_SPEED = 0.05  # m/s; below this the heading is held


def wrap_angle(theta):
    """Wrap degrees into (-180, 180].

    Works on scalars and arrays.  Uses ``fmod`` plus Sterbenz-exact
    corrections, so the result is exact and ``wrap_angle`` is idempotent.
    """
    arr = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("angle must be finite")
    r = np.fmod(arr, 360.0)
    r = np.where(r > 180.0, r - 360.0, r)
    r = np.where(r <= -180.0, r + 360.0, r)
    r = r + 0.0  # drop negative zero
    if np.ndim(theta) == 0:
        return float(r)
    return r


def angle_diff(a, b):
    """Wrapped ``a - b`` in degrees; NaN propagates."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    out = np.full(np.shape(d), np.nan)
    ok = np.isfinite(d)
    out[ok] = wrap_angle(d[ok])
    if np.ndim(out) == 0:
        return float(out)
    return out


def vislet_of(theta):
    """Unit-circle point ``(cos, sin)`` for an angle in degrees.

    Vectorised: an array of ``n`` angles gives an ``(n, 2)`` array.
    """
    rad = np.radians(np.asarray(theta, dtype=float))
    v = np.stack([np.cos(rad), np.sin(rad)], axis=-1)
    if np.ndim(theta) == 0:
        return float(v[0]), float(v[1])
    return v


def heading_from_velocity(v, fallback):
    """Direction of travel in degrees, or ``fallback`` when nearly standing."""
    vx, vy = float(v[0]), float(v[1])
    if math.hypot(vx, vy) >= MIN_WALKING_SPEED:
        return wrap_angle(math.degrees(math.atan2(vy, vx)))
    return wrap_angle(fallback)


def walking_direction(velocities, initial):
    """Per-frame heading with hold-last semantics during standstill.

    ``initial`` is used until the first frame with enough speed.
    """
    velocities = np.asarray(velocities, dtype=float)
    out = np.empty(len(velocities))
    last = wrap_angle(initial)
    for i, v in enumerate(velocities):
        last = heading_from_velocity(v, last)
        out[i] = last
    return out


def lateral_offset(p, a, b):
    """Signed perpendicular distance from ``p`` to the line ``a -> b``.

    Positive on the left of the direction of travel.  ``p`` may be a single
    point or an ``(n, 2)`` array.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    norm = math.hypot(d[0], d[1])
    if norm == 0.0:
        raise DegenerateLineError("line endpoints coincide")
    q = np.asarray(p, dtype=float) - a
    off = (d[0] * q[..., 1] - d[1] * q[..., 0]) / norm
    if np.ndim(off) == 0:
        return float(off)
    return off


def unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise DegenerateLineError("zero-length direction")
    return v / n
