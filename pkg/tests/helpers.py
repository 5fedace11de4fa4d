"""Reference computations the tests check the package against.

Everything here is deliberately brute force or closed form, and shares no
code path with the implementation under test.
"""

import math

import numpy as np


def box_surface_points(center, size, yaw_deg, step):
    """Dense world-frame grid covering all six faces of a yaw-rotated box."""
    hx, hy, hz = (s / 2.0 for s in size)

    def axis(h):
        n = max(int(math.ceil(2.0 * h / step)), 1)
        return np.linspace(-h, h, n + 1)

    xs, ys, zs = axis(hx), axis(hy), axis(hz)
    faces = []
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    for z in (-hz, hz):
        faces.append(np.stack([gx.ravel(), gy.ravel(), np.full(gx.size, z)], axis=1))
    gx, gz = np.meshgrid(xs, zs, indexing="ij")
    for y in (-hy, hy):
        faces.append(np.stack([gx.ravel(), np.full(gx.size, y), gz.ravel()], axis=1))
    gy, gz = np.meshgrid(ys, zs, indexing="ij")
    for x in (-hx, hx):
        faces.append(np.stack([np.full(gy.size, x), gy.ravel(), gz.ravel()], axis=1))
    local = np.concatenate(faces, axis=0)

    yaw = math.radians(yaw_deg)
    c, s = math.cos(yaw), math.sin(yaw)
    world = np.empty_like(local)
    world[:, 0] = c * local[:, 0] - s * local[:, 1] + center[0]
    world[:, 1] = s * local[:, 0] + c * local[:, 1] + center[1]
    world[:, 2] = local[:, 2] + center[2]
    return world


def point_in_box(point, center, size, yaw_deg):
    yaw = math.radians(yaw_deg)
    c, s = math.cos(yaw), math.sin(yaw)
    dx, dy, dz = (point[i] - center[i] for i in range(3))
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    hx, hy, hz = (v / 2.0 for v in size)
    return abs(lx) <= hx and abs(ly) <= hy and abs(dz) <= hz


def brute_force_signed_distance(point, center, size, yaw_deg, step=0.02):
    """Min distance to sampled surface points, negated for interior points.

    With grid pitch `step` the absolute error is at most step / sqrt(2).
    """
    surface = box_surface_points(center, size, yaw_deg, step)
    d = float(np.linalg.norm(surface - np.asarray(point, dtype=float), axis=1).min())
    return -d if point_in_box(point, center, size, yaw_deg) else d


def point_segment_distance_2d(p, a, b):
    ax, ay = a[0], a[1]
    bx, by = b[0], b[1]
    vx, vy = bx - ax, by - ay
    denom = vx * vx + vy * vy
    if denom == 0.0:
        t = 0.0
    else:
        t = max(0.0, min(1.0, ((p[0] - ax) * vx + (p[1] - ay) * vy) / denom))
    cx, cy = ax + t * vx, ay + t * vy
    return math.hypot(p[0] - cx, p[1] - cy)


def route_distance_2d(point, waypoints):
    """Planar distance from a point to a waypoint polyline."""
    return min(point_segment_distance_2d(point, a, b)
               for a, b in zip(waypoints, waypoints[1:]))


def round_half_up(x):
    return int(math.floor(x + 0.5))


def expected_proximity_score(distance_m):
    """Reference for the distance-to-score mapping: 10 at contact, 0 at 10 m."""
    closeness = max(0.0, min(1.0, 1.0 - distance_m / 10.0))
    return round_half_up(10.0 * closeness)
