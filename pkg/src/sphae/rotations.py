"""ZYZ Euler angles and elementary rotation algebra.

A rotation is R(alpha, beta, gamma) = Rz(alpha) @ Ry(beta) @ Rz(gamma),
acting on column vectors in R^3, with alpha, gamma in [0, 2pi) and
beta in [0, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class EulerZYZ:
    alpha: float
    beta: float
    gamma: float

    def canonical(self) -> "EulerZYZ":
        """Wrap angles into [0, 2pi) x [0, pi] x [0, 2pi)."""
        return matrix_to_euler(euler_to_matrix(self))

    def inverse(self) -> "EulerZYZ":
        return matrix_to_euler(euler_to_matrix(self).T)


IDENTITY = EulerZYZ(0.0, 0.0, 0.0)


def rot_z(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def euler_to_matrix(r: EulerZYZ) -> np.ndarray:
    return rot_z(r.alpha) @ rot_y(r.beta) @ rot_z(r.gamma)


def matrix_to_euler(R: np.ndarray) -> EulerZYZ:
    """Extract canonical ZYZ angles; gamma is set to 0 at the beta = 0, pi
    gimbal configurations where only alpha +/- gamma is determined."""
    cb = min(1.0, max(-1.0, float(R[2, 2])))
    beta = math.acos(cb)
    if abs(cb) > 1.0 - 1e-12:
        if cb > 0.0:  # R == Rz(alpha + gamma)
            alpha = math.atan2(R[1, 0], R[0, 0])
        else:  # R == Rz(alpha - gamma) @ Ry(pi)
            alpha = math.atan2(-R[0, 1], -R[0, 0])
        gamma = 0.0
    else:
        alpha = math.atan2(R[1, 2], R[0, 2])
        gamma = math.atan2(R[2, 1], -R[2, 0])
    return EulerZYZ(alpha % TWO_PI, beta, gamma % TWO_PI)


def compose(r1: EulerZYZ, r2: EulerZYZ) -> EulerZYZ:
    """r1 after r2: the rotation x -> r1(r2(x))."""
    return matrix_to_euler(euler_to_matrix(r1) @ euler_to_matrix(r2))


def quaternion_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_rotation(rng: np.random.Generator) -> EulerZYZ:
    """Haar-uniform rotation, drawn as a uniform unit quaternion."""
    q = rng.standard_normal(4)
    while np.linalg.norm(q) < 1e-12:
        q = rng.standard_normal(4)
    return matrix_to_euler(quaternion_to_matrix(q))


def rotation_angle(r: EulerZYZ) -> float:
    """Geodesic rotation angle in [0, pi]."""
    tr = np.trace(euler_to_matrix(r))
    return math.acos(min(1.0, max(-1.0, (tr - 1.0) / 2.0)))


def angle_distance(a: float, b: float, period: float = TWO_PI) -> float:
    """Distance between two angles modulo `period`."""
    d = abs(a - b) % period
    return min(d, period - d)
