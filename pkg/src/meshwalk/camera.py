"""Pinhole camera model and coordinate transforms.

Conventions: world-to-camera extrinsics x_cam = R @ x_world + t, camera looks
along +z in its own frame, depth is camera-space z. Pixel (row i, col j) has
its center at continuous image coordinates (u, v) = (j, i).
"""

import math
from dataclasses import dataclass

import numpy as np


class CameraValidationError(ValueError):
    pass


@dataclass(frozen=True)
class CameraPose:
    """World-to-camera rigid transform plus pinhole intrinsics (fx, fy, cx, cy)."""

    rotation: np.ndarray      # (3, 3) orthonormal, det +1
    translation: np.ndarray   # (3,)
    intrinsics: tuple         # (fx, fy, cx, cy) in pixels

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if R.shape != (3, 3):
            raise CameraValidationError(f"rotation must be 3x3, got {R.shape}")
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-6):
            raise CameraValidationError("rotation is not orthonormal within 1e-6")
        if np.linalg.det(R) < 0:
            raise CameraValidationError("rotation has negative determinant")
        fx, fy, cx, cy = self.intrinsics
        if fx <= 0 or fy <= 0:
            raise CameraValidationError("focal lengths must be positive")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "intrinsics", (float(fx), float(fy), float(cx), float(cy)))

    @property
    def center(self):
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def world_to_cam(self, points):
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def cam_to_world(self, points):
        pts = np.asarray(points, dtype=np.float64)
        return (pts - self.translation) @ self.rotation

    def project_points(self, points_world):
        """Project world points; returns (u, v, z_cam)."""
        fx, fy, cx, cy = self.intrinsics
        pc = self.world_to_cam(points_world)
        z = pc[..., 2]
        u = fx * pc[..., 0] / z + cx
        v = fy * pc[..., 1] / z + cy
        return u, v, z

    def unproject_pixels(self, u, v, depth):
        """Lift pixel centers with metric depth into world points."""
        fx, fy, cx, cy = self.intrinsics
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        z = np.asarray(depth, dtype=np.float64)
        x = (u - cx) / fx * z
        y = (v - cy) / fy * z
        pc = np.stack([x, y, z], axis=-1)
        return self.cam_to_world(pc)

    def scaled(self, factor):
        """Camera for a resolution scaled by an integer factor.

        Subpixel centers of the scaled grid stay aligned with the original
        pixel footprints: u' = factor * u + (factor - 1) / 2.
        """
        fx, fy, cx, cy = self.intrinsics
        s = float(factor)
        off = (s - 1.0) / 2.0
        return CameraPose(self.rotation, self.translation,
                          (fx * s, fy * s, cx * s + off, cy * s + off))

    def validate_principal_point(self, height, width):
        _, _, cx, cy = self.intrinsics
        if not (-0.5 <= cx <= width - 0.5 and -0.5 <= cy <= height - 0.5):
            raise CameraValidationError(
                f"principal point ({cx}, {cy}) outside {height}x{width} image")


def default_intrinsics(height, width, vertical_fov_deg=55.0):
    """Square-pixel intrinsics with the principal point at the central pixel."""
    fy = (height / 2.0) / math.tan(math.radians(vertical_fov_deg) / 2.0)
    return (fy, fy, (width - 1) / 2.0, (height - 1) / 2.0)


def identity_pose(intrinsics):
    return CameraPose(np.eye(3), np.zeros(3), intrinsics)
