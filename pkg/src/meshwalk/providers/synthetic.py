"""Synthetic ground-truth world: an analytic textured box scene queryable for
exact color and depth along any camera ray, plus a disparity perturbation model
that emulates an inconsistent monocular depth predictor.

Because color and depth come from one fixed 3D world, cross-view consistency
holds by construction, which is what makes this a usable oracle for the full
synthesis loop.
"""

from dataclasses import dataclass, field

import numpy as np

from ..align import bilinear_field
from ..camera import CameraPose
from .base import Provider, ProviderRequest


def _hash_noise(ix, iy, seed):
    """Deterministic pseudo-random lattice values in [0, 1)."""
    v = np.sin(ix * 12.9898 + iy * 78.233 + seed * 37.719) * 43758.5453
    return v - np.floor(v)


def value_noise(x, y, scale, seed):
    """Bilinearly interpolated lattice noise, smooth in (x, y)."""
    gx = x * scale
    gy = y * scale
    x0 = np.floor(gx)
    y0 = np.floor(gy)
    fx = gx - x0
    fy = gy - y0
    n00 = _hash_noise(x0, y0, seed)
    n10 = _hash_noise(x0 + 1, y0, seed)
    n01 = _hash_noise(x0, y0 + 1, seed)
    n11 = _hash_noise(x0 + 1, y0 + 1, seed)
    return (n00 * (1 - fx) * (1 - fy) + n10 * fx * (1 - fy)
            + n01 * (1 - fx) * fy + n11 * fx * fy)


@dataclass
class Box:
    lo: np.ndarray
    hi: np.ndarray
    base_color: np.ndarray
    alt_color: np.ndarray
    checker_scale: float = 2.0
    noise_amp: float = 0.15
    texture_seed: int = 0

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        self.base_color = np.asarray(self.base_color, dtype=np.float64)
        self.alt_color = np.asarray(self.alt_color, dtype=np.float64)


class SyntheticWorld:
    """Axis-aligned textured boxes; the default layout is a long corridor with
    floor clutter producing real depth discontinuities."""

    def __init__(self, boxes, seed=0):
        self.boxes = list(boxes)
        self.seed = seed
        self._lo = np.stack([b.lo for b in self.boxes])
        self._hi = np.stack([b.hi for b in self.boxes])

    @classmethod
    def corridor(cls, seed=0):
        t = 0.2  # wall thickness
        zmin, zmax = -45.0, 42.0
        walls = [
            Box([-1.6 - t, -1.3, zmin], [-1.6, 1.3, zmax],
                [0.55, 0.35, 0.25], [0.35, 0.2, 0.15], 1.5, 0.2, 1),
            Box([1.6, -1.3, zmin], [1.6 + t, 1.3, zmax],
                [0.3, 0.45, 0.55], [0.2, 0.3, 0.4], 1.5, 0.2, 2),
            Box([-1.9, 1.2, zmin], [1.9, 1.2 + t, zmax],
                [0.45, 0.45, 0.4], [0.25, 0.25, 0.22], 2.5, 0.15, 3),
            Box([-1.9, -1.2 - t, zmin], [1.9, -1.2, zmax],
                [0.6, 0.6, 0.62], [0.5, 0.5, 0.55], 1.0, 0.1, 4),
            Box([-1.9, -1.3, zmax], [1.9, 1.3, zmax + t],
                [0.5, 0.4, 0.5], [0.3, 0.25, 0.35], 0.8, 0.25, 5),
            Box([-1.9, -1.3, zmin - t], [1.9, 1.3, zmin],
                [0.4, 0.4, 0.35], [0.25, 0.22, 0.2], 0.8, 0.2, 6),
        ]
        clutter = [
            # near-axis pillar: its silhouette is backed by far geometry, the
            # configuration that actually produces stretched faces
            Box([-0.35, -0.5, 2.6], [-0.02, 1.2, 3.0],
                [0.6, 0.3, 0.5], [0.4, 0.2, 0.35], 5.0, 0.2, 10),
            Box([-1.1, 0.5, 4.0], [-0.4, 1.2, 4.8],
                [0.7, 0.25, 0.2], [0.5, 0.15, 0.1], 4.0, 0.2, 7),
            Box([0.3, 0.3, 7.0], [1.0, 1.2, 8.0],
                [0.2, 0.55, 0.3], [0.1, 0.35, 0.2], 3.0, 0.2, 8),
            Box([-0.7, 0.7, 11.0], [0.5, 1.2, 12.2],
                [0.65, 0.55, 0.2], [0.45, 0.35, 0.1], 3.0, 0.2, 9),
        ]
        return cls(walls + clutter, seed=seed)

    @classmethod
    def flat_wall(cls, distance=3.0, seed=0):
        """A single fronto-parallel textured wall (no depth discontinuities)."""
        return cls([Box([-50.0, -50.0, distance], [50.0, 50.0, distance + 1.0],
                        [0.5, 0.45, 0.4], [0.35, 0.3, 0.28], 1.2, 0.2, 11)],
                   seed=seed)

    def raycast(self, origin, dirs):
        """Intersect rays origin + t * dirs with all boxes; t is in units of dirs.

        Returns (t, box_index, axis) with t = +inf where nothing is hit.
        """
        dirs = np.asarray(dirs, dtype=np.float64)
        flat = dirs.reshape(-1, 3)
        nray = flat.shape[0]
        best_t = np.full(nray, np.inf)
        best_box = np.full(nray, -1, dtype=np.int64)
        best_axis = np.zeros(nray, dtype=np.int64)
        eps = 1e-9
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / flat
        for bi in range(len(self.boxes)):
            t1 = (self._lo[bi] - origin) * inv
            t2 = (self._hi[bi] - origin) * inv
            tnear = np.minimum(t1, t2)
            tfar = np.maximum(t1, t2)
            enter_axis = tnear.argmax(axis=1)
            tmin = tnear.max(axis=1)
            tmax = tfar.min(axis=1)
            hit = (tmax >= tmin) & (tmin > eps) & (tmin < best_t)
            best_t[hit] = tmin[hit]
            best_box[hit] = bi
            best_axis[hit] = enter_axis[hit]
        return (best_t.reshape(dirs.shape[:-1]), best_box.reshape(dirs.shape[:-1]),
                best_axis.reshape(dirs.shape[:-1]))

    def _shade(self, points, box_idx, axis_idx):
        flat_p = points.reshape(-1, 3)
        flat_b = box_idx.reshape(-1)
        flat_a = axis_idx.reshape(-1)
        colors = np.zeros_like(flat_p)
        tangents = {0: (1, 2), 1: (0, 2), 2: (0, 1)}
        for bi, box in enumerate(self.boxes):
            sel = flat_b == bi
            if not sel.any():
                continue
            for ax in range(3):
                s = sel & (flat_a == ax)
                if not s.any():
                    continue
                ta, tb = tangents[ax]
                a = flat_p[s, ta]
                b = flat_p[s, tb]
                check = ((np.floor(a * box.checker_scale)
                          + np.floor(b * box.checker_scale)) % 2).astype(np.float64)
                noise = value_noise(a, b, 3.7, self.seed * 101 + box.texture_seed)
                mix = check[:, None] * box.alt_color + (1 - check)[:, None] * box.base_color
                shade = 1.0 + box.noise_amp * (noise[:, None] - 0.5)
                colors[s] = np.clip(mix * shade, 0.0, 1.0)
        return colors.reshape(points.shape)

    def render(self, camera: CameraPose, resolution):
        """Exact color and metric depth of the world seen by the camera."""
        h, w = resolution
        fx, fy, cx, cy = camera.intrinsics
        vv, uu = np.mgrid[0:h, 0:w]
        d_cam = np.stack([(uu - cx) / fx, (vv - cy) / fy, np.ones_like(uu, np.float64)],
                         axis=-1)
        d_world = d_cam.reshape(-1, 3) @ camera.rotation  # R^T applied row-wise
        origin = camera.center
        t, box_idx, axis_idx = self.raycast(origin, d_world.reshape(h, w, 3))
        if not np.isfinite(t).all():
            missing = int((~np.isfinite(t)).sum())
            raise RuntimeError(f"{missing} rays escaped the world; extend its geometry")
        points = origin + t[..., None] * d_world.reshape(h, w, 3)
        image = self._shade(points, box_idx, axis_idx)
        return image, t.copy()  # dirs have unit camera-z, so t is metric depth

    def depth(self, camera, resolution):
        return self.render(camera, resolution)[1]

    def surface_points(self, camera, resolution, stride=16):
        """Exact 3D points behind a strided pixel grid (for tracking-based metrics)."""
        _, depth = self.render(camera, resolution)
        vv, uu = np.mgrid[0:resolution[0]:stride, 0:resolution[1]:stride]
        pts = camera.unproject_pixels(uu.ravel(), vv.ravel(),
                                      depth[vv.ravel(), uu.ravel()])
        pixels = np.stack([vv.ravel(), uu.ravel()], axis=1)
        return pts, pixels


@dataclass
class DepthPerturbation:
    """Disparity-space corruption keyed by frame index: affine warp, smooth
    low-frequency field, and white noise."""

    enabled: bool = False
    disp_scale: float = 0.7
    disp_shift: float = 0.05
    field_amp: float = 0.02
    noise_sigma: float = 0.01
    field_grid: int = 5
    seed: int = 0

    def apply(self, depth, frame_index):
        if not self.enabled:
            return np.asarray(depth, dtype=np.float64).copy()
        depth = np.asarray(depth, dtype=np.float64)
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, frame_index]))
        disp = 1.0 / depth
        out = self.disp_scale * disp + self.disp_shift
        if self.field_amp:
            grid = rng.uniform(-1.0, 1.0, (self.field_grid, self.field_grid))
            out = out + self.field_amp * bilinear_field(grid, depth.shape)
        if self.noise_sigma:
            out = out + rng.normal(0.0, self.noise_sigma, depth.shape)
        return 1.0 / np.maximum(out, 1e-4)


class OracleProvider(Provider):
    """Ground-truth provider: inpainting returns the exact world rendering at
    the requested frame's camera; depth returns (optionally perturbed) true depth."""

    def __init__(self, world: SyntheticWorld, cameras, perturbation=None):
        self.world = world
        self._cameras = cameras
        self.perturbation = perturbation or DepthPerturbation(enabled=False)

    def camera_for(self, frame_index):
        if callable(self._cameras):
            return self._cameras(frame_index)
        return self._cameras[frame_index]

    def inpaint(self, request: ProviderRequest):
        cam = self.camera_for(request.frame_index)
        image, _ = self.world.render(cam, request.mask.shape)
        return image

    def predict_depth(self, image, frame_index):
        cam = self.camera_for(frame_index)
        true_depth = self.world.depth(cam, np.asarray(image).shape[:2])
        return self.perturbation.apply(true_depth, frame_index)

    def true_depth(self, frame_index, resolution):
        return self.world.depth(self.camera_for(frame_index), resolution)
