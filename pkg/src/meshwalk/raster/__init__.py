"""Software rasterization of the scene mesh plus the rendering fixes:
supersampled antialiasing, stretched-triangle culling, and the padded-border
forward warp that flags parallax-revealed regions for inpainting.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..camera import CameraPose
from ..mesh import SceneMesh, StructuralError
from . import backend
from .backend import active_backend, get_impl

DEFAULT_NEAR = 1e-3
DEFAULT_SOBEL_THRESHOLD = 0.3
DEFAULT_NORMAL_EPS = -0.05
DEFAULT_PAD_FACTOR = 1.5
DEFAULT_AA_FACTOR = 2
DEFAULT_AA_SIGMA = 1.0


@dataclass
class RenderOutput:
    """Projection of the mesh into a camera: color, metric depth, coverage."""

    image: np.ndarray     # (H, W, 3) float64, NaN outside mask
    depth: np.ndarray     # (H, W) float64, NaN outside mask
    mask: np.ndarray      # (H, W) bool, True where a face covers the pixel center
    face_ids: np.ndarray  # (H, W) int32, -1 outside mask

    @property
    def resolution(self):
        return self.mask.shape


def project(mesh: SceneMesh, camera: CameraPose, resolution, near=DEFAULT_NEAR):
    """Z-buffer projection of the mesh; empty meshes yield an all-zero mask."""
    h, w = resolution
    if mesh.num_faces == 0:
        return RenderOutput(
            image=np.full((h, w, 3), np.nan),
            depth=np.full((h, w), np.nan),
            mask=np.zeros((h, w), dtype=bool),
            face_ids=np.full((h, w), -1, dtype=np.int32))
    fx, fy, cx, cy = camera.intrinsics
    verts_cam = np.ascontiguousarray(mesh.positions @ camera.rotation.T + camera.translation)
    depth, color, fid = backend.rasterize(
        verts_cam, np.ascontiguousarray(mesh.colors), mesh.faces,
        int(h), int(w), fx, fy, cx, cy, float(near))
    mask = fid >= 0
    depth = np.where(mask, depth, np.nan)
    color = np.where(mask[..., None], color, np.nan)
    return RenderOutput(image=color, depth=depth, mask=mask, face_ids=fid)


def box_downsample(image, factor):
    """Block-mean downsample by an integer factor."""
    h, w = image.shape[:2]
    hb, wb = h // factor, w // factor
    if image.ndim == 2:
        return image.reshape(hb, factor, wb, factor).mean(axis=(1, 3))
    return image.reshape(hb, factor, wb, factor, -1).mean(axis=(1, 3))


def downsample_mask_any(mask, factor):
    return box_downsample(mask.astype(np.float64), factor) > 0.0


def downsample_mask_all(mask, factor):
    return box_downsample(mask.astype(np.float64), factor) >= 1.0


@dataclass
class SupersampledRender:
    """2x render with its antialiased downsampling, kept for reuse by the pipeline."""

    image: np.ndarray      # (H, W, 3) antialiased, NaN where no coverage at all
    mask_any: np.ndarray   # (H, W) bool, some subpixel covered
    mask_full: np.ndarray  # (H, W) bool, every subpixel covered
    hires: RenderOutput    # the raw (factor*H, factor*W) projection


def render_supersampled(mesh, camera, resolution, factor=DEFAULT_AA_FACTOR,
                        sigma=DEFAULT_AA_SIGMA, near=DEFAULT_NEAR):
    h, w = resolution
    hires = project(mesh, camera.scaled(factor), (h * factor, w * factor), near=near)
    cov = hires.mask.astype(np.float64)
    img = np.where(hires.mask[..., None], hires.image, 0.0)
    # coverage-premultiplied blur so unmasked texels never bleed color
    num = ndimage.gaussian_filter(img * cov[..., None], sigma=(sigma, sigma, 0),
                                  mode="nearest", truncate=3.0)
    den = ndimage.gaussian_filter(cov, sigma=sigma, mode="nearest", truncate=3.0)
    num_b = box_downsample(num, factor)
    den_b = box_downsample(den, factor)
    mask_any = downsample_mask_any(hires.mask, factor)
    mask_full = downsample_mask_all(hires.mask, factor)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num_b / den_b[..., None]
    out = np.where(mask_any[..., None], out, np.nan)
    return SupersampledRender(image=out, mask_any=mask_any, mask_full=mask_full,
                              hires=hires)


def render_antialiased(mesh, camera, resolution, factor=DEFAULT_AA_FACTOR,
                       sigma=DEFAULT_AA_SIGMA, near=DEFAULT_NEAR):
    """Render at factor-times resolution, Gaussian-blur, box-downsample."""
    return render_supersampled(mesh, camera, resolution, factor, sigma, near).image


def normalized_disparity(depth):
    disp = 1.0 / np.maximum(depth, 1e-12)
    lo, hi = disp.min(), disp.max()
    return (disp - lo) / (hi - lo + 1e-12)


def disparity_edges(depth, threshold=DEFAULT_SOBEL_THRESHOLD):
    """Depth-discontinuity pixels: Sobel magnitude of min-max normalized disparity.

    Kernels are scaled by 1/8 so a unit step responds with 0.5.
    """
    norm = normalized_disparity(depth)
    gx = ndimage.sobel(norm, axis=1, mode="nearest") / 8.0
    gy = ndimage.sobel(norm, axis=0, mode="nearest") / 8.0
    return np.hypot(gx, gy) > threshold


def detect_stretched_triangles(mesh: SceneMesh, depth, camera: CameraPose,
                               face_ids=None, sobel_threshold=DEFAULT_SOBEL_THRESHOLD,
                               normal_eps=DEFAULT_NORMAL_EPS, near=DEFAULT_NEAR):
    """Faces to cull: they project onto depth-discontinuity pixels and graze the view.

    A candidate survives (is kept) only when the cosine between the unit view
    vector (face center minus camera center) and its unit normal stays below
    normal_eps; everything else straddles the discontinuity nearly edge-on.
    """
    depth = np.asarray(depth, dtype=np.float64)
    edges = disparity_edges(depth, sobel_threshold)
    if not edges.any() or mesh.num_faces == 0:
        return np.zeros(0, dtype=np.int64)
    if face_ids is None:
        face_ids = project(mesh, camera, depth.shape, near=near).face_ids
    cand = np.unique(face_ids[edges & (face_ids >= 0)]).astype(np.int64)
    if cand.size == 0:
        return cand
    centers = mesh.positions[mesh.faces[cand]].mean(axis=1)
    normals = mesh.face_normals()[cand]
    view = centers - camera.center
    view /= np.maximum(np.linalg.norm(view, axis=1, keepdims=True), 1e-300)
    dots = (view * normals).sum(axis=1)
    return cand[dots >= normal_eps]


def cull_faces(mesh: SceneMesh, face_ids):
    """Drop the listed faces; vertices stay (they may support other faces)."""
    ids = np.asarray(list(face_ids) if not isinstance(face_ids, np.ndarray) else face_ids,
                     dtype=np.int64)
    if ids.size == 0:
        return mesh
    if ids.min() < 0 or ids.max() >= mesh.num_faces:
        raise StructuralError("cull list references an invalid face id")
    keep = np.ones(mesh.num_faces, dtype=bool)
    keep[ids] = False
    return SceneMesh(mesh.positions, mesh.colors, mesh.faces[keep],
                     generation=mesh.generation + 1)


def _fill_invalid_nearest(depth):
    valid = np.isfinite(depth) & (depth > 0)
    if valid.all():
        return depth
    if not valid.any():
        return None
    idx = ndimage.distance_transform_edt(~valid, return_distances=False,
                                         return_indices=True)
    return depth[tuple(idx)]


def floating_region_mask(prev_depth, prev_camera: CameraPose, next_camera: CameraPose,
                         pad_factor=DEFAULT_PAD_FACTOR, near=DEFAULT_NEAR):
    """Pixels of the next view whose nearest forward-warped source is imaginary
    out-of-frame content (edge-replicated padding of the previous depth map).

    Border content close to the camera parallaxes into the frame interior when
    the camera retreats; wherever that imaginary content would win the z-buffer,
    the existing render shows distant geometry that must be inpainted instead.
    Camera intrinsics must match the prev_depth resolution.
    """
    prev_depth = np.asarray(prev_depth, dtype=np.float64)
    h, w = prev_depth.shape
    filled = _fill_invalid_nearest(prev_depth)
    if filled is None:
        return np.zeros((h, w), dtype=bool)
    band_x = int(round((pad_factor - 1.0) * w / 2.0))
    band_y = int(round((pad_factor - 1.0) * h / 2.0))
    padded = np.pad(filled, ((band_y, band_y), (band_x, band_x)), mode="edge")

    vv, uu = np.mgrid[-band_y:h + band_y, -band_x:w + band_x]
    in_band = (uu < 0) | (uu >= w) | (vv < 0) | (vv >= h)
    world = prev_camera.unproject_pixels(uu.ravel(), vv.ravel(), padded.ravel())
    un, vn, zn = next_camera.project_points(world)
    ok = zn >= near
    un, vn, zn = un[ok], vn[ok], zn[ok]
    band = in_band.ravel()[ok]

    splat = backend.splat_min_depth
    buf_band = splat(np.ascontiguousarray(un[band]), np.ascontiguousarray(vn[band]),
                     np.ascontiguousarray(zn[band]), h, w)
    buf_int = splat(np.ascontiguousarray(un[~band]), np.ascontiguousarray(vn[~band]),
                    np.ascontiguousarray(zn[~band]), h, w)
    return np.isfinite(buf_band) & (buf_band * (1.0 + 1e-9) + 1e-12 < buf_int)


__all__ = [
    "RenderOutput", "SupersampledRender", "project", "render_antialiased",
    "render_supersampled", "detect_stretched_triangles", "cull_faces",
    "floating_region_mask", "disparity_edges", "normalized_disparity",
    "box_downsample", "downsample_mask_any", "downsample_mask_all",
    "active_backend", "get_impl",
    "DEFAULT_NEAR", "DEFAULT_SOBEL_THRESHOLD", "DEFAULT_NORMAL_EPS",
    "DEFAULT_PAD_FACTOR", "DEFAULT_AA_FACTOR", "DEFAULT_AA_SIGMA",
]
