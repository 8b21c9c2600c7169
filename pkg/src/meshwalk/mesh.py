"""Unified scene mesh: initialization, unprojection, boundary stitching, merge.

The scene is one growing triangle soup with per-vertex colors. Faces are wound
counter-clockwise as seen from the camera that created them, so face normals
point toward that camera.
"""

from dataclasses import dataclass, field

import numpy as np

from .camera import CameraPose


class InvalidDepthError(ValueError):
    pass


class StructuralError(ValueError):
    pass


@dataclass
class SceneMesh:
    positions: np.ndarray   # (N, 3) float64, world units
    colors: np.ndarray      # (N, 3) float64 in [0, 1]
    faces: np.ndarray       # (M, 3) int32, CCW from the generating camera
    generation: int = 0

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 3)
        self.colors = np.ascontiguousarray(self.colors, dtype=np.float64).reshape(-1, 3)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int32).reshape(-1, 3)

    @property
    def num_vertices(self):
        return self.positions.shape[0]

    @property
    def num_faces(self):
        return self.faces.shape[0]

    def validate(self):
        if self.colors.shape != self.positions.shape:
            raise StructuralError("colors/positions length mismatch")
        if self.faces.size:
            if self.faces.min() < 0 or self.faces.max() >= self.num_vertices:
                raise StructuralError("face index out of range")
            f = self.faces
            degen = (f[:, 0] == f[:, 1]) | (f[:, 0] == f[:, 2]) | (f[:, 1] == f[:, 2])
            if degen.any():
                raise StructuralError(f"{int(degen.sum())} degenerate faces")
        return self

    def face_normals(self, normalize=True):
        tri = self.positions[self.faces]
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        if normalize:
            norms = np.linalg.norm(n, axis=1, keepdims=True)
            n = n / np.maximum(norms, 1e-300)
        return n

    def face_centers(self):
        return self.positions[self.faces].mean(axis=1)

    def copy(self):
        return SceneMesh(self.positions.copy(), self.colors.copy(),
                         self.faces.copy(), self.generation)


@dataclass
class MeshPatch:
    """Mesh fragment unprojected from one frame; indices are patch-local."""

    positions: np.ndarray      # (P, 3)
    colors: np.ndarray         # (P, 3)
    faces: np.ndarray          # (Q, 3) int32, local indices
    source_pixels: np.ndarray  # (P, 2) int32 (row, col) of the originating pixel

    @property
    def num_vertices(self):
        return self.positions.shape[0]

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 3)), np.zeros((0, 3)),
                   np.zeros((0, 3), np.int32), np.zeros((0, 2), np.int32))


def _check_depth(depth, where_mask=None):
    bad = ~np.isfinite(depth) | (depth <= 0)
    if where_mask is not None:
        bad &= where_mask
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise InvalidDepthError(f"non-positive or non-finite depth at pixel ({i}, {j})")


def _grid_quad_faces(index_grid):
    """Two triangles per 2x2 quad whose four corners all carry vertex ids.

    index_grid holds a vertex id per pixel or -1. Winding (a, d, b), (a, c, d)
    for corners a=(i,j), b=(i,j+1), c=(i+1,j), d=(i+1,j+1) keeps normals
    pointing at the camera that views the grid down +z.
    """
    a = index_grid[:-1, :-1]
    b = index_grid[:-1, 1:]
    c = index_grid[1:, :-1]
    d = index_grid[1:, 1:]
    ok = (a >= 0) & (b >= 0) & (c >= 0) & (d >= 0)
    a, b, c, d = a[ok], b[ok], c[ok], d[ok]
    tris = np.empty((2 * a.size, 3), dtype=np.int64)
    tris[0::2, 0], tris[0::2, 1], tris[0::2, 2] = a, d, b
    tris[1::2, 0], tris[1::2, 1], tris[1::2, 2] = a, c, d
    return tris


def init_scene(image, depth, camera: CameraPose):
    """Unproject a full RGBD frame into the initial scene mesh."""
    image = np.asarray(image, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if image.shape[:2] != depth.shape:
        raise ValueError(f"image {image.shape[:2]} and depth {depth.shape} resolution mismatch")
    _check_depth(depth)
    h, w = depth.shape
    vv, uu = np.mgrid[0:h, 0:w]
    positions = camera.unproject_pixels(uu.ravel(), vv.ravel(), depth.ravel())
    index_grid = np.arange(h * w, dtype=np.int64).reshape(h, w)
    faces = _grid_quad_faces(index_grid)
    return SceneMesh(positions, image.reshape(-1, 3), faces, generation=0).validate()


def unproject_frame(mask, image, depth, camera: CameraPose):
    """Unproject only the masked pixels into a MeshPatch.

    A quad contributes its two faces only when all four corners are masked.
    """
    mask = np.asarray(mask, dtype=bool)
    image = np.asarray(image, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if not mask.any():
        return MeshPatch.empty()
    _check_depth(depth, mask)
    h, w = mask.shape
    rows, cols = np.nonzero(mask)
    positions = camera.unproject_pixels(cols, rows, depth[rows, cols])
    colors = image[rows, cols]
    index_grid = np.full((h, w), -1, dtype=np.int64)
    index_grid[rows, cols] = np.arange(rows.size)
    faces = _grid_quad_faces(index_grid)
    src = np.stack([rows, cols], axis=1).astype(np.int32)
    return MeshPatch(positions, colors, faces.astype(np.int32), src)


def boundary_ring(mask):
    """Known pixels one dilation step away from the unprojection mask."""
    mask = np.asarray(mask, dtype=bool)
    grown = mask.copy()
    grown[:-1, :] |= mask[1:, :]
    grown[1:, :] |= mask[:-1, :]
    grown[:, :-1] |= mask[:, 1:]
    grown[:, 1:] |= mask[:, :-1]
    # diagonal neighbors count: quads touch diagonally
    grown[:-1, :-1] |= mask[1:, 1:]
    grown[1:, 1:] |= mask[:-1, :-1]
    grown[:-1, 1:] |= mask[1:, :-1]
    grown[1:, :-1] |= mask[:-1, 1:]
    return grown & ~mask


def stitch_boundary(mesh: SceneMesh, patch: MeshPatch, mask, camera: CameraPose,
                    face_ids=None):
    """Bridge faces connecting the existing mesh to a freshly unprojected patch.

    For every existing face that projects onto a pixel of the 1-px ring around
    the mask, its vertex nearest the camera center joins the frame's pixel-grid
    triangulation; quads mixing ring vertices with patch vertices emit the
    bridge triangles. Bridge indices live in the merged index space, i.e.
    existing ids stay as-is and patch ids are offset by mesh.num_vertices.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any() or patch.num_vertices == 0:
        return np.zeros((0, 3), dtype=np.int64)
    h, w = mask.shape
    if face_ids is None:
        from .raster import project
        face_ids = project(mesh, camera, (h, w)).face_ids
    ring = boundary_ring(mask)
    ring &= face_ids >= 0
    if not ring.any():
        return np.zeros((0, 3), dtype=np.int64)

    ring_rows, ring_cols = np.nonzero(ring)
    ring_faces = face_ids[ring_rows, ring_cols]
    tri_idx = mesh.faces[ring_faces]                     # (K, 3) vertex ids
    tri_pts = mesh.positions[tri_idx]                    # (K, 3, 3)
    d2 = ((tri_pts - camera.center) ** 2).sum(axis=2)    # (K, 3)
    nearest = tri_idx[np.arange(tri_idx.shape[0]), d2.argmin(axis=1)]

    offset = mesh.num_vertices
    index_grid = np.full((h, w), -1, dtype=np.int64)
    index_grid[patch.source_pixels[:, 0], patch.source_pixels[:, 1]] = (
        np.arange(patch.num_vertices) + offset)
    index_grid[ring_rows, ring_cols] = nearest

    tris = _grid_quad_faces(index_grid)
    if tris.size == 0:
        return np.zeros((0, 3), dtype=np.int64)
    is_patch = tris >= offset
    mixed = is_patch.any(axis=1) & (~is_patch).any(axis=1)
    tris = tris[mixed]
    # adjacent ring pixels may resolve to the same existing vertex
    degen = (tris[:, 0] == tris[:, 1]) | (tris[:, 0] == tris[:, 2]) | (tris[:, 1] == tris[:, 2])
    return tris[~degen]


def merge(mesh: SceneMesh, patch: MeshPatch, bridges=None):
    """Append a patch (and bridge faces) to the mesh; prior content is kept verbatim."""
    if bridges is None:
        bridges = np.zeros((0, 3), dtype=np.int64)
    bridges = np.asarray(bridges, dtype=np.int64).reshape(-1, 3)
    offset = mesh.num_vertices
    total = offset + patch.num_vertices
    if bridges.size and (bridges.min() < 0 or bridges.max() >= total):
        raise StructuralError("bridge face references an out-of-range vertex index")
    if patch.faces.size and patch.faces.max() >= patch.num_vertices:
        raise StructuralError("patch face references an out-of-range vertex index")

    positions = np.concatenate([mesh.positions, patch.positions], axis=0)
    colors = np.concatenate([mesh.colors, patch.colors], axis=0)
    faces = np.concatenate(
        [mesh.faces.astype(np.int64), patch.faces.astype(np.int64) + offset, bridges],
        axis=0)
    if faces.size and faces.max() > np.iinfo(np.int32).max:
        raise StructuralError("vertex index exceeds int32 range")
    return SceneMesh(positions, colors, faces.astype(np.int32),
                     generation=mesh.generation + 1).validate()
