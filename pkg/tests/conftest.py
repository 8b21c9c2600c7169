import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from meshwalk.camera import CameraPose, default_intrinsics, identity_pose


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def small_camera():
    return identity_pose(default_intrinsics(48, 48))


def make_triangle_mesh(tris, colors=None):
    """Build a SceneMesh from an (F, 3, 3) array of world-space triangles."""
    from meshwalk.mesh import SceneMesh
    tris = np.asarray(tris, dtype=np.float64)
    nf = tris.shape[0]
    positions = tris.reshape(-1, 3)
    if colors is None:
        colors = np.tile(np.array([0.5, 0.5, 0.5]), (3 * nf, 1))
    else:
        colors = np.repeat(np.asarray(colors, dtype=np.float64), 3, axis=0)
    faces = np.arange(3 * nf, dtype=np.int32).reshape(nf, 3)
    return SceneMesh(positions, colors, faces)


def random_view_mesh(rng, n_faces, depth_range=(0.5, 5.0), spread=1.5):
    """Random triangle soup inside the view frustum of an identity camera."""
    z = rng.uniform(*depth_range, (n_faces, 3, 1))
    xy = rng.uniform(-spread, spread, (n_faces, 3, 2)) * z / depth_range[1]
    base = np.concatenate([xy, z], axis=2)
    jitter = rng.uniform(-0.35, 0.35, (n_faces, 1, 3)) * 0
    tris = base + jitter
    colors = rng.random((n_faces, 3))
    return make_triangle_mesh(tris, colors)
