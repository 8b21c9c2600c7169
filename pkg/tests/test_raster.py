import numpy as np
import pytest
from scipy import ndimage

from meshwalk.camera import CameraPose, default_intrinsics, identity_pose
from meshwalk.mesh import SceneMesh, StructuralError, init_scene
from meshwalk.raster import (box_downsample, cull_faces, detect_stretched_triangles,
                             disparity_edges, floating_region_mask, project,
                             render_antialiased, render_supersampled)
from meshwalk.trajectory import generate_path

from conftest import make_triangle_mesh, random_view_mesh
from oracles import ray_cast_mesh


def step_scene(h=32, w=32, near_depth=1.0, far_depth=5.0):
    """Two fronto-parallel planes sharing a vertical image-space edge."""
    cam = identity_pose(default_intrinsics(h, w))
    depth = np.where(np.arange(w)[None, :] < w // 2, near_depth, far_depth) \
        * np.ones((h, w))
    image = np.where(np.arange(w)[None, :, None] < w // 2, 0.2, 0.8) \
        * np.ones((h, w, 3))
    mesh = init_scene(image, depth, cam)
    return mesh, depth, cam


class TestProject:
    def test_empty_mesh_zero_mask(self):
        empty = SceneMesh(np.zeros((0, 3)), np.zeros((0, 3)),
                          np.zeros((0, 3), np.int32))
        out = project(empty, identity_pose((10, 10, 7.5, 7.5)), (16, 16))
        assert not out.mask.any()
        assert np.isnan(out.depth).all()

    def test_roundtrip_from_generating_camera(self, rng):
        h, w = 20, 28
        image = rng.random((h, w, 3))
        depth = 0.5 + 2.0 * rng.random((h, w))
        cam = identity_pose(default_intrinsics(h, w))
        out = project(init_scene(image, depth, cam), cam, (h, w))
        assert out.mask.all()
        assert np.abs(out.image - image).max() <= 1e-4
        assert np.abs(out.depth - depth).max() <= 1e-4

    def test_nearer_triangle_wins(self):
        # two triangles over the same pixel at depths 1 and 2
        tris = np.array([
            [[-1.0, -1.0, 2.0], [3.0, -1.0, 2.0], [-1.0, 3.0, 2.0]],
            [[-1.0, -1.0, 1.0], [3.0, -1.0, 1.0], [-1.0, 3.0, 1.0]],
        ])
        colors = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        mesh = make_triangle_mesh(tris, colors)
        cam = identity_pose((8.0, 8.0, 7.5, 7.5))
        out = project(mesh, cam, (16, 16))
        depth_o, fid_o, _, _ = ray_cast_mesh(mesh.positions, mesh.faces, cam, (16, 16))
        px = (7, 7)
        assert fid_o[px] == 1
        assert out.face_ids[px] == 1
        assert np.allclose(out.image[px], [0.0, 1.0, 0.0])
        assert abs(out.depth[px] - depth_o[px]) < 1e-9

    def test_zbuffer_matches_ray_casting(self, rng):
        cam = identity_pose(default_intrinsics(40, 40))
        for trial in range(4):
            mesh = random_view_mesh(np.random.default_rng(trial), 60)
            out = project(mesh, cam, (40, 40))
            depth_o, fid_o, tie, margin = ray_cast_mesh(
                mesh.positions, mesh.faces, cam, (40, 40))
            clear = ~tie & (margin > 1e-7)
            covered = out.mask & np.isfinite(depth_o) & clear
            assert (out.face_ids[covered] == fid_o[covered]).mean() >= 0.999
            both = covered
            assert np.abs(out.depth[both] - depth_o[both]).max() <= 1e-6
            # mask/coverage agreement outside marginal pixels
            disagree = (out.mask != np.isfinite(depth_o)) & clear
            assert disagree.mean() < 1e-3

    def test_mask_finite_agreement(self, rng):
        mesh = random_view_mesh(rng, 30)
        out = project(mesh, identity_pose(default_intrinsics(32, 32)), (32, 32))
        assert np.array_equal(np.isfinite(out.depth), out.mask)
        assert np.array_equal(np.isfinite(out.image).all(axis=2), out.mask)
        assert (out.depth[out.mask] >= 1e-3).all()

    def test_depth_tie_lowest_face_id(self):
        tri = [[-2.0, -2.0, 1.5], [6.0, -2.0, 1.5], [-2.0, 6.0, 1.5]]
        mesh = make_triangle_mesh([tri, tri], [[1, 0, 0], [0, 1, 0]])
        out = project(mesh, identity_pose((8, 8, 7.5, 7.5)), (16, 16))
        assert (out.face_ids[out.mask] == 0).all()

    def test_near_plane_discards_straddling_faces(self):
        tris = np.array([
            [[-1.0, -1.0, -0.5], [1.0, -1.0, 2.0], [0.0, 1.0, 2.0]],  # straddles
            [[-1.0, -1.0, 2.0], [1.0, -1.0, 2.0], [0.0, 1.0, 2.0]],
        ])
        mesh = make_triangle_mesh(tris)
        out = project(mesh, identity_pose((8, 8, 7.5, 7.5)), (16, 16))
        assert (out.face_ids[out.mask] == 1).all()


class TestCulling:
    def test_empty_set_unchanged(self, rng):
        mesh = random_view_mesh(rng, 20)
        out = cull_faces(mesh, np.zeros(0, np.int64))
        assert out.num_faces == 20

    def test_cull_all_keeps_vertices(self, rng):
        mesh = random_view_mesh(rng, 20)
        out = cull_faces(mesh, np.arange(20))
        assert out.num_faces == 0
        assert out.num_vertices == mesh.num_vertices

    def test_invalid_id_raises(self, rng):
        mesh = random_view_mesh(rng, 5)
        with pytest.raises(StructuralError):
            cull_faces(mesh, [7])

    def test_cull_never_creates_coverage(self, rng):
        mesh = random_view_mesh(rng, 40)
        cam = identity_pose(default_intrinsics(32, 32))
        before = project(mesh, cam, (32, 32)).mask
        culled = cull_faces(mesh, rng.choice(40, size=15, replace=False))
        after = project(culled, cam, (32, 32)).mask
        assert not (after & ~before).any()

    def test_step_scene_holes_equal_exclusive_footprint(self):
        mesh, depth, cam = step_scene()
        ids = detect_stretched_triangles(mesh, depth, cam)
        assert ids.size > 0
        survivors = cull_faces(mesh, ids)
        foot_mesh = SceneMesh(mesh.positions, mesh.colors, mesh.faces[ids])
        # camera moved toward the far side opens the disocclusion gap the
        # stretched faces were covering
        moved = CameraPose(cam.rotation, [-0.35, 0.0, 0.0], cam.intrinsics)
        mask_before = project(mesh, moved, depth.shape).mask
        mask_after = project(survivors, moved, depth.shape).mask
        footprint = project(foot_mesh, moved, depth.shape).mask
        # every covered pixel is covered by a survivor or by a culled face
        assert np.array_equal(mask_before, mask_after | footprint)
        holes = mask_before & ~mask_after
        assert holes.any()
        assert not (holes & ~footprint).any()


class TestStretchedDetection:
    def test_fronto_parallel_plane_empty(self):
        h = w = 24
        cam = identity_pose(default_intrinsics(h, w))
        mesh = init_scene(np.full((h, w, 3), 0.5), np.full((h, w), 2.0), cam)
        ids = detect_stretched_triangles(mesh, np.full((h, w), 2.0), cam)
        assert ids.size == 0

    def test_facing_triangle_kept_on_edge_pixels(self):
        mesh, depth, cam = step_scene()
        normals = mesh.face_normals()
        centers = mesh.face_centers()
        view = centers - cam.center
        view /= np.linalg.norm(view, axis=1, keepdims=True)
        dots = (view * normals).sum(axis=1)
        ids = set(detect_stretched_triangles(mesh, depth, cam).tolist())
        # anti-parallel (cos ~ -1) faces are kept even on edge pixels
        facing = np.nonzero(dots < -0.9)[0]
        assert len(facing) > 0
        assert not ids & set(facing.tolist())

    def test_step_scene_matches_grazing_oracle(self):
        mesh, depth, cam = step_scene()
        h, w = depth.shape
        ids = set(detect_stretched_triangles(mesh, depth, cam).tolist())
        assert ids

        # oracle edge map: explicit convolution loops
        disp = 1.0 / depth
        norm = (disp - disp.min()) / (disp.max() - disp.min() + 1e-12)
        padded = np.pad(norm, 1, mode="edge")
        kx = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]) / 8.0
        gx = np.zeros_like(norm)
        gy = np.zeros_like(norm)
        for i in range(h):
            for j in range(w):
                win = padded[i:i + 3, j:j + 3]
                gx[i, j] = (win * kx).sum()
                gy[i, j] = (win * kx.T).sum()
        edges = np.hypot(gx, gy) > 0.3
        assert edges.any()

        # oracle grazing-angle decision per face
        def grazes(f):
            tri = mesh.positions[mesh.faces[f]]
            n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
            n /= np.linalg.norm(n)
            v = tri.mean(axis=0) - cam.center
            v /= np.linalg.norm(v)
            return float(v @ n) >= -0.05

        # oracle 2D coverage: does the projected face contain an edge pixel?
        fx, fy, cx, cy = cam.intrinsics
        vc = mesh.positions @ cam.rotation.T + cam.translation
        us = fx * vc[:, 0] / vc[:, 2] + cx
        vs = fy * vc[:, 1] / vc[:, 2] + cy
        eys, exs = np.nonzero(edges)

        def covers_edge_pixel(f, eps=1e-7):
            i0, i1, i2 = mesh.faces[f]
            x0, y0, x1, y1, x2, y2 = us[i0], vs[i0], us[i1], vs[i1], us[i2], vs[i2]
            area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
            if abs(area) < 1e-14:
                return False
            for px, py in zip(exs, eys):
                w0 = ((x1 - px) * (y2 - py) - (x2 - px) * (y1 - py)) / area
                w1 = ((x2 - px) * (y0 - py) - (x0 - px) * (y2 - py)) / area
                w2 = 1.0 - w0 - w1
                if w0 >= -eps and w1 >= -eps and w2 >= -eps:
                    return True
            return False

        # every culled face projects onto an edge pixel and fails the keep test
        for f in ids:
            assert grazes(f)
            assert covers_edge_pixel(f)

        # every face visibly winning an unambiguous edge pixel and grazing
        # must have been culled (ties between coincident faces excluded)
        depth_o, fid_o, tie, margin = ray_cast_mesh(mesh.positions, mesh.faces,
                                                    cam, (h, w))
        clear = edges & ~tie & (margin > 1e-7) & (fid_o >= 0)
        must_cull = {int(f) for f in np.unique(fid_o[clear]) if grazes(int(f))}
        assert must_cull <= ids

        # culled faces live exactly at the quads straddling the step
        cols = np.unique(np.array(sorted(ids)) // 2 % (w - 1))
        assert set(cols.tolist()) <= {w // 2 - 1, w // 2}


class TestAntialiasing:
    def test_constant_full_coverage_stays_constant(self):
        h = w = 24
        cam = identity_pose(default_intrinsics(h, w))
        mesh = init_scene(np.full((h, w, 3), 0.37), np.full((h, w), 2.0), cam)
        out = render_antialiased(mesh, cam, (h, w))
        assert np.nanmax(np.abs(out - 0.37)) < 1e-6

    def test_interior_matches_plain_box_downsample(self):
        # constant-color quad covering part of the frame: away from the mask
        # boundary the blur is a no-op, so AA equals the box-downsampled render
        h = w = 32
        cam = identity_pose(default_intrinsics(h, w))
        tri_quad = np.array([
            [[-0.6, -0.6, 2.0], [0.6, -0.6, 2.0], [-0.6, 0.6, 2.0]],
            [[0.6, -0.6, 2.0], [0.6, 0.6, 2.0], [-0.6, 0.6, 2.0]],
        ])
        mesh = make_triangle_mesh(tri_quad, [[0.8, 0.3, 0.1]] * 2)
        ss = render_supersampled(mesh, cam, (h, w), factor=2, sigma=1.0)
        plain = box_downsample(np.nan_to_num(ss.hires.image), 2)
        interior = ndimage.binary_erosion(ss.mask_full, iterations=4)
        assert interior.any()
        assert np.abs(ss.image[interior] - plain[interior]).max() <= 1e-4

    def test_plain_and_aa_agree_on_flat_interior(self):
        h = w = 32
        cam = identity_pose(default_intrinsics(h, w))
        mesh = init_scene(np.full((h, w, 3), 0.6), np.full((h, w), 3.0), cam)
        aa = render_antialiased(mesh, cam, (h, w))
        plain = project(mesh, cam, (h, w)).image
        inner = np.zeros((h, w), bool)
        inner[5:-5, 5:-5] = True
        assert np.abs(aa[inner] - plain[inner]).max() <= 1e-3

    def test_diagonal_stripe_stairstep_reduced(self):
        h = w = 48
        cam = identity_pose(default_intrinsics(h, w))
        # black backdrop plus a thin bright diagonal stripe slightly in front
        image = np.zeros((h, w, 3))
        depth = np.full((h, w), 4.0)
        backdrop = init_scene(image, depth, cam)
        t = np.linspace(-1.4, 1.4, 200)
        half = 0.018
        strip = np.stack([
            np.stack([t - half, t + 0.0 * t, np.full_like(t, 2.0)], axis=1),
            np.stack([t + half, t + 0.0 * t, np.full_like(t, 2.0)], axis=1),
        ], axis=1)
        tris = []
        for i in range(len(t) - 1):
            a, b = strip[i]
            c, d = strip[i + 1]
            tris.append([a, d, b])
            tris.append([a, c, d])
        stripe = make_triangle_mesh(np.array(tris),
                                    [[1.0, 1.0, 1.0]] * (2 * (len(t) - 1)))
        both = SceneMesh(
            np.concatenate([backdrop.positions, stripe.positions]),
            np.concatenate([backdrop.colors, stripe.colors]),
            np.concatenate([backdrop.faces,
                            stripe.faces + backdrop.num_vertices]))
        plain = project(both, cam, (h, w)).image.mean(axis=2)
        aa = render_antialiased(both, cam, (h, w)).mean(axis=2)
        jump_plain = np.abs(np.diff(plain, axis=1)).max()
        jump_aa = np.abs(np.diff(aa, axis=1)).max()
        assert jump_aa < jump_plain


class TestFloatingRegionMask:
    def test_identical_cameras_empty(self):
        h = w = 48
        intr = default_intrinsics(h, w)
        cam = identity_pose(intr)
        mask = floating_region_mask(np.full((h, w), 2.0), cam, cam)
        assert not mask.any()

    def test_backward_dolly_band_matches_analytic(self):
        h = w = 64
        intr = default_intrinsics(h, w)
        cam0 = identity_pose(intr)
        d, tz = 2.0, 0.3
        cam1 = CameraPose(np.eye(3), [0.0, 0.0, tz], intr)
        mask = floating_region_mask(np.full((h, w), d), cam0, cam1)
        fx, fy, cx, cy = intr
        # interior sources contract to [lo, hi]; the 2x2 splat footprint
        # extends their coverage to [floor(lo), ceil(hi)]
        shrink = d / (d + tz)
        lo_u, hi_u = cx - cx * shrink, cx + (w - 1 - cx) * shrink
        lo_v, hi_v = cy - cy * shrink, cy + (h - 1 - cy) * shrink
        uu = np.arange(w)[None, :]
        vv = np.arange(h)[:, None]
        expected = ((uu < np.floor(lo_u)) | (uu > np.ceil(hi_u))
                    | (vv < np.floor(lo_v)) | (vv > np.ceil(hi_v)))
        expected = np.broadcast_to(expected, (h, w))
        assert np.array_equal(mask, expected)

    def test_border_parallax_matches_bruteforce_warp(self):
        h = w = 40
        intr = default_intrinsics(h, w)
        cam0 = identity_pose(intr)
        cam1 = CameraPose(np.eye(3), [0.05, -0.03, 0.25], intr)
        rng = np.random.default_rng(3)
        # near content at the left border, distant background elsewhere
        depth = np.full((h, w), 6.0) + rng.random((h, w)) * 0.1
        depth[:, :6] = 1.2
        mask = floating_region_mask(depth, cam0, cam1, pad_factor=1.5)

        # oracle: exhaustive per-source warp with the same 2x2 footprint
        band = int(round(0.25 * w))
        bandh = int(round(0.25 * h))
        padded = np.pad(depth, ((bandh, bandh), (band, band)), mode="edge")
        buf_band = np.full((h, w), np.inf)
        buf_int = np.full((h, w), np.inf)
        for i in range(padded.shape[0]):
            for j in range(padded.shape[1]):
                v_src = i - bandh
                u_src = j - band
                in_band = not (0 <= u_src < w and 0 <= v_src < h)
                p = cam0.unproject_pixels(u_src, v_src, padded[i, j])
                u, v, z = cam1.project_points(p[None, :])
                if z[0] < 1e-3:
                    continue
                x0, y0 = int(np.floor(u[0])), int(np.floor(v[0]))
                for dy in (0, 1):
                    for dx in (0, 1):
                        x, y = x0 + dx, y0 + dy
                        if 0 <= x < w and 0 <= y < h:
                            buf = buf_band if in_band else buf_int
                            buf[y, x] = min(buf[y, x], z[0])
        expected = np.isfinite(buf_band) & (buf_band * (1 + 1e-9) + 1e-12 < buf_int)
        assert np.array_equal(mask, expected)
        assert mask.any()

    def test_fills_unseen_pixels_in_prev_depth(self):
        h = w = 32
        intr = default_intrinsics(h, w)
        cam0 = identity_pose(intr)
        cam1 = CameraPose(np.eye(3), [0.0, 0.0, 0.2], intr)
        depth = np.full((h, w), 3.0)
        depth[10:12, 10:12] = np.nan  # uncovered pixels from a real render
        mask = floating_region_mask(depth, cam0, cam1)
        assert mask.dtype == bool  # nearest-fill path exercised


class TestDisparityEdges:
    def test_constant_depth_no_edges(self):
        assert not disparity_edges(np.full((16, 16), 5.0)).any()

    def test_strong_step_detected(self):
        depth = np.where(np.arange(32)[None, :] < 16, 1.0, 5.0) * np.ones((32, 32))
        edges = disparity_edges(depth)
        assert edges.any()
        cols = np.unique(np.nonzero(edges)[1])
        assert set(cols.tolist()) <= {14, 15, 16, 17}
