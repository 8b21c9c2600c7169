"""3D-consistency and pose metrics for generated runs.

Scale-invariant depth error, similarity alignment of trajectories, pose
accuracy, tracking-based reprojection error, and coverage density. Reference
geometry comes from the synthetic oracle or from an externally supplied
reconstruction file (header "NPOINTS k", k lines "x y z", then per-frame
blocks "FRAME i m" with m lines "point_id u v").
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import pngio
from .camera import CameraPose
from .trajectory import Trajectory


class EvaluationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# scale-invariant depth error


def si_rmse(d_out, d_ref, valid=None):
    """Scale-invariant RMSE between two depth maps over the valid mask.

    Computed via the closed form sqrt(2 * Var(log d_out - log d_ref)), which
    equals the pairwise double-sum definition with 1/N^2 normalization over
    valid pixel pairs.
    """
    d_out = np.asarray(d_out, dtype=np.float64)
    d_ref = np.asarray(d_ref, dtype=np.float64)
    if valid is None:
        valid = np.ones(d_out.shape, dtype=bool)
    valid = np.asarray(valid, dtype=bool)
    if not valid.any():
        raise EvaluationError("validity mask is empty")
    a = d_out[valid]
    b = d_ref[valid]
    if (a <= 0).any() or (b <= 0).any():
        raise EvaluationError("non-positive depth inside the validity mask")
    e = np.log(a) - np.log(b)
    return float(np.sqrt(2.0 * e.var()))


# ---------------------------------------------------------------------------
# trajectory alignment and pose accuracy


@dataclass
class SimilarityTransform:
    scale: float
    rotation: np.ndarray
    translation: np.ndarray
    degenerate: bool = False   # collinear centers: rotation about the line is free

    def apply(self, points):
        return self.scale * (np.asarray(points) @ self.rotation.T) + self.translation


def align_trajectories(est: Trajectory, ref: Trajectory):
    """Closed-form least-squares similarity aligning estimated camera centers
    onto the reference (orthogonal Procrustes with scale from variance)."""
    if len(est) != len(ref):
        raise EvaluationError(f"trajectory lengths differ: {len(est)} vs {len(ref)}")
    if len(est) < 3:
        raise EvaluationError("need at least 3 poses for similarity alignment")
    x = est.centers()
    y = ref.centers()
    mx = x.mean(axis=0)
    my = y.mean(axis=0)
    xc = x - mx
    yc = y - my
    cov = yc.T @ xc / len(est)
    var_x = (xc ** 2).sum() / len(est)
    if var_x < 1e-30:
        raise EvaluationError("estimated centers are coincident")
    u, d, vt = np.linalg.svd(cov)
    s_fix = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s_fix[2, 2] = -1.0
    rotation = u @ s_fix @ vt
    scale = float(np.trace(np.diag(d) @ s_fix) / var_x)
    translation = my - scale * rotation @ mx
    degenerate = d[1] < 1e-12 * max(d[0], 1e-30)
    return SimilarityTransform(scale=scale, rotation=rotation,
                               translation=translation, degenerate=degenerate)


def rotation_angle_deg(r_a, r_b):
    cos = (np.trace(r_a @ r_b.T) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))


def pose_errors(est: Trajectory, ref: Trajectory, transform=None):
    """(mean rotation error deg, mean center error as % of reference path length)."""
    if transform is None:
        transform = align_trajectories(est, ref)
    ref_centers = ref.centers()
    seg = np.linalg.norm(np.diff(ref_centers, axis=0), axis=1)
    path_len = float(seg.sum())
    if path_len <= 0:
        raise EvaluationError("reference path has zero length")
    est_aligned = transform.apply(est.centers())
    trans_pct = float(np.linalg.norm(est_aligned - ref_centers, axis=1).mean()
                      / path_len * 100.0)
    rot_deg = float(np.mean([
        rotation_angle_deg(e.rotation @ transform.rotation.T, r.rotation)
        for e, r in zip(est, ref)]))
    return rot_deg, trans_pct


# ---------------------------------------------------------------------------
# tracking-based reprojection error


def _ncc(a, b):
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt((a * a).sum() * (b * b).sum())
    if denom < 1e-12:
        return -np.inf
    return float((a * b).sum() / denom)


def track_patch(template, frame, center_rc, window=5):
    """Integer-resolution NCC search for the template around center (row, col)."""
    half = template.shape[0] // 2
    h, w = frame.shape[:2]
    r0, c0 = center_rc
    best, best_rc = -np.inf, None
    for dr in range(-window, window + 1):
        for dc in range(-window, window + 1):
            r = r0 + dr
            c = c0 + dc
            if r - half < 0 or r + half >= h or c - half < 0 or c + half >= w:
                continue
            score = _ncc(template, frame[r - half:r + half + 1, c - half:c + half + 1])
            if score > best:
                best, best_rc = score, (r, c)
    return best_rc, best


def reprojection_error(frames, world_points, trajectory: Trajectory, depths=None,
                       template_frame=0, window=5, patch=5, depth_tol=0.05,
                       min_points=10):
    """Mean pixel distance between projected points and their tracked positions.

    world_points must be visible in the template frame at their projected
    pixel; per-frame visibility is checked against the emitted depth maps when
    provided. Points whose template patch is textureless are dropped; fewer
    than min_points trackable points is an error.
    """
    pts = np.asarray(world_points, dtype=np.float64)
    half = patch // 2
    t0 = frames[template_frame]
    h, w = t0.shape[:2]
    u0, v0, z0 = trajectory[template_frame].project_points(pts)
    templates = []
    keep = []
    for i in range(pts.shape[0]):
        r, c = int(round(v0[i])), int(round(u0[i]))
        if z0[i] <= 0 or not (half <= r < h - half and half <= c < w - half):
            continue
        tpl = t0[r - half:r + half + 1, c - half:c + half + 1]
        if tpl.std() < 1e-6:
            continue
        templates.append(tpl.copy())
        keep.append(i)
    if len(keep) < min_points:
        raise EvaluationError(f"only {len(keep)} trackable points, need {min_points}")
    pts = pts[keep]

    errors = []
    margin = half + window
    for t, frame in enumerate(frames):
        if t == template_frame:
            continue
        u, v, z = trajectory[t].project_points(pts)
        for i in range(pts.shape[0]):
            if z[i] <= 0:
                continue
            r, c = int(round(v[i])), int(round(u[i]))
            if not (margin <= r < h - margin and margin <= c < w - margin):
                continue
            if depths is not None:
                d = depths[t][r, c]
                if not np.isfinite(d) or abs(d - z[i]) > depth_tol * z[i]:
                    continue  # occluded in this frame
            tracked, score = track_patch(templates[i], frame, (r, c), window)
            if tracked is None or score < 0.5:
                continue
            errors.append(np.hypot(tracked[1] - u[i], tracked[0] - v[i]))
    if len(errors) < min_points:
        raise EvaluationError(f"only {len(errors)} tracked observations")
    return float(np.mean(errors))


def density(masks):
    """Mean percentage of covered pixels across the mask list."""
    if not len(masks):
        raise EvaluationError("mask list is empty")
    return float(np.mean([np.asarray(m, dtype=bool).mean() for m in masks]) * 100.0)


# ---------------------------------------------------------------------------
# external reconstruction files


@dataclass
class Reconstruction:
    points: np.ndarray                 # (K, 3)
    observations: dict                 # frame -> (point_id, u, v) float array


def save_reconstruction(recon: Reconstruction, path):
    with open(path, "w") as fh:
        fh.write(f"NPOINTS {recon.points.shape[0]}\n")
        for p in recon.points:
            fh.write(f"{p[0]!r} {p[1]!r} {p[2]!r}\n")
        for frame in sorted(recon.observations):
            obs = recon.observations[frame]
            fh.write(f"FRAME {frame} {len(obs)}\n")
            for pid, u, v in obs:
                fh.write(f"{int(pid)} {u!r} {v!r}\n")


def load_reconstruction(path):
    with open(path) as fh:
        tokens = fh.read().split("\n")
    lines = [ln.split() for ln in tokens if ln.strip()]
    if not lines or lines[0][0] != "NPOINTS":
        raise EvaluationError(f"{path}: expected NPOINTS header")
    k = int(lines[0][1])
    points = np.array([[float(x) for x in lines[1 + i]] for i in range(k)])
    observations = {}
    i = 1 + k
    while i < len(lines):
        if lines[i][0] != "FRAME":
            raise EvaluationError(f"{path}: expected FRAME block at line {i}")
        frame = int(lines[i][1])
        m = int(lines[i][2])
        block = lines[i + 1:i + 1 + m]
        observations[frame] = np.array(
            [[float(b[0]), float(b[1]), float(b[2])] for b in block])
        i += 1 + m
    return Reconstruction(points=points, observations=observations)


def reprojection_from_reconstruction(recon: Reconstruction, trajectory: Trajectory):
    errors = []
    for frame, obs in recon.observations.items():
        pids = obs[:, 0].astype(int)
        u, v, z = trajectory[frame].project_points(recon.points[pids])
        infront = z > 0
        errors.extend(np.hypot(u - obs[:, 1], v - obs[:, 2])[infront])
    if not errors:
        raise EvaluationError("reconstruction holds no usable observations")
    return float(np.mean(errors))


# ---------------------------------------------------------------------------
# whole-run evaluation


@dataclass
class EvalReport:
    si_rmse_per_frame: list = field(default_factory=list)
    mean_si_rmse: float = float("nan")
    rotation_error_deg: float = float("nan")
    translation_error_pct: float = float("nan")
    reprojection_error_px: float = float("nan")
    density_pct: float = float("nan")

    def to_dict(self):
        return {
            "si_rmse_per_frame": [float(x) for x in self.si_rmse_per_frame],
            "mean_si_rmse": self.mean_si_rmse,
            "rotation_error_deg": self.rotation_error_deg,
            "translation_error_pct": self.translation_error_pct,
            "reprojection_error_px": self.reprojection_error_px,
            "density_pct": self.density_pct,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _load_run_frames(root, count):
    frames, depths, masks = [], [], []
    for t in range(count):
        name = f"{t:05d}"
        frames.append(pngio.load_image_png(root / "frames" / f"{name}.png"))
        depths.append(pngio.load_depth_png(root / "depth" / f"{name}.png",
                                           root / "depth" / f"{name}.txt"))
        masks.append(pngio.load_mask_png(root / "masks" / f"{name}.png"))
    return frames, depths, masks


def sample_track_points(frame0_depth, camera, stride=None, margin=8):
    """Grid-sampled 3D points from the run's own frame-0 geometry."""
    h, w = frame0_depth.shape
    stride = stride or max(h, w) // 12
    vv, uu = np.mgrid[margin:h - margin:stride, margin:w - margin:stride]
    return camera.unproject_pixels(uu.ravel(), vv.ravel(),
                                   frame0_depth[vv.ravel(), uu.ravel()])


def evaluate_run(run_dir, reconstruction_path=None):
    """Assemble the full EvalReport for a finished run directory."""
    from .config import load_config
    from .pipeline import build_provider, build_trajectory
    from .trajectory import load_trajectory

    root = Path(run_dir)
    missing = [p for p in ("config.resolved", "trajectory.txt", "frames", "depth",
                           "masks") if not (root / p).exists()]
    if missing:
        raise EvaluationError(f"run dir incomplete, missing: {', '.join(missing)}")
    config = load_config(root / "config.resolved")
    count = config.frames
    frames, depths, masks = _load_run_frames(root, count)

    echoed = load_trajectory(root / "trajectory.txt")
    reference = build_trajectory(config)
    report = EvalReport()
    report.rotation_error_deg, report.translation_error_pct = pose_errors(
        echoed, reference)
    report.density_pct = density(masks)

    if config.provider.name == "oracle":
        provider = build_provider(config, reference)
        per_frame = []
        for t in range(count):
            truth = provider.true_depth(t, depths[t].shape)
            per_frame.append(si_rmse(depths[t], truth))
        report.si_rmse_per_frame = per_frame
        report.mean_si_rmse = float(np.mean(per_frame))

    if reconstruction_path:
        recon = load_reconstruction(reconstruction_path)
        report.reprojection_error_px = reprojection_from_reconstruction(recon, echoed)
    else:
        points = sample_track_points(depths[0], echoed[0])
        report.reprojection_error_px = reprojection_error(
            frames, points, echoed, depths=depths)
    return report
