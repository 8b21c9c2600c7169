"""Camera paths: generated retreat-and-pan walkthroughs, the backward-smoothness
filter for externally supplied trajectories, and rigid pose algebra."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .camera import CameraPose, CameraValidationError

log = logging.getLogger(__name__)

DEFAULT_K = 5
DEFAULT_N = 5
DEFAULT_STEP = 0.1
DEFAULT_PAN_DEG = 0.6
DEFAULT_SMOOTH_THRESHOLD = 0.9


@dataclass
class Trajectory:
    poses: list
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.poses)

    def __iter__(self):
        return iter(self.poses)

    def __getitem__(self, i):
        return self.poses[i]

    def centers(self):
        return np.stack([p.center for p in self.poses])


def _pan_rotation_w2c(theta):
    """World-to-camera rotation for a camera panned by theta about world y.

    The camera's viewing axis in world coordinates is (sin t, 0, cos t).
    """
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 0.0, -s],
                     [0.0, 1.0, 0.0],
                     [s, 0.0, c]])


def view_direction(pose: CameraPose):
    """World-space viewing axis: last column of the camera-to-world rotation."""
    return pose.rotation.T @ np.array([0.0, 0.0, 1.0])


def generate_path(num_frames, k=DEFAULT_K, n=DEFAULT_N, step=DEFAULT_STEP,
                  pan_deg=DEFAULT_PAN_DEG, seed=0, intrinsics=(1.0, 1.0, 0.0, 0.0)):
    """Backward walkthrough path: the camera retreats along its viewing axis,
    purely translating for the first k frames, then panning in the x-z plane
    with a freshly sampled direction every n frames.
    """
    if num_frames < 1:
        raise ValueError("num_frames must be >= 1")
    rng = np.random.default_rng(seed)
    poses = []
    theta = 0.0
    center = np.zeros(3)
    pan_step = np.radians(pan_deg)
    direction = 0.0
    for i in range(num_frames):
        if i > k and (i - k - 1) % n == 0:
            direction = 1.0 if rng.random() < 0.5 else -1.0
        if i > 0:
            if i > k:
                theta += direction * pan_step
            view = np.array([np.sin(theta), 0.0, np.cos(theta)])
            center = center - step * view
        R = _pan_rotation_w2c(theta)
        poses.append(CameraPose(R, -R @ center, intrinsics))
    return Trajectory(poses, metadata={"seed": seed, "k": k, "n": n, "step": step,
                                       "pan_deg": pan_deg})


def filter_backward_smooth(traj: Trajectory, threshold=DEFAULT_SMOOTH_THRESHOLD):
    """True iff every consecutive step retreats smoothly along the viewing axis.

    The per-pair statistic is the cosine between the reversed displacement
    (c_t - c_{t+1}) and the viewing direction v_t, which is +1 for a camera
    backing straight out along its own axis. Forward-walking trajectories
    (e.g. raw real-estate clips) should be reversed before testing, matching
    how such footage is adapted to retreat-style synthesis.
    """
    if len(traj) < 2:
        raise ValueError("need at least 2 poses")
    centers = traj.centers()
    for t in range(len(traj) - 1):
        delta = centers[t] - centers[t + 1]
        norm = np.linalg.norm(delta)
        if norm < 1e-15:
            log.warning("coincident camera centers at step %d; condition undefined", t)
            return False
        v = view_direction(traj[t])
        cos = float(delta @ v) / (norm * np.linalg.norm(v))
        if cos < threshold:
            return False
    return True


def pose_compose(outer: CameraPose, inner: CameraPose):
    """world->inner->outer chaining: x -> R_o (R_i x + t_i) + t_o."""
    R = outer.rotation @ inner.rotation
    t = outer.rotation @ inner.translation + outer.translation
    return CameraPose(R, t, outer.intrinsics)


def pose_invert(pose: CameraPose):
    R = pose.rotation.T
    return CameraPose(R, -R @ pose.translation, pose.intrinsics)


def save_trajectory(traj: Trajectory, path, write_intrinsics=True):
    """One pose per line: 12 floats, row-major [R|t]; optional intrinsics header."""
    with open(path, "w") as fh:
        if write_intrinsics and len(traj):
            fx, fy, cx, cy = traj[0].intrinsics
            fh.write(f"intrinsics {fx!r} {fy!r} {cx!r} {cy!r}\n")
        for pose in traj:
            rt = np.hstack([pose.rotation, pose.translation[:, None]])
            fh.write(" ".join(repr(float(x)) for x in rt.ravel()) + "\n")


def load_trajectory(path, default_intrinsics=(1.0, 1.0, 0.0, 0.0)):
    poses = []
    intrinsics = default_intrinsics
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0].lower() == "intrinsics":
                intrinsics = tuple(float(x) for x in parts[1:5])
                continue
            vals = [float(x) for x in parts]
            if len(vals) != 12:
                raise ValueError(f"{path}: expected 12 floats per pose line, got {len(vals)}")
            rt = np.array(vals).reshape(3, 4)
            try:
                poses.append(CameraPose(rt[:, :3], rt[:, 3], intrinsics))
            except CameraValidationError as exc:
                raise ValueError(f"{path}: invalid pose: {exc}") from exc
    return Trajectory(poses, metadata={"source": str(path)})


def with_intrinsics(traj: Trajectory, intrinsics):
    poses = [CameraPose(p.rotation, p.translation, intrinsics) for p in traj]
    return Trajectory(poses, dict(traj.metadata))
