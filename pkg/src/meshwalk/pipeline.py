"""Per-frame synthesis orchestrator.

Each step: project the scene into the next camera, grow the inpainting mask by
the parallax-revealed border regions, clean the mask, let the provider fill a
full frame, composite so known content survives verbatim, predict and align
depth, cull stretched faces along the new depth edges, unproject the new
content, stitch it to the old surface, merge, and render the updated scene.
"""

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import pngio
from .align import align_depth
from .camera import CameraPose, default_intrinsics
from .config import RunConfig
from .mesh import SceneMesh, init_scene, merge, stitch_boundary, unproject_frame
from .mesh_io import save_ply
from .providers import (DepthPerturbation, OracleProvider, ProviderRequest,
                        RemoteProvider, StubProvider, SyntheticWorld)
from .providers.maskprep import open_mask, preprocess_mask
from .raster import (cull_faces, detect_stretched_triangles, downsample_mask_any,
                     floating_region_mask, project, render_supersampled)
from .trajectory import (Trajectory, generate_path, load_trajectory, save_trajectory,
                         with_intrinsics)

log = logging.getLogger(__name__)


@dataclass
class PipelineState:
    mesh: SceneMesh
    frame_index: int
    camera: CameraPose
    prev_depth_hires: np.ndarray   # merged-scene depth at aa_factor resolution
    config: RunConfig


@dataclass
class FrameResult:
    frame: np.ndarray          # emitted frame (known content composited exactly)
    depth: np.ndarray          # emitted depth (scene depth on known, prediction elsewhere)
    coverage: np.ndarray       # post-merge coverage mask
    inpaint_mask: np.ndarray   # region the provider filled
    render_aa: np.ndarray      # antialiased presentation render
    diagnostics: dict
    internals: dict = field(default_factory=dict)


def bootstrap(prompt, camera: CameraPose, provider, config: RunConfig):
    """Sample the first frame with an all-ones mask and unproject it into the scene."""
    provider.healthcheck()
    h, w = config.resolution()
    request = ProviderRequest("bootstrap", prompt, np.zeros((h, w, 3)),
                              np.ones((h, w), dtype=bool), frame_index=0)
    image0 = provider.inpaint(request)
    depth0 = provider.predict_depth(image0, 0)
    mesh = init_scene(image0, depth0, camera)
    ss = render_supersampled(mesh, camera, (h, w), factor=config.raster.aa_factor,
                             sigma=config.raster.aa_sigma, near=config.raster.near_plane)
    state = PipelineState(mesh=mesh, frame_index=0, camera=camera,
                          prev_depth_hires=ss.hires.depth, config=config)
    diag = {
        "frame": 0,
        "mask_fraction": 1.0,
        "float_fraction": 0.0,
        "culled_faces": 0,
        "vertices": mesh.num_vertices,
        "faces": mesh.num_faces,
        "generation": mesh.generation,
        "align": None,
        "known_drift_max": 0.0,
        "coverage_density": float(ss.mask_full.mean()),
    }
    result = FrameResult(frame=image0, depth=depth0, coverage=ss.mask_full,
                         inpaint_mask=np.ones((h, w), dtype=bool),
                         render_aa=ss.image, diagnostics=diag,
                         internals={"raw_depth": depth0, "aligned_depth": depth0})
    return state, result


def step(state: PipelineState, next_camera: CameraPose, prompt, provider):
    """Advance the scene by one frame; returns (new_state, FrameResult)."""
    cfg = state.config
    h, w = cfg.resolution()
    near = cfg.raster.near_plane
    factor = cfg.raster.aa_factor
    t_next = state.frame_index + 1
    mesh = state.mesh

    render = project(mesh, next_camera, (h, w), near=near)

    float_hires = floating_region_mask(
        state.prev_depth_hires, state.camera.scaled(factor),
        next_camera.scaled(factor), pad_factor=cfg.raster.pad_factor, near=near)
    float_mask = downsample_mask_any(float_hires, factor) if factor > 1 else float_hires
    inpaint0 = ~render.mask | float_mask

    known0 = ~inpaint0
    image_known = np.where(render.mask[..., None], render.image, 0.0)
    opened, prefilled = preprocess_mask(known0, image_known)
    inpaint_mask = ~opened
    assert np.array_equal(inpaint_mask, ~open_mask(~inpaint0)), "mask algebra violated"

    if inpaint_mask.any():
        request_image = np.where(known0[..., None], prefilled, 0.0)
        provided = provider.inpaint(
            ProviderRequest("inpaint", prompt, request_image, opened, t_next))
    else:
        provided = image_known
    composite = np.where(opened[..., None], image_known, provided)

    raw_depth = provider.predict_depth(composite, t_next)
    align_info = None
    aligned = raw_depth
    if cfg.align.enabled and render.mask.any():
        aligned, _, align_info = align_depth(
            raw_depth, render, (cfg.align.grid_h, cfg.align.grid_w),
            cfg.align.smoothness)

    cull_ids = np.zeros(0, dtype=np.int64)
    if cfg.raster.cull_enabled:
        cull_ids = detect_stretched_triangles(
            mesh, aligned, next_camera, face_ids=render.face_ids,
            sobel_threshold=cfg.raster.sobel_threshold,
            normal_eps=cfg.raster.normal_eps, near=near)
    culled = cull_faces(mesh, cull_ids)

    patch = unproject_frame(inpaint_mask, composite, aligned, next_camera)
    # vertex ids survive culling, so stitching may reuse the pre-cull id buffer
    bridges = stitch_boundary(mesh, patch, inpaint_mask, next_camera,
                              face_ids=render.face_ids)
    merged = merge(culled, patch, bridges)

    ss = render_supersampled(merged, next_camera, (h, w), factor=factor,
                             sigma=cfg.raster.aa_sigma, near=near)

    emitted_depth = np.where(opened, render.depth, aligned)
    drift = float(np.abs(composite - image_known)[opened].max()) if opened.any() else 0.0

    diag = {
        "frame": t_next,
        "mask_fraction": float(inpaint_mask.mean()),
        "float_fraction": float(float_mask.mean()),
        "culled_faces": int(cull_ids.size),
        "vertices": merged.num_vertices,
        "faces": merged.num_faces,
        "generation": merged.generation,
        "align": align_info,
        "known_drift_max": drift,
        "coverage_density": float(ss.mask_full.mean()),
    }
    internals = {
        "render": render,
        "float_mask": float_mask,
        "opened": opened,
        "raw_depth": raw_depth,
        "aligned_depth": aligned,
        "composite": composite,
        "bridges": bridges,
        "patch_vertices": patch.num_vertices,
    }
    new_state = PipelineState(mesh=merged, frame_index=t_next, camera=next_camera,
                              prev_depth_hires=ss.hires.depth, config=cfg)
    result = FrameResult(frame=composite, depth=emitted_depth, coverage=ss.mask_full,
                         inpaint_mask=inpaint_mask, render_aa=ss.image,
                         diagnostics=diag, internals=internals)
    return new_state, result


def build_trajectory(config: RunConfig):
    h, w = config.resolution()
    intrinsics = default_intrinsics(h, w, config.vertical_fov_deg)
    tc = config.trajectory
    if tc.file:
        traj = load_trajectory(tc.file, default_intrinsics=intrinsics)
        traj = with_intrinsics(traj, intrinsics)
        if len(traj) < config.frames:
            raise ValueError(f"trajectory file has {len(traj)} poses, "
                             f"need {config.frames}")
        return Trajectory(traj.poses[:config.frames], traj.metadata)
    return generate_path(config.frames, k=tc.k, n=tc.n, step=tc.step,
                         pan_deg=tc.pan_deg, seed=config.seed, intrinsics=intrinsics)


def build_provider(config: RunConfig, trajectory: Trajectory):
    pc = config.provider
    if pc.name == "oracle":
        if pc.world == "flat":
            world = SyntheticWorld.flat_wall(seed=pc.world_seed)
        else:
            world = SyntheticWorld.corridor(seed=pc.world_seed)
        perturb = DepthPerturbation(
            enabled=pc.perturb.enabled, disp_scale=pc.perturb.disp_scale,
            disp_shift=pc.perturb.disp_shift, field_amp=pc.perturb.field_amp,
            noise_sigma=pc.perturb.noise_sigma, seed=config.seed)
        return OracleProvider(world, trajectory, perturbation=perturb)
    if pc.name == "stub":
        return StubProvider(seed=config.seed)
    if pc.name == "remote":
        return RemoteProvider(pc.remote_url, timeout=pc.timeout, retries=pc.retries)
    raise ValueError(f"unknown provider {pc.name!r}")


class RunWriter:
    """Owns the on-disk layout of one run."""

    def __init__(self, out_dir):
        self.root = Path(out_dir)
        for sub in ("frames", "renders", "depth", "masks", "masks_inpaint",
                    "mesh/snapshots", "state"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self._diag_path = self.root / "diagnostics.jsonl"

    def write_frame(self, idx, result: FrameResult, wall_seconds):
        name = f"{idx:05d}"
        pngio.save_image_png(result.frame, self.root / "frames" / f"{name}.png")
        pngio.save_image_png(np.nan_to_num(result.render_aa),
                             self.root / "renders" / f"{name}.png")
        pngio.save_depth_png(result.depth, self.root / "depth" / f"{name}.png",
                             self.root / "depth" / f"{name}.txt")
        pngio.save_mask_png(result.coverage, self.root / "masks" / f"{name}.png")
        pngio.save_mask_png(result.inpaint_mask,
                            self.root / "masks_inpaint" / f"{name}.png")
        record = dict(result.diagnostics)
        record["seconds"] = wall_seconds
        with open(self._diag_path, "a") as fh:
            fh.write(json.dumps(record) + "\n")

    def write_snapshot(self, state: PipelineState):
        name = f"{state.frame_index:05d}"
        save_ply(state.mesh, self.root / "mesh" / "snapshots" / f"{name}.ply")
        np.savez_compressed(
            self.root / "state" / f"{name}.npz",
            positions=state.mesh.positions, colors=state.mesh.colors,
            faces=state.mesh.faces, generation=state.mesh.generation,
            frame_index=state.frame_index)

    def write_final(self, state: PipelineState):
        save_ply(state.mesh, self.root / "mesh" / "final.ply")

    def truncate_diagnostics(self, max_frame):
        if not self._diag_path.exists():
            return
        kept = []
        with open(self._diag_path) as fh:
            for line in fh:
                if line.strip() and json.loads(line)["frame"] <= max_frame:
                    kept.append(line)
        with open(self._diag_path, "w") as fh:
            fh.writelines(kept)

    def latest_state(self):
        files = sorted((self.root / "state").glob("*.npz"))
        return files[-1] if files else None


def _restore_state(npz_path, config, trajectory):
    data = np.load(npz_path)
    mesh = SceneMesh(data["positions"], data["colors"], data["faces"],
                     generation=int(data["generation"]))
    frame_index = int(data["frame_index"])
    camera = trajectory[frame_index]
    ss = render_supersampled(mesh, camera, config.resolution(),
                             factor=config.raster.aa_factor,
                             sigma=config.raster.aa_sigma,
                             near=config.raster.near_plane)
    return PipelineState(mesh=mesh, frame_index=frame_index, camera=camera,
                         prev_depth_hires=ss.hires.depth, config=config)


def run(config: RunConfig, provider=None, on_frame=None, resume=False):
    """Execute a full generation run and write the artifact layout.

    on_frame(frame_index, FrameResult) is invoked after each frame; a mid-run
    failure leaves completed frames plus a resumable state snapshot behind.
    """
    config.validate()
    trajectory = build_trajectory(config)
    if provider is None:
        provider = build_provider(config, trajectory)
    writer = RunWriter(config.output_dir)
    config.dump_yaml(writer.root / "config.resolved")
    save_trajectory(trajectory, writer.root / "trajectory.txt")

    start_frame = 0
    state = None
    if resume:
        latest = writer.latest_state()
        if latest is not None:
            state = _restore_state(latest, config, trajectory)
            start_frame = state.frame_index
            writer.truncate_diagnostics(start_frame)
            log.info("resuming from frame %d", start_frame)

    try:
        if state is None:
            t0 = time.perf_counter()
            state, result = bootstrap(config.prompt, trajectory[0], provider, config)
            writer.write_frame(0, result, time.perf_counter() - t0)
            writer.write_snapshot(state)
            if on_frame:
                on_frame(0, result)
        for idx in range(start_frame + 1, config.frames):
            t0 = time.perf_counter()
            state, result = step(state, trajectory[idx], config.prompt, provider)
            writer.write_frame(idx, result, time.perf_counter() - t0)
            if idx % config.snapshot_every == 0:
                writer.write_snapshot(state)
            if on_frame:
                on_frame(idx, result)
    except Exception:
        if state is not None:
            writer.write_snapshot(state)
        raise
    writer.write_snapshot(state)
    writer.write_final(state)
    return state
