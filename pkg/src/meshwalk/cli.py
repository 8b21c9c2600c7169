"""Command-line interface: generate, evaluate, export-mesh, filter-trajectory.

Exit codes: 0 success, 1 runtime failure, 2 validation failure. Values given
on the command line override the config file.
"""

import sys
from pathlib import Path

import click

from . import __version__, evaluation, mesh_io, pipeline
from .config import ConfigError, RunConfig, load_config
from .trajectory import (DEFAULT_SMOOTH_THRESHOLD, filter_backward_smooth,
                         load_trajectory)

EXIT_RUNTIME = 1
EXIT_VALIDATION = 2


@click.group()
@click.version_option(__version__)
def main():
    """Synthesize walkthrough videos over a progressively built scene mesh."""


def _fail_validation(message):
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_VALIDATION)


def _fail_runtime(message):
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_RUNTIME)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="YAML config file; flags below override its values.")
@click.option("--prompt", default=None, help="Scene description passed to the provider.")
@click.option("--frames", type=int, default=None, show_default="50",
              help="Number of frames to synthesize.")
@click.option("--width", type=int, default=None, show_default="512")
@click.option("--height", type=int, default=None, show_default="512")
@click.option("--seed", type=int, default=None,
              help="Mandatory RNG seed; runs are reproducible bit-for-bit.")
@click.option("--out", "-o", "output_dir", default=None, help="Run output directory.")
@click.option("--provider", "provider_name", default=None,
              type=click.Choice(["oracle", "stub", "remote"]), show_default="oracle")
@click.option("--remote-url", default=None, envvar="MESHWALK_REMOTE_URL",
              help="Remote provider base URL (env MESHWALK_REMOTE_URL).")
@click.option("--world", default=None, type=click.Choice(["corridor", "flat"]),
              show_default="corridor", help="Synthetic world for the oracle provider.")
@click.option("--perturb/--no-perturb", "perturb", default=None,
              help="Perturb oracle depth to emulate an inconsistent predictor.")
@click.option("--trajectory-file", default=None,
              help="External trajectory file instead of the generated path.")
@click.option("--traj-k", type=int, default=None, show_default="5",
              help="Frames of pure translation before panning starts.")
@click.option("--traj-n", type=int, default=None, show_default="5",
              help="Frames per sampled pan direction.")
@click.option("--step", type=float, default=None, show_default="0.1",
              help="Per-frame backward translation in world units.")
@click.option("--pan-deg", type=float, default=None, show_default="0.6",
              help="Per-frame pan increment in degrees.")
@click.option("--align/--no-align", "align_enabled", default=None,
              help="Fit the per-frame depth correction (default on).")
@click.option("--cull/--no-cull", "cull_enabled", default=None,
              help="Remove stretched faces at depth discontinuities (default on).")
@click.option("--sobel-threshold", type=float, default=None, show_default="0.3",
              help="Edge threshold on normalized-disparity Sobel magnitude.")
@click.option("--normal-eps", type=float, default=None, show_default="-0.05",
              help="Grazing-angle cosine bound for keeping edge faces.")
@click.option("--near-plane", type=float, default=None, show_default="0.001")
@click.option("--pad-factor", type=float, default=None, show_default="1.5",
              help="Depth padding extent for the border-parallax fix.")
@click.option("--aa-factor", type=int, default=None, show_default="2",
              help="Supersampling factor for antialiased rendering.")
@click.option("--grid", "align_grid", type=int, default=None, show_default="17",
              help="Residual correction grid size (square).")
@click.option("--smoothness", type=float, default=None, show_default="1.0",
              help="Laplacian weight of the residual grid fit.")
@click.option("--snapshot-every", type=int, default=None, show_default="10")
@click.option("--resume", is_flag=True, default=False,
              help="Continue an interrupted run from its latest snapshot.")
def generate(config_path, resume, **flags):
    """Run the full synthesis pipeline and write the artifact layout."""
    try:
        cfg = load_config(config_path) if config_path else RunConfig()
        _apply_flags(cfg, flags)
        cfg.validate()
    except ConfigError as exc:
        _fail_validation("\n".join(f"{k}: {v}" for k, v in exc.problems.items()))
    except (OSError, ValueError) as exc:
        _fail_validation(str(exc))
    try:
        pipeline.run(cfg, resume=resume)
    except Exception as exc:
        _fail_runtime(f"run aborted: {exc}")
    click.echo(f"run complete: {cfg.output_dir}")


def _apply_flags(cfg, flags):
    direct = {"prompt": "prompt", "frames": "frames", "width": "width",
              "height": "height", "seed": "seed", "output_dir": "output_dir",
              "snapshot_every": "snapshot_every"}
    for flag, attr in direct.items():
        if flags.get(flag) is not None:
            setattr(cfg, attr, flags[flag])
    if flags.get("provider_name") is not None:
        cfg.provider.name = flags["provider_name"]
    if flags.get("remote_url") is not None:
        cfg.provider.remote_url = flags["remote_url"]
    if flags.get("world") is not None:
        cfg.provider.world = flags["world"]
    if flags.get("perturb") is not None:
        cfg.provider.perturb.enabled = flags["perturb"]
    if flags.get("trajectory_file") is not None:
        cfg.trajectory.file = flags["trajectory_file"]
    for flag, attr in (("traj_k", "k"), ("traj_n", "n"), ("step", "step"),
                       ("pan_deg", "pan_deg")):
        if flags.get(flag) is not None:
            setattr(cfg.trajectory, attr, flags[flag])
    if flags.get("align_enabled") is not None:
        cfg.align.enabled = flags["align_enabled"]
    if flags.get("align_grid") is not None:
        cfg.align.grid_h = cfg.align.grid_w = flags["align_grid"]
    if flags.get("smoothness") is not None:
        cfg.align.smoothness = flags["smoothness"]
    if flags.get("cull_enabled") is not None:
        cfg.raster.cull_enabled = flags["cull_enabled"]
    for flag in ("sobel_threshold", "normal_eps", "near_plane", "pad_factor",
                 "aa_factor"):
        if flags.get(flag) is not None:
            setattr(cfg.raster, flag, flags[flag])


@main.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--reconstruction", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="External reconstruction file for reprojection error.")
def evaluate(run_dir, reconstruction):
    """Compute the consistency/pose report for a run; JSON on stdout."""
    try:
        report = evaluation.evaluate_run(run_dir, reconstruction_path=reconstruction)
    except evaluation.EvaluationError as exc:
        _fail_validation(str(exc))
    except Exception as exc:
        _fail_runtime(str(exc))
    click.echo(report.to_json())


@main.command("export-mesh")
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--frame", type=int, default=None,
              help="Snapshot frame index; omit for the final mesh.")
@click.option("--format", "fmt", type=click.Choice(["ply", "obj"]), default="ply",
              show_default=True)
@click.option("--output", "-o", required=True, help="Destination file.")
def export_mesh(run_dir, frame, fmt, output):
    """Convert a stored mesh snapshot to PLY or OBJ."""
    root = Path(run_dir)
    src = (root / "mesh" / "final.ply" if frame is None
           else root / "mesh" / "snapshots" / f"{frame:05d}.ply")
    if not src.exists():
        _fail_validation(f"no mesh snapshot at {src}")
    try:
        mesh = mesh_io.load_ply(src)
        mesh_io.save_mesh(mesh, output, fmt)
    except Exception as exc:
        _fail_runtime(str(exc))
    click.echo(f"wrote {output} ({mesh.num_vertices} vertices, {mesh.num_faces} faces)")


@main.command("filter-trajectory")
@click.argument("files", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--threshold", type=float, default=DEFAULT_SMOOTH_THRESHOLD,
              show_default=True,
              help="Minimum per-step cosine between retreat direction and view axis.")
def filter_trajectory(files, threshold):
    """Check trajectories for smooth backward motion; prints PASS/FAIL per file."""
    for path in files:
        try:
            traj = load_trajectory(path)
            verdict = filter_backward_smooth(traj, threshold=threshold)
        except (ValueError, OSError) as exc:
            _fail_validation(f"{path}: {exc}")
        click.echo(f"{'PASS' if verdict else 'FAIL'} {path}")


if __name__ == "__main__":
    main()
