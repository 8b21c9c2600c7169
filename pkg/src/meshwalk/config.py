"""Run configuration: defaults, YAML loading, flag overrides, validation."""

import dataclasses
from dataclasses import dataclass, field

import yaml

from . import align, raster, trajectory
from .providers import remote as remote_mod


class ConfigError(ValueError):
    """Carries per-field validation messages."""

    def __init__(self, problems):
        self.problems = dict(problems)
        super().__init__("; ".join(f"{k}: {v}" for k, v in self.problems.items()))


@dataclass
class TrajectoryConfig:
    k: int = trajectory.DEFAULT_K
    n: int = trajectory.DEFAULT_N
    step: float = trajectory.DEFAULT_STEP
    pan_deg: float = trajectory.DEFAULT_PAN_DEG
    file: str = ""          # external trajectory file; empty = generate


@dataclass
class PerturbationConfig:
    enabled: bool = False
    disp_scale: float = 0.7
    disp_shift: float = 0.05
    field_amp: float = 0.02
    noise_sigma: float = 0.01


@dataclass
class ProviderConfig:
    name: str = "oracle"    # oracle | stub | remote
    remote_url: str = ""
    timeout: float = remote_mod.DEFAULT_TIMEOUT
    retries: int = remote_mod.DEFAULT_RETRIES
    world_seed: int = 0
    world: str = "corridor"  # corridor | flat
    perturb: PerturbationConfig = field(default_factory=PerturbationConfig)


@dataclass
class AlignConfig:
    enabled: bool = True
    grid_h: int = align.DEFAULT_GRID[0]
    grid_w: int = align.DEFAULT_GRID[1]
    smoothness: float = align.DEFAULT_SMOOTHNESS


@dataclass
class RasterConfig:
    sobel_threshold: float = raster.DEFAULT_SOBEL_THRESHOLD
    normal_eps: float = raster.DEFAULT_NORMAL_EPS
    near_plane: float = raster.DEFAULT_NEAR
    pad_factor: float = raster.DEFAULT_PAD_FACTOR
    aa_factor: int = raster.DEFAULT_AA_FACTOR
    aa_sigma: float = raster.DEFAULT_AA_SIGMA
    cull_enabled: bool = True


@dataclass
class RunConfig:
    prompt: str = "a textured corridor"
    frames: int = 50
    height: int = 512
    width: int = 512
    seed: int = -1                       # mandatory: runs must be reproducible
    vertical_fov_deg: float = 55.0
    output_dir: str = ""
    snapshot_every: int = 10
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    align: AlignConfig = field(default_factory=AlignConfig)
    raster: RasterConfig = field(default_factory=RasterConfig)

    def resolution(self):
        return (self.height, self.width)

    def validate(self):
        problems = {}
        if self.frames < 1:
            problems["frames"] = f"must be >= 1, got {self.frames}"
        if self.height < 4 or self.width < 4:
            problems["height/width"] = f"must be >= 4, got {self.height}x{self.width}"
        if self.seed < 0:
            problems["seed"] = "a non-negative seed is mandatory (no wall-clock seeding)"
        if not (0.0 < self.vertical_fov_deg < 180.0):
            problems["vertical_fov_deg"] = f"must be in (0, 180), got {self.vertical_fov_deg}"
        if self.snapshot_every < 1:
            problems["snapshot_every"] = "must be >= 1"
        if not (0.0 < self.raster.sobel_threshold <= 1.0):
            problems["raster.sobel_threshold"] = \
                f"must be in (0, 1], got {self.raster.sobel_threshold}"
        if not (-1.0 <= self.raster.normal_eps <= 1.0):
            problems["raster.normal_eps"] = \
                f"must be a cosine in [-1, 1], got {self.raster.normal_eps}"
        if self.raster.near_plane <= 0:
            problems["raster.near_plane"] = "must be > 0"
        if self.raster.pad_factor < 1.0:
            problems["raster.pad_factor"] = "must be >= 1"
        if self.raster.aa_factor not in (1, 2, 3, 4):
            problems["raster.aa_factor"] = f"must be 1..4, got {self.raster.aa_factor}"
        if self.raster.aa_sigma <= 0:
            problems["raster.aa_sigma"] = "must be > 0"
        if self.align.grid_h < 2 or self.align.grid_w < 2:
            problems["align.grid_h/grid_w"] = "must be >= 2"
        if self.align.smoothness < 0:
            problems["align.smoothness"] = "must be >= 0"
        if self.trajectory.k < 0 or self.trajectory.n < 1:
            problems["trajectory.k/n"] = "need k >= 0 and n >= 1"
        if self.trajectory.step <= 0:
            problems["trajectory.step"] = "must be > 0"
        if self.provider.name not in ("oracle", "stub", "remote"):
            problems["provider.name"] = f"unknown provider {self.provider.name!r}"
        if self.provider.name == "remote" and not self.provider.remote_url:
            problems["provider.remote_url"] = "required for the remote provider"
        if self.provider.world not in ("corridor", "flat"):
            problems["provider.world"] = f"unknown world {self.provider.world!r}"
        if not self.output_dir:
            problems["output_dir"] = "required"
        if problems:
            raise ConfigError(problems)
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    def dump_yaml(self, path):
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=True)


def _merge_dataclass(obj, data, prefix, problems):
    for key, val in data.items():
        if not hasattr(obj, key):
            problems[prefix + key] = "unknown key"
            continue
        cur = getattr(obj, key)
        if dataclasses.is_dataclass(cur):
            if not isinstance(val, dict):
                problems[prefix + key] = "expected a mapping"
            else:
                _merge_dataclass(cur, val, prefix + key + ".", problems)
        else:
            try:
                setattr(obj, key, type(cur)(val) if val is not None else val)
            except (TypeError, ValueError):
                problems[prefix + key] = f"cannot coerce {val!r} to {type(cur).__name__}"


def config_from_dict(data):
    cfg = RunConfig()
    problems = {}
    _merge_dataclass(cfg, data or {}, "", problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path):
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError({"<root>": "config file must contain a mapping"})
    return config_from_dict(data)
