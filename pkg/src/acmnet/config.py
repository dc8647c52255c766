"""Model/run configuration with JSON round-tripping.

JSON schema (all keys optional, defaults below):
{
  "model": {
    "levels": 3, "channels": [64,64,64], "k": 6,
    "nodes_per_level": [10000,5000,2500], "coord_system": "3d",
    "fusion": "sg" | "df" | "daf",
    "integration": "feature" | "end",
    "propagation": "encoder" | "decoder" | "both" | "none",
    "gamma1": 0.5, "gamma2": 0.01, "leaky_slope": 0.2, "seed": 0,
    "fi_channels": 64, "edge_hidden": null
  },
  "data": {
    "height": 64, "width": 64, "n_train": 200, "n_eval": 50,
    "pattern": "lidar-lines" | "uniform-random", "scan_rows": 16,
    "train_ratio": 1.0, "eval_ratio": 1.0, "seed": 1234
  },
  "train": {
    "steps": 2000, "batch_size": 8, "lr": 0.0005,
    "beta1": 0.9, "beta2": 0.999, "epoch_steps": 200, "lr_halve_epochs": 10
  }
}
"""

import dataclasses
import json
from dataclasses import dataclass, field

from .errors import ConfigError

FUSIONS = ("sg", "df", "daf")
INTEGRATIONS = ("feature", "end")
PLACEMENTS = ("encoder", "decoder", "both", "none")
COORDS = ("2d", "3d")
PATTERNS = ("lidar-lines", "uniform-random")

SWEEP_RATIOS = (0.025, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0)


@dataclass
class ModelConfig:
    levels: int = 3
    channels: tuple = (64, 64, 64)
    k: int = 6
    nodes_per_level: tuple = (10000, 5000, 2500)
    coord_system: str = "3d"
    fusion: str = "sg"
    integration: str = "feature"
    propagation: str = "encoder"
    gamma1: float = 0.5
    gamma2: float = 0.01
    leaky_slope: float = 0.2
    seed: int = 0
    fi_channels: int = 64
    edge_hidden: int | None = None

    def __post_init__(self):
        self.channels = tuple(self.channels)
        self.nodes_per_level = tuple(self.nodes_per_level)
        if self.levels < 1:
            raise ConfigError("levels must be >= 1")
        if len(self.channels) != self.levels or len(self.nodes_per_level) != self.levels:
            raise ConfigError("channels and nodes_per_level must have one entry per level")
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ConfigError("gamma factors must be >= 0")
        if not 0 < self.leaky_slope < 1:
            raise ConfigError("leaky_slope must lie in (0, 1)")
        for value, allowed, name in ((self.fusion, FUSIONS, "fusion"),
                                     (self.integration, INTEGRATIONS, "integration"),
                                     (self.propagation, PLACEMENTS, "propagation"),
                                     (self.coord_system, COORDS, "coord_system")):
            if value not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {value!r}")

    @property
    def hidden_width(self):
        return self.edge_hidden if self.edge_hidden is not None else self.channels[0]


@dataclass
class DataConfig:
    height: int = 64
    width: int = 64
    n_train: int = 200
    n_eval: int = 50
    pattern: str = "lidar-lines"
    scan_rows: int = 16
    train_ratio: float = 1.0
    eval_ratio: float = 1.0
    seed: int = 1234

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ConfigError(f"pattern must be one of {PATTERNS}, got {self.pattern!r}")
        for r, name in ((self.train_ratio, "train_ratio"), (self.eval_ratio, "eval_ratio")):
            if not 0 < r <= 1:
                raise ConfigError(f"{name} must lie in (0, 1], got {r}")


@dataclass
class TrainConfig:
    steps: int = 2000
    batch_size: int = 8
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epoch_steps: int = 200
    lr_halve_epochs: int = 10


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def _build(cls, section, name):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown {name} config keys: {sorted(unknown)}")
    return cls(**section)


def run_config_from_dict(d):
    unknown = set(d) - {"model", "data", "train"}
    if unknown:
        raise ConfigError(f"unknown top-level config sections: {sorted(unknown)}")
    return RunConfig(
        model=_build(ModelConfig, d.get("model", {}), "model"),
        data=_build(DataConfig, d.get("data", {}), "data"),
        train=_build(TrainConfig, d.get("train", {}), "train"),
    )


def load_run_config(path):
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from e
    return run_config_from_dict(d)


def desk_config(seed=0, data_seed=1234):
    """Desk-scale profile: 64x64 scenes, 32 channels, small graphs, batch 1."""
    return RunConfig(
        model=ModelConfig(channels=(32, 32, 32), nodes_per_level=(256, 128, 64),
                          fi_channels=32, seed=seed),
        data=DataConfig(seed=data_seed),
        train=TrainConfig(batch_size=1),
    )
