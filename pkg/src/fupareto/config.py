"""Run configuration: defaults, validation and YAML round-tripping."""

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import yaml

from .exceptions import ConfigurationError

ABLATIONS = ("M1", "M2", "M3", "M4", "M5", "M6", "M7", "M8")
SWEEP_AXES = ("s", "alpha", "unlearn_count", "seed")
REQUIRED_KEYS = ("dataset", "clients", "unlearn_count")


class MissingKeyError(ConfigurationError):
    pass


class UnknownKeyError(ConfigurationError):
    pass


class OutOfRangeError(ConfigurationError):
    pass


@dataclass
class RunConfig:
    dataset: str = "synthetic"
    clients: int = 10
    unlearn_count: int = 2
    # synthetic data
    classes: int = 3
    dim: int = 2
    per_class: int = 600
    spread: float = 0.15
    data_seed: Optional[int] = None
    # IDX data
    idx_images: Optional[str] = None
    idx_labels: Optional[str] = None
    # partitioning
    partition: str = "dirichlet"
    alpha: float = 0.5
    test_frac: float = 0.2
    # model
    hidden: list = field(default_factory=lambda: [16])
    activation: str = "relu"
    seed: int = 0
    # FedAvg pretraining
    pretrain_rounds: int = 200
    local_epochs: int = 1
    batch_size: int = 200
    pretrain_lr: float = 0.1
    lr_decay: float = 0.999
    # unlearning / post-training
    eta: float = 0.05
    beta: float = 0.05
    s: int = 3
    delta: float = 1e-3
    unlearn_rounds: int = 100
    post_rounds: Optional[int] = None
    early_stop_rounds: int = 3
    max_dead_ends: int = 3
    mgda_tol: float = 1e-10
    mgda_max_iter: int = 1000
    drop_tol: float = 1e-8
    normalize_gradients: bool = True
    ablation: Optional[str] = None
    # sweeps
    sweep: dict = field(default_factory=dict)
    sweep_seeds: list = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    @property
    def resolved_post_rounds(self):
        return self.unlearn_rounds if self.post_rounds is None else self.post_rounds

    @property
    def resolved_data_seed(self):
        return self.seed if self.data_seed is None else self.data_seed

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise OutOfRangeError(msg)

        need(self.dataset in ("synthetic", "idx"), "dataset must be synthetic or idx")
        if self.dataset == "idx":
            need(self.idx_images and self.idx_labels,
                 "idx dataset needs idx_images and idx_labels")
        need(int(self.clients) >= 2, "clients must be >= 2")
        need(0 <= int(self.unlearn_count) < int(self.clients),
             "unlearn_count must lie in [0, clients)")
        need(self.classes >= 2 and self.dim >= 2, "classes and dim must be >= 2")
        need(self.per_class >= 1, "per_class must be >= 1")
        need(self.spread >= 0, "spread must be non-negative")
        need(self.partition in ("dirichlet", "pat"), "partition must be dirichlet or pat")
        need(self.alpha > 0, "alpha must be positive")
        need(0 < self.test_frac < 1, "test_frac must lie in (0, 1)")
        need(all(int(h) > 0 for h in self.hidden), "hidden sizes must be positive")
        need(self.activation in ("relu", "tanh"), "activation must be relu or tanh")
        need(self.pretrain_rounds >= 0, "pretrain_rounds must be >= 0")
        need(self.local_epochs >= 1, "local_epochs must be >= 1")
        need(self.batch_size >= 1, "batch_size must be >= 1")
        need(self.pretrain_lr > 0, "pretrain_lr must be positive")
        need(0 < self.lr_decay <= 1, "lr_decay must lie in (0, 1]")
        need(self.eta > 0, "eta must be positive")
        need(0 < self.beta < 1, "beta must lie in (0, 1)")
        need(isinstance(self.s, int) and not isinstance(self.s, bool) and self.s >= 1,
             "s is a positive integer")
        need(self.delta > 0, "delta must be positive")
        need(self.unlearn_rounds >= 0, "unlearn_rounds must be >= 0")
        need(self.post_rounds is None or self.post_rounds >= 0,
             "post_rounds must be >= 0")
        need(self.early_stop_rounds >= 1, "early_stop_rounds must be >= 1")
        need(self.max_dead_ends >= 1, "max_dead_ends must be >= 1")
        need(self.mgda_tol > 0 and self.mgda_max_iter >= 1, "bad MGDA settings")
        need(self.ablation is None or self.ablation in ABLATIONS,
             f"ablation must be one of {ABLATIONS}")
        for axis, values in self.sweep.items():
            need(axis in SWEEP_AXES, f"unknown sweep axis {axis!r}")
            need(isinstance(values, list) and values, f"sweep axis {axis!r} is empty")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)


FIELD_NAMES = tuple(f.name for f in dataclasses.fields(RunConfig))


def config_from_dict(raw):
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a key-value mapping")
    unknown = sorted(set(raw) - set(FIELD_NAMES))
    if unknown:
        raise UnknownKeyError(f"unknown config keys: {', '.join(unknown)}")
    missing = [k for k in REQUIRED_KEYS if k not in raw]
    if missing:
        raise MissingKeyError(f"missing required keys: {', '.join(missing)}")
    try:
        return RunConfig(**raw)
    except TypeError as exc:
        raise OutOfRangeError(str(exc)) from exc


def parse_config(path):
    """Read a YAML key-value file into a validated :class:`RunConfig`."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"malformed config: {exc}") from exc
    return config_from_dict(raw or {})


def dump_config(cfg):
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)
