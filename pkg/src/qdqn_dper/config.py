"""Run configuration. Defaults are the published training settings."""

import json
from dataclasses import asdict, dataclass, fields, replace

from .agent import LOSSES
from .cartpole import VARIANTS
from .circuit import ENTANGLERS
from .errors import ConfigurationError
from .model import Architecture, Variant


@dataclass(frozen=True)
class RunConfig:
    env: str = "v0"
    model: str = "quantum"
    per: bool = True
    replay: bool = True
    loss: str = "matrix"
    workers: int = 4
    episodes: int = 50_000
    seed: int = 0

    gamma: float = 0.9
    lr: float = 1e-3
    rms_alpha: float = 0.99
    rms_eps: float = 1e-8
    clip_norm: float | None = None
    trajectory_len: int = 5
    batch_size: int = 4
    per_alpha: float = 0.6
    per_beta: float = 0.4
    memory_capacity: int = 10_000
    target_update: int = 2000
    epsilon_start: float = 1.0
    epsilon_decay: float = 0.9999
    epsilon_min: float = 0.001

    n_qubits: int = 8
    n_layers: int = 2
    entangler: str = "ring"
    max_global_steps: int | None = None

    def __post_init__(self):
        if self.env not in VARIANTS:
            raise ConfigurationError(f"env must be one of {VARIANTS}, got {self.env!r}")
        if self.model not in {v.value for v in Variant}:
            raise ConfigurationError(f"model must be quantum or classical, got {self.model!r}")
        if self.loss not in LOSSES:
            raise ConfigurationError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.entangler not in ENTANGLERS:
            raise ConfigurationError(f"entangler must be one of {ENTANGLERS}, got {self.entangler!r}")
        for name in ("workers", "episodes", "trajectory_len", "batch_size", "memory_capacity", "target_update"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be at least 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigurationError("gamma must be in [0, 1]")
        if not 0.0 <= self.epsilon_min <= self.epsilon_start <= 1.0:
            raise ConfigurationError("need 0 <= epsilon_min <= epsilon_start <= 1")
        if self.per_alpha < 0 or self.per_beta < 0:
            raise ConfigurationError("per_alpha and per_beta must be non-negative")

    @property
    def architecture(self):
        return Architecture(Variant(self.model), n_qubits=self.n_qubits, n_layers=self.n_layers,
                            entangler=self.entangler)

    @property
    def effective_per_alpha(self):
        """PER off means uniform sampling: priority exponent forced to zero."""
        return self.per_alpha if self.per else 0.0

    def with_(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))
