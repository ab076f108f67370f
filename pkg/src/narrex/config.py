"""Single declarative run configuration shared by the CLI and the service.

A config comes from (in order of increasing precedence): built-in defaults,
a JSON config file, then explicit flag overrides.  Unknown keys are
rejected rather than ignored so typos fail loudly.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .errors import ConfigError

CONFIG_ENV_VAR = "NARREX_CONFIG"

COHERENCE_MODES = ("geometric", "arithmetic")
KNOWN_SPACES = ("high", "low")


@dataclass
class RunConfig:
    # label propagation
    alpha: float = 0.9
    knn_k: int = 10
    sigma: float | None = None          # None -> median k-NN distance heuristic
    location_weight: float = 1.0
    tol: float = 1e-6
    max_iter: int = 1000
    # coherence graph
    coherence_mode: str = "geometric"
    window: int | None = None           # None -> no positional restriction
    top_k_out: int = 20
    # extraction
    mincover: float = 0.2
    K: int = 5
    itf: bool = False
    timeout: float = 60.0
    # experiments
    trials: int = 20
    lengths: list[int] = field(default_factory=lambda: [5, 10, 15, 20, 25, 30])
    spaces: list[str] = field(default_factory=lambda: ["high"])
    seed: int = 0
    # service
    host: str = "127.0.0.1"
    port: int = 8000
    cors_origin: str = "*"

    def validate(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.knn_k < 1:
            raise ConfigError(f"knn_k must be >= 1, got {self.knn_k}")
        if self.sigma is not None and self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0 or null, got {self.sigma}")
        if self.location_weight < 0:
            raise ConfigError(f"location_weight must be >= 0, got {self.location_weight}")
        if self.tol <= 0:
            raise ConfigError(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.coherence_mode not in COHERENCE_MODES:
            raise ConfigError(
                f"coherence_mode must be one of {COHERENCE_MODES}, got {self.coherence_mode!r}")
        if self.window is not None and self.window < 1:
            raise ConfigError(f"window must be >= 1 or null, got {self.window}")
        if self.top_k_out < 1:
            raise ConfigError(f"top_k_out must be >= 1, got {self.top_k_out}")
        if not 0.0 <= self.mincover <= 1.0:
            raise ConfigError(f"mincover must lie in [0, 1], got {self.mincover}")
        if self.K < 2:
            raise ConfigError(f"K must be >= 2, got {self.K}")
        if self.timeout <= 0:
            raise ConfigError(f"timeout must be > 0, got {self.timeout}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if not self.lengths or any(length < 2 for length in self.lengths):
            raise ConfigError(f"lengths must be a non-empty list of ints >= 2, got {self.lengths}")
        if not self.spaces or any(s not in KNOWN_SPACES for s in self.spaces):
            raise ConfigError(f"spaces must be a non-empty subset of {KNOWN_SPACES}, got {self.spaces}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        if not 1 <= self.port <= 65535:
            raise ConfigError(f"port must lie in [1, 65535], got {self.port}")
        if not self.host:
            raise ConfigError("host must be a non-empty address")

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = set(cls.field_names())
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path!r} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path!r} must hold a JSON object")
        return cls.from_dict(raw)

    def with_overrides(self, overrides: dict) -> "RunConfig":
        """New config with non-None override values applied (flags win)."""
        known = set(self.field_names())
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        merged = dataclasses.replace(
            self, **{k: v for k, v in overrides.items() if v is not None})
        merged.validate()
        return merged
