"""Run configuration: what to solve, at which resolution, and which checks to run."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .analysis import Tolerances
from .errors import ConfigError

CHECK_GROUPS = (
    "height",
    "scales",
    "profile",
    "eigenvalue",
    "carleman",
    "mass",
    "level_shape",
    "max_gradients",
    "log_concavity",
    "agmon",
    "dpsi",
)
PRECONDITIONERS = ("amg", "jacobi", "none")
AGMON_WEIGHTS = ("lattice", "continuum")


@dataclass
class RunConfig:
    domain: dict | None = None
    potential: dict | None = None
    family: dict | None = None  # {"name": ..., "params": {...}} instead of domain + potential
    spacing: float | None = None
    tolerances: dict = field(default_factory=dict)
    checks: list = field(default_factory=lambda: list(CHECK_GROUPS))
    levels: list = field(default_factory=lambda: [0.25, 0.5, 0.75])
    preconditioner: str = "amg"
    agmon_weight: str = "lattice"
    output_dir: str | None = None
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        if self.family is None and (self.domain is None or self.potential is None):
            raise ConfigError("give either 'family' or both 'domain' and 'potential'")
        if self.family is not None and (self.domain is not None or self.potential is not None):
            raise ConfigError("'family' excludes 'domain' and 'potential'")
        if self.family is not None:
            unknown = set(self.family) - {"name", "params"}
            if unknown or "name" not in self.family:
                raise ConfigError(f"family needs 'name' and optional 'params', got {sorted(self.family)}")
        if self.spacing is not None and not self.spacing > 0:
            raise ConfigError("spacing must be positive")
        known = {f.name for f in fields(Tolerances)}
        bad = set(self.tolerances) - known
        if bad:
            raise ConfigError(f"unknown tolerances {sorted(bad)}")
        for k, v in self.tolerances.items():
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                raise ConfigError(f"tolerance {k} must be a positive number")
        bad = set(self.checks) - set(CHECK_GROUPS)
        if bad:
            raise ConfigError(f"unknown checks {sorted(bad)}")
        if self.preconditioner not in PRECONDITIONERS:
            raise ConfigError(f"preconditioner must be one of {PRECONDITIONERS}")
        if self.agmon_weight not in AGMON_WEIGHTS:
            raise ConfigError(f"agmon_weight must be one of {AGMON_WEIGHTS}")
        if not all(0 < c < 1 for c in self.levels):
            raise ConfigError("levels must lie in (0, 1)")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")

    @property
    def tol(self) -> Tolerances:
        return Tolerances(**self.tolerances)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        return cls.from_dict(data)

    def resolved(self) -> dict:
        """The config with tolerance defaults filled in, as echoed into reports."""
        out = asdict(self)
        out["tolerances"] = asdict(self.tol)
        out.pop("output_dir")
        return out
