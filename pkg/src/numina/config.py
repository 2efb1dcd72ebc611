"""Run configuration: every pipeline hyperparameter with its default.

Defaults follow the reference operating point (tau 0.2, lambda 8, boost 0.8,
peak ratio 0.1, capture at timestep 20 / layer 15); the remaining knobs are
artifact choices documented at their point of use.  ``bandwidth`` and
``radius`` stay None for grid-derived automatic values.  A config file named
by the ``NUMINA_CONFIG`` env var (or ``--config``) supplies defaults, which
explicit CLI flags then override.
"""

import dataclasses
import json
import os
from dataclasses import dataclass
from typing import Optional

ENV_CONFIG = "NUMINA_CONFIG"

# config files use the canonical hyperparameter names; the dataclass fields
# avoid the `lambda` keyword and the one-letter `k`
_FILE_ALIASES = {"lambda": "lam", "k": "boost"}
_FIELD_TO_FILE = {v: k for k, v in _FILE_ALIASES.items()}


@dataclass
class RunConfig:
    tau: float = 0.2
    lam: float = 8.0
    boost: float = 0.8
    gamma: float = 0.5
    block: int = 8
    peak_ratio: float = 0.1
    eps: float = 2.0
    min_pts: int = 3
    bandwidth: Optional[float] = None
    radius: Optional[float] = None
    neg_const: float = -1e4
    stride: int = 2
    fraction: float = 0.6
    total_steps: int = 50
    timestep: int = 20
    layer: int = 15
    seed: int = 0

    def validate(self) -> "RunConfig":
        checks = [
            (0.0 < self.tau <= 1.0, "tau must be in (0, 1]"),
            (self.lam >= 0.0, "lambda must be >= 0"),
            (self.boost > 0.0, "k (boost) must be > 0"),
            (self.gamma >= 0.0, "gamma must be >= 0"),
            (self.block >= 2, "block must be >= 2"),
            (0.0 < self.peak_ratio < 1.0, "peak-ratio must be in (0, 1)"),
            (self.eps > 0.0, "eps must be > 0"),
            (self.min_pts >= 1, "min-pts must be >= 1"),
            (self.bandwidth is None or self.bandwidth > 0, "bandwidth must be > 0"),
            (self.radius is None or self.radius >= 0, "radius must be >= 0"),
            (self.neg_const < 0.0, "neg-const must be negative"),
            (self.stride >= 1, "stride must be >= 1"),
            (0.0 < self.fraction <= 1.0, "fraction must be in (0, 1]"),
            (self.total_steps >= 1, "steps must be >= 1"),
            (self.timestep >= 0, "timestep must be >= 0"),
            (self.layer >= 0, "layer must be >= 0"),
        ]
        for ok, message in checks:
            if not ok:
                raise ValueError(message)
        return self

    def to_json_obj(self) -> dict:
        return {_FIELD_TO_FILE.get(k, k): v
                for k, v in dataclasses.asdict(self).items()}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "RunConfig":
        mapped = {_FILE_ALIASES.get(k, k): v for k, v in obj.items()}
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(mapped) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**mapped).validate()

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_json_obj(json.load(fh))

    @classmethod
    def from_env(cls) -> "RunConfig":
        path = os.environ.get(ENV_CONFIG)
        if path:
            return cls.from_file(path)
        return cls()

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_obj(), fh, indent=2, sort_keys=True)
            fh.write("\n")
