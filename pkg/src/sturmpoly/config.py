"""Run configuration: numerical tolerances and discretization sizes.

A configuration is read from a JSON document whose keys are the field names
of :class:`Config`; missing keys take the defaults below and unknown keys are
rejected.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace

from .errors import InputError


@dataclass(frozen=True)
class Config:
    tol_ode: float = 1e-11
    M_q: int = 256
    N_x: int = 512
    K_F: int = 64
    cond_floor: float = 1e-10
    cluster_tol: float = 1e-7
    verify_tol: float = 1e-5
    tail_tol: float = 1e-9
    workers: int = 1

    def __post_init__(self):
        if self.M_q < 16 or self.M_q % 2:
            raise InputError("M_q must be an even integer >= 16")
        if self.N_x < 8:
            raise InputError("N_x must be >= 8")
        if self.K_F < 1:
            raise InputError("K_F must be >= 1")
        if self.workers < 1:
            raise InputError("workers must be >= 1")
        for name in ("tol_ode", "cond_floor", "cluster_tol", "verify_tol", "tail_tol"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")

    def updated(self, **overrides) -> "Config":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(d) - set(known)
        if unknown:
            raise InputError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            vals = {k: (int(v) if k in ("M_q", "N_x", "K_F", "workers") else float(v))
                    for k, v in d.items()}
        except (TypeError, ValueError) as exc:
            raise InputError(f"bad configuration value: {exc}") from exc
        return cls(**vals)

    @classmethod
    def load(cls, path) -> "Config":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise InputError(f"configuration is not valid JSON: {exc}") from exc
