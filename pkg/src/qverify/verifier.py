"""Build-then-check pipeline and noise sweeps."""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .checker import check
from .dtmc import build_induced_dtmc
from .environments import Mdp, make_env
from .errors import ConfigError, QVerifyError
from .pctl import PctlProperty, parse_property
from .policies import Policy, QuantumPolicy, resolve_policy
from .quantum import CHANNEL_KINDS
from .vqc import NoiseSpec

SWEEP_COLUMNS = (
    "noise_kind", "noise_param", "probability", "states", "transitions",
    "build_seconds", "check_seconds", "status",
)


@dataclass
class Verification:
    property: str
    probability: float
    states: int
    transitions: int
    build_seconds: float
    check_seconds: float

    @property
    def total_seconds(self) -> float:
        return self.build_seconds + self.check_seconds

    def to_dict(self) -> dict:
        return {
            "property": self.property,
            "probability": self.probability,
            "states": self.states,
            "transitions": self.transitions,
            "build_seconds": self.build_seconds,
            "check_seconds": self.check_seconds,
            "total_seconds": self.total_seconds,
        }


def noisy(policy: Policy, noise: NoiseSpec | None) -> Policy:
    if noise is None or noise.kind == "none":
        return policy
    if not isinstance(policy, QuantumPolicy):
        raise ConfigError("noise models apply to quantum policies only")
    return policy.with_noise(noise)


def verify(
    mdp: Mdp,
    policy: Policy,
    prop: PctlProperty | str,
    noise: NoiseSpec | None = None,
    truncate: bool = True,
    method: str = "auto",
) -> Verification:
    if isinstance(prop, str):
        prop = parse_property(prop)
    d = build_induced_dtmc(mdp, noisy(policy, noise), truncation=prop if truncate else None)
    result = check(d, prop, method=method)
    return Verification(str(prop), result.probability, d.n_states, d.n_transitions,
                        d.build_stats["seconds"], result.seconds)


@dataclass
class SweepConfig:
    env: str
    policy: str
    property: str
    noise_kinds: Sequence[str]
    grid: Sequence[float]
    out: str
    env_config: str | None = None
    jobs: int = 1
    truncate: bool = True

    def __post_init__(self):
        if isinstance(self.noise_kinds, str):
            self.noise_kinds = [self.noise_kinds]
        self.noise_kinds = list(CHANNEL_KINDS) if list(self.noise_kinds) == ["all"] else list(self.noise_kinds)
        for kind in self.noise_kinds:
            if kind not in CHANNEL_KINDS:
                raise ConfigError(f"unknown noise kind {kind!r}")
        self.grid = [float(g) for g in self.grid]
        if not self.grid:
            raise ConfigError("noise grid is empty")
        if any(not 0.0 <= g <= 1.0 for g in self.grid):
            raise ConfigError("noise grid values must lie in [0, 1]")
        if any(b < a for a, b in zip(self.grid, self.grid[1:])):
            raise ConfigError("noise grid must be sorted")
        if self.jobs < 1:
            raise ConfigError("jobs must be positive")

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "SweepConfig":
        try:
            data = json.loads(Path(path).read_text())
            return cls(**data)
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise ConfigError(f"bad sweep config {path}: {exc}") from exc


def _sweep_point(args) -> dict:
    env, env_config, policy_arg, prop, kind, param, truncate = args
    row = {"noise_kind": kind, "noise_param": param}
    try:
        mdp = make_env(env, env_config)
        v = verify(mdp, resolve_policy(policy_arg, mdp), prop, NoiseSpec(kind, param), truncate)
    except QVerifyError as exc:
        row.update(probability="", states="", transitions="", build_seconds="", check_seconds="",
                   status=f"error: {type(exc).__name__}: {exc}")
        return row
    row.update(probability=v.probability, states=v.states, transitions=v.transitions,
               build_seconds=v.build_seconds, check_seconds=v.check_seconds, status="ok")
    return row


def run_sweep(cfg: SweepConfig) -> list[dict]:
    """One verification per (noise kind, grid point); rows come back in grid order."""
    parse_property(cfg.property)
    tasks = [
        (cfg.env, cfg.env_config, cfg.policy, cfg.property, kind, p, cfg.truncate)
        for kind in cfg.noise_kinds for p in cfg.grid
    ]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    return rows


def write_sweep_csv(rows: Sequence[dict], path: str | os.PathLike) -> None:
    def fmt(v):
        return repr(v) if isinstance(v, float) else v

    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SWEEP_COLUMNS)
            for r in rows:
                w.writerow([fmt(r[c]) for c in SWEEP_COLUMNS])
    except OSError as exc:
        raise ConfigError(f"cannot write sweep CSV {path}: {exc}") from exc
