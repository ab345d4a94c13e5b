"""REINFORCE for quantum and classical policies.

Both policy kinds share the trajectory sampler and the return computation;
only ``score_sum`` (the gradient of log pi) differs.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .environments import Mdp, State
from .errors import ConfigError, TrainingDiverged
from .policies import Policy, QuantumPolicy, TrainablePolicy

DEFAULT_LEARNING_RATE = {"classical": 0.01, "quantum": 0.05}
BASELINES = ("none", "moving_average")
BASELINE_DECAY = 0.9


@dataclass
class TrainConfig:
    episodes: int = 10_000
    gamma: float = 0.99
    learning_rate: float | None = None  # None: per-kind default
    max_steps: int = 100
    seed: int = 0
    baseline: str = "none"

    def __post_init__(self):
        if self.episodes < 0:
            raise ConfigError("episodes must be non-negative")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma {self.gamma} outside [0, 1]")
        if self.learning_rate is not None and not self.learning_rate >= 0:
            raise ConfigError("learning_rate must be non-negative")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be positive")
        if self.baseline not in BASELINES:
            raise ConfigError(f"baseline must be one of {BASELINES}")

    def lr_for(self, policy: Policy) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return DEFAULT_LEARNING_RATE["quantum" if isinstance(policy, QuantumPolicy) else "classical"]

    @classmethod
    def from_file(cls, path: str | os.PathLike, **overrides) -> "TrainConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read training config {path}: {exc}") from exc
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown training config fields {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Episode:
    states: list[State] = field(default_factory=list)
    actions: list[int] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)


@dataclass
class TrainResult:
    policy: TrainablePolicy
    returns: list[float]


def episode_returns(rewards: Sequence[float], gamma: float) -> list[float]:
    """G_t = r_t + gamma * G_{t+1}, computed backwards."""
    out = [0.0] * len(rewards)
    g = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        g = rewards[t] + gamma * g
        out[t] = g
    return out


def _draw(probs: Sequence[float], u: float) -> int:
    c = np.cumsum(probs)
    return min(int(np.searchsorted(c, u * c[-1], side="right")), len(c) - 1)


def sample_episode(mdp: Mdp, policy: Policy, rng: np.random.Generator, max_steps: int) -> Episode:
    """Roll out one episode using the MDP's true transition probabilities."""
    ep = Episode()
    s = mdp.initial_state
    for _ in range(max_steps):
        if mdp.is_terminal(s):
            break
        a = _draw(policy.distribution(s), rng.random())
        succ = mdp.transitions(s, a)
        nxt = succ[_draw([p for _, p in succ], rng.random())][0]
        ep.states.append(s)
        ep.actions.append(a)
        ep.rewards.append(mdp.step_reward(s, a, nxt))
        s = nxt
    return ep


def reinforce_train(mdp: Mdp, policy: TrainablePolicy, cfg: TrainConfig) -> TrainResult:
    if policy.n_actions != mdp.n_actions:
        raise ConfigError(f"policy has {policy.n_actions} actions, {mdp.name} has {mdp.n_actions}")
    rng = np.random.default_rng(cfg.seed)
    lr = cfg.lr_for(policy)
    baseline = 0.0
    log = []
    for _ in range(cfg.episodes):
        ep = sample_episode(mdp, policy, rng, cfg.max_steps)
        returns = episode_returns(ep.rewards, cfg.gamma)
        log.append(returns[0] if returns else 0.0)
        if not ep.states:
            continue
        weights = [g - baseline for g in returns]
        if cfg.baseline == "moving_average":
            baseline = BASELINE_DECAY * baseline + (1 - BASELINE_DECAY) * float(np.mean(returns))
        if lr == 0.0:
            continue
        params = policy.params + lr * policy.score_sum(ep.states, ep.actions, weights)
        if not np.all(np.isfinite(params)):
            raise TrainingDiverged(f"non-finite parameters after episode {len(log)}")
        policy = policy.with_params(params)
    return TrainResult(policy, log)


def write_return_log(returns: Sequence[float], path: str | os.PathLike) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["episode", "return"])
            for i, g in enumerate(returns):
                w.writerow([i, repr(float(g))])
    except OSError as exc:
        raise ConfigError(f"cannot write return log {path}: {exc}") from exc
