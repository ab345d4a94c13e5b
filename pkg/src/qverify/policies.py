"""Memoryless stochastic policies and their JSON file formats."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .environments import Feature, Mdp, State, check_layout, encode_features, layout_size
from .errors import ConfigError, PolicyDomainError, PolicyError
from .vqc import (
    NO_NOISE,
    CircuitSpec,
    NoiseSpec,
    batch_distributions,
    batch_log_prob_jacobians,
    encode_batch,
)

POLICY_FILE_VERSION = 1


class Policy:
    """pi(a | s) as a function of the current state only."""

    n_actions: int

    def distribution(self, s: State) -> np.ndarray:
        raise NotImplementedError

    def distributions(self, states: Sequence[State]) -> np.ndarray:
        if not states:
            return np.zeros((0, self.n_actions))
        return np.stack([self.distribution(s) for s in states])


class UniformPolicy(Policy):
    def __init__(self, n_actions: int):
        if n_actions < 1:
            raise PolicyError("need at least one action")
        self.n_actions = n_actions

    def distribution(self, s):
        return np.full(self.n_actions, 1.0 / self.n_actions)


class TablePolicy(Policy):
    """Deterministic policy from an explicit state -> action map."""

    def __init__(self, table: Mapping[State, int], n_actions: int):
        self.table = {tuple(int(v) for v in k): int(a) for k, a in table.items()}
        self.n_actions = n_actions
        for a in self.table.values():
            if not 0 <= a < n_actions:
                raise PolicyError(f"table action {a} out of range")

    def distribution(self, s):
        try:
            a = self.table[tuple(s)]
        except KeyError:
            raise PolicyDomainError(f"table policy has no entry for state {tuple(s)}") from None
        out = np.zeros(self.n_actions)
        out[a] = 1.0
        return out


def uniform_policy(n_actions: int) -> UniformPolicy:
    return UniformPolicy(n_actions)


def table_policy(table: Mapping[State, int], n_actions: int) -> TablePolicy:
    return TablePolicy(table, n_actions)


def ski_optimal_table() -> dict[State, int]:
    """Left on odd states, right on even ones, for every Ski state."""
    return {(s,): (0 if s % 2 else 1) for s in range(16)}


class TrainablePolicy(Policy):
    """A policy with a flat parameter vector and a score-function gradient."""

    @property
    def params(self) -> np.ndarray:
        raise NotImplementedError

    def with_params(self, params: np.ndarray) -> "TrainablePolicy":
        raise NotImplementedError

    def score_sum(self, states: Sequence[State], actions: Sequence[int], weights: Sequence[float]) -> np.ndarray:
        """sum_t weights[t] * grad log pi(actions[t] | states[t]), with a fixed summation order."""
        raise NotImplementedError


class ClassicalSoftmaxPolicy(TrainablePolicy):
    """Linear softmax over layout-encoded features plus a bias column."""

    def __init__(self, weights, layout: str, schema: Sequence[Feature]):
        check_layout(layout)
        self.weights = np.array(weights, dtype=float)
        self.layout = layout
        self.schema = tuple(schema)
        n_in = layout_size(layout, self.schema) + 1
        if self.weights.ndim != 2 or self.weights.shape[1] != n_in:
            raise PolicyError(f"weights must have shape (n_actions, {n_in}), got {self.weights.shape}")
        if not np.all(np.isfinite(self.weights)):
            raise PolicyError("non-finite classical weights")
        self.n_actions = self.weights.shape[0]
        self._cache: dict[State, np.ndarray] = {}

    @classmethod
    def initial(cls, mdp: Mdp, layout: str | None = None, seed: int = 0, scale: float = 0.01):
        layout = layout or mdp.default_layout
        n_in = layout_size(layout, mdp.feature_schema) + 1
        w = np.random.default_rng(seed).normal(0.0, scale, size=(mdp.n_actions, n_in))
        return cls(w, layout, mdp.feature_schema)

    def _x(self, s: State) -> np.ndarray:
        x = self._cache.get(s)
        if x is None:
            x = np.array(encode_features(self.layout, s, self.schema) + [1.0])
            self._cache[s] = x
        return x

    def distribution(self, s):
        z = self.weights @ self._x(tuple(s))
        e = np.exp(z - z.max())
        return e / e.sum()

    @property
    def params(self):
        return self.weights.reshape(-1).copy()

    def with_params(self, params):
        return ClassicalSoftmaxPolicy(np.reshape(params, self.weights.shape), self.layout, self.schema)

    def score_sum(self, states, actions, weights):
        grad = np.zeros_like(self.weights)
        for s, a, w in zip(states, actions, weights):
            x = self._x(tuple(s))
            g = -self.distribution(s)
            g[a] += 1.0
            grad += w * np.outer(g, x)
        return grad.reshape(-1)


class QuantumPolicy(TrainablePolicy):
    """Variational-circuit policy, optionally evaluated under gate-level noise."""

    def __init__(
        self,
        spec: CircuitSpec,
        theta,
        layout: str,
        schema: Sequence[Feature],
        n_actions: int,
        append_bias: bool = True,
        noise: NoiseSpec = NO_NOISE,
    ):
        check_layout(layout)
        spec.check_actions(n_actions)
        self.spec = spec
        self.theta = np.array(theta, dtype=float)
        if self.theta.shape != (spec.n_params,) or not np.all(np.isfinite(self.theta)):
            raise PolicyError(f"theta must be {spec.n_params} finite values")
        self.layout = layout
        self.schema = tuple(schema)
        self.n_actions = n_actions
        self.append_bias = append_bias
        self.noise = noise
        need = layout_size(layout, self.schema) + (1 if append_bias else 0)
        if need > 2**spec.n_qubits:
            raise PolicyError(f"layout {layout!r} needs {need} amplitudes, circuit has {2**spec.n_qubits}")
        self._rho_cache: dict[State, np.ndarray] = {}
        self._dist_cache: dict[State, np.ndarray] = {}

    @classmethod
    def initial(cls, mdp: Mdp, spec: CircuitSpec | None = None, layout: str | None = None,
                seed: int = 0, append_bias: bool | None = None):
        """Random initial policy; ``append_bias=None`` adds the bias amplitude only if it fits."""
        spec = spec or CircuitSpec(n_qubits=mdp.default_qubits)
        layout = layout or mdp.default_layout
        if append_bias is None:
            append_bias = layout_size(layout, mdp.feature_schema) < 2**spec.n_qubits
        theta = np.random.default_rng(seed).uniform(-np.pi, np.pi, spec.n_params)
        return cls(spec, theta, layout, mdp.feature_schema, mdp.n_actions, append_bias)

    def _encoded(self, states: Sequence[State]) -> np.ndarray:
        missing = [s for s in dict.fromkeys(states) if s not in self._rho_cache]
        if missing:
            feats = [encode_features(self.layout, s, self.schema) for s in missing]
            for s, rho in zip(missing, encode_batch(feats, self.spec.n_qubits, self.append_bias)):
                self._rho_cache[s] = rho
        return np.stack([self._rho_cache[s] for s in states])

    def distributions(self, states):
        states = [tuple(s) for s in states]
        missing = [s for s in dict.fromkeys(states) if s not in self._dist_cache]
        if missing:
            probs = batch_distributions(self.spec, self.theta, self._encoded(missing), self.n_actions, self.noise)
            for s, p in zip(missing, probs):
                self._dist_cache[s] = p
        if not states:
            return np.zeros((0, self.n_actions))
        return np.stack([self._dist_cache[s] for s in states])

    def distribution(self, s):
        return self.distributions([tuple(s)])[0]

    def with_noise(self, noise: NoiseSpec) -> "QuantumPolicy":
        return QuantumPolicy(self.spec, self.theta, self.layout, self.schema, self.n_actions, self.append_bias, noise)

    @property
    def params(self):
        return self.theta.copy()

    def with_params(self, params):
        p = QuantumPolicy(self.spec, params, self.layout, self.schema, self.n_actions, self.append_bias, self.noise)
        p._rho_cache = self._rho_cache
        return p

    def score_sum(self, states, actions, weights):
        if self.noise.kind != "none":
            raise PolicyError("gradients are only defined for the noise-free circuit")
        states = [tuple(s) for s in states]
        if not states:
            return np.zeros(self.spec.n_params)
        # one shifted-circuit batch per distinct state, reused for every visit
        distinct = list(dict.fromkeys(states))
        where = {s: i for i, s in enumerate(distinct)}
        jac, _ = batch_log_prob_jacobians(self.spec, self.theta, self._encoded(distinct), self.n_actions)
        total = np.zeros(self.spec.n_params)
        for s, a, w in zip(states, actions, weights):
            g = jac[where[s], a]
            if not np.all(np.isfinite(g)):
                raise PolicyError(f"log-probability gradient undefined at state {s}")
            total += w * g
        return total


# policy files ------------------------------------------------------------------

QUANTUM_FIELDS = (
    "version", "kind", "n_qubits", "n_layers", "entangling_layers", "readout",
    "softmax_beta", "append_bias", "feature_layout", "theta",
)
CLASSICAL_FIELDS = ("version", "kind", "feature_layout", "weights")
TABLE_FIELDS = ("version", "kind", "entries")


def policy_to_dict(policy: Policy, mdp: Mdp | None = None) -> dict:
    if isinstance(policy, QuantumPolicy):
        spec = policy.spec
        return {
            "version": POLICY_FILE_VERSION,
            "kind": "quantum",
            "n_qubits": spec.n_qubits,
            "n_layers": spec.n_layers,
            "entangling_layers": sorted(spec.entangling_layers),
            "readout": spec.readout,
            "softmax_beta": spec.softmax_beta,
            "append_bias": policy.append_bias,
            "feature_layout": policy.layout,
            "theta": [float(v) for v in policy.theta],
        }
    if isinstance(policy, ClassicalSoftmaxPolicy):
        return {
            "version": POLICY_FILE_VERSION,
            "kind": "classical",
            "feature_layout": policy.layout,
            "weights": [[float(v) for v in row] for row in policy.weights],
        }
    if isinstance(policy, TablePolicy):
        names = mdp.actions if mdp is not None else None
        entries = [
            {"state": list(s), "action": names[a] if names else a}
            for s, a in sorted(policy.table.items())
        ]
        return {"version": POLICY_FILE_VERSION, "kind": "table", "entries": entries}
    raise PolicyError(f"cannot serialise {type(policy).__name__}")


def _require_fields(data: dict, fields: Sequence[str]) -> None:
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"unknown policy file fields {sorted(unknown)}")
    missing = [f for f in fields if f not in data]
    if missing:
        raise ConfigError(f"policy file is missing fields {missing}")
    if data["version"] != POLICY_FILE_VERSION:
        raise ConfigError(f"unsupported policy file version {data['version']!r}")


def policy_from_dict(data: dict, mdp: Mdp) -> Policy:
    if not isinstance(data, dict) or "kind" not in data:
        raise ConfigError("policy file must be a JSON object with a 'kind'")
    kind = data["kind"]
    try:
        if kind == "quantum":
            _require_fields(data, QUANTUM_FIELDS)
            spec = CircuitSpec(
                n_qubits=int(data["n_qubits"]),
                n_layers=int(data["n_layers"]),
                entangling_layers=frozenset(data["entangling_layers"]),
                readout=data["readout"],
                softmax_beta=float(data["softmax_beta"]),
            )
            return QuantumPolicy(spec, data["theta"], data["feature_layout"], mdp.feature_schema,
                                 mdp.n_actions, bool(data["append_bias"]))
        if kind == "classical":
            _require_fields(data, CLASSICAL_FIELDS)
            policy = ClassicalSoftmaxPolicy(data["weights"], data["feature_layout"], mdp.feature_schema)
            if policy.n_actions != mdp.n_actions:
                raise ConfigError(f"policy has {policy.n_actions} actions, {mdp.name} has {mdp.n_actions}")
            return policy
        if kind == "table":
            _require_fields(data, TABLE_FIELDS)
            table = {tuple(e["state"]): mdp.action_index(e["action"]) for e in data["entries"]}
            return TablePolicy(table, mdp.n_actions)
    except (TypeError, ValueError, KeyError, PolicyError) as exc:
        raise ConfigError(f"malformed {kind} policy file: {exc}") from exc
    raise ConfigError(f"unknown policy kind {kind!r}")


def save_policy(policy: Policy, path: str | os.PathLike, mdp: Mdp | None = None) -> None:
    text = json.dumps(policy_to_dict(policy, mdp), indent=2) + "\n"
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise ConfigError(f"cannot write policy file {path}: {exc}") from exc


def load_policy(path: str | os.PathLike, mdp: Mdp) -> Policy:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read policy file {path}: {exc}") from exc
    return policy_from_dict(data, mdp)


def resolve_policy(arg: str, mdp: Mdp) -> Policy:
    """``uniform``, ``optimal-table:<file>`` or a policy file path."""
    if arg == "uniform":
        return UniformPolicy(mdp.n_actions)
    if arg.startswith("optimal-table:"):
        policy = load_policy(arg.split(":", 1)[1], mdp)
        if not isinstance(policy, TablePolicy):
            raise ConfigError("optimal-table: expects a table policy file")
        return policy
    return load_policy(arg, mdp)
