"""Variational-circuit policy: amplitude encoding, layered ansatz, readout.

Circuit layout per layer: for each qubit ``q`` the rotations RX, RY, RZ, then,
if the layer is entangling, a CNOT ring ``q -> (q + 1) % n`` for
``q = 0 .. n-1``. Parameters are consumed layer-major, qubit-major,
rotation-minor, i.e. index ``(layer * n_qubits + q) * 3 + r``.

Everything below the public functions is batched: a parameter batch of shape
``(B, P)`` and an encoded-state batch of shape ``(S, D, D)`` are evaluated
together, which is what makes parameter-shift training affordable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EncodingError, InvalidParameter, NumericalError, ParameterError
from .quantum import (
    CHANNEL_KINDS,
    DensityMatrix,
    KrausChannel,
    UnitaryGate,
    _apply_1q,
    _apply_channel_data,
    _apply_cnot,
    _probs_from_data,
    _z_from_data,
    make_channel,
    rotation_matrix,
)

ROTATIONS = ("RX", "RY", "RZ")
READOUTS = ("z_softmax", "basis_marginal")
SHIFT = math.pi / 2


@dataclass(frozen=True)
class CircuitSpec:
    n_qubits: int = 4
    n_layers: int = 2
    entangling_layers: frozenset[int] = frozenset({0})
    readout: str = "z_softmax"
    softmax_beta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "entangling_layers", frozenset(int(l) for l in self.entangling_layers))
        if self.n_qubits < 1 or self.n_layers < 1:
            raise InvalidParameter("n_qubits and n_layers must be positive")
        if any(not 0 <= l < self.n_layers for l in self.entangling_layers):
            raise InvalidParameter(f"entangling layer outside 0..{self.n_layers - 1}")
        if self.readout not in READOUTS:
            raise InvalidParameter(f"unknown readout {self.readout!r}")
        if not self.softmax_beta > 0:
            raise InvalidParameter("softmax_beta must be positive")

    @property
    def n_params(self) -> int:
        return self.n_qubits * 3 * self.n_layers

    def check_actions(self, n_actions: int) -> None:
        limit = self.n_qubits if self.readout == "z_softmax" else 2**self.n_qubits
        if not 1 <= n_actions <= limit:
            raise InvalidParameter(
                f"{n_actions} actions incompatible with {self.readout} readout on {self.n_qubits} qubits"
            )


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "none"
    param: float = 0.0
    placement: str = "after_each_gate"

    def __post_init__(self):
        if self.kind != "none" and self.kind not in CHANNEL_KINDS:
            raise InvalidParameter(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.param <= 1.0:
            raise InvalidParameter(f"noise parameter {self.param} outside [0, 1]")
        if self.placement != "after_each_gate":
            raise InvalidParameter(f"unsupported noise placement {self.placement!r}")

    def channel(self) -> KrausChannel | None:
        if self.kind == "none":
            return None
        return make_channel(self.kind, self.param)


NO_NOISE = NoiseSpec()


# encoding ------------------------------------------------------------------


def encode_amplitudes(features: Sequence[float], n_qubits: int, append_bias: bool = True) -> np.ndarray:
    v = [float(f) for f in features]
    if append_bias:
        v.append(1.0)
    dim = 2**n_qubits
    if len(v) > dim:
        raise EncodingError(f"{len(v)} amplitudes do not fit in {n_qubits} qubits")
    amps = np.zeros(dim)
    amps[: len(v)] = v
    norm = np.linalg.norm(amps)
    if norm == 0.0 or not np.isfinite(norm):
        raise EncodingError("cannot amplitude-encode a zero (or non-finite) vector")
    return amps / norm


def amplitude_encode(features: Sequence[float], n_qubits: int, append_bias: bool = True) -> DensityMatrix:
    psi = encode_amplitudes(features, n_qubits, append_bias)
    return DensityMatrix(n_qubits, np.outer(psi, psi))


# circuit -------------------------------------------------------------------


def _check_theta(spec: CircuitSpec, theta) -> np.ndarray:
    t = np.asarray(theta, dtype=float)
    if t.shape[-1:] != (spec.n_params,):
        raise ParameterError(f"expected {spec.n_params} parameters, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise ParameterError("non-finite circuit parameter")
    return t


def circuit_plan(spec: CircuitSpec) -> list[tuple[str, tuple[int, ...], int | None]]:
    """Ordered ``(kind, targets, param_index)`` triples; CNOTs carry ``None``."""
    n = spec.n_qubits
    plan = []
    for layer in range(spec.n_layers):
        for q in range(n):
            for r, kind in enumerate(ROTATIONS):
                plan.append((kind, (q,), (layer * n + q) * 3 + r))
        if layer in spec.entangling_layers and n > 1:
            for q in range(n):
                plan.append(("CNOT", (q, (q + 1) % n), None))
    return plan


def gate_sequence(spec: CircuitSpec, theta: Sequence[float]) -> list[UnitaryGate]:
    t = _check_theta(spec, theta)
    return [
        UnitaryGate(kind, targets, None if k is None else float(t[k]))
        for kind, targets, k in circuit_plan(spec)
    ]


def _run(spec: CircuitSpec, thetas: np.ndarray, rho0: np.ndarray, noise: NoiseSpec = NO_NOISE) -> np.ndarray:
    """Final states for a (B, P) parameter batch and (S, D, D) input batch -> (B, S, D, D)."""
    n = spec.n_qubits
    channel = noise.channel()
    rho = np.broadcast_to(rho0, (thetas.shape[0],) + rho0.shape)
    for kind, targets, k in circuit_plan(spec):
        if kind == "CNOT":
            rho = _apply_cnot(rho, targets[0], targets[1], n)
        else:
            u = rotation_matrix(kind, thetas[:, k])[:, None]
            rho = _apply_1q(rho, u, targets[0], n)
        if channel is not None:
            for q in targets:
                rho = _apply_channel_data(rho, channel, q, n)
    return rho


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _readout_values(spec: CircuitSpec, rho: np.ndarray, n_actions: int) -> np.ndarray:
    """Per-action quantities the readout is built from: <Z_q> or marginal masses."""
    n = spec.n_qubits
    if spec.readout == "z_softmax":
        return _z_from_data(rho, n)[..., :n_actions]
    k = (n_actions - 1).bit_length()
    probs = _probs_from_data(rho)
    marg = probs.reshape(probs.shape[:-1] + (2**k, 2 ** (n - k))).sum(axis=-1)
    return marg[..., :n_actions]


def _values_to_probs(spec: CircuitSpec, values: np.ndarray) -> np.ndarray:
    if spec.readout == "z_softmax":
        return _softmax(spec.softmax_beta * values)
    total = values.sum(axis=-1, keepdims=True)
    if np.any(total < 1e-12):
        raise NumericalError("basis-marginal readout has no mass on valid actions")
    return values / total


def encode_batch(features_list: Sequence[Sequence[float]], n_qubits: int, append_bias: bool = True) -> np.ndarray:
    psis = np.stack([encode_amplitudes(f, n_qubits, append_bias) for f in features_list])
    return (psis[:, :, None] * psis[:, None, :]).astype(complex)


def batch_distributions(spec: CircuitSpec, theta, rho0: np.ndarray, n_actions: int, noise: NoiseSpec = NO_NOISE) -> np.ndarray:
    """Action distributions for an (S, D, D) batch of encoded states -> (S, n_actions)."""
    spec.check_actions(n_actions)
    t = _check_theta(spec, theta)
    rho = _run(spec, t[None, :], rho0, noise)[0]
    return _values_to_probs(spec, _readout_values(spec, rho, n_actions))


def policy_distribution(
    spec: CircuitSpec,
    theta: Sequence[float],
    noise: NoiseSpec,
    features: Sequence[float],
    n_actions: int,
    append_bias: bool = True,
) -> np.ndarray:
    rho0 = encode_batch([features], spec.n_qubits, append_bias)
    return batch_distributions(spec, theta, rho0, n_actions, noise)[0]


def shifted_thetas(theta: np.ndarray) -> np.ndarray:
    """Row 0 is ``theta``; rows 2k+1 / 2k+2 shift parameter k by +pi/2 / -pi/2."""
    p = theta.shape[0]
    out = np.repeat(theta[None, :], 2 * p + 1, axis=0)
    idx = np.arange(p)
    out[2 * idx + 1, idx] += SHIFT
    out[2 * idx + 2, idx] -= SHIFT
    return out


def batch_log_prob_jacobians(spec: CircuitSpec, theta, rho0: np.ndarray, n_actions: int):
    """Parameter-shift gradients of log pi(a | s_i) for every action at once.

    One batch of 2P + 1 circuits per state serves all actions. Returns
    ``(jac, probs)`` with shapes (S, n_actions, P) and (S, n_actions); entries
    for zero-probability actions under basis-marginal readout are ``nan``.
    """
    spec.check_actions(n_actions)
    t = _check_theta(spec, theta)
    vals = _readout_values(spec, _run(spec, shifted_thetas(t), rho0), n_actions)
    base = vals[0]
    # d(value)/d(theta_k) = (v(theta + pi/2 e_k) - v(theta - pi/2 e_k)) / 2
    dvals = 0.5 * (vals[1::2] - vals[2::2])
    dvals = np.moveaxis(dvals, 0, -1)  # (S, A, P)
    probs = _values_to_probs(spec, base)
    if spec.readout == "z_softmax":
        expected = np.einsum("sap,sa->sp", dvals, probs)
        jac = spec.softmax_beta * (dvals - expected[:, None, :])
    else:
        total = base.sum(axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            jac = dvals / base[..., None]
        jac[base <= 0.0] = np.nan
        jac = jac - (dvals.sum(axis=1) / total[:, None])[:, None, :]
    return jac, probs


def batch_log_prob_gradients(spec: CircuitSpec, theta, rho0: np.ndarray, actions: Sequence[int], n_actions: int):
    """Gradients of log pi(a_i | s_i) for one chosen action per state; (S, P)."""
    actions = np.asarray(actions, dtype=int)
    if np.any((actions < 0) | (actions >= n_actions)):
        raise ParameterError(f"action index outside 0..{n_actions - 1}")
    jac, probs = batch_log_prob_jacobians(spec, theta, rho0, n_actions)
    grads = jac[np.arange(len(actions)), actions]
    if not np.all(np.isfinite(grads)):
        raise NumericalError("log-probability gradient undefined at zero probability")
    return grads, probs


def log_prob_gradient(
    spec: CircuitSpec,
    theta: Sequence[float],
    features: Sequence[float],
    action: int,
    n_actions: int,
    append_bias: bool = True,
) -> np.ndarray:
    rho0 = encode_batch([features], spec.n_qubits, append_bias)
    grads, _ = batch_log_prob_gradients(spec, theta, rho0, [action], n_actions)
    return grads[0]
