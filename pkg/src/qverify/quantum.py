"""Dense density-matrix simulation.

Qubit ordering: qubit 0 is the most significant bit of a basis index, so the
bitstring of index ``x`` reads left to right as qubits ``0 .. n-1``. Every
function in the package follows this convention.

The underscore-prefixed kernels work on raw ``ndarray`` data with optional
leading batch axes; the public functions wrap them with validation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import (
    InvalidParameter,
    InvalidState,
    NumericalError,
    QubitIndexError,
)

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9
UNITARY_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

ROTATION_KINDS = ("RX", "RY", "RZ")
FIXED_GATES = {"X": X, "Y": Y, "Z": Z, "H": H}
GATE_KINDS = ROTATION_KINDS + ("CNOT",) + tuple(FIXED_GATES) + ("custom",)
CHANNEL_KINDS = ("bit_flip", "phase_flip", "depolarizing", "amplitude_damping")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def _n_qubits_for(dim: int) -> int:
    if dim < 1 or dim & (dim - 1):
        raise InvalidState(f"dimension {dim} is not a power of two")
    return dim.bit_length() - 1


@dataclass(frozen=True)
class DensityMatrix:
    n_qubits: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = _readonly(self.data)
        dim = 2**self.n_qubits
        if data.shape != (dim, dim):
            raise InvalidState(f"expected shape {(dim, dim)}, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise InvalidState("density matrix has non-finite entries")
        if np.max(np.abs(data - data.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise InvalidState("density matrix is not Hermitian")
        if abs(np.trace(data) - 1.0) > TRACE_TOL:
            raise InvalidState(f"trace {np.trace(data).real:.12g} != 1")
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.data)[0])

    def check_psd(self, tol: float = PSD_TOL) -> None:
        """Debug-path positivity check; raises InvalidState if violated."""
        lam = self.min_eigenvalue()
        if lam < -tol:
            raise InvalidState(f"minimum eigenvalue {lam:.3e} < -{tol}")


def density_from_amplitudes(amps: Sequence[complex]) -> DensityMatrix:
    psi = np.asarray(amps, dtype=complex).reshape(-1)
    n = _n_qubits_for(psi.size)
    if not np.all(np.isfinite(psi)):
        raise InvalidState("amplitudes contain non-finite values")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-9:
        raise InvalidState(f"amplitude vector has norm {norm:.12g}, expected 1")
    return DensityMatrix(n, np.outer(psi, psi.conj()))


# gates ---------------------------------------------------------------------


def rotation_matrix(kind: str, angle) -> np.ndarray:
    """RX/RY/RZ matrices; ``angle`` may be an array, giving shape (..., 2, 2)."""
    t = np.asarray(angle, dtype=float) / 2.0
    c, s = np.cos(t), np.sin(t)
    out = np.zeros(t.shape + (2, 2), dtype=complex)
    if kind == "RX":
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        out[..., 0, 1] = -1j * s
        out[..., 1, 0] = -1j * s
    elif kind == "RY":
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
    elif kind == "RZ":
        out[..., 0, 0] = np.exp(-1j * t)
        out[..., 1, 1] = np.exp(1j * t)
    else:
        raise InvalidParameter(f"not a rotation gate: {kind}")
    return out


CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


@dataclass(frozen=True)
class UnitaryGate:
    kind: str
    targets: tuple[int, ...]
    angle: float | None = None
    custom: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if self.kind not in GATE_KINDS:
            raise InvalidParameter(f"unknown gate kind {self.kind!r}")
        if len(set(self.targets)) != len(self.targets):
            raise QubitIndexError(f"repeated target qubits {self.targets}")
        arity = {"CNOT": 2}.get(self.kind, 1)
        if self.kind == "custom":
            if self.custom is None:
                raise InvalidParameter("custom gate needs a matrix")
            u = _readonly(self.custom)
            dim = 2 ** len(self.targets)
            if u.shape != (dim, dim):
                raise InvalidParameter(f"custom matrix shape {u.shape} != {(dim, dim)}")
            if np.max(np.abs(u.conj().T @ u - np.eye(dim))) > UNITARY_TOL:
                raise InvalidParameter("custom matrix is not unitary")
            object.__setattr__(self, "custom", u)
        elif len(self.targets) != arity:
            raise QubitIndexError(f"{self.kind} takes {arity} target(s), got {self.targets}")
        if self.kind in ROTATION_KINDS:
            if self.angle is None or not np.isfinite(self.angle):
                raise InvalidParameter(f"{self.kind} needs a finite angle")
            object.__setattr__(self, "angle", float(self.angle))

    @property
    def matrix(self) -> np.ndarray:
        if self.kind in ROTATION_KINDS:
            return rotation_matrix(self.kind, self.angle)
        if self.kind == "CNOT":
            return CNOT
        if self.kind == "custom":
            return self.custom
        return FIXED_GATES[self.kind]


def _check_targets(targets: Sequence[int], n_qubits: int) -> None:
    for t in targets:
        if not 0 <= t < n_qubits:
            raise QubitIndexError(f"qubit {t} out of range for {n_qubits} qubits")


def _apply_1q(rho: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    """U rho U^dagger for a 2x2 ``u`` on qubit ``q``; both may carry batch axes."""
    dim = 2**n
    left = 2**q
    batch = rho.shape[:-2]
    u = u[..., None, :, :]
    r = np.matmul(u, rho.reshape(batch + (left, 2, -1))).reshape(batch + (dim, dim))
    # rho U^dagger == (U rho^dagger)^dagger, which keeps the contraction on the left
    r = np.swapaxes(r, -1, -2).conj().reshape(batch + (left, 2, -1))
    r = np.matmul(u, r).reshape(batch + (dim, dim))
    return np.swapaxes(r, -1, -2).conj()


@lru_cache(maxsize=None)
def _cnot_permutation(control: int, target: int, n: int) -> np.ndarray:
    idx = np.arange(2**n)
    cbit = 1 << (n - 1 - control)
    tbit = 1 << (n - 1 - target)
    perm = np.where(idx & cbit, idx ^ tbit, idx)
    perm.setflags(write=False)
    return perm


def _apply_cnot(rho: np.ndarray, control: int, target: int, n: int) -> np.ndarray:
    perm = _cnot_permutation(control, target, n)
    return rho[..., perm, :][..., :, perm]


def embed_operator(op: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Full 2^n matrix acting as ``op`` on ``targets`` (in order) and identity elsewhere."""
    if op.shape != (2 ** len(targets),) * 2:
        raise InvalidParameter(f"operator shape {op.shape} does not match {len(targets)} targets")
    dim = 2**n
    rest = [q for q in range(n) if q not in targets]
    full = np.zeros((dim, dim), dtype=complex)
    idx = np.arange(dim)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    sub = np.zeros(dim, dtype=int)
    for t in targets:
        sub = (sub << 1) | bits[:, t]
    env = np.zeros(dim, dtype=int)
    for q in rest:
        env = (env << 1) | bits[:, q]
    same_env = env[:, None] == env[None, :]
    full[same_env] = op[sub[:, None], sub[None, :]][same_env]
    return full


def _apply_gate_data(rho: np.ndarray, gate: UnitaryGate, n: int) -> np.ndarray:
    if gate.kind == "CNOT":
        return _apply_cnot(rho, gate.targets[0], gate.targets[1], n)
    if len(gate.targets) == 1:
        return _apply_1q(rho, gate.matrix, gate.targets[0], n)
    u = embed_operator(gate.matrix, gate.targets, n)
    return u @ rho @ u.conj().T


def apply_unitary(rho: DensityMatrix, gate: UnitaryGate) -> DensityMatrix:
    _check_targets(gate.targets, rho.n_qubits)
    return DensityMatrix(rho.n_qubits, _apply_gate_data(rho.data, gate, rho.n_qubits))


# channels ------------------------------------------------------------------


@dataclass(frozen=True)
class KrausChannel:
    kind: str
    param: float
    operators: tuple[np.ndarray, ...] = field(repr=False, compare=False)

    def __post_init__(self):
        ops = tuple(_readonly(k) for k in self.operators)
        if not ops or any(k.shape != (2, 2) for k in ops):
            raise InvalidParameter("Kraus operators must be non-empty 2x2 matrices")
        total = sum(k.conj().T @ k for k in ops)
        if np.max(np.abs(total - I2)) > 1e-10:
            raise InvalidParameter(f"{self.kind} Kraus operators are not complete")
        object.__setattr__(self, "operators", ops)


def make_channel(kind: str, param: float) -> KrausChannel:
    """Single-qubit noise channel with the standard Kraus decomposition.

    Operators with zero weight are dropped, so every kind at ``param=0`` is
    the single-operator identity channel.
    """
    p = float(param)
    if not (0.0 <= p <= 1.0):
        raise InvalidParameter(f"channel parameter {param} outside [0, 1]")
    if kind == "bit_flip":
        weighted = [(1 - p, I2), (p, X)]
    elif kind == "phase_flip":
        weighted = [(1 - p, I2), (p, Z)]
    elif kind == "depolarizing":
        weighted = [(1 - p, I2), (p / 3, X), (p / 3, Y), (p / 3, Z)]
    elif kind == "amplitude_damping":
        e0 = np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=complex)
        e1 = np.array([[0, np.sqrt(p)], [0, 0]], dtype=complex)
        ops = (e0, e1) if p > 0 else (e0,)
        return KrausChannel(kind, p, ops)
    else:
        raise InvalidParameter(f"unknown channel kind {kind!r}")
    ops = tuple(np.sqrt(w) * m for w, m in weighted if w > 0)
    return KrausChannel(kind, p, ops)


def custom_channel(operators: Sequence[np.ndarray], param: float = 0.0) -> KrausChannel:
    return KrausChannel("custom", float(param), tuple(operators))


def _apply_channel_data(rho: np.ndarray, ch: KrausChannel, q: int, n: int) -> np.ndarray:
    out = _apply_1q(rho, ch.operators[0], q, n)
    for k in ch.operators[1:]:
        out = out + _apply_1q(rho, k, q, n)
    return out


def apply_channel(rho: DensityMatrix, ch: KrausChannel, qubit: int) -> DensityMatrix:
    _check_targets([qubit], rho.n_qubits)
    return DensityMatrix(rho.n_qubits, _apply_channel_data(rho.data, ch, qubit, rho.n_qubits))


# readout -------------------------------------------------------------------


def _probs_from_data(data: np.ndarray) -> np.ndarray:
    p = np.real(np.diagonal(data, axis1=-2, axis2=-1)).copy()
    if np.any(p < -PSD_TOL):
        raise NumericalError(f"negative population {p.min():.3e}; state corrupted")
    p[p < 0] = 0.0  # round-off dust within PSD_TOL
    return p


def measurement_probs(rho: DensityMatrix) -> np.ndarray:
    """Computational-basis outcome probabilities (the real diagonal)."""
    return _probs_from_data(rho.data)


@lru_cache(maxsize=None)
def _z_signs(n: int) -> np.ndarray:
    idx = np.arange(2**n)
    bits = (idx[None, :] >> (n - 1 - np.arange(n))[:, None]) & 1
    signs = 1.0 - 2.0 * bits
    signs.setflags(write=False)
    return signs


def _z_from_data(data: np.ndarray, n: int) -> np.ndarray:
    """All single-qubit <Z_q>; shape (..., n)."""
    diag = np.real(np.diagonal(data, axis1=-2, axis2=-1))
    return diag @ _z_signs(n).T


def z_expectation(rho: DensityMatrix, qubit: int) -> float:
    _check_targets([qubit], rho.n_qubits)
    probs = measurement_probs(rho)
    return float(probs @ _z_signs(rho.n_qubits)[qubit])


def sample_shots(probs: Sequence[float], shots: int, rng_seed: int) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if shots <= 0:
        raise InvalidParameter("shots must be a positive integer")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise InvalidParameter("probabilities must be non-negative and sum to 1")
    rng = np.random.default_rng(rng_seed)
    return rng.multinomial(int(shots), p / p.sum())
