"""Independent reference implementations used only by the tests.

Nothing here imports the code paths it checks: operators are expanded with
explicit Kronecker products, chains are assembled directly from the MDP, and
reachability is estimated by sampling.
"""

from __future__ import annotations

from functools import reduce

import numpy as np

I2 = np.eye(2, dtype=complex)
PX = np.array([[0, 1], [1, 0]], dtype=complex)
PY = np.array([[0, -1j], [1j, 0]], dtype=complex)
PZ = np.array([[1, 0], [0, -1]], dtype=complex)
P0 = np.array([[1, 0], [0, 0]], dtype=complex)
P1 = np.array([[0, 0], [0, 1]], dtype=complex)


def kron_on(op: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """op on ``qubit`` (qubit 0 leftmost / most significant), identity elsewhere."""
    return reduce(np.kron, [op if q == qubit else I2 for q in range(n)])


def cnot_full(control: int, target: int, n: int) -> np.ndarray:
    a = reduce(np.kron, [P0 if q == control else I2 for q in range(n)])
    b = reduce(np.kron, [P1 if q == control else (PX if q == target else I2) for q in range(n)])
    return a + b


def rot(kind: str, angle: float) -> np.ndarray:
    gen = {"RX": PX, "RY": PY, "RZ": PZ}[kind]
    # exp(-i angle/2 G) for a Pauli G
    return np.cos(angle / 2) * I2 - 1j * np.sin(angle / 2) * gen


def kraus_ops(kind: str, p: float) -> list[np.ndarray]:
    if kind == "bit_flip":
        return [np.sqrt(1 - p) * I2, np.sqrt(p) * PX]
    if kind == "phase_flip":
        return [np.sqrt(1 - p) * I2, np.sqrt(p) * PZ]
    if kind == "depolarizing":
        return [np.sqrt(1 - p) * I2] + [np.sqrt(p / 3) * m for m in (PX, PY, PZ)]
    if kind == "amplitude_damping":
        return [np.array([[1, 0], [0, np.sqrt(1 - p)]]), np.array([[0, np.sqrt(p)], [0, 0]])]
    raise ValueError(kind)


def brute_channel(rho: np.ndarray, ops, qubit: int, n: int) -> np.ndarray:
    out = np.zeros_like(rho, dtype=complex)
    for k in ops:
        big = kron_on(np.asarray(k, dtype=complex), qubit, n)
        out += big @ rho @ big.conj().T
    return out


def straight_line_policy(n_qubits, n_layers, entangling, theta, amps, n_actions,
                         readout="z_softmax", beta=1.0, noise=None):
    """Evaluate the layered RX-RY-RZ + CNOT-ring circuit with full-space matrices."""
    n = n_qubits
    psi = np.asarray(amps, dtype=complex)
    rho = np.outer(psi, psi.conj())

    def after(r, qubits):
        if noise is None:
            return r
        for q in qubits:
            r = brute_channel(r, kraus_ops(*noise), q, n)
        return r

    k = 0
    for layer in range(n_layers):
        for q in range(n):
            for kind in ("RX", "RY", "RZ"):
                u = kron_on(rot(kind, theta[k]), q, n)
                k += 1
                rho = after(u @ rho @ u.conj().T, [q])
        if layer in entangling and n > 1:
            for q in range(n):
                t = (q + 1) % n
                u = cnot_full(q, t, n)
                rho = after(u @ rho @ u.conj().T, [q, t])
    if readout == "z_softmax":
        z = np.array([np.trace(kron_on(PZ, q, n) @ rho).real for q in range(n_actions)])
        e = np.exp(beta * z - np.max(beta * z))
        return e / e.sum()
    probs = np.real(np.diag(rho))
    bits = max(0, int(np.ceil(np.log2(n_actions)))) if n_actions > 1 else 0
    marg = np.array([probs[a * 2 ** (n - bits):(a + 1) * 2 ** (n - bits)].sum() for a in range(n_actions)])
    return marg / marg.sum()


# Markov-chain oracles ------------------------------------------------------------


def dense_chain(mdp, policy):
    """Reachable states (any order) and the dense induced transition matrix."""
    start = mdp.initial_state
    states, seen, stack = [], {start}, [start]
    while stack:
        s = stack.pop()
        states.append(s)
        for a in range(mdp.n_actions):
            for t, p in mdp.transitions(s, a):
                if p > 0 and t not in seen:
                    seen.add(t)
                    stack.append(t)
    idx = {s: i for i, s in enumerate(states)}
    P = np.zeros((len(states), len(states)))
    for s in states:
        pi = policy.distribution(s)
        for a in range(mdp.n_actions):
            for t, p in mdp.transitions(s, a):
                P[idx[s], idx[t]] += pi[a] * p
    return states, idx, P


def until_by_linear_solve(P, left_mask, right_mask):
    """P(left U right) from every state via reachability closure + numpy solve."""
    m = len(P)
    adj = (P > 0) & left_mask[:, None] & ~right_mask[:, None]
    reach = right_mask.copy()
    # fixed point of: reach = right | (left & not right & any successor reaches)
    for _ in range(m + 1):
        new = reach | (adj & reach[None, :]).any(axis=1)
        if np.array_equal(new, reach):
            break
        reach = new
    maybe = reach & ~right_mask
    x = right_mask.astype(float)
    if maybe.any():
        A = np.eye(maybe.sum()) - P[np.ix_(maybe, maybe)]
        b = P[np.ix_(maybe, right_mask)].sum(axis=1)
        x[maybe] = np.linalg.solve(A, b)
    return x


def monte_carlo_reach(mdp, policy, target, n_runs: int, seed: int, max_steps: int = 100_000):
    """Fraction of ``n_runs`` policy rollouts that hit a state where ``target(s)`` holds.

    Walkers are advanced together, grouped by current state; a walker stops at
    the first target state or at a terminal state of the MDP.
    """
    rng = np.random.default_rng(seed)
    ids: dict = {}
    states: list = []

    def sid(s):
        if s not in ids:
            ids[s] = len(states)
            states.append(s)
        return ids[s]

    pos = np.full(n_runs, sid(mdp.initial_state))
    hit = np.zeros(n_runs, dtype=bool)
    alive = np.ones(n_runs, dtype=bool)
    for _ in range(max_steps):
        for i in np.unique(pos[alive]):
            s = states[i]
            here = alive & (pos == i)
            if target(s):
                hit[here] = True
                alive[here] = False
            elif mdp.is_terminal(s):
                alive[here] = False
        if not alive.any():
            break
        current = np.unique(pos[alive])
        new_pos = pos.copy()
        for i in current:
            s = states[i]
            members = np.flatnonzero(alive & (pos == i))
            acts = rng.choice(mdp.n_actions, size=len(members), p=policy.distribution(s))
            for a in np.unique(acts):
                who = members[acts == a]
                succ = mdp.transitions(s, int(a))
                pick = rng.choice(len(succ), size=len(who), p=[p for _, p in succ])
                targets = np.array([sid(t) for t, _ in succ])
                new_pos[who] = targets[pick]
        pos = new_pos
    else:
        raise RuntimeError("rollouts did not terminate")
    return hit.mean()
