"""Unbounded until / eventually probabilities on an explicit DTMC.

``F phi`` is checked as ``true U phi``. States that cannot reach the target
through left-satisfying states (the prob0 set) are fixed to 0 by a graph
search first, which leaves a linear system with a unique solution on the
remaining states.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .dtmc import Dtmc
from .errors import ConfigError, SolverError
from .pctl import PctlProperty, StateTest, bind, parse_property

RESIDUAL_TOL = 1e-10
MAX_ITERATIONS = 10**6
DIRECT_LIMIT = 2000
BOUND_SLACK = 1e-9
METHODS = ("auto", "gauss_seidel", "direct")


@dataclass
class CheckResult:
    probability: float
    per_state: np.ndarray | None = field(default=None, repr=False)
    iterations: int = 0
    residual: float = 0.0
    seconds: float = 0.0
    method: str = ""


def _state_sets(d: Dtmc, left: StateTest, right: StateTest) -> tuple[np.ndarray, np.ndarray]:
    states = d.states if d.states else [()] * d.n_states
    lhs = np.fromiter((left(s, l) for s, l in zip(states, d.labels)), dtype=bool, count=d.n_states)
    rhs = np.fromiter((right(s, l) for s, l in zip(states, d.labels)), dtype=bool, count=d.n_states)
    return lhs, rhs


def _prob0_mask(d: Dtmc, lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    preds: list[list[int]] = [[] for _ in range(d.n_states)]
    for i, row in enumerate(d.rows):
        for j, p in row:
            if p > 0:
                preds[j].append(i)
    reach = rhs.copy()
    queue = deque(np.flatnonzero(rhs).tolist())
    while queue:
        j = queue.popleft()
        for i in preds[j]:
            if not reach[i] and lhs[i]:
                reach[i] = True
                queue.append(i)
    return ~reach


def prob0_set(d: Dtmc, left: StateTest, right: StateTest) -> set[int]:
    """States with no path through ``left``-states to a ``right``-state."""
    lhs, rhs = _state_sets(d, left, right)
    return set(np.flatnonzero(_prob0_mask(d, lhs, rhs)).tolist())


def _system(d: Dtmc, maybe: np.ndarray, yes: np.ndarray):
    """Restriction of x = P x + b to the undecided states."""
    unknown = np.flatnonzero(maybe)
    pos = -np.ones(d.n_states, dtype=np.int64)
    pos[unknown] = np.arange(len(unknown))
    rows, b = [], np.zeros(len(unknown))
    for k, i in enumerate(unknown):
        entries = []
        for j, p in d.rows[i]:
            if yes[j]:
                b[k] += p
            elif pos[j] >= 0:
                entries.append((int(pos[j]), p))
        rows.append(entries)
    return unknown, rows, b


def _to_sparse(rows, m):
    from scipy.sparse import csr_matrix

    indptr = np.zeros(m + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(r) for r in rows])
    cols = np.array([j for r in rows for j, _ in r], dtype=np.int64)
    vals = np.array([p for r in rows for _, p in r], dtype=float)
    return csr_matrix((vals, cols, indptr), shape=(m, m))


def _residual(A, b, x) -> float:
    if len(x) == 0:
        return 0.0
    return float(np.max(np.abs(A @ x + b - x)))


def gauss_seidel(rows, b, tol=RESIDUAL_TOL, max_iter=MAX_ITERATIONS):
    """Solve x = A x + b by in-place sweeps in index order."""
    m = len(b)
    A = _to_sparse(rows, m)
    diag = np.zeros(m)
    off = []
    for k, r in enumerate(rows):
        off.append([(j, p) for j, p in r if j != k])
        diag[k] = sum(p for j, p in r if j == k)
    scale = (1.0 - diag).tolist()
    x = [0.0] * m
    bl = b.tolist()
    residual = _residual(A, b, np.asarray(x))
    it = 0
    while residual > tol:
        if it >= max_iter:
            raise SolverError("Gauss-Seidel did not converge", residual, it)
        for k in range(m):
            acc = bl[k]
            for j, p in off[k]:
                acc += p * x[j]
            x[k] = acc / scale[k]
        it += 1
        residual = _residual(A, b, np.asarray(x))
    return np.asarray(x), it, residual


def direct_solve(rows, b):
    from scipy.sparse import identity
    from scipy.sparse.linalg import spsolve

    m = len(b)
    if m == 0:
        return np.zeros(0), 0, 0.0
    A = _to_sparse(rows, m)
    x = np.atleast_1d(spsolve((identity(m, format="csc") - A).tocsc(), b))
    if not np.all(np.isfinite(x)):
        raise SolverError("direct solve produced non-finite values")
    return x, 1, _residual(A, b, x)


def check(
    d: Dtmc,
    prop: PctlProperty | str,
    method: str = "auto",
    tol: float = RESIDUAL_TOL,
    max_iter: int = MAX_ITERATIONS,
    direct_limit: int = DIRECT_LIMIT,
) -> CheckResult:
    if method not in METHODS:
        raise ConfigError(f"unknown solver method {method!r}")
    if isinstance(prop, str):
        prop = parse_property(prop)
    t0 = time.perf_counter()
    bound = bind(prop, d.feature_names, d.label_names or None)
    lhs, rhs = _state_sets(d, bound.left, bound.right)
    no = _prob0_mask(d, lhs, rhs)
    yes = rhs
    maybe = ~no & ~yes
    unknown, rows, b = _system(d, maybe, yes)
    if method == "auto":
        method = "direct" if len(unknown) <= direct_limit else "gauss_seidel"
    if method == "direct":
        x, iterations, residual = direct_solve(rows, b)
        if residual > tol:
            raise SolverError("direct solve residual above tolerance", residual, iterations)
    else:
        x, iterations, residual = gauss_seidel(rows, b, tol, max_iter)
    values = yes.astype(float)
    values[unknown] = x
    if np.any(values < -BOUND_SLACK) or np.any(values > 1 + BOUND_SLACK):
        raise SolverError("probabilities left [0, 1]", residual, iterations)
    values = np.clip(values, 0.0, 1.0)
    return CheckResult(
        probability=float(values[d.initial]),
        per_state=values,
        iterations=iterations,
        residual=residual,
        seconds=time.perf_counter() - t0,
        method=method,
    )
