"""Induced DTMC construction and the line-oriented ``dtmc v1`` file format.

File layout (``#`` starts a comment line)::

    dtmc v1
    states N
    initial I
    features NAME ...        # optional; feature names for property binding
    labels NAME ...          # optional; declared atomic propositions
    trans SRC DST PROB       # one per transition, PROB with 17 significant digits
    label STATE NAME
    feature STATE V1 V2 ...

The ``trans``, ``label`` and ``feature`` sections appear in that order.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .environments import Mdp, State, state_ceiling
from .errors import ConfigError, ExplosionError, ParseError, PolicyError, ValidationError
from .pctl import PctlProperty, bind
from .policies import Policy

ROW_TOL = 1e-9


@dataclass
class Dtmc:
    states: list[State]
    initial: int
    rows: list[list[tuple[int, float]]]
    labels: list[frozenset[str]]
    feature_names: tuple[str, ...] = ()
    label_names: tuple[str, ...] = ()
    build_stats: dict = field(default_factory=dict, compare=False)

    @property
    def n_states(self) -> int:
        return len(self.rows)

    @property
    def n_transitions(self) -> int:
        return sum(len(r) for r in self.rows)

    def validate(self) -> None:
        n = self.n_states
        if not 0 <= self.initial < n:
            raise ValidationError(f"initial state {self.initial} out of range")
        if len(self.labels) != n or (self.states and len(self.states) != n):
            raise ValidationError("labels/states do not match the number of rows")
        for i, row in enumerate(self.rows):
            total = math.fsum(p for _, p in row)
            if abs(total - 1.0) > ROW_TOL:
                raise ValidationError(f"row {i} sums to {total!r}")
            for j, p in row:
                if not 0 <= j < n:
                    raise ValidationError(f"row {i} points to missing state {j}")
                if not (0.0 < p <= 1.0 + ROW_TOL):
                    raise ValidationError(f"row {i} has probability {p!r}")

    def to_csr(self):
        from scipy.sparse import csr_matrix

        indptr = np.zeros(self.n_states + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(r) for r in self.rows])
        cols = np.fromiter((j for r in self.rows for j, _ in r), dtype=np.int64, count=indptr[-1])
        vals = np.fromiter((p for r in self.rows for _, p in r), dtype=float, count=indptr[-1])
        return csr_matrix((vals, cols, indptr), shape=(self.n_states, self.n_states))


def _check_distribution(probs: np.ndarray, n_actions: int, s: State) -> None:
    if probs.shape != (n_actions,) or not np.all(np.isfinite(probs)):
        raise PolicyError(f"policy returned a malformed distribution at {s}")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise PolicyError(f"policy distribution at {s} is not a probability vector")


def build_induced_dtmc(
    mdp: Mdp,
    policy: Policy,
    truncation: PctlProperty | None = None,
    prob_floor: float = 0.0,
    ceiling: int | None = None,
) -> Dtmc:
    """Breadth-first construction of the policy-induced chain.

    Each frontier level is evaluated with one batched policy call. With a
    ``truncation`` property, states whose value is already decided are made
    absorbing instead of expanded.
    """
    if policy.n_actions != mdp.n_actions:
        raise PolicyError(f"policy has {policy.n_actions} actions, {mdp.name} has {mdp.n_actions}")
    if prob_floor < 0:
        raise ConfigError("prob_floor must be non-negative")
    limit = state_ceiling() if ceiling is None else ceiling
    bound = None if truncation is None else bind(truncation, mdp.feature_names, mdp.label_names)
    t0 = time.perf_counter()

    start = mdp.initial_state
    index = {start: 0}
    states = [start]
    labels = [mdp.labels(start)]
    rows: list[list[tuple[int, float]]] = [[]]
    frontier = [0]
    while frontier:
        expand = []
        for i in frontier:
            s = states[i]
            if bound is not None and bound.absorbing(s, labels[i]):
                rows[i] = [(i, 1.0)]
            else:
                expand.append(i)
        dists = policy.distributions([states[i] for i in expand])
        nxt = []
        for i, probs in zip(expand, dists):
            s = states[i]
            _check_distribution(probs, mdp.n_actions, s)
            merged: dict[State, float] = {}
            for a in range(mdp.n_actions):
                pa = float(probs[a])
                if pa <= prob_floor:
                    continue
                for t, p in mdp.transitions(s, a):
                    if p > 0:
                        merged[t] = merged.get(t, 0.0) + pa * p
            kept = [(t, p) for t, p in merged.items() if p > prob_floor]
            if not kept:
                raise PolicyError(f"no transition out of {s} survives prob_floor={prob_floor}")
            if len(kept) < len(merged) or prob_floor > 0:
                total = math.fsum(p for _, p in kept)
                kept = [(t, p / total) for t, p in kept]
            row = []
            for t, p in kept:
                j = index.get(t)
                if j is None:
                    if len(states) >= limit:
                        raise ExplosionError(f"more than {limit} states in the induced DTMC")
                    j = len(states)
                    index[t] = j
                    states.append(t)
                    labels.append(mdp.labels(t))
                    rows.append([])
                    nxt.append(j)
                row.append((j, p))
            rows[i] = row
        frontier = nxt

    d = Dtmc(states, 0, rows, labels, mdp.feature_names, mdp.label_names)
    d.build_stats = {
        "states": d.n_states,
        "transitions": d.n_transitions,
        "seconds": time.perf_counter() - t0,
    }
    return d


# file format -------------------------------------------------------------------


def format_prob(p: float) -> str:
    return format(p, ".17g")


def export_dtmc(d: Dtmc, path: str | os.PathLike) -> None:
    lines = ["dtmc v1", f"states {d.n_states}", f"initial {d.initial}"]
    if d.feature_names:
        lines.append("features " + " ".join(d.feature_names))
    if d.label_names:
        lines.append("labels " + " ".join(d.label_names))
    for i, row in enumerate(d.rows):
        lines.extend(f"trans {i} {j} {format_prob(p)}" for j, p in row)
    for i, ls in enumerate(d.labels):
        lines.extend(f"label {i} {name}" for name in sorted(ls))
    if d.states:
        for i, s in enumerate(d.states):
            lines.append("feature " + " ".join(str(v) for v in (i,) + tuple(s)))
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise ConfigError(f"cannot write DTMC file {path}: {exc}") from exc


_SECTION_ORDER = {"trans": 0, "label": 1, "feature": 2}


def _int(token: str, lineno: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"{what} must be an integer, got {token!r}", line=lineno) from None


def parse_dtmc(text: str) -> Dtmc:
    lines = [
        (no, ln.strip()) for no, ln in enumerate(text.splitlines(), start=1)
        if ln.strip() and not ln.strip().startswith("#")
    ]
    if not lines:
        raise ParseError("empty DTMC file", line=1)
    it = iter(lines)

    def header(keyword: str) -> tuple[int, list[str]]:
        try:
            no, ln = next(it)
        except StopIteration:
            raise ParseError(f"missing '{keyword}' header", line=len(text.splitlines()) + 1) from None
        parts = ln.split()
        if parts[0] != keyword:
            raise ParseError(f"expected '{keyword}' header, got {parts[0]!r}", line=no)
        return no, parts[1:]

    no, rest = header("dtmc")
    if rest != ["v1"]:
        raise ParseError(f"unsupported format version {' '.join(rest)!r}", line=no)
    no, rest = header("states")
    if len(rest) != 1:
        raise ParseError("'states' takes one integer", line=no)
    n = _int(rest[0], no, "state count")
    if n < 1:
        raise ParseError("state count must be positive", line=no)
    no, rest = header("initial")
    if len(rest) != 1:
        raise ParseError("'initial' takes one integer", line=no)
    initial = _int(rest[0], no, "initial state")
    if not 0 <= initial < n:
        raise ValidationError(f"initial state {initial} out of range", line=no)

    feature_names: tuple[str, ...] = ()
    label_names: tuple[str, ...] = ()
    rows: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    first_line = [None] * n
    labels: list[set[str]] = [set() for _ in range(n)]
    features: list[tuple[int, ...] | None] = [None] * n
    section = -1
    for no, ln in it:
        parts = ln.split()
        key = parts[0]
        if key in ("features", "labels") and section == -1:
            if key == "features":
                feature_names = tuple(parts[1:])
            else:
                label_names = tuple(parts[1:])
            continue
        if key not in _SECTION_ORDER:
            raise ParseError(f"unknown directive {key!r}", line=no)
        if _SECTION_ORDER[key] < section:
            raise ParseError(f"'{key}' line after a later section", line=no)
        section = _SECTION_ORDER[key]
        if key == "trans":
            if len(parts) != 4:
                raise ParseError("'trans' takes SRC DST PROB", line=no)
            src, dst = _int(parts[1], no, "source"), _int(parts[2], no, "target")
            try:
                p = float(parts[3])
            except ValueError:
                raise ParseError(f"bad probability {parts[3]!r}", line=no) from None
            if not (0 <= src < n and 0 <= dst < n):
                raise ValidationError(f"transition {src}->{dst} outside 0..{n - 1}", line=no)
            if not (0.0 < p <= 1.0) or not math.isfinite(p):
                raise ValidationError(f"probability {parts[3]} outside (0, 1]", line=no)
            if any(j == dst for j, _ in rows[src]):
                raise ValidationError(f"duplicate transition {src}->{dst}", line=no)
            if first_line[src] is None:
                first_line[src] = no
            rows[src].append((dst, p))
        elif key == "label":
            if len(parts) != 3:
                raise ParseError("'label' takes STATE NAME", line=no)
            s = _int(parts[1], no, "state")
            if not 0 <= s < n:
                raise ValidationError(f"label on missing state {s}", line=no)
            if label_names and parts[2] not in label_names:
                raise ValidationError(f"undeclared label {parts[2]!r}", line=no)
            labels[s].add(parts[2])
        else:
            s = _int(parts[1], no, "state")
            if not 0 <= s < n:
                raise ValidationError(f"feature line for missing state {s}", line=no)
            values = tuple(_int(v, no, "feature value") for v in parts[2:])
            if feature_names and len(values) != len(feature_names):
                raise ValidationError(f"expected {len(feature_names)} feature values", line=no)
            features[s] = values
    for i, row in enumerate(rows):
        if not row:
            raise ValidationError(f"state {i} has no outgoing transitions", line=len(text.splitlines()))
        total = math.fsum(p for _, p in row)
        if abs(total - 1.0) > ROW_TOL:
            raise ValidationError(f"row {i} sums to {total!r}", line=first_line[i])
    if any(f is not None for f in features) and any(f is None for f in features):
        missing = features.index(None)
        raise ValidationError(f"state {missing} has no feature line", line=len(text.splitlines()))
    states = [f for f in features] if features[0] is not None else []
    if not label_names:
        label_names = tuple(sorted(set().union(*labels)))
    return Dtmc(states, initial, rows, [frozenset(l) for l in labels], feature_names, label_names)


def import_dtmc(path: str | os.PathLike) -> Dtmc:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read DTMC file {path}: {exc}") from exc
    return parse_dtmc(text)
