"""Explicit-state MDP models: Frozen Lake, Ski and a parametric Freeway.

States are plain tuples of ints matching ``feature_schema``. Every action is
available in every state; terminal states self-loop under all actions.

Feature layouts turn a state into the numeric vector a policy sees:

``raw``
    the feature values as they are (Freeway).
``bits``
    every feature written in binary, most significant bit first, with the
    width taken from the schema maximum (Ski: 4 bits).
``one_hot:N``
    one-hot of the first feature over ``N`` slots (Frozen Lake: 16 cells).
    Values outside ``0..N-1`` map to the all-ones vector so that the encoding
    is never zero; for Frozen Lake that is only the absorbing sink.
"""

from __future__ import annotations

import json
import os
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import ConfigError, ExplosionError

State = tuple[int, ...]

DEFAULT_STATE_CEILING = 10**7


def state_ceiling() -> int:
    raw = os.environ.get("QVERIFY_STATE_CEILING")
    if raw is None:
        return DEFAULT_STATE_CEILING
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"QVERIFY_STATE_CEILING={raw!r} is not an integer") from None
    if value < 1:
        raise ConfigError("QVERIFY_STATE_CEILING must be positive")
    return value


@dataclass(frozen=True)
class Feature:
    name: str
    lo: int
    hi: int


class Mdp:
    """Interface shared by every environment."""

    name: str = "mdp"
    actions: tuple[str, ...] = ()
    feature_schema: tuple[Feature, ...] = ()
    label_names: tuple[str, ...] = ()
    default_layout: str = "raw"
    default_qubits: int = 4  # register size of the default quantum policy

    @property
    def initial_state(self) -> State:
        raise NotImplementedError

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.feature_schema)

    def transitions(self, s: State, a: int) -> list[tuple[State, float]]:
        raise NotImplementedError

    def step_reward(self, s: State, a: int, s_next: State) -> float:
        raise NotImplementedError

    def reward(self, s: State, a: int) -> float:
        """Expected immediate reward of taking ``a`` in ``s``."""
        return sum(p * self.step_reward(s, a, t) for t, p in self.transitions(s, a))

    def labels(self, s: State) -> frozenset[str]:
        raise NotImplementedError

    def is_terminal(self, s: State) -> bool:
        raise NotImplementedError

    def action_index(self, action: str | int) -> int:
        if isinstance(action, int):
            if not 0 <= action < self.n_actions:
                raise ConfigError(f"action index {action} out of range")
            return action
        try:
            return self.actions.index(action)
        except ValueError:
            raise ConfigError(f"unknown action {action!r} for {self.name}") from None

    def in_schema(self, s: State) -> bool:
        return len(s) == len(self.feature_schema) and all(
            f.lo <= v <= f.hi for f, v in zip(self.feature_schema, s)
        )

    def describe(self) -> dict:
        return {
            "name": self.name,
            "features": [{"name": f.name, "min": f.lo, "max": f.hi} for f in self.feature_schema],
            "actions": list(self.actions),
            "labels": list(self.label_names),
            "initial_state": list(self.initial_state),
            "default_layout": self.default_layout,
            "default_qubits": self.default_qubits,
        }


def _merge(pairs) -> list[tuple[State, float]]:
    out: dict[State, float] = {}
    for s, p in pairs:
        out[s] = out.get(s, 0.0) + p
    return list(out.items())


# Frozen Lake -----------------------------------------------------------------


class FrozenLake(Mdp):
    """Slippery 4x4 lake; holes and the goal drain into one shared sink.

    The intended move and both perpendicular moves each happen with
    probability 1/3; moves off the grid leave the agent in place.
    """

    name = "frozen_lake"
    actions = ("left", "down", "right", "up")
    label_names = ("Goal", "Hole")
    default_layout = "one_hot:16"

    SIZE = 4
    HOLES = frozenset({5, 7, 11, 12})
    GOAL = 15
    SINK = 16
    START = 0

    feature_schema = (Feature("pos", 0, 16),)

    @property
    def initial_state(self) -> State:
        return (self.START,)

    def _move(self, pos: int, direction: int) -> int:
        row, col = divmod(pos, self.SIZE)
        if direction == 0:
            col = max(col - 1, 0)
        elif direction == 1:
            row = min(row + 1, self.SIZE - 1)
        elif direction == 2:
            col = min(col + 1, self.SIZE - 1)
        else:
            row = max(row - 1, 0)
        return row * self.SIZE + col

    def transitions(self, s, a):
        (pos,) = s
        if pos == self.SINK or pos == self.GOAL or pos in self.HOLES:
            return [((self.SINK,), 1.0)]
        slips = ((a - 1) % 4, a, (a + 1) % 4)
        return _merge(((self._move(pos, d),), 1.0 / 3.0) for d in slips)

    def step_reward(self, s, a, s_next):
        return 1.0 if s_next[0] == self.GOAL and s[0] != self.GOAL else 0.0

    def labels(self, s):
        (pos,) = s
        if pos == self.GOAL:
            return frozenset({"Goal"})
        if pos in self.HOLES:
            return frozenset({"Hole"})
        return frozenset()

    def is_terminal(self, s):
        return s[0] == self.GOAL or s[0] == self.SINK or s[0] in self.HOLES


# Ski -------------------------------------------------------------------------


class Ski(Mdp):
    """Parity chain: odd states advance on ``left``, even ones on ``right``.

    The wrong action crashes into state 0. States 0 (crash) and 6 (goal)
    absorb both actions. States 7..15 are never reached from the start; the
    advance there saturates at 15.
    """

    name = "ski"
    actions = ("left", "right")
    label_names = ("Goal", "Crash")
    default_layout = "bits"
    default_qubits = 3  # 4 bits + bias fit in 8 amplitudes

    CRASH = 0
    GOAL = 6
    START = 1

    feature_schema = (Feature("state", 0, 15),)

    @property
    def initial_state(self) -> State:
        return (self.START,)

    def advancing_action(self, state: int) -> int:
        return 0 if state % 2 == 1 else 1

    def transitions(self, s, a):
        (state,) = s
        if state in (self.CRASH, self.GOAL):
            return [(s, 1.0)]
        if a == self.advancing_action(state):
            return [((min(state + 1, 15),), 1.0)]
        return [((self.CRASH,), 1.0)]

    def step_reward(self, s, a, s_next):
        state = s[0]
        if state in (self.CRASH, self.GOAL):
            return 0.0
        return 1.0 if a == self.advancing_action(state) else 0.0

    def labels(self, s):
        if s[0] == self.GOAL:
            return frozenset({"Goal"})
        if s[0] == self.CRASH:
            return frozenset({"Crash"})
        return frozenset()

    def is_terminal(self, s):
        return s[0] in (self.CRASH, self.GOAL)


# Freeway ---------------------------------------------------------------------


@dataclass(frozen=True)
class Lane:
    row: int
    speed: int
    init_x: int
    width: int = 1


DEFAULT_FREEWAY = {
    "height": 8,
    "road_width": 8,
    "lanes": [
        [1, 1, 0, 2],
        [2, -1, 5, 1],
        [3, 2, 2, 2],
        [4, 1, 6, 1],
        [5, -2, 3, 2],
        [6, 1, 1, 1],
    ],
}


class Freeway(Mdp):
    """Chicken crossing upwards from the bottom row to row 0.

    Features: chicken row ``y``, a ``crashed`` flag, then one x position per
    car. Each step the chicken moves first, then every car advances by its
    speed modulo ``road_width``. A car covers ``width`` consecutive columns
    starting at its x (wrapping). The chicken lives in the middle column. All
    crashes collapse into one absorbing state, as do all arrivals at row 0.
    """

    name = "freeway"
    actions = ("up", "down", "noop")
    label_names = ("Goal", "Crash")
    default_layout = "raw"

    def __init__(self, height: int, lanes: Sequence, road_width: int = 8):
        if int(height) < 2:
            raise ConfigError("freeway height must be at least 2")
        if int(road_width) < 1:
            raise ConfigError("freeway road_width must be positive")
        self.height = int(height)
        self.road_width = int(road_width)
        parsed = []
        for lane in lanes:
            lane = lane if isinstance(lane, Lane) else Lane(*(int(v) for v in lane))
            if not 1 <= lane.row < self.height:
                raise ConfigError(f"car row {lane.row} outside 1..{self.height - 1}")
            if not 0 <= lane.init_x < self.road_width:
                raise ConfigError(f"car x {lane.init_x} outside road of width {self.road_width}")
            if not 1 <= lane.width <= self.road_width:
                raise ConfigError(f"car width {lane.width} invalid for road width {self.road_width}")
            parsed.append(lane)
        self.lanes = tuple(parsed)
        self.column = self.road_width // 2
        self.feature_schema = (
            Feature("y", 0, self.height - 1),
            Feature("crashed", 0, 1),
        ) + tuple(Feature(f"car{i}", 0, self.road_width - 1) for i in range(len(self.lanes)))
        n = len(self.lanes)
        self._goal = (0, 0) + (0,) * n
        self._crash = (self.height - 1, 1) + (0,) * n

    @property
    def initial_state(self) -> State:
        return (self.height - 1, 0) + tuple(l.init_x for l in self.lanes)

    def _hit(self, y: int, xs: Sequence[int]) -> bool:
        for lane, x in zip(self.lanes, xs):
            if lane.row == y and (self.column - x) % self.road_width < lane.width:
                return True
        return False

    def transitions(self, s, a):
        if self.is_terminal(s):
            return [(s, 1.0)]
        y = s[0]
        y = {0: y - 1, 1: min(y + 1, self.height - 1), 2: y}[a]
        if y == 0:
            return [(self._goal, 1.0)]
        xs = tuple((x + lane.speed) % self.road_width for lane, x in zip(self.lanes, s[2:]))
        if self._hit(y, xs):
            return [(self._crash, 1.0)]
        return [((y, 0) + xs, 1.0)]

    def step_reward(self, s, a, s_next):
        return 1.0 if s_next == self._goal and s != self._goal else 0.0

    def labels(self, s):
        if s[1] == 1:
            return frozenset({"Crash"})
        if s[0] == 0:
            return frozenset({"Goal"})
        return frozenset()

    def is_terminal(self, s):
        return s[1] == 1 or s[0] == 0

    def config(self) -> dict:
        return {
            "height": self.height,
            "road_width": self.road_width,
            "lanes": [[l.row, l.speed, l.init_x, l.width] for l in self.lanes],
        }


def frozen_lake() -> FrozenLake:
    return FrozenLake()


def ski() -> Ski:
    return Ski()


def freeway(height: int = DEFAULT_FREEWAY["height"], lanes: Sequence | None = None, road_width: int = DEFAULT_FREEWAY["road_width"]) -> Freeway:
    if lanes is None:
        lanes = DEFAULT_FREEWAY["lanes"]
    return Freeway(height, lanes, road_width)


ENVIRONMENTS = {"frozen_lake": frozen_lake, "ski": ski, "freeway": freeway}


def make_env(name: str, config_path: str | os.PathLike | None = None) -> Mdp:
    if name not in ENVIRONMENTS:
        raise ConfigError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}")
    if config_path is None:
        return ENVIRONMENTS[name]()
    if name != "freeway":
        raise ConfigError(f"environment {name!r} takes no config file")
    try:
        cfg = json.loads(Path(config_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read freeway config: {exc}") from exc
    unknown = set(cfg) - {"height", "road_width", "lanes"}
    if unknown:
        raise ConfigError(f"unknown freeway config fields {sorted(unknown)}")
    try:
        return freeway(
            cfg.get("height", DEFAULT_FREEWAY["height"]),
            cfg.get("lanes", DEFAULT_FREEWAY["lanes"]),
            cfg.get("road_width", DEFAULT_FREEWAY["road_width"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed freeway config: {exc}") from exc


def enumerate_reachable(mdp: Mdp, ceiling: int | None = None) -> list[State]:
    """BFS closure from the initial state over all actions, in discovery order."""
    limit = state_ceiling() if ceiling is None else ceiling
    start = mdp.initial_state
    seen = {start}
    order = [start]
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for a in range(mdp.n_actions):
            for t, p in mdp.transitions(s, a):
                if p > 0 and t not in seen:
                    if len(order) >= limit:
                        raise ExplosionError(f"more than {limit} reachable states")
                    seen.add(t)
                    order.append(t)
                    queue.append(t)
    return order


# feature layouts -------------------------------------------------------------


def check_layout(layout: str) -> None:
    if layout in ("raw", "bits"):
        return
    if layout.startswith("one_hot:"):
        try:
            if int(layout.split(":", 1)[1]) >= 1:
                return
        except ValueError:
            pass
    raise ConfigError(f"unknown feature layout {layout!r}")


def layout_size(layout: str, schema: Sequence[Feature]) -> int:
    check_layout(layout)
    if layout == "raw":
        return len(schema)
    if layout == "bits":
        return sum(max(f.hi, 1).bit_length() for f in schema)
    return int(layout.split(":", 1)[1])


def encode_features(layout: str, s: State, schema: Sequence[Feature]) -> list[float]:
    check_layout(layout)
    if layout == "raw":
        return [float(v) for v in s]
    if layout == "bits":
        out = []
        for f, v in zip(schema, s):
            width = max(f.hi, 1).bit_length()
            out.extend(float((v >> (width - 1 - i)) & 1) for i in range(width))
        return out
    size = int(layout.split(":", 1)[1])
    v = s[0]
    if not 0 <= v < size:
        return [1.0] * size
    vec = [0.0] * size
    vec[v] = 1.0
    return vec
