import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qverify.environments import (
    ENVIRONMENTS,
    Feature,
    encode_features,
    enumerate_reachable,
    freeway,
    frozen_lake,
    layout_size,
    make_env,
    ski,
)
from qverify.errors import ConfigError, ExplosionError


def as_dict(pairs):
    return {s: p for s, p in pairs}


@pytest.fixture(params=sorted(ENVIRONMENTS))
def env(request):
    return ENVIRONMENTS[request.param]()


def test_frozen_lake_slip_from_start():
    out = as_dict(frozen_lake().transitions((0,), 1))  # down
    assert out == pytest.approx({(4,): 1 / 3, (0,): 1 / 3, (1,): 1 / 3})


def test_frozen_lake_corner_merges_duplicates():
    out = as_dict(frozen_lake().transitions((0,), 0))  # left: left, down, up
    assert out == pytest.approx({(0,): 2 / 3, (4,): 1 / 3})


def test_frozen_lake_holes_drain_to_sink():
    lake = frozen_lake()
    for pos in (5, 7, 11, 12, 15, 16):
        for a in range(4):
            assert lake.transitions((pos,), a) == [((16,), 1.0)]
    assert lake.labels((15,)) == {"Goal"}
    assert lake.labels((5,)) == {"Hole"}
    assert lake.labels((16,)) == frozenset()


def test_frozen_lake_reward_on_entering_goal():
    lake = frozen_lake()
    assert lake.step_reward((14,), 2, (15,)) == 1.0
    assert lake.step_reward((15,), 2, (16,)) == 0.0
    assert lake.reward((14,), 2) == pytest.approx(1 / 3)


def test_ski_chain():
    s = ski()
    assert s.initial_state == (1,)
    assert s.transitions((1,), 0) == [((2,), 1.0)]
    assert s.transitions((1,), 1) == [((0,), 1.0)]
    assert s.transitions((2,), 1) == [((3,), 1.0)]
    assert s.transitions((6,), 0) == [((6,), 1.0)]
    assert s.labels((6,)) == {"Goal"} and s.labels((0,)) == {"Crash"}


def test_ski_reachable_states():
    assert sorted(enumerate_reachable(ski())) == [(i,) for i in range(7)]


def test_frozen_lake_reachable_states():
    assert len(enumerate_reachable(frozen_lake())) == 17


def test_freeway_without_cars_reaches_goal():
    fw = freeway(height=3, lanes=[])
    s = fw.initial_state
    assert s == (2, 0)
    s = fw.transitions(s, 0)[0][0]
    assert s == (1, 0) and not fw.is_terminal(s)
    s = fw.transitions(s, 0)[0][0]
    assert fw.labels(s) == {"Goal"} and fw.is_terminal(s)


def test_freeway_collision():
    # car in row 1 sitting on the chicken's column after it moves
    fw = freeway(height=3, lanes=[[1, 0, 4, 1]], road_width=8)
    nxt = fw.transitions(fw.initial_state, 0)[0][0]
    assert fw.labels(nxt) == {"Crash"}
    # staying put in row 2 is safe
    assert fw.labels(fw.transitions(fw.initial_state, 2)[0][0]) == frozenset()


def test_freeway_default_size():
    assert len(enumerate_reachable(freeway())) == 49


def test_freeway_config_validation():
    with pytest.raises(ConfigError):
        freeway(height=1)
    with pytest.raises(ConfigError):
        freeway(height=4, lanes=[[4, 1, 0]])
    with pytest.raises(ConfigError):
        freeway(lanes=[[1, 1, 9]], road_width=8)


def test_make_env_unknown():
    with pytest.raises(ConfigError):
        make_env("pong")


def test_make_env_freeway_file(tmp_path):
    path = tmp_path / "fw.json"
    path.write_text(json.dumps({"height": 4, "lanes": [[1, 1, 0]]}))
    fw = make_env("freeway", path)
    assert fw.height == 4 and len(fw.lanes) == 1
    path.write_text(json.dumps({"height": 4, "colour": "red"}))
    with pytest.raises(ConfigError):
        make_env("freeway", path)
    with pytest.raises(ConfigError):
        make_env("ski", path)


def test_state_ceiling(monkeypatch):
    with pytest.raises(ExplosionError):
        enumerate_reachable(frozen_lake(), ceiling=5)
    monkeypatch.setenv("QVERIFY_STATE_CEILING", "10")
    with pytest.raises(ExplosionError):
        enumerate_reachable(freeway())
    monkeypatch.setenv("QVERIFY_STATE_CEILING", "many")
    with pytest.raises(ConfigError):
        enumerate_reachable(ski())


def test_row_stochastic_and_in_schema(env):
    for s in enumerate_reachable(env):
        assert env.in_schema(s)
        for a in range(env.n_actions):
            succ = env.transitions(s, a)
            assert sum(p for _, p in succ) == pytest.approx(1.0, abs=1e-12)
            assert all(p > 0 for _, p in succ)
            assert len({t for t, _ in succ}) == len(succ)


def test_labels_are_known_and_exclusive(env):
    for s in enumerate_reachable(env):
        labels = env.labels(s)
        assert labels <= set(env.label_names)
        assert len(labels) <= 1


def test_terminal_states_absorb(env):
    for s in enumerate_reachable(env):
        if env.is_terminal(s):
            for a in range(env.n_actions):
                (t, p), = env.transitions(s, a)
                assert p == 1.0 and env.is_terminal(t)


def test_describe(env):
    d = env.describe()
    assert d["name"] == env.name
    assert d["actions"] == list(env.actions)
    assert len(d["features"]) == len(env.feature_schema)


# layouts --------------------------------------------------------------------


def test_bits_layout():
    schema = (Feature("state", 0, 15),)
    assert encode_features("bits", (5,), schema) == [0, 1, 0, 1]
    assert layout_size("bits", schema) == 4


def test_one_hot_layout_and_sink():
    schema = (Feature("pos", 0, 16),)
    assert encode_features("one_hot:16", (2,), schema) == [0, 0, 1] + [0] * 13
    assert encode_features("one_hot:16", (16,), schema) == [1.0] * 16


def test_raw_layout():
    assert encode_features("raw", (3, 0, 7), ()) == [3.0, 0.0, 7.0]


@pytest.mark.parametrize("layout", ["one_hot", "one_hot:0", "binary"])
def test_bad_layout(layout):
    with pytest.raises(ConfigError):
        layout_size(layout, ())


@settings(max_examples=100)
@given(v=st.integers(0, 63))
def test_bits_roundtrip(v):
    bits = encode_features("bits", (v,), (Feature("x", 0, 63),))
    assert int("".join(str(int(b)) for b in bits), 2) == v
