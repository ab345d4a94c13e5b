"""Acceptance criteria, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line (run ``pytest -s`` to see
them, or execute this file directly for a plain report).
"""

import csv
import math
import sys
import time

import numpy as np
import pytest

from oracles import dense_chain, monte_carlo_reach, until_by_linear_solve
from qverify.checker import check
from qverify.dtmc import build_induced_dtmc
from qverify.environments import frozen_lake, ski
from qverify.policies import (
    ClassicalSoftmaxPolicy,
    QuantumPolicy,
    save_policy,
    ski_optimal_table,
    table_policy,
    uniform_policy,
)
from qverify.quantum import CHANNEL_KINDS, DensityMatrix, apply_channel, make_channel
from qverify.training import TrainConfig, reinforce_train
from qverify.verifier import SweepConfig, run_sweep, verify, write_sweep_csv
from qverify.vqc import CircuitSpec, NoiseSpec, log_prob_gradient, policy_distribution

GOAL = "P=? [ F Goal ]"
SEEDS = (0, 1, 2)

pytestmark = pytest.mark.slow


def report(name: str, ok: bool, detail: str) -> None:
    print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}", flush=True)
    assert ok, f"{name}: {detail}"


def goal_prob(mdp, policy) -> float:
    return check(build_induced_dtmc(mdp, policy), GOAL).probability


@pytest.fixture(scope="module")
def training_runs():
    """Default-config REINFORCE on Ski for every seed and both policy kinds."""
    mdp = ski()
    runs = {}
    for kind in ("quantum", "classical"):
        for seed in SEEDS:
            init = (QuantumPolicy.initial(mdp, seed=seed) if kind == "quantum"
                    else ClassicalSoftmaxPolicy.initial(mdp, seed=seed))
            t0 = time.perf_counter()
            result = reinforce_train(mdp, init, TrainConfig(seed=seed))
            runs[kind, seed] = {
                "before": goal_prob(mdp, init),
                "after": goal_prob(mdp, result.policy),
                "seconds": time.perf_counter() - t0,
                "policy": result.policy,
            }
    return runs


@pytest.fixture(scope="module")
def trained_classical_lake():
    mdp = frozen_lake()
    return reinforce_train(mdp, ClassicalSoftmaxPolicy.initial(mdp, seed=0), TrainConfig(seed=0)).policy


def test_dtmc_sizes(training_runs):
    details, ok = [], True
    for mdp, expected in ((ski(), (7, 12)), (frozen_lake(), (17, 48))):
        policies = [uniform_policy(mdp.n_actions), ClassicalSoftmaxPolicy.initial(mdp, seed=1),
                    QuantumPolicy.initial(mdp, seed=1)]
        if mdp.name == "ski":
            policies.append(training_runs["quantum", 0]["policy"])
        for pol in policies:
            t0 = time.perf_counter()
            d = build_induced_dtmc(mdp, pol)
            dt = time.perf_counter() - t0
            ok &= (d.n_states, d.n_transitions) == expected and dt < 1.0
        details.append(f"{mdp.name} {d.n_states}/{d.n_transitions} ({dt:.3f}s)")
    report("DTMC size reproduction", ok, ", ".join(details))


def test_exact_checker_oracle():
    t0 = time.perf_counter()
    mdp = ski()
    p_uni = goal_prob(mdp, uniform_policy(2))
    p_opt = goal_prob(mdp, table_policy(ski_optimal_table(), 2))
    dt = time.perf_counter() - t0
    ok = abs(p_uni - 0.03125) <= 1e-9 and abs(p_opt - 1.0) <= 1e-9 and dt < 1.0
    report("Exact checker oracle", ok, f"uniform={p_uni!r} optimal={p_opt!r} ({dt:.3f}s)")


@pytest.mark.parametrize("env_name,policy_name", [
    ("ski", "uniform"), ("ski", "trained-classical"),
    ("frozen_lake", "uniform"), ("frozen_lake", "trained-classical"),
])
def test_monte_carlo_agreement(env_name, policy_name, training_runs, trained_classical_lake):
    mdp = ski() if env_name == "ski" else frozen_lake()
    if policy_name == "uniform":
        pol = uniform_policy(mdp.n_actions)
    elif env_name == "ski":
        pol = training_runs["classical", 0]["policy"]
    else:
        pol = trained_classical_lake
    t0 = time.perf_counter()
    p = goal_prob(mdp, pol)
    n = 10**6
    p_hat = monte_carlo_reach(mdp, pol, lambda s: "Goal" in mdp.labels(s), n, seed=2024)
    dt = time.perf_counter() - t0
    sigma = math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / n)
    ok = abs(p - p_hat) <= 3 * sigma and dt < 60
    report(f"Monte-Carlo agreement [{env_name}/{policy_name}]", ok,
           f"checker={p:.6f} rollouts={p_hat:.6f} |diff|={abs(p - p_hat):.2e} 3sigma={3 * sigma:.2e} ({dt:.1f}s)")


def test_channel_physicality():
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    worst_herm = worst_trace = 0.0
    min_eig = 1.0
    dep_err = ad_err = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 3))
        dim = 2**n
        rank = int(rng.integers(1, dim + 1))  # includes pure states, the boundary of the PSD cone
        a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
        rho = a @ a.conj().T
        rho = DensityMatrix(n, rho / np.trace(rho))
        for kind in CHANNEL_KINDS:
            out = apply_channel(rho, make_channel(kind, float(rng.uniform())), int(rng.integers(n))).data
            worst_herm = max(worst_herm, np.max(np.abs(out - out.conj().T)))
            worst_trace = max(worst_trace, abs(np.trace(out) - 1))
            min_eig = min(min_eig, np.linalg.eigvalsh(out).min())
        b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        single = b @ b.conj().T
        single = DensityMatrix(1, single / np.trace(single))
        dep_err = max(dep_err, np.max(np.abs(apply_channel(single, make_channel("depolarizing", 0.75), 0).data
                                             - np.eye(2) / 2)))
        ad_err = max(ad_err, np.max(np.abs(apply_channel(single, make_channel("amplitude_damping", 1.0), 0).data
                                           - np.diag([1, 0]))))
    dt = time.perf_counter() - t0
    ok = (worst_herm <= 1e-10 and worst_trace <= 1e-10 and min_eig >= -1e-9
          and dep_err <= 1e-10 and ad_err <= 1e-10 and dt < 10)
    report("Channel physicality", ok,
           f"herm={worst_herm:.1e} trace={worst_trace:.1e} min_eig={min_eig:.1e} "
           f"dep(0.75)={dep_err:.1e} ad(1)={ad_err:.1e} ({dt:.1f}s)")


def test_gradient_check():
    rng = np.random.default_rng(1)
    h = 1e-5
    t0 = time.perf_counter()
    worst = 0.0
    ok = True
    for _ in range(50):
        readout = str(rng.choice(["z_softmax", "basis_marginal"]))
        spec = CircuitSpec(4, 2, frozenset(l for l in range(2) if rng.random() < 0.5), readout)
        n_actions = int(rng.integers(2, 5))
        theta = rng.uniform(-np.pi, np.pi, spec.n_params)
        feats = rng.integers(0, 5, size=int(rng.integers(1, 16))).astype(float)
        feats[0] += 1.0
        action = int(rng.integers(n_actions))
        ps = log_prob_gradient(spec, theta, feats, action, n_actions)
        for k in range(spec.n_params):
            tp, tm = theta.copy(), theta.copy()
            tp[k] += h
            tm[k] -= h
            fd = (np.log(policy_distribution(spec, tp, NoiseSpec(), feats, n_actions)[action])
                  - np.log(policy_distribution(spec, tm, NoiseSpec(), feats, n_actions)[action])) / (2 * h)
            err = abs(ps[k] - fd)
            if abs(fd) < 1e-2:
                ok &= err <= 1e-7
            else:
                ok &= err / abs(fd) <= 1e-5
                worst = max(worst, err / abs(fd))
    dt = time.perf_counter() - t0
    ok &= dt < 60
    report("Gradient check", ok, f"50 instances, worst relative error {worst:.1e} ({dt:.1f}s)")


def test_noisy_policy_limit(training_runs):
    damp = NoiseSpec("amplitude_damping", 1.0)
    cases = []
    mdp = ski()
    four = QuantumPolicy.initial(mdp, spec=CircuitSpec(n_qubits=4), seed=0)
    four = reinforce_train(mdp, four, TrainConfig(episodes=200, seed=0)).policy
    cases.append((mdp, four, GOAL))
    cases.append((mdp, training_runs["quantum", 0]["policy"], GOAL))
    lake = frozen_lake()
    lake_q = reinforce_train(lake, QuantumPolicy.initial(lake, seed=0), TrainConfig(episodes=100, seed=0)).policy
    cases.append((lake, lake_q, GOAL))
    cases.append((lake, lake_q, "P=? [ pos<=3 U pos=7 ]"))
    worst = 0.0
    for env, pol, prop in cases:
        noisy = verify(env, pol, prop, damp).probability
        plain = verify(env, uniform_policy(env.n_actions), prop).probability
        worst = max(worst, abs(noisy - plain))
    report("Noisy-policy limit", worst <= 1e-8, f"max |P_damped - P_uniform| = {worst:.1e} over {len(cases)} cases")


def test_noise_zero_equivalence(training_runs, tmp_path):
    path = tmp_path / "ski_q.json"
    mdp = ski()
    save_policy(training_runs["quantum", 0]["policy"], path, mdp)
    rows = run_sweep(SweepConfig("ski", str(path), GOAL, ["all"], [0.0], str(tmp_path / "s.csv")))
    plain = verify(mdp, training_runs["quantum", 0]["policy"], GOAL).probability
    diffs = {r["noise_kind"]: abs(r["probability"] - plain) for r in rows}
    ok = len(diffs) == 4 and all(d <= 1e-12 for d in diffs.values())
    report("Noise-zero equivalence", ok, ", ".join(f"{k}={v:.1e}" for k, v in diffs.items()))


@pytest.mark.parametrize("kind", ["quantum", "classical"])
def test_training_improvement(kind, training_runs):
    runs = [training_runs[kind, s] for s in SEEDS]
    gains = [r["after"] - r["before"] for r in runs]
    slowest = max(r["seconds"] for r in runs)
    ok = max(gains) >= 0.1 and slowest < 600
    detail = ", ".join(f"seed {s}: {r['before']:.3f}->{r['after']:.3f}" for s, r in zip(SEEDS, runs))
    report(f"Training improvement [{kind}]", ok, f"{detail}; slowest seed {slowest:.0f}s")


def test_until_property():
    mdp = frozen_lake()
    pol = uniform_policy(4)
    p = verify(mdp, pol, "P=? [ pos<=3 U pos=7 ]").probability
    states, idx, P = dense_chain(mdp, pol)
    left = np.array([s[0] <= 3 for s in states])
    right = np.array([s[0] == 7 for s in states])
    ref = float(until_by_linear_solve(P, left, right)[idx[mdp.initial_state]])
    report("Until-property plumbing", abs(p - ref) <= 1e-9, f"checker={p!r} oracle={ref!r}")


def test_noise_sweep(training_runs, tmp_path):
    best = max(SEEDS, key=lambda s: training_runs["quantum", s]["after"])
    path = tmp_path / "ski_q.json"
    save_policy(training_runs["quantum", best]["policy"], path, ski())
    out = tmp_path / "sweep.csv"
    grid = [i / 20 for i in range(11)]
    t0 = time.perf_counter()
    rows = run_sweep(SweepConfig("ski", str(path), GOAL, ["all"], grid, str(out)))
    write_sweep_csv(rows, out)
    dt = time.perf_counter() - t0
    parsed = list(csv.DictReader(out.open()))
    probs = [float(r["probability"]) for r in parsed]
    ok = (len(parsed) == 44 and all(r["status"] == "ok" for r in parsed)
          and all(0.0 <= p <= 1.0 for p in probs) and dt < 300)
    detail = ", ".join(f"{parsed[i]['noise_kind']} {probs[i]:.3f}->{probs[i + 10]:.3f}"
                       for i in range(0, len(parsed), 11))
    report("Noise sweep", ok, f"{len(parsed)} rows in {dt:.1f}s; {detail}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-s", "-q", "-p", "no:cacheprovider"]))
