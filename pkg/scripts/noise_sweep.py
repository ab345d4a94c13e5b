"""Noise-robustness sweep of a trained quantum policy.

Runs every channel kind over a grid of strengths, writes the CSV and prints
P(F Goal) per grid point next to the uniform-policy level.

    python scripts/noise_sweep.py --policy results/ski_quantum_seed0.json
"""

import argparse
from collections import defaultdict

from qverify.environments import make_env
from qverify.policies import uniform_policy
from qverify.quantum import CHANNEL_KINDS
from qverify.verifier import SweepConfig, run_sweep, verify, write_sweep_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--env", default="ski")
    ap.add_argument("--policy", default="results/ski_quantum_seed0.json")
    ap.add_argument("--prop", default="P=? [ F Goal ]")
    ap.add_argument("--steps", type=int, default=11, help="grid points in [0, 0.5]")
    ap.add_argument("--out", default="results/noise_sweep_ski.csv")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    grid = [0.5 * i / (args.steps - 1) for i in range(args.steps)]
    cfg = SweepConfig(args.env, args.policy, args.prop, list(CHANNEL_KINDS), grid, args.out, jobs=args.jobs)
    rows = run_sweep(cfg)
    write_sweep_csv(rows, args.out)

    table = defaultdict(dict)
    for r in rows:
        table[r["noise_param"]][r["noise_kind"]] = r["probability"] if r["status"] == "ok" else float("nan")
    mdp = make_env(args.env)
    floor = verify(mdp, uniform_policy(mdp.n_actions), args.prop).probability
    print(f"{'p':>5} " + " ".join(f"{k:>18}" for k in CHANNEL_KINDS))
    for p in grid:
        print(f"{p:>5.2f} " + " ".join(f"{table[p][k]:>18.6f}" for k in CHANNEL_KINDS))
    print(f"uniform policy: {floor:.6f}; CSV written to {args.out}")


if __name__ == "__main__":
    main()
