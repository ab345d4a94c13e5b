"""Sizes, probabilities and timings of the induced DTMCs, one row per query.

Policies come from ``results/`` (see train_all.py); missing files fall back
to the uniform policy so the structural columns are always available.

    python scripts/dtmc_summary.py --results results
"""

import argparse
from pathlib import Path

from qverify.environments import make_env
from qverify.policies import load_policy, uniform_policy
from qverify.verifier import verify

QUERIES = [
    ("ski", "P=? [ F Goal ]"),
    ("frozen_lake", "P=? [ F Goal ]"),
    ("frozen_lake", "P=? [ pos<=3 U pos=7 ]"),
    ("freeway", "P=? [ F Crash ]"),
]


def policies(env_name, mdp, results: Path):
    yield "uniform", uniform_policy(mdp.n_actions)
    for kind in ("quantum", "classical"):
        path = results / f"{env_name}_{kind}_seed0.json"
        if path.exists():
            yield kind, load_policy(path, mdp)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--results", default="results")
    ap.add_argument("--no-truncate", action="store_true")
    args = ap.parse_args()

    header = f"{'env':<12} {'policy':<10} {'property':<26} {'states':>6} {'trans':>6} {'P':>10} {'time[s]':>8}"
    print(header)
    print("-" * len(header))
    for env_name, prop in QUERIES:
        mdp = make_env(env_name)
        for name, pol in policies(env_name, mdp, Path(args.results)):
            v = verify(mdp, pol, prop, truncate=not args.no_truncate)
            print(f"{env_name:<12} {name:<10} {prop[6:-2]:<26} {v.states:>6} {v.transitions:>6} "
                  f"{v.probability:>10.6f} {v.total_seconds:>8.4f}")


if __name__ == "__main__":
    main()
