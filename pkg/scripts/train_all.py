"""Train quantum and classical REINFORCE policies for several seeds.

Writes ``<out>/<env>_<kind>_seed<k>.json`` plus a return log per run and
prints the verified P(F Goal) before and after training.

    python scripts/train_all.py --env ski --seeds 0 1 2
"""

import argparse
import time
from pathlib import Path

from qverify.environments import ENVIRONMENTS, make_env
from qverify.policies import ClassicalSoftmaxPolicy, QuantumPolicy, save_policy
from qverify.training import TrainConfig, reinforce_train, write_return_log
from qverify.verifier import verify

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
GOAL = "P=? [ F Goal ]"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--env", default="ski", choices=sorted(ENVIRONMENTS))
    ap.add_argument("--kinds", nargs="+", default=["quantum", "classical"], choices=["quantum", "classical"])
    ap.add_argument("--seeds", nargs="+", type=int, default=[0, 1, 2])
    ap.add_argument("--episodes", type=int, help="override the config's episode count")
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mdp = make_env(args.env)
    print(f"{'kind':<10} {'seed':>4} {'before':>8} {'after':>8} {'seconds':>8}")
    for kind in args.kinds:
        for seed in args.seeds:
            cfg = TrainConfig.from_file(CONFIGS / f"train_{kind}.json", seed=seed, episodes=args.episodes)
            if kind == "quantum":
                init = QuantumPolicy.initial(mdp, seed=seed)
            else:
                init = ClassicalSoftmaxPolicy.initial(mdp, seed=seed)
            t0 = time.perf_counter()
            result = reinforce_train(mdp, init, cfg)
            seconds = time.perf_counter() - t0
            stem = out / f"{args.env}_{kind}_seed{seed}"
            save_policy(result.policy, stem.with_suffix(".json"), mdp)
            write_return_log(result.returns, stem.with_suffix(".returns.csv"))
            before = verify(mdp, init, GOAL).probability
            after = verify(mdp, result.policy, GOAL).probability
            print(f"{kind:<10} {seed:>4} {before:>8.4f} {after:>8.4f} {seconds:>8.1f}", flush=True)


if __name__ == "__main__":
    main()
