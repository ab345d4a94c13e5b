"""Command line entry point: train, verify, sweep, export, env-info.

Results go to stdout as JSON; diagnostics go to stderr. Exit codes: 0 ok,
1 every sweep point failed, 2 configuration/parse/bind errors, 3 training
diverged, 4 state explosion, 5 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dtmc import build_induced_dtmc, export_dtmc
from .environments import ENVIRONMENTS, make_env
from .errors import (
    BindError,
    ConfigError,
    ExplosionError,
    ParseError,
    QVerifyError,
    SolverError,
    TrainingDiverged,
)
from .pctl import parse_property
from .policies import ClassicalSoftmaxPolicy, QuantumPolicy, resolve_policy, save_policy
from .quantum import CHANNEL_KINDS
from .training import TrainConfig, reinforce_train, write_return_log
from .verifier import SweepConfig, run_sweep, verify, write_sweep_csv
from .vqc import READOUTS, CircuitSpec, NoiseSpec

GOAL_PROPERTY = "P=? [ F Goal ]"

EXIT_CODES = (
    (TrainingDiverged, 3),
    (ExplosionError, 4),
    (SolverError, 5),
    (ParseError, 2),
    (BindError, 2),
    (ConfigError, 2),
)


def _emit(obj) -> None:
    print(json.dumps(obj))


def _env_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--env", required=True, help=f"one of {', '.join(sorted(ENVIRONMENTS))}")
    p.add_argument("--env-config", help="JSON config file (freeway only)")


def _noise(args) -> NoiseSpec | None:
    if args.noise is None:
        if args.noise_param is not None:
            raise ConfigError("--noise-param given without --noise")
        return None
    return NoiseSpec(args.noise, 0.0 if args.noise_param is None else args.noise_param)


def cmd_train(args) -> int:
    mdp = make_env(args.env, args.env_config)
    overrides = dict(episodes=args.episodes, seed=args.seed, learning_rate=args.lr,
                     gamma=args.gamma, max_steps=args.max_steps, baseline=args.baseline)
    if args.config:
        cfg = TrainConfig.from_file(args.config, **overrides)
    else:
        cfg = TrainConfig(**{k: v for k, v in overrides.items() if v is not None})
    if args.kind == "quantum":
        spec = CircuitSpec(n_qubits=args.qubits or mdp.default_qubits, n_layers=args.layers,
                           entangling_layers=frozenset(args.entangling), readout=args.readout,
                           softmax_beta=args.beta)
        policy = QuantumPolicy.initial(mdp, spec, args.layout, seed=cfg.seed, append_bias=False if args.no_bias else None)
    else:
        policy = ClassicalSoftmaxPolicy.initial(mdp, args.layout, seed=cfg.seed)
    result = reinforce_train(mdp, policy, cfg)
    out = Path(args.out)
    log_path = Path(args.log) if args.log else out.with_suffix(".returns.csv")
    save_policy(result.policy, out, mdp)
    write_return_log(result.returns, log_path)
    summary = {"policy": str(out), "return_log": str(log_path), "episodes": cfg.episodes, "seed": cfg.seed}
    if "Goal" in mdp.label_names:
        v = verify(mdp, result.policy, GOAL_PROPERTY)
        summary.update(property=v.property, probability=v.probability)
    _emit(summary)
    return 0


def cmd_verify(args) -> int:
    mdp = make_env(args.env, args.env_config)
    prop = parse_property(args.prop)
    policy = resolve_policy(args.policy, mdp)
    v = verify(mdp, policy, prop, _noise(args), truncate=not args.no_truncate, method=args.method)
    _emit(v.to_dict())
    return 0


def cmd_sweep(args) -> int:
    if args.config:
        cfg = SweepConfig.from_file(args.config)
    else:
        missing = [f for f in ("env", "policy", "prop", "out") if getattr(args, f) is None]
        if missing:
            raise ConfigError(f"sweep needs --{' --'.join(missing)} (or --config)")
        grid = [float(g) for g in args.grid.split(",")] if args.grid else [i / 20 for i in range(11)]
        cfg = SweepConfig(args.env, args.policy, args.prop, args.noise.split(","), grid,
                          args.out, args.env_config, args.jobs, not args.no_truncate)
    rows = run_sweep(cfg)
    write_sweep_csv(rows, cfg.out)
    ok = sum(r["status"] == "ok" for r in rows)
    for r in rows:
        if r["status"] != "ok":
            print(f"{r['noise_kind']}@{r['noise_param']}: {r['status']}", file=sys.stderr)
    _emit({"csv": cfg.out, "rows": len(rows), "ok": ok})
    return 0 if ok else 1


def cmd_export(args) -> int:
    mdp = make_env(args.env, args.env_config)
    policy = resolve_policy(args.policy, mdp)
    prop = parse_property(args.prop) if args.prop else None
    d = build_induced_dtmc(mdp, policy, truncation=prop)
    export_dtmc(d, args.out)
    _emit({"dtmc": args.out, "states": d.n_states, "transitions": d.n_transitions})
    return 0


def cmd_env_info(args) -> int:
    _emit(make_env(args.env, args.env_config).describe())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qverify", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a policy with REINFORCE")
    _env_args(p)
    p.add_argument("--kind", choices=("quantum", "classical"), default="quantum")
    p.add_argument("--config", help="JSON training config; flags override it")
    p.add_argument("--episodes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--baseline", choices=("none", "moving_average"))
    p.add_argument("--layout", help="feature layout (default: the environment's)")
    p.add_argument("--qubits", type=int, help="register size (default: the environment's)")
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--entangling", type=int, nargs="*", default=[0])
    p.add_argument("--readout", choices=READOUTS, default="z_softmax")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--no-bias", action="store_true", help="do not append the constant bias amplitude (dropped automatically when the layout fills the register)")
    p.add_argument("-o", "--out", required=True, help="policy file to write")
    p.add_argument("--log", help="return-log CSV (default: <out>.returns.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("verify", help="build the induced DTMC and check a property")
    _env_args(p)
    p.add_argument("--policy", required=True, help="policy file, 'uniform' or 'optimal-table:<file>'")
    p.add_argument("--prop", required=True)
    p.add_argument("--noise", choices=CHANNEL_KINDS)
    p.add_argument("--noise-param", type=float)
    p.add_argument("--no-truncate", action="store_true", help="expand states the property already decides")
    p.add_argument("--method", choices=("auto", "gauss_seidel", "direct"), default="auto")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="verify over a grid of noise strengths, write CSV")
    p.add_argument("--config", help="JSON sweep config (replaces the flags below)")
    p.add_argument("--env")
    p.add_argument("--env-config")
    p.add_argument("--policy")
    p.add_argument("--prop")
    p.add_argument("--noise", default="all", help="channel kind, comma list, or 'all'")
    p.add_argument("--grid", help="comma-separated sorted values in [0,1] (default 0,0.05,...,0.5)")
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-truncate", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export", help="write the induced DTMC to a file")
    _env_args(p)
    p.add_argument("--policy", required=True)
    p.add_argument("--prop", help="truncate with this property")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("env-info", help="print feature schema, actions and labels")
    _env_args(p)
    p.set_defaults(func=cmd_env_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except QVerifyError as exc:
        print(f"qverify: {type(exc).__name__}: {exc}", file=sys.stderr)
        for kind, code in EXIT_CODES:
            if isinstance(exc, kind):
                return code
        return 2


if __name__ == "__main__":
    sys.exit(main())
