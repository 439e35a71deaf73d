"""Command-line front end: ``trimgame {simulate,experiment,theory,ldp}``."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from .core import DomainError
from .data import DatasetError, load_dataset
from .engine import BASES, GameConfig, run_game
from .harness import ExperimentConfig, load_config, rows_to_csv, run_experiment
from .strategies import ATTACKERS, DEFENDERS, build_attacker, build_defender
from .theory import DynamicsParams, compliance_threshold, integrate_dynamics


def _params(text: str | None) -> dict:
    if not text:
        return {}
    try:
        out = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DomainError(f"scheme parameters must be a JSON object: {exc}") from None
    if not isinstance(out, dict):
        raise DomainError("scheme parameters must be a JSON object")
    return out


def _ratio(text: str):
    parts = [float(x) for x in text.split(",")]
    if len(parts) == 1:
        return parts[0]
    if len(parts) == 2:
        return tuple(parts)
    raise DomainError(f"attack ratio must be 'r' or 'lo,hi', got {text!r}")


def _write(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def cmd_simulate(args) -> int:
    defender = build_defender(args.defender, **_params(args.defender_params))
    attacker = build_attacker(args.attacker, **_params(args.attacker_params))
    source = args.benign
    if args.dataset:
        source = load_dataset(args.dataset, normalize=args.normalize, column=0)
    cfg = GameConfig(
        defender=defender,
        attacker=attacker,
        round_no=args.rounds,
        samples_per_round=args.samples,
        attack_ratio=_ratio(args.attack_ratio),
        seed=args.seed,
        benign_source=source,
        percentile_basis=args.basis,
    )
    _write(run_game(cfg).to_csv(), args.output)
    return 0


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.output:
        changes["output"] = None
    if args.repetitions is not None:
        changes["repetitions"] = args.repetitions
    if changes:
        cfg = cfg.replace(**changes)
    rows = run_experiment(cfg)
    if args.output or not cfg.output:
        _write(rows_to_csv(rows), args.output)
    return 0


def cmd_theory(args) -> int:
    if args.trajectory:
        params = DynamicsParams(args.m_a, args.m_c, args.k)
        init = tuple(float(x) for x in args.init.split(","))
        span = tuple(float(x) for x in args.span.split(","))
        traj = integrate_dynamics(params, init, span, args.h)
        _write(traj.to_csv(params), args.output)
        return 0
    lines = ["d,p,g_ac,delta_max"]
    for g in args.g_ac:
        for d in args.d:
            for p in args.p:
                v = compliance_threshold(d, p, g)
                lines.append(f"{d!r},{p!r},{g!r},{v!r}")
    _write("\n".join(lines) + "\n", args.output)
    return 0


def cmd_ldp(args) -> int:
    cfg = ExperimentConfig(
        mode="ldp",
        dataset=args.dataset or "uniform",
        epsilons=tuple(args.epsilons),
        users=args.users,
        repetitions=args.repetitions,
        seed=args.seed,
        attack=args.attack,
        attacker_fraction=args.attacker_fraction,
        target=args.target,
    )
    rows = run_experiment(cfg)
    _write(rows_to_csv(rows), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="trimgame", description="Repeated trimming game simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="play one game and write its trace CSV")
    s.add_argument("--defender", choices=sorted(DEFENDERS), required=True)
    s.add_argument("--defender-params", help='JSON object, e.g. \'{"tth": 0.9, "k": 0.5}\'')
    s.add_argument("--attacker", choices=sorted(ATTACKERS), required=True)
    s.add_argument("--attacker-params", help="JSON object")
    s.add_argument("--rounds", type=int, default=20)
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--attack-ratio", default="0.2", help="'r' or 'lo,hi'")
    s.add_argument("--benign", default="uniform", choices=["uniform", "gaussian", "clusters"])
    s.add_argument("--dataset", help="CSV of benign values (first column is used)")
    s.add_argument("--normalize", action="store_true")
    s.add_argument("--basis", choices=BASES, default="board_reference")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("experiment", help="run a YAML/JSON experiment config")
    e.add_argument("config")
    e.add_argument("--seed", type=int)
    e.add_argument("--repetitions", type=int)
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_experiment)

    t = sub.add_parser("theory", help="compliance thresholds or a dynamics trajectory")
    t.add_argument("--d", type=float, nargs="+", default=[0.5, 0.9])
    t.add_argument("--p", type=float, nargs="+", default=[0.0, 0.5, 0.9])
    t.add_argument("--g-ac", dest="g_ac", type=float, nargs="+", default=[1.0])
    t.add_argument("--trajectory", action="store_true", help="integrate the dynamics instead")
    t.add_argument("--m-a", dest="m_a", type=float, default=1.0)
    t.add_argument("--m-c", dest="m_c", type=float, default=1.0)
    t.add_argument("--k", type=float, default=0.5)
    t.add_argument("--init", default="1,-1,0,0", help="u_a,u_c,du_a,du_c")
    t.add_argument("--span", default=f"0,{2 * math.pi!r}")
    t.add_argument("--h", type=float, default=1e-2)
    t.add_argument("--seed", type=int, default=0, help="accepted for uniformity; theory output is deterministic")
    t.add_argument("-o", "--output")
    t.set_defaults(func=cmd_theory)

    l = sub.add_parser("ldp", help="MSE of the perturbed mean across privacy budgets")
    l.add_argument("--epsilons", type=float, nargs="+", default=[0.5, 1.0, 2.0, 4.0])
    l.add_argument("--users", type=int, default=10000)
    l.add_argument("--repetitions", type=int, default=100)
    l.add_argument("--dataset", help="CSV of values, normalized to [-1, 1]")
    l.add_argument("--attack", choices=["input_manipulation", "output_manipulation"])
    l.add_argument("--attacker-fraction", type=float, default=0.0)
    l.add_argument("--target", type=float, default=1.0)
    l.add_argument("--seed", type=int, default=0)
    l.add_argument("-o", "--output")
    l.set_defaults(func=cmd_ldp)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DomainError, DatasetError, FileNotFoundError) as exc:
        print(f"trimgame: error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
