"""Command-line entry points: episode and bin-packing rollouts, distillation,
ADR range inspection, and the console service."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np
import yaml

from . import fabric as fb
from .actions import basis_from_yaml, reference_basis
from .adr import dump_ranges, reference_schedule, load_schedule, sample
from .kinematics import load_robot_file, reference_robot
from .toysim import ScriptedGrasp, load_env, reference_env, run_episode


def add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--robot-config", type=Path, help="robot model YAML")
    p.add_argument("--fabric-config", type=Path, help="fabric term YAML")
    p.add_argument("--basis-config", type=Path, help="PCA basis YAML")
    p.add_argument("--env-config", type=Path, help="environment YAML")
    p.add_argument("--adr-config", type=Path, help="ADR schedule YAML")


def add_adr_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--adr-n", type=int, default=0,
                   help="ADR increment counter (0 = initial, n_total = terminal)")
    p.add_argument("--adr-seed", type=int, default=0,
                   help="seed for drawing the env-parameter sample")


def build_stack(args):
    """Resolve models and configs, honoring file overrides."""
    model = (load_robot_file(args.robot_config) if args.robot_config
             else reference_robot())
    basis = (basis_from_yaml(args.basis_config.read_text()) if args.basis_config
             else reference_basis())
    if args.fabric_config:
        doc = yaml.safe_load(args.fabric_config.read_text())
    else:
        from importlib import resources
        doc = yaml.safe_load(
            resources.files("fabricgrasp.data").joinpath("fabric.yaml").read_text())
    fabric_cfg = fb.build_fabric_config(model, doc, basis.basis, basis.mean)
    if args.env_config:
        env = load_env(args.env_config.read_text(), model, basis,
                       fabric_cfg.nominal_posture)
    else:
        env = reference_env(model, basis, fabric_cfg.nominal_posture)
    schedule = (load_schedule(args.adr_config.read_text()) if args.adr_config
                else reference_schedule())
    return model, basis, fabric_cfg, env, schedule


def adr_sample_at(schedule, n: int, seed: int) -> dict:
    state = dataclasses.replace(schedule, n=n)
    return sample(state, rng_seed=seed)


# -- subcommands ------------------------------------------------------------------


def cmd_run_episode(args) -> int:
    model, basis, fabric_cfg, env, schedule = build_stack(args)
    adr = adr_sample_at(schedule, args.adr_n, args.adr_seed)
    rest_z = env.params.table_height + env.params.spawn_center[2]
    policy = ScriptedGrasp(model, basis, env.episode.goal, rest_z=rest_z)
    record: list[dict] = []
    outcome, traj_hash = run_episode(model, basis, fabric_cfg, env, policy, adr,
                                     seed=args.seed, mode=args.mode, record=record)
    print(f"outcome: {'success' if outcome.success else 'timeout'}"
          f" after {outcome.steps} ticks"
          + (f", lift at {outcome.time_to_lift:.2f} s" if outcome.time_to_lift else ""))
    print(f"trajectory hash: {traj_hash}")
    if args.report_dir:
        from .report import episode_report
        for path in episode_report(record, outcome, env.dt, args.report_dir):
            print(f"wrote {path}")
    return 0 if outcome.success or args.mode == "teacher" else 1


def cmd_run_binpack(args) -> int:
    from .runtime import run_binpack, write_trace

    model, basis, fabric_cfg, env, schedule = build_stack(args)
    adr = adr_sample_at(schedule, args.adr_n, args.adr_seed)
    result = run_binpack(model, basis, fabric_cfg, env, adr,
                         n_objects=args.objects, seed=args.seed,
                         attempt_timeout=args.timeout)
    m = result.metrics
    print(f"SR {m.sr:.0%} ({m.successes}/{m.attempts})")
    print(f"CS {m.cs_mean:.2f} ± {m.cs_std:.2f}")
    print(f"CT {m.ct_mean:.2f} ± {m.ct_std:.2f} s")
    if args.trace:
        args.trace.parent.mkdir(parents=True, exist_ok=True)
        write_trace(result.trace, args.trace)
        print(f"wrote {args.trace}")
    if args.report_dir:
        from .report import binpack_report
        for path in binpack_report(result, args.report_dir):
            print(f"wrote {path}")
    return 0


def cmd_run_distill(args) -> int:
    from .distill import run_distillation, save_checkpoint

    history, student = run_distillation(iterations=args.iterations,
                                        batch=args.batch, lr=args.lr,
                                        seed=args.seed)
    print(f"iteration 0: action loss {history[0].l_action:.3e}")
    print(f"iteration {len(history) - 1}: action loss {history[-1].l_action:.3e}")
    if args.checkpoint:
        save_checkpoint(student, args.checkpoint)
        print(f"wrote {args.checkpoint}")
    if args.report_dir:
        from .report import distill_report
        for path in distill_report(history, args.report_dir):
            print(f"wrote {path}")
    return 0


def cmd_adr_dump(args) -> int:
    schedule = (load_schedule(args.adr_config.read_text()) if args.adr_config
                else reference_schedule())
    state = dataclasses.replace(schedule, n=args.adr_n)
    rows = dump_ranges(state)
    width = max(len(r["name"]) for r in rows)
    print(f"counter {state.n}/{state.n_total} (fraction {state.fraction:.2f})")
    for r in rows:
        if r["kind"] == "scalar":
            print(f"  {r['name']:<{width}}  {r['lo']:.4g}")
        else:
            print(f"  {r['name']:<{width}}  U({r['lo']:.4g}, {r['hi']:.4g})")
    if args.report_dir:
        from .report import adr_report
        for path in adr_report(rows, args.report_dir):
            print(f"wrote {path}")
    return 0


def cmd_serve(args) -> int:
    from .server import RuntimeSession, ServeConfig, serve_console

    model, basis, fabric_cfg, env, schedule = build_stack(args)
    adr = adr_sample_at(schedule, args.adr_n, args.adr_seed)
    config = ServeConfig(host=args.host, port=args.port,
                         wall_clock=args.clock == "wall",
                         adr_fraction=args.adr_n / schedule.n_total,
                         seed=args.seed)
    session = RuntimeSession(model, basis, fabric_cfg, env, adr_sample=adr,
                             config=config)
    print(f"console service on ws://{args.host}:{args.port}/ws"
          f" ({args.clock} clock)")
    serve_console(session)
    return 0


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fabricgrasp",
        description="Fabric-controlled grasping: rollouts, distillation, ADR, console")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-episode", help="one grasp episode with the scripted policy")
    add_config_flags(p)
    add_adr_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("teacher", "student"), default="student")
    p.add_argument("--report-dir", type=Path)
    p.set_defaults(func=cmd_run_episode)

    p = sub.add_parser("run-binpack", help="sequential transports through the state machine")
    add_config_flags(p)
    add_adr_flags(p)
    p.add_argument("--objects", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout", type=float, default=15.0,
                   help="per-attempt timeout in simulated seconds")
    p.add_argument("--trace", type=Path, help="write the trace log here")
    p.add_argument("--report-dir", type=Path)
    p.set_defaults(func=cmd_run_binpack)

    p = sub.add_parser("run-distill", help="DAgger distillation on the 1-D toy problem")
    p.add_argument("--iterations", type=int, default=50)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--report-dir", type=Path)
    p.set_defaults(func=cmd_run_distill)

    p = sub.add_parser("adr-dump", help="print current ADR ranges")
    p.add_argument("--adr-config", type=Path)
    p.add_argument("--adr-n", type=int, default=0)
    p.add_argument("--report-dir", type=Path)
    p.set_defaults(func=cmd_adr_dump)

    p = sub.add_parser("serve", help="run the operator console service")
    add_config_flags(p)
    add_adr_flags(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8732)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clock", choices=("sim", "wall"), default="wall",
                   help="wall paces at 60 Hz real time; sim runs unpaced")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
