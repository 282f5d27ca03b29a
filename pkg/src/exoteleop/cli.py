"""Command-line front door.

Subcommands: teleop, record, replay, demo (info/resample), scripted-demos,
dataset build, policy run, eval, serve.  A global ``--config`` JSON file can
override the default robot/calibration/world file locations; every path
falls back to the packaged defaults.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import metrics, policy, scripted
from .calibration import load_calibration
from .clock import VirtualClock, WallClock
from .config import load_json, load_robot, load_task_constraint
from .control_loop import LoopConfig, ScriptedEncoderSource, run_teleop_session
from .recorder import (
    DOMAIN_TELEOP,
    DOMAIN_WILD,
    demo_info,
    read_demo,
    record_teleop_session,
    record_wild_session,
    replay,
    resample,
    write_demo,
)
from .simulator import DualArmSim


def _load_globals(args):
    cfg = {}
    if getattr(args, "config", None):
        cfg = load_json(args.config)
    robot_file = getattr(args, "robot", None) or cfg.get("robot", "robot.json")
    cal_file = getattr(args, "cal", None) or cfg.get("calibration", "calibration_default.json")
    return cfg, robot_file, cal_file


def _clock(args):
    return VirtualClock() if getattr(args, "virtual_time", False) else WallClock()


def _build_source(args, cal):
    if getattr(args, "script", None):
        doc = load_json(args.script)
        if "task" in doc:
            keyframes = scripted.task_keyframes(doc["task"], tuple(doc.get("arms", ("right", "left"))))
        else:
            raise SystemExit("script file must contain a 'task' field")
        script = scripted.keyframes_to_script(keyframes, cal, rate_hz=float(doc.get("rate_hz", 30.0)))
        return ScriptedEncoderSource(script, noise_ticks=int(doc.get("noise_ticks", 0)),
                                     seed=int(doc.get("seed", 0)))
    task = getattr(args, "task", None) or "gather_balls"
    keyframes = scripted.task_keyframes(task)
    return ScriptedEncoderSource(scripted.keyframes_to_script(keyframes, cal))


def cmd_teleop(args):
    cfg, robot_file, cal_file = _load_globals(args)
    model = load_robot(robot_file)
    cal = load_calibration(_path_or_default(cal_file))
    world_cfg = load_json(args.world)
    sim = DualArmSim(model, world_cfg, seed=args.seed)
    loop_cfg = LoopConfig(control_rate_hz=args.rate)
    constraint = load_task_constraint(cfg, args.task_constraint) if args.task_constraint else None
    if constraint is not None:
        constraint.validate_nesting(model.descriptors)
    args.task = world_cfg.get("task_id")
    source = _build_source(args, cal)
    stats, session_id = run_teleop_session(
        source, cal, sim, loop_cfg, args.duration, clock=_clock(args), constraint=constraint
    )
    print(f"session {session_id}: ticks={stats.ticks_executed} dropped={stats.dropped_frames} "
          f"mean_period_err={stats.mean_period_error_ms:.3f}ms")
    state = sim.snapshot()
    print(f"collisions={len(state.collision_events)}")
    return 0


def cmd_record(args):
    cfg, robot_file, cal_file = _load_globals(args)
    model = load_robot(robot_file)
    cal = load_calibration(_path_or_default(cal_file))
    loop_cfg = LoopConfig(control_rate_hz=args.rate)
    if args.domain == DOMAIN_WILD:
        args.task = args.task or "gather_balls"
        source = _build_source(args, cal)
        world_cfg = load_json(args.world) if args.world else {"task_id": args.task}
        demo, stats = record_wild_session(
            source, cal, loop_cfg, args.duration, model=model,
            task_id=world_cfg.get("task_id", args.task),
            calibration_ref=str(cal_file),
            n_grippers=int(world_cfg.get("n_grippers", 0)), clock=_clock(args),
        )
    else:
        world_cfg = load_json(args.world)
        sim = DualArmSim(model, world_cfg, seed=args.seed)
        world_meta = dict(world_cfg)
        world_meta["seed"] = args.seed
        args.task = world_cfg.get("task_id")
        source = _build_source(args, cal)
        demo, stats = record_teleop_session(
            source, cal, sim, loop_cfg, args.duration, model=model,
            task_id=world_cfg.get("task_id", ""), world=world_meta,
            calibration_ref=str(cal_file),
            n_grippers=int(world_cfg.get("n_grippers", 0)), clock=_clock(args),
        )
    write_demo(demo, args.output)
    print(f"wrote {args.output}: {len(demo)} frames at {demo.mean_hz:.2f} Hz ({demo.domain})")
    return 0


def cmd_replay(args):
    cfg, robot_file, cal_file = _load_globals(args)
    model = load_robot(robot_file)
    demo = read_demo(args.demo)
    world_cfg = demo.world if demo.world.get("type") else load_json(args.world)
    sim = DualArmSim(model, world_cfg, seed=int(demo.world.get("seed", 0)))
    stats = replay(demo, sim, rate_scale=args.rate_scale, clock=_clock(args))
    state = sim.snapshot()
    print(f"replayed {args.demo}: ticks={stats.ticks_executed} digest={state.digest()[:16]}")
    return 0


def cmd_demo_info(args):
    info = demo_info(read_demo(args.demo))
    print(json.dumps(info, indent=2, sort_keys=True))
    return 0


def cmd_demo_resample(args):
    demo = read_demo(args.demo)
    out = resample(demo, args.hz)
    write_demo(out, args.output)
    print(f"wrote {args.output}: {len(out)} frames at {out.mean_hz:.2f} Hz")
    return 0


def cmd_scripted_demos(args):
    cfg, robot_file, cal_file = _load_globals(args)
    model = load_robot(robot_file)
    cal = load_calibration(_path_or_default(cal_file))
    world_cfg = load_json(args.world)
    task_id = world_cfg.get("task_id")
    loop_cfg = LoopConfig(control_rate_hz=args.rate)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    arms = tuple(args.arms.split(",")) if args.arms else ("right", "left")
    keyframes = scripted.task_keyframes(task_id, arms)
    duration = args.duration
    for i in range(args.count):
        seed = args.seed + i
        script = scripted.keyframes_to_script(keyframes, cal)
        source = ScriptedEncoderSource(script)
        if args.domain == DOMAIN_WILD:
            demo, _ = record_wild_session(
                source, cal, loop_cfg, duration, model=model, task_id=task_id,
                calibration_ref=str(cal_file),
                n_grippers=int(world_cfg.get("n_grippers", 0)), clock=VirtualClock(),
            )
        else:
            sim = DualArmSim(model, world_cfg, seed=seed)
            world_meta = dict(world_cfg)
            world_meta["seed"] = seed
            demo, _ = record_teleop_session(
                source, cal, sim, loop_cfg, duration, model=model, task_id=task_id,
                world=world_meta, calibration_ref=str(cal_file),
                n_grippers=int(world_cfg.get("n_grippers", 0)), clock=VirtualClock(),
            )
        path = out_dir / f"{task_id}_{args.domain}_{seed:04d}.demo"
        write_demo(demo, path)
        print(f"wrote {path} ({len(demo)} frames)")
    return 0


def cmd_dataset_build(args):
    pretrain = [read_demo(p) for p in sorted(Path(args.pretrain).glob("*.demo"))] if args.pretrain else []
    finetune = [read_demo(p) for p in sorted(Path(args.finetune).glob("*.demo"))] if args.finetune else []
    assembly = policy.DatasetAssembly(
        pretrain=pretrain, finetune=finetune, domain_weight=args.domain_weight
    )
    db = policy.build_database(assembly, target_hz=args.hz, chunk_horizon=args.chunk)
    policy.save_database(db, args.output)
    print(f"wrote {args.output}: {len(db)} entries, feature_dim={db.feature_dim}, "
          f"H={db.chunk_horizon}, hz={db.target_hz}")
    return 0


def cmd_policy_run(args):
    cfg, robot_file, cal_file = _load_globals(args)
    model = load_robot(robot_file)
    db = policy.load_database(args.db)
    world_cfg = load_json(args.world)
    loop_cfg = LoopConfig(control_rate_hz=args.rate)
    action_period = args.action_period or int(world_cfg.get("action_period", 1))
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    trials = []
    for i in range(args.trials):
        seed = args.seed + i
        sim = DualArmSim(model, world_cfg, seed=seed)
        result = policy.run_policy(
            db, sim, loop_cfg, k=args.k, duration_s=args.duration, model=model,
            domain_weight=args.domain_weight, action_period=action_period,
            clock=VirtualClock() if args.virtual_time else WallClock(),
            task_id=world_cfg.get("task_id", ""), world=dict(world_cfg, seed=seed),
        )
        state = result.final_state
        if world_cfg.get("type") == "gather_balls":
            trial = metrics.score_gather_balls(
                state.world_snapshot, state.collision_events, args.duration, aborted=result.aborted
            )
        else:
            trial = metrics.score_curtained_shelf(
                state.world_snapshot, state.collision_events, args.duration, aborted=result.aborted
            )
        trials.append(trial)
        if result.episode is not None:
            write_demo(result.episode, out_dir / f"{result.episode.id}.demo")
        with open(out_dir / f"trial_{seed:04d}.json", "w") as f:
            json.dump(trial.to_json(), f, indent=2, sort_keys=True)
        print(f"trial seed={seed}: completion={trial.completion_overall:.3f} "
              f"collided={trial.collided} policy_steps={result.policy_steps}")
    report = metrics.aggregate(trials)
    print(metrics.format_report_table(report))
    return 0


def cmd_eval(args):
    trials = []
    for path in sorted(Path(args.episodes).glob("trial_*.json")):
        doc = json.loads(path.read_text())
        trial = metrics.TrialResult(
            task_id=doc["task_id"],
            completion_overall=doc["completion_overall"],
            completion_left=doc["completion_left"],
            completion_right=doc["completion_right"],
            success_at={float(k): v for k, v in doc["success_at"].items()},
            collided=doc["collided"],
            stage_flags=doc.get("stage_flags", {}),
            duration_s=doc.get("duration_s", 0.0),
            aborted=doc.get("aborted", False),
        )
        trials.append(trial)
    if not trials:
        print(f"no trial_*.json files under {args.episodes}", file=sys.stderr)
        return 1
    report = metrics.aggregate(trials)
    if args.output:
        metrics.save_report(report, args.output)
        print(f"wrote {args.output}")
    print(metrics.format_report_table(report))
    return 0


def cmd_serve(args):
    import os

    from .service import ServiceConfig, serve

    cfg, robot_file, cal_file = _load_globals(args)
    port = int(os.environ.get("EXOTELEOP_PORT", args.port))
    data_dir = os.environ.get("EXOTELEOP_DATA_DIR", args.data_dir)
    service_cfg = ServiceConfig(
        world_file=args.world,
        calibration_file=cal_file,
        robot_file=robot_file,
        control_rate_hz=args.rate,
        virtual_time=args.virtual_time,
        seed=args.seed,
        data_dir=data_dir,
        console_dir=args.console,
    )
    serve(service_cfg, host=args.host, port=port)
    return 0


def _path_or_default(name):
    p = Path(name)
    if p.exists():
        return p
    from .config import default_path

    return default_path(str(name))


def build_parser() -> argparse.ArgumentParser:
    # Shared options are accepted both before and after the subcommand.
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="global config JSON overriding default file locations")
    shared.add_argument("--robot", help="robot model JSON")
    shared.add_argument("--cal", help="calibration JSON")

    parser = argparse.ArgumentParser(prog="exoteleop", parents=[shared])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_parser(name, **kw):
        return sub.add_parser(name, parents=[shared], **kw)

    p = add_parser("teleop", help="run a teleoperation session against the simulator")
    p.add_argument("--world", default="world_gather.json")
    p.add_argument("--rate", type=float, default=5.0)
    p.add_argument("--duration", type=float, default=60.0)
    p.add_argument("--virtual-time", action="store_true", dest="virtual_time")
    p.add_argument("--task-constraint", dest="task_constraint")
    p.add_argument("--script", help="encoder script JSON (task/arms/rate_hz/noise_ticks)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_teleop)

    p = add_parser("record", help="record a demonstration")
    p.add_argument("--world", default="world_gather.json")
    p.add_argument("--domain", choices=[DOMAIN_TELEOP, DOMAIN_WILD], default=DOMAIN_TELEOP)
    p.add_argument("--task")
    p.add_argument("--rate", type=float, default=5.0)
    p.add_argument("--duration", type=float, default=60.0)
    p.add_argument("--virtual-time", action="store_true", dest="virtual_time")
    p.add_argument("--script")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_record)

    p = add_parser("replay", help="replay a demonstration file")
    p.add_argument("--demo", required=True)
    p.add_argument("--world", default="world_gather.json")
    p.add_argument("--rate-scale", type=float, default=1.0, dest="rate_scale")
    p.add_argument("--virtual-time", action="store_true", dest="virtual_time")
    p.set_defaults(fn=cmd_replay)

    p = add_parser("demo", help="demonstration file utilities")
    dsub = p.add_subparsers(dest="demo_command", required=True)
    d = dsub.add_parser("info")
    d.add_argument("demo")
    d.set_defaults(fn=cmd_demo_info)
    d = dsub.add_parser("resample")
    d.add_argument("demo")
    d.add_argument("--hz", type=float, required=True)
    d.add_argument("-o", "--output", required=True)
    d.set_defaults(fn=cmd_demo_resample)

    p = add_parser("scripted-demos", help="generate scripted demonstrations")
    p.add_argument("--world", default="world_gather.json")
    p.add_argument("--domain", choices=[DOMAIN_TELEOP, DOMAIN_WILD], default=DOMAIN_TELEOP)
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--rate", type=float, default=5.0)
    p.add_argument("--duration", type=float, default=60.0)
    p.add_argument("--arms", help="comma-separated sweep arms, e.g. 'left' or 'right,left'")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_scripted_demos)

    p = add_parser("dataset", help="dataset utilities")
    dsub = p.add_subparsers(dest="dataset_command", required=True)
    d = dsub.add_parser("build")
    d.add_argument("--pretrain", help="directory of in-the-wild .demo files")
    d.add_argument("--finetune", help="directory of teleoperated .demo files")
    d.add_argument("--hz", type=float, default=5.0)
    d.add_argument("--chunk", type=int, default=20)
    d.add_argument("--domain-weight", type=float, default=3.0, dest="domain_weight")
    d.add_argument("-o", "--output", required=True)
    d.set_defaults(fn=cmd_dataset_build)

    p = add_parser("policy", help="policy execution")
    psub = p.add_subparsers(dest="policy_command", required=True)
    r = psub.add_parser("run")
    r.add_argument("--db", required=True)
    r.add_argument("--world", default="world_gather.json")
    r.add_argument("--k", type=int, default=5)
    r.add_argument("--trials", type=int, default=1)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--rate", type=float, default=5.0)
    r.add_argument("--duration", type=float, default=60.0)
    r.add_argument("--domain-weight", type=float, default=3.0, dest="domain_weight")
    r.add_argument("--action-period", type=int, dest="action_period",
                   help="control ticks per fresh prediction (default: world config, else 1)")
    r.add_argument("--virtual-time", action="store_true", dest="virtual_time", default=True)
    r.add_argument("-o", "--output", default="episodes")
    r.set_defaults(fn=cmd_policy_run)

    p = add_parser("eval", help="aggregate trial results into a report")
    p.add_argument("--episodes", required=True)
    p.add_argument("--task", choices=["gather", "shelf"], help="informational")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_eval)

    p = add_parser("serve", help="run the WebSocket teleoperation service")
    p.add_argument("--world", default="world_gather.json")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--rate", type=float, default=5.0)
    p.add_argument("--virtual-time", action="store_true", dest="virtual_time")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data-dir", default=".", dest="data_dir")
    p.add_argument("--console", default="", help="serve a built operator console directory at /")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
