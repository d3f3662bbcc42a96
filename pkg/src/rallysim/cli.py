"""Command-line interface.

Subcommands: simulate, plan, evaluate, rank, route, sample-synergy,
calibrate. Exit codes: 0 success, 2 configuration error, 3 controller
fault.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .actuation import default_synergy_basis, sample_synergy_action
from .ballistics import TrajectorySample, calibrate
from .config import KernelConfig, load_config
from .controllers import (NullController, PlannerTrackingController,
                          ScriptedKickerController)
from .core import BallState, RngStream, derive_stream
from .errors import ConfigError, RallysimError
from .harness import evaluate, rank, run_trial
from .phases import phase_spec, sample_trial
from .planner import plan_hit
from .router import load_model
from .rules import Outcome
from .trace import dumps, trace_lines

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAULT = 3


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master random seed")
    p.add_argument("--trials", type=int, default=1, help="number of trials")
    p.add_argument("--phase", choices=["1", "2", "eval"], default="1")
    p.add_argument("--track", choices=["tt", "soccer"], default="tt")
    p.add_argument("--config", metavar="PATH", default=None,
                   help="YAML config overrides")
    p.add_argument("--out", metavar="PATH", default=None, help="output file")
    p.add_argument("--dt", type=float, default=None, help="step size, s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rallysim",
        description="Deterministic rally/penalty simulation and evaluation kernel")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run trials and write JSONL traces")
    _common_flags(p)
    p.add_argument("--controller", choices=["scripted", "null"],
                   default="scripted")

    p = sub.add_parser("plan", help="plan a return stroke for a sampled serve")
    _common_flags(p)

    p = sub.add_parser("evaluate", help="run trials and report metrics")
    _common_flags(p)
    p.add_argument("--controller", choices=["scripted", "null"],
                   default="scripted")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--trace", metavar="PATH", default=None,
                   help="also write the JSONL trace file here")

    p = sub.add_parser("rank", help="order (score, effort) entries")
    _common_flags(p)
    p.add_argument("entries", help="JSON file: list of [score, effort] pairs")

    p = sub.add_parser("route", help="route serve features to sub-policies")
    _common_flags(p)
    p.add_argument("serves", help="JSON file: list of feature vectors")
    p.add_argument("--model", action="append", required=True,
                   help="fitted model file (repeatable, one per policy)")

    p = sub.add_parser("sample-synergy",
                       help="draw synergy-structured action vectors")
    _common_flags(p)
    p.add_argument("--count", type=int, default=1)

    p = sub.add_parser("calibrate", help="fit drag from trajectory samples")
    _common_flags(p)
    p.add_argument("samples",
                   help="JSON file: list of {t, pos: [x, y, z]} records")

    return parser


def _make_controller(name: str, track: str):
    if name == "null":
        return NullController()
    if track == "tt":
        return PlannerTrackingController()
    return ScriptedKickerController()


def _emit(text: str, out_path) -> None:
    print(text)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")


def _cmd_simulate(args, cfg: KernelConfig) -> int:
    spec = phase_spec(args.track, args.phase)
    ctrl = _make_controller(args.controller, args.track)
    lines = []
    faulted = False
    for i in range(args.trials):
        from .harness import _STREAMS_PER_TRIAL, _one_trial
        trial, trace = _one_trial(spec, ctrl, i, args.seed, cfg, args.dt)
        lines.extend(trace_lines(trace))
        faulted |= trace.outcome is Outcome.FAULTED
        print(dumps({"trial": i, "outcome": trace.outcome,
                     "mean_effort": trace.mean_effort}))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return EXIT_FAULT if faulted else EXIT_OK


def _cmd_plan(args, cfg: KernelConfig) -> int:
    spec = phase_spec("tt", args.phase)
    trial = sample_trial(spec, derive_stream(args.seed, 0), cfg)
    plan = plan_hit(trial.ball_start, cfg.planner.hit_plane_x(cfg.table),
                    cfg.planner.resolved_target(cfg.table), cfg.medium,
                    cfg.contact, cfg.table,
                    bounce_model=cfg.bounce_model(trial.sliding),
                    apex_clearance=cfg.planner.apex_clearance,
                    speed_budget=cfg.planner.speed_budget)
    _emit(dumps({
        "serve_pos": trial.ball_start.pos, "serve_vel": trial.ball_start.vel,
        "p_hit": plan.p_hit, "t_hit": plan.t_hit, "q_hit": plan.q_hit,
        "v_hit": plan.v_hit, "predicted_landing": plan.predicted_landing,
    }), args.out)
    return EXIT_OK


def _cmd_evaluate(args, cfg: KernelConfig) -> int:
    spec = phase_spec(args.track, args.phase)
    ctrl = _make_controller(args.controller, args.track)
    report = evaluate(spec, ctrl, args.trials, args.seed, cfg=cfg,
                      dt=args.dt, workers=args.workers,
                      trace_path=args.trace)
    _emit(dumps(report.to_dict()), args.out)
    return EXIT_FAULT if report.outcome_counts.get(
        Outcome.FAULTED.value, 0) else EXIT_OK


def _cmd_rank(args, cfg: KernelConfig) -> int:
    with open(args.entries) as fh:
        entries = json.load(fh)
    order = rank([(e[0], e[1]) for e in entries], cfg.rank)
    _emit(dumps({"order": order}), args.out)
    return EXIT_OK


def _cmd_route(args, cfg: KernelConfig) -> int:
    models = [load_model(p) for p in args.model]
    with open(args.serves) as fh:
        serves = json.load(fh)
    results = []
    for f in serves:
        probs = [m.predict_success(f) for m in models]
        results.append({"features": f, "probabilities": probs,
                        "policy": int(np.argmax(probs))})
    _emit("\n".join(dumps(r) for r in results), args.out)
    return EXIT_OK


def _cmd_sample_synergy(args, cfg: KernelConfig) -> int:
    rng = derive_stream(args.seed, 0)
    basis = default_synergy_basis(derive_stream(args.seed, 1))
    mods = [np.zeros(W.shape[1]) for W in basis.weights]
    lines = []
    for _ in range(args.count):
        sample = sample_synergy_action(mods, basis, rng)
        lines.append(dumps({"action": sample.action.a,
                            "pre_clamp": sample.pre_clamp}))
    _emit("\n".join(lines), args.out)
    return EXIT_OK


def _cmd_calibrate(args, cfg: KernelConfig) -> int:
    with open(args.samples) as fh:
        raw = json.load(fh)
    if not raw or "vel" not in raw[0]:
        print("config error: first sample must carry a 'vel' field",
              file=sys.stderr)
        return EXIT_CONFIG
    samples = []
    for rec in raw:
        vel = np.asarray(rec.get("vel", [0.0, 0.0, 0.0]), dtype=float)
        samples.append(TrajectorySample(
            time=float(rec["t"]),
            state=BallState(np.asarray(rec["pos"], dtype=float), vel)))
    result = calibrate(samples, g_fixed=cfg.medium.g)
    _emit(dumps({"g": result.model.g, "k": result.model.k,
                 "residual": result.residual}), args.out)
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "plan": _cmd_plan,
    "evaluate": _cmd_evaluate,
    "rank": _cmd_rank,
    "route": _cmd_route,
    "sample-synergy": _cmd_sample_synergy,
    "calibrate": _cmd_calibrate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RallysimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
