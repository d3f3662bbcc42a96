"""Episode execution against kinematic plants, metrics, and ranking.

The paddle is a kinematic plant driven by bounded commanded accelerations;
the soccer agent is a point with bounded walking velocity and a one-shot
kick. Effort is charged by passing each command through the toy arm's
activation solver.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .actuation import ToyArm, activations_from_torque
from .ballistics import bounce, flight_pos, flight_state, landing_time
from .config import KernelConfig, RankConfig
from .controllers import (Controller, SoccerCommand, SoccerObservation,
                          TTCommand, TTObservation)
from .core import (BallState, PaddleState, RngStream, derive_stream,
                   quat_from_axis_angle, quat_mul, quat_normalize)
from .errors import NoLanding
from .phases import (PhaseSpec, TrialConfig, sample_trial, serve_bin_index)
from .planner import REFERENCE_ORIENT, ContactModel, paddle_contact
from .rewards import (RewardWeights, aggregate, effort,
                      reward_soccer_kick, reward_soccer_reach,
                      task_rewards_actingai, tracking_rewards_actingai)
from .rules import (ContactFlags, KeeperState, Outcome, RallyStatus,
                    SoccerOutcome, classify_contact, goalkeeper_step,
                    soccer_adjudicate, update_rally)

# streams per trial: 0 sampling, 1 environment, 2 controller
_STREAMS_PER_TRIAL = 3

# fraction of the arm's feasible torque range used at full command
_TORQUE_FRACTION = 0.8


@dataclass(frozen=True)
class TrialTrace:
    config_echo: dict
    steps: list
    terminal: dict
    outcome: object
    mean_effort: float
    landing: Optional[np.ndarray] = None
    landing_error: Optional[float] = None


@dataclass(frozen=True)
class TrialSummary:
    trial_index: int
    outcome: str
    mean_effort: float
    landing_error: Optional[float]
    serve_bin: Optional[int]


@dataclass(frozen=True)
class Report:
    n_trials: int
    success_rate: float
    mean_effort: float
    outcome_counts: dict
    bin_counts: tuple
    bin_successes: tuple
    trials: tuple

    def to_dict(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "success_rate": self.success_rate,
            "mean_effort": self.mean_effort,
            "outcome_counts": dict(self.outcome_counts),
            "bin_counts": list(self.bin_counts),
            "bin_successes": list(self.bin_successes),
        }


# ---------------------------------------------------------------------------
# Effort accounting through the toy arm
# ---------------------------------------------------------------------------

def _torque_limits(arm: ToyArm) -> np.ndarray:
    """Per-joint torque reachable with all agonists fully on."""
    G = arm.gain_matrix
    return np.sum(np.where(G > 0, G, 0.0), axis=1)


_ZERO_EFFORT = 0.0


def _command_effort(arm: ToyArm, tau_max: np.ndarray, fractions) -> float:
    """Effort of the activation pattern realizing a planar command fraction."""
    f = np.clip(np.asarray(fractions, dtype=float), -1.0, 1.0)
    if not f.any():
        return _ZERO_EFFORT
    tau = _TORQUE_FRACTION * f * tau_max
    return effort(activations_from_torque(arm, tau).action)


# ---------------------------------------------------------------------------
# Paddle plant
# ---------------------------------------------------------------------------

def _clamp_norm(v: np.ndarray, cap: float) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n <= cap or n == 0.0:
        return v
    return v * (cap / n)


@dataclass
class _PaddlePlant:
    pos: np.ndarray
    vel: np.ndarray
    orient: np.ndarray
    ang_vel: np.ndarray

    def step(self, cmd: TTCommand, dt: float, max_lin: float,
             max_ang: float) -> None:
        lin = _clamp_norm(cmd.lin_acc, max_lin)
        ang = _clamp_norm(cmd.ang_acc, max_ang)
        self.vel = self.vel + lin * dt
        self.pos = self.pos + self.vel * dt
        self.ang_vel = self.ang_vel + ang * dt
        w = float(np.linalg.norm(self.ang_vel))
        if w > 1e-12:
            dq = quat_from_axis_angle(self.ang_vel / w, w * dt)
            self.orient = quat_normalize(quat_mul(dq, self.orient))

    def state(self) -> PaddleState:
        return PaddleState(self.pos, self.vel, self.orient)


# ---------------------------------------------------------------------------
# Ball advancement with bounce / paddle-contact events
# ---------------------------------------------------------------------------

def _next_table_bounce(ball: BallState, cfg: KernelConfig) -> Optional[float]:
    """Time of the next table-surface bounce, or None if the ball misses."""
    table = cfg.table
    plane = table.surface_z + table.ball_radius
    if ball.pos[2] <= plane:
        return None
    try:
        t = landing_time(ball.pos, ball.vel, plane, cfg.medium)
    except NoLanding:
        return None
    p = flight_pos(ball, t, cfg.medium)
    if abs(p[0]) <= table.half_length and abs(p[1]) <= table.half_width:
        return t
    return None


def _paddle_contact_time(ball: BallState, paddle: PaddleState,
                         cfg: KernelConfig, horizon: float) -> Optional[float]:
    """Time within [0, horizon] when the ball sphere meets the paddle face."""
    table = cfg.table
    r = table.ball_radius
    n = paddle.normal

    def gap(t: float) -> float:
        p = flight_pos(ball, t, cfg.medium)
        return float(np.dot(p - (paddle.pos + paddle.vel * t), n)) - r

    g0 = gap(0.0)
    g1 = gap(horizon)
    if g0 <= 0.0:
        t_c = 0.0
    elif g1 > 0.0:
        return None
    else:
        t_c = float(brentq(gap, 0.0, horizon, xtol=1e-12))
    # must land on the face disc and be approaching
    p = flight_pos(ball, t_c, cfg.medium)
    rel = p - (paddle.pos + paddle.vel * t_c)
    radial = np.linalg.norm(rel - float(np.dot(rel, n)) * n)
    if radial > table.paddle_face_radius:
        return None
    v = flight_state(ball, t_c, cfg.medium).vel
    if float(np.dot(v - paddle.vel, n)) >= 0.0:
        return None
    return t_c


def _advance_ball(ball: BallState, paddle: PaddleState, dt: float,
                  cfg: KernelConfig, bounce_model, contact_model: ContactModel,
                  allow_paddle: bool) -> tuple[BallState, bool, Optional[np.ndarray]]:
    """Advance the ball by dt with event-accurate bounce and paddle contact.

    Returns (new state, paddle hit flag, table bounce position or None).
    """
    remaining = dt
    hit = False
    bounce_pos = None
    for _ in range(8):          # events per step are physically few
        if remaining <= 1e-12:
            break
        t_bounce = _next_table_bounce(ball, cfg)
        t_pad = None
        if allow_paddle and not hit:
            t_pad = _paddle_contact_time(ball, paddle, cfg, remaining)
        candidates = [(t, kind) for t, kind in
                      ((t_bounce, "bounce"), (t_pad, "paddle"))
                      if t is not None and t <= remaining]
        if not candidates:
            ball = flight_state(ball, remaining, cfg.medium)
            break
        t_event, kind = min(candidates)
        ball = flight_state(ball, t_event, cfg.medium)
        remaining -= t_event
        if kind == "bounce":
            ball = bounce(ball, bounce_model)
            bounce_pos = ball.pos.copy()
        else:
            v_out = paddle_contact(ball.vel, paddle, contact_model)
            ball = BallState(ball.pos, v_out)
            hit = True
    return ball, hit, bounce_pos


# ---------------------------------------------------------------------------
# Table-tennis trial
# ---------------------------------------------------------------------------

def _config_echo(trial: TrialConfig, dt: float) -> dict:
    echo = {
        "track": trial.track, "phase": trial.phase,
        "trial_index": trial.trial_index, "master_seed": trial.master_seed,
        "dt": dt, "max_time": trial.max_time,
    }
    if trial.track == "tt":
        echo.update({
            "ball_start_pos": trial.ball_start.pos,
            "ball_start_vel": trial.ball_start.vel,
            "paddle_mass": trial.paddle_mass, "sliding": trial.sliding,
        })
    else:
        echo.update({
            "ball_start_pos": trial.ball_start.pos,
            "agent_start": list(trial.agent_start),
            "keeper_behavior": trial.keeper_behavior,
            "keeper_speed": trial.keeper_speed,
            "keeper_y0": trial.keeper_y0,
        })
    return echo


def _run_tt(trial: TrialConfig, ctrl: Controller, dt: float,
            cfg: KernelConfig, env_rng: RngStream,
            ctrl_rng: RngStream) -> TrialTrace:
    table = cfg.table
    medium = cfg.medium
    contact_model = cfg.contact
    bounce_model = cfg.bounce_model(trial.sliding)
    weights = RewardWeights(cfg.reward_weights)
    arm = ToyArm()
    tau_max = _torque_limits(arm)

    faulted = False
    try:
        ctrl.reset(trial, cfg, ctrl_rng)
    except Exception:
        faulted = True

    # start at the reference pose: face normal toward the opponent
    plant = _PaddlePlant(pos=np.asarray(cfg.tt.paddle_start, dtype=float),
                         vel=np.zeros(3), orient=REFERENCE_ORIENT.copy(),
                         ang_vel=np.zeros(3))

    ball = trial.ball_start
    status = RallyStatus()
    cooldown = 0.0
    t = 0.0
    steps: list = []
    effort_sum = 0.0
    n_steps = 0
    landing = None
    plan = getattr(ctrl, "plan", None)

    while status.outcome is None and not faulted:
        paddle = plant.state()
        obs = TTObservation(t=t, ball=ball, paddle=paddle,
                            paddle_ang_vel=plant.ang_vel.copy(),
                            paddle_hits=status.paddle_hits)
        try:
            cmd = ctrl.command(obs)
        except Exception:
            faulted = True
            break

        e = _command_effort(arm, tau_max,
                            cmd.lin_acc[:2] / cfg.tt.max_lin_acc)
        effort_sum += e
        n_steps += 1

        plant.step(cmd, dt, cfg.tt.max_lin_acc, cfg.tt.max_ang_acc)
        paddle = plant.state()
        ball, hit_event, bounce_pos = _advance_ball(
            ball, paddle, dt, cfg, bounce_model, contact_model,
            allow_paddle=cooldown <= 0.0)
        if hit_event:
            cooldown = cfg.tt.contact_cooldown
            plan = getattr(ctrl, "plan", plan)
        else:
            cooldown = max(0.0, cooldown - dt)
        t += dt

        flags = classify_contact(ball, None, table)
        flags = replace(flags, paddle=hit_event,
                        own=flags.own or (bounce_pos is not None
                                          and bounce_pos[0] > 0),
                        opponent=flags.opponent or (bounce_pos is not None
                                                    and bounce_pos[0] < 0))
        if flags.opponent and landing is None:
            landing = bounce_pos if bounce_pos is not None else ball.pos.copy()
        status = update_rally(status, flags, dt, float(ball.pos[2]),
                              trial.max_time)

        reward_total = 0.0
        terms: dict = {}
        if plan is not None:
            r_reach, r_ori, r_vel = tracking_rewards_actingai(
                paddle, plan, t - dt, dt=dt)
            terms = {"reach": r_reach, "paddle_ori": r_ori, "vel": r_vel}
            if hit_event:
                zone = _opponent_half_zone(cfg)
                r_hit, r_land, r_acc = task_rewards_actingai(
                    True, plan.predicted_landing,
                    cfg.planner.resolved_target(table), zone)
                terms.update({"hit": r_hit, "land": r_land, "acc": r_acc})
            reward_total = aggregate(terms, weights).total

        steps.append({
            "t": t, "ball_pos": ball.pos, "ball_vel": ball.vel,
            "paddle_pos": paddle.pos, "paddle_vel": paddle.vel,
            "paddle_orient": paddle.orient,
            "contacts": {"paddle": flags.paddle, "own": flags.own,
                         "opponent": flags.opponent, "ground": flags.ground,
                         "net": flags.net},
            "reward": reward_total, "effort": e,
        })

    outcome = Outcome.FAULTED if faulted else status.outcome
    mean_effort = effort_sum / n_steps if n_steps else 0.0
    landing_error = None
    if landing is not None:
        target = cfg.planner.resolved_target(table)
        landing_error = float(np.linalg.norm(landing[:2] - target[:2]))
    terminal = {
        "terminal": True, "outcome": outcome, "elapsed": t,
        "n_steps": n_steps, "mean_effort": mean_effort,
        "paddle_hits": status.paddle_hits,
        "net_touched": status.net_touched,
        "landing": landing, "landing_error": landing_error,
    }
    return TrialTrace(config_echo=_config_echo(trial, dt), steps=steps,
                      terminal=terminal, outcome=outcome,
                      mean_effort=mean_effort, landing=landing,
                      landing_error=landing_error)


def _opponent_half_zone(cfg: KernelConfig):
    from .rewards import RectZone
    t = cfg.table
    return RectZone(x_min=-t.half_length, x_max=0.0,
                    y_min=-t.half_width, y_max=t.half_width)


# ---------------------------------------------------------------------------
# Soccer trial
# ---------------------------------------------------------------------------

def _soccer_ball_step(ball: BallState, dt: float, cfg: KernelConfig) -> BallState:
    geom = cfg.soccer_geometry
    r = geom.ball_radius
    medium = cfg.medium
    airborne = ball.pos[2] > r + 1e-6 or ball.vel[2] > 1e-6
    if airborne:
        try:
            t_land = landing_time(ball.pos, ball.vel, r, medium)
        except (NoLanding, ValueError):
            t_land = None
        if t_land is not None and t_land <= dt:
            at = flight_state(ball, t_land, medium)
            b = bounce(at, _ground_bounce(cfg))
            if b.vel[2] < 0.5:      # settle into rolling
                b = BallState(np.array([b.pos[0], b.pos[1], r]),
                              np.array([b.vel[0], b.vel[1], 0.0]))
            rest = dt - t_land
            if rest > 1e-12 and b.vel[2] > 0:
                b = flight_state(b, rest, medium)
            elif rest > 1e-12:
                b = _roll(b, rest, cfg)
            return b
        return flight_state(ball, dt, medium)
    return _roll(ball, dt, cfg)


def _ground_bounce(cfg: KernelConfig):
    from .ballistics import BounceModel
    return BounceModel(restitution=cfg.soccer.ground_restitution,
                       tangential_retention=cfg.soccer.ground_tangential)


def _roll(ball: BallState, dt: float, cfg: KernelConfig) -> BallState:
    v = ball.vel.copy()
    v[2] = 0.0
    speed = float(np.linalg.norm(v))
    if speed <= 1e-12:
        return BallState(ball.pos, np.zeros(3))
    new_speed = max(0.0, speed - cfg.soccer.rolling_decel * dt)
    v_new = v * (new_speed / speed)
    pos = ball.pos + 0.5 * (v + v_new) * dt
    pos[2] = cfg.soccer_geometry.ball_radius
    return BallState(pos, v_new)


def _run_soccer(trial: TrialConfig, ctrl: Controller, dt: float,
                cfg: KernelConfig, env_rng: RngStream,
                ctrl_rng: RngStream) -> TrialTrace:
    geom = cfg.soccer_geometry
    arm = ToyArm()
    tau_max = _torque_limits(arm)

    faulted = False
    try:
        ctrl.reset(trial, cfg, ctrl_rng)
    except Exception:
        faulted = True

    agent = np.array([trial.agent_start[0], trial.agent_start[1], 0.0])
    ball = trial.ball_start
    keeper = KeeperState(y=trial.keeper_y0, behavior=trial.keeper_behavior,
                         speed=trial.keeper_speed,
                         body_width=cfg.soccer.keeper_body_width,
                         body_height=cfg.soccer.keeper_body_height)
    kicked = False
    t = 0.0
    steps: list = []
    effort_sum = 0.0
    n_steps = 0
    outcome = None
    delta_prev = float(np.linalg.norm(agent[:2] - ball.pos[:2]))

    while outcome is None and not faulted:
        obs = SoccerObservation(t=t, ball=ball, agent_pos=agent.copy(),
                                keeper_y=keeper.y, kicked=kicked)
        try:
            cmd = ctrl.command(obs)
        except Exception:
            faulted = True
            break

        v = _clamp_norm(cmd.vel, cfg.soccer.max_agent_speed)
        e = _command_effort(arm, tau_max, v / cfg.soccer.max_agent_speed)
        if cmd.kick is not None and not kicked:
            e = max(e, _command_effort(arm, tau_max, np.array([1.0, 1.0])))
        effort_sum += e
        n_steps += 1

        agent[:2] = agent[:2] + v * dt
        kick_reward = 0.0
        if cmd.kick is not None and not kicked:
            if float(np.linalg.norm(agent[:2] - ball.pos[:2])) \
                    <= cfg.soccer.kick_reach:
                kv = _clamp_norm(cmd.kick, cfg.soccer.max_kick_speed)
                ball = BallState(ball.pos, kv)
                kicked = True
                kick_reward = reward_soccer_kick(float(kv[0]), float(kv[1]))
        if kicked:
            ball = _soccer_ball_step(ball, dt, cfg)
        keeper = goalkeeper_step(keeper, ball, dt, env_rng, geom)
        t += dt

        delta_now = float(np.linalg.norm(agent[:2] - ball.pos[:2]))
        r_track, r_arrive = reward_soccer_reach(delta_prev, delta_now)
        delta_prev = delta_now
        reward_total = r_track + r_arrive + kick_reward

        outcome = soccer_adjudicate(ball, keeper, geom, t, trial.max_time,
                                    kicked=kicked)

        steps.append({
            "t": t, "ball_pos": ball.pos, "ball_vel": ball.vel,
            "agent_pos": agent[:2].copy(), "keeper_y": keeper.y,
            "contacts": {"kick": kicked},
            "reward": reward_total, "effort": e,
        })

    out_record = Outcome.FAULTED if faulted else outcome
    mean_effort = effort_sum / n_steps if n_steps else 0.0
    terminal = {
        "terminal": True, "outcome": out_record, "elapsed": t,
        "n_steps": n_steps, "mean_effort": mean_effort, "kicked": kicked,
        "landing": None, "landing_error": None,
    }
    return TrialTrace(config_echo=_config_echo(trial, dt), steps=steps,
                      terminal=terminal, outcome=out_record,
                      mean_effort=mean_effort)


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def run_trial(trial: TrialConfig, ctrl: Controller, dt: Optional[float] = None,
              cfg: Optional[KernelConfig] = None,
              env_rng: Optional[RngStream] = None,
              ctrl_rng: Optional[RngStream] = None) -> TrialTrace:
    """Execute one trial to termination and return its full trace."""
    cfg = cfg or KernelConfig()
    if dt is None:
        dt = cfg.tt.dt if trial.track == "tt" else cfg.soccer.dt
    if not 0.0 < dt <= 0.01:
        raise ValueError("dt must be in (0, 0.01]")
    base = trial.trial_index * _STREAMS_PER_TRIAL
    if env_rng is None:
        env_rng = derive_stream(trial.master_seed, base + 1)
    if ctrl_rng is None:
        ctrl_rng = derive_stream(trial.master_seed, base + 2)
    if trial.track == "tt":
        return _run_tt(trial, ctrl, dt, cfg, env_rng, ctrl_rng)
    return _run_soccer(trial, ctrl, dt, cfg, env_rng, ctrl_rng)


_SUCCESS = {Outcome.SUCCESS, SoccerOutcome.GOAL}


def _one_trial(spec: PhaseSpec, ctrl: Controller, i: int, master_seed: int,
               cfg: KernelConfig, dt: Optional[float]) -> tuple[TrialConfig, TrialTrace]:
    sample_rng = derive_stream(master_seed, i * _STREAMS_PER_TRIAL)
    trial = sample_trial(spec, sample_rng, cfg)
    trial = replace(trial, trial_index=i, master_seed=master_seed)
    trace = run_trial(trial, ctrl.clone(), dt=dt, cfg=cfg)
    return trial, trace


def evaluate(spec: PhaseSpec, ctrl: Controller, n: int, master_seed: int,
             cfg: Optional[KernelConfig] = None, dt: Optional[float] = None,
             workers: Optional[int] = None, trace_path=None,
             keep_traces: bool = False):
    """Run n independent trials and aggregate a deterministic Report.

    Trials own independent random streams, so execution may be parallel;
    aggregation is an ordered reduction by trial index.
    """
    if n < 1:
        raise ValueError("need at least one trial")
    cfg = cfg or KernelConfig()

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                lambda i: _one_trial(spec, ctrl, i, master_seed, cfg, dt),
                range(n)))
    else:
        results = [_one_trial(spec, ctrl, i, master_seed, cfg, dt)
                   for i in range(n)]

    nx, ny = cfg.curriculum.grid
    bin_counts = [0] * (nx * ny)
    bin_successes = [0] * (nx * ny)
    outcome_counts: dict = {}
    successes = 0
    effort_total = 0.0
    summaries = []
    for trial, trace in results:
        name = trace.outcome.value
        outcome_counts[name] = outcome_counts.get(name, 0) + 1
        ok = trace.outcome in _SUCCESS
        successes += ok
        effort_total += trace.mean_effort
        b = trial.serve_bin
        if b is None and spec.track == "tt":
            b = serve_bin_index(spec, cfg, trial.ball_start.pos)
        if b is not None:
            bin_counts[b] += 1
            bin_successes[b] += ok
        summaries.append(TrialSummary(
            trial_index=trial.trial_index, outcome=name,
            mean_effort=trace.mean_effort,
            landing_error=trace.landing_error, serve_bin=b))

    report = Report(n_trials=n, success_rate=successes / n,
                    mean_effort=effort_total / n,
                    outcome_counts=outcome_counts,
                    bin_counts=tuple(bin_counts),
                    bin_successes=tuple(bin_successes),
                    trials=tuple(summaries))

    if trace_path is not None:
        from .trace import trace_lines
        with open(trace_path, "w") as fh:
            for _, trace in results:
                for line in trace_lines(trace):
                    fh.write(line + "\n")

    if keep_traces:
        return report, [trace for _, trace in results]
    return report


# ---------------------------------------------------------------------------
# Ranking
# ---------------------------------------------------------------------------

def rank(entries: Sequence, config: Optional[RankConfig] = None) -> list[int]:
    """Order competition entries: score descending, effort-ascending inside
    clusters of near-tied scores.

    Entries are (score, effort) pairs; clusters chain adjacent sorted pairs
    whose scores differ by at most the threshold (absolute by default,
    relative to the larger score in relative mode). Returns a permutation of
    entry indices.
    """
    if not entries:
        raise ValueError("entries must be non-empty")
    config = config or RankConfig()
    scored = [(float(s), float(e), i) for i, (s, e) in enumerate(entries)]
    order = sorted(range(len(scored)), key=lambda i: -scored[i][0])

    def close(a: float, b: float) -> bool:
        if config.relative:
            return abs(a - b) <= config.threshold * max(abs(a), abs(b), 1e-12)
        return abs(a - b) <= config.threshold

    result: list[int] = []
    k = 0
    while k < len(order):
        j = k
        while j + 1 < len(order) and close(scored[order[j]][0],
                                           scored[order[j + 1]][0]):
            j += 1
        cluster = order[k:j + 1]
        cluster.sort(key=lambda i: scored[i][1])
        result.extend(scored[i][2] for i in cluster)
        k = j + 1
    return result
