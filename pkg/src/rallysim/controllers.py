"""Scripted controllers for closed-loop trials.

These stand in for trained policies: a planner-tracking paddle controller
for the rally task, a straight-shot kicker for the penalty task, and a null
controller that never moves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import KernelConfig
from .core import (BallState, PaddleState, RngStream, quat_conj,
                   quat_from_axis_angle, quat_mul, quat_rotate, vec3)
from .phases import TrialConfig
from .planner import REFERENCE_ORIENT, ContactModel, HitPlan, plan_hit


@dataclass(frozen=True)
class TTObservation:
    t: float
    ball: BallState
    paddle: PaddleState
    paddle_ang_vel: np.ndarray
    paddle_hits: int


@dataclass(frozen=True)
class TTCommand:
    lin_acc: np.ndarray
    ang_acc: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lin_acc", vec3(self.lin_acc))
        object.__setattr__(self, "ang_acc", vec3(self.ang_acc))


@dataclass(frozen=True)
class SoccerObservation:
    t: float
    ball: BallState
    agent_pos: np.ndarray
    keeper_y: float
    kicked: bool


@dataclass(frozen=True)
class SoccerCommand:
    vel: np.ndarray                      # planar (x, y) walking velocity
    kick: Optional[np.ndarray] = None    # one-shot ball velocity, if in reach

    def __post_init__(self):
        v = np.asarray(self.vel, dtype=float).reshape(2)
        object.__setattr__(self, "vel", v)
        if self.kick is not None:
            object.__setattr__(self, "kick", vec3(self.kick))


class Controller:
    """Per-trial callback mapping observations to bounded commands."""

    def clone(self) -> "Controller":
        return type(self)()

    def reset(self, trial: TrialConfig, cfg: KernelConfig,
              rng: RngStream) -> None:
        pass

    def command(self, obs):
        raise NotImplementedError


class NullController(Controller):
    """Never moves; useful as a determinism and effort baseline."""

    def command(self, obs):
        if isinstance(obs, SoccerObservation):
            return SoccerCommand(vel=np.zeros(2))
        return TTCommand(lin_acc=np.zeros(3), ang_acc=np.zeros(3))


# ---------------------------------------------------------------------------
# Quintic point-to-point reference
# ---------------------------------------------------------------------------

def _quintic_coeffs(p0, v0, a0, p1, v1, a1, T: float) -> np.ndarray:
    """Per-axis quintic polynomial coefficients (rows: powers 0..5)."""
    p0, v0, a0 = (np.asarray(x, dtype=float) for x in (p0, v0, a0))
    p1, v1, a1 = (np.asarray(x, dtype=float) for x in (p1, v1, a1))
    c = np.zeros((6,) + p0.shape)
    c[0], c[1], c[2] = p0, v0, a0 / 2.0
    T2, T3, T4, T5 = T ** 2, T ** 3, T ** 4, T ** 5
    d = p1 - p0 - v0 * T - a0 * T2 / 2.0
    dv = v1 - v0 - a0 * T
    da = a1 - a0
    c[3] = (20.0 * d - 8.0 * dv * T + da * T2) / (2.0 * T3)
    c[4] = (-30.0 * d + 14.0 * dv * T - 2.0 * da * T2) / (2.0 * T4)
    c[5] = (12.0 * d - 6.0 * dv * T + da * T2) / (2.0 * T5)
    return c


def _quintic_eval(c: np.ndarray, t: float):
    powers = np.array([1.0, t, t ** 2, t ** 3, t ** 4, t ** 5])
    dpow = np.array([0.0, 1.0, 2 * t, 3 * t ** 2, 4 * t ** 3, 5 * t ** 4])
    ddpow = np.array([0.0, 0.0, 2.0, 6 * t, 12 * t ** 2, 20 * t ** 3])
    return (powers @ c.reshape(6, -1),
            dpow @ c.reshape(6, -1),
            ddpow @ c.reshape(6, -1))


def _rotation_vector(q_err) -> np.ndarray:
    """Shortest rotation vector of a unit quaternion."""
    q = np.asarray(q_err, dtype=float)
    if q[0] < 0:
        q = -q
    vec = q[1:]
    s = float(np.linalg.norm(vec))
    if s < 1e-12:
        return np.zeros(3)
    angle = 2.0 * np.arctan2(s, float(q[0]))
    return vec / s * angle


def _slerp(q0, q1, s: float) -> np.ndarray:
    rel = quat_mul(q1, quat_conj(q0))
    rv = _rotation_vector(rel)
    angle = float(np.linalg.norm(rv))
    if angle < 1e-12:
        return np.asarray(q1, dtype=float)
    return quat_mul(quat_from_axis_angle(rv / angle, s * angle), q0)


class PlannerTrackingController(Controller):
    """Track a planned strike with a quintic reference plus PD feedback.

    At reset the full hit plan is computed from the serve; the paddle face
    center is driven so the ball meets the face exactly at the planned hit
    point and time, then braked.
    """

    def __init__(self, kp: float = 400.0, kd: float = 40.0,
                 kp_rot: float = 600.0, kd_rot: float = 50.0,
                 settle_fraction: float = 0.7):
        self.kp = kp
        self.kd = kd
        self.kp_rot = kp_rot
        self.kd_rot = kd_rot
        self.settle_fraction = settle_fraction
        self.plan: Optional[HitPlan] = None

    def clone(self) -> "PlannerTrackingController":
        return PlannerTrackingController(
            kp=self.kp, kd=self.kd, kp_rot=self.kp_rot, kd_rot=self.kd_rot,
            settle_fraction=self.settle_fraction)

    def reset(self, trial: TrialConfig, cfg: KernelConfig,
              rng: RngStream) -> None:
        table = cfg.table
        contact = ContactModel(restitution_n=cfg.contact.restitution_n,
                               tangential_retention=cfg.contact.tangential_retention)
        self.plan = plan_hit(
            trial.ball_start, cfg.planner.hit_plane_x(table),
            cfg.planner.resolved_target(table), cfg.medium, contact, table,
            bounce_model=cfg.bounce_model(trial.sliding),
            apex_clearance=cfg.planner.apex_clearance,
            speed_budget=cfg.planner.speed_budget)
        normal = quat_rotate(self.plan.q_hit, np.array([1.0, 0.0, 0.0]))
        # face center offset so the ball sphere meets the face at p_hit
        p_target = self.plan.p_hit - table.ball_radius * normal
        p0 = np.asarray(cfg.tt.paddle_start, dtype=float)
        self._coeffs = _quintic_coeffs(p0, np.zeros(3), np.zeros(3),
                                       p_target, self.plan.v_hit, np.zeros(3),
                                       self.plan.t_hit)
        self._q0 = REFERENCE_ORIENT
        self._rv_total = _rotation_vector(
            quat_mul(self.plan.q_hit, quat_conj(self._q0)))
        self._t_settle = self.settle_fraction * self.plan.t_hit

    def command(self, obs: TTObservation) -> TTCommand:
        plan = self.plan
        if plan is None:
            raise RuntimeError("controller not reset")
        grace = 0.05            # keep striking through a late contact
        if obs.paddle_hits >= 1 or obs.t > plan.t_hit + grace:
            # brake and hold after the strike
            lin = -self.kd * obs.paddle.vel
            ang = -self.kd_rot * obs.paddle_ang_vel
            return TTCommand(lin_acc=lin, ang_acc=ang)

        if obs.t <= plan.t_hit:
            p_ref, v_ref, a_ref = _quintic_eval(self._coeffs, obs.t)
            p_ref, v_ref, a_ref = p_ref.ravel(), v_ref.ravel(), a_ref.ravel()
        else:
            # carry the terminal reference forward at the strike velocity
            p_end, v_end, _ = _quintic_eval(self._coeffs, plan.t_hit)
            v_ref = v_end.ravel()
            p_ref = p_end.ravel() + v_ref * (obs.t - plan.t_hit)
            a_ref = np.zeros(3)
        lin = a_ref + self.kp * (p_ref - obs.paddle.pos) \
            + self.kd * (v_ref - obs.paddle.vel)

        # constant-rate slerp reference with angular-velocity feedforward
        if obs.t < self._t_settle:
            s = obs.t / self._t_settle
            q_des = _slerp(self._q0, plan.q_hit, s)
            w_ref = self._rv_total / self._t_settle
        else:
            q_des = plan.q_hit
            w_ref = np.zeros(3)
        rv = _rotation_vector(quat_mul(q_des, quat_conj(obs.paddle.orient)))
        ang = self.kp_rot * rv + self.kd_rot * (w_ref - obs.paddle_ang_vel)
        return TTCommand(lin_acc=lin, ang_acc=ang)


class ScriptedKickerController(Controller):
    """Walk to the ball and shoot low toward the corner away from the keeper."""

    def __init__(self, kick_speed: float = 18.0, corner_margin: float = 1.0,
                 loft: float = 0.15):
        self.kick_speed = kick_speed
        self.corner_margin = corner_margin
        self.loft = loft        # upward velocity fraction of kick speed

    def clone(self) -> "ScriptedKickerController":
        return ScriptedKickerController(kick_speed=self.kick_speed,
                                        corner_margin=self.corner_margin,
                                        loft=self.loft)

    def reset(self, trial: TrialConfig, cfg: KernelConfig,
              rng: RngStream) -> None:
        self._cfg = cfg
        self._geom = cfg.soccer_geometry
        self._max_speed = cfg.soccer.max_agent_speed
        self._reach = cfg.soccer.kick_reach

    def command(self, obs: SoccerObservation) -> SoccerCommand:
        if obs.kicked:
            return SoccerCommand(vel=np.zeros(2))
        to_ball = obs.ball.pos[:2] - obs.agent_pos[:2]
        dist = float(np.linalg.norm(to_ball))
        if dist > self._reach * 0.8:
            v = to_ball / max(dist, 1e-9) * self._max_speed
            return SoccerCommand(vel=v)
        # aim at the corner farther from the keeper
        geom = self._geom
        aim_y = -np.sign(obs.keeper_y) * (geom.half_width - self.corner_margin)
        if obs.keeper_y == 0.0:
            aim_y = geom.half_width - self.corner_margin
        target = np.array([geom.goal_line_x, aim_y, geom.ball_radius])
        direction = target - obs.ball.pos
        direction[2] = 0.0
        direction /= np.linalg.norm(direction)
        kick = self.kick_speed * direction
        kick[2] = self.loft * self.kick_speed
        return SoccerCommand(vel=np.zeros(2), kick=kick)
