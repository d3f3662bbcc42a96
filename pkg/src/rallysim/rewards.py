"""Closed-form reward terms for the three table-tennis solution families,
the soccer terms, and the effort metric."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import (FACE_AXIS, PaddleState, quat_component_distance,
                   quat_geodesic_angle, quat_rotate, quat_vec_part_norm, vec3)
from .errors import MissingWeight
from .planner import HitPlan

# Per-term weights for the ActingAI family.
ACTINGAI_WEIGHTS = {
    "rel_p": 1.0,
    "rel_r": 1.0,
    "fin_open": 1.0,
    "reach": 5.0,
    "paddle_ori": 5.0,
    "vel": 50.0,
    "hit": 100.0,
    "land": 100.0,
    "acc": 100.0,
}

KICK_SPEED_EPS = 1e-2     # minimum forward speed, m/s
KICK_RATIO_EPS = 1e-6     # regularizer against division by zero
REACH_SUCCESS_RADIUS = 0.1
VEL_WINDOW = 0.03         # +- window around the hit time, seconds


@dataclass(frozen=True)
class ActionVector:
    """Muscle excitations, componentwise in [0, 1]."""

    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).ravel()
        if a.size < 1:
            raise ValueError("action vector must be non-empty")
        if np.any(a < 0.0) or np.any(a > 1.0):
            raise ValueError("action components must lie in [0, 1]")
        object.__setattr__(self, "a", a)

    def __len__(self):
        return self.a.size


def effort(a) -> float:
    """Mean squared activation, (1/n) * sum(a_i^2).

    Accumulated left-to-right in plain floats so the result is reproducible
    bit-for-bit against the textbook expression.
    """
    values = a.a if isinstance(a, ActionVector) else np.asarray(a, dtype=float).ravel()
    if values.size < 1:
        raise ValueError("action vector must be non-empty")
    acc = 0.0
    for x in values.tolist():
        acc += x * x
    return acc / values.size


@dataclass(frozen=True)
class RewardWeights:
    weights: Mapping[str, float]

    def __post_init__(self):
        w = dict(self.weights)
        for name, v in w.items():
            if not np.isfinite(v):
                raise ValueError(f"weight {name!r} is not finite")
        object.__setattr__(self, "weights", w)

    def __getitem__(self, name: str) -> float:
        return self.weights[name]


@dataclass(frozen=True)
class RewardBundle:
    terms: Mapping[str, float]
    total: float


def aggregate(terms: Mapping[str, float], weights: RewardWeights) -> RewardBundle:
    """Weighted sum of named terms; every term must have a weight."""
    total = 0.0
    for name, value in terms.items():
        if name not in weights.weights:
            raise MissingWeight(f"no weight for reward term {name!r}")
        total += weights[name] * value
    return RewardBundle(terms=dict(terms), total=total)


@dataclass(frozen=True)
class RectZone:
    """Axis-aligned rectangle on the table surface."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(self.x_min <= p[0] <= self.x_max
                    and self.y_min <= p[1] <= self.y_max)


# ---------------------------------------------------------------------------
# ActingAI family
# ---------------------------------------------------------------------------

def grasp_rewards(paddle_rel_pos_err, q_rel, q_rel_init,
                  fingertip_palm_dists: Sequence[float]
                  ) -> tuple[float, float, float]:
    """Grip-stability terms: relative position, relative rotation, finger
    opening."""
    dists = np.asarray(fingertip_palm_dists, dtype=float)
    if np.any(dists < 0):
        raise ValueError("fingertip-palm distances must be non-negative")
    r_rel_p = float(np.exp(-8.0 * np.linalg.norm(vec3(paddle_rel_pos_err))))
    r_rel_r = float(np.exp(-4.0 * quat_geodesic_angle(q_rel, q_rel_init)))
    r_fin_open = float(np.exp(-5.0 * dists.sum()))
    return r_rel_p, r_rel_r, r_fin_open


def tracking_rewards_actingai(paddle: PaddleState, plan: HitPlan, t: float,
                              dt: float = 0.002) -> tuple[float, float, float]:
    """Reach/orientation terms before the hit time; velocity term only on
    the step containing the hit time."""
    before = t < plan.t_hit
    at_hit = t <= plan.t_hit < t + dt
    r_reach = r_ori = r_vel = 0.0
    if before:
        r_reach = float(np.exp(-4.0 * np.linalg.norm(paddle.pos - plan.p_hit)))
        r_ori = float(np.exp(-2.0 * quat_component_distance(paddle.orient,
                                                            plan.q_hit)))
    if at_hit:
        r_vel = float(np.exp(-np.linalg.norm(paddle.vel - plan.v_hit)))
    return r_reach, r_ori, r_vel


def task_rewards_actingai(hit: bool, predicted_landing, opponent_center,
                          valid_zone: RectZone) -> tuple[float, float, float]:
    """Sparse completion terms: hit, valid landing, landing accuracy."""
    if not hit:
        return 0.0, 0.0, 0.0
    r_hit = 1.0
    r_land = 0.0
    r_acc = 0.0
    if predicted_landing is not None and valid_zone.contains(predicted_landing):
        r_land = 1.0
        err = np.linalg.norm(vec3(predicted_landing) - vec3(opponent_center))
        r_acc = float(np.exp(-0.5 * err))
    return r_hit, r_land, r_acc


# ---------------------------------------------------------------------------
# BioSyn family
# ---------------------------------------------------------------------------

def rewards_biosyn(hand_handle_dist: float, paddle_pos_err: float,
                   q_target, q_paddle, dropped: bool, hit: bool,
                   v_paddle, v_hit, t: float, t_hit: float) -> dict[str, float]:
    return {
        "h_h": float(np.exp(-5.0 * hand_handle_dist)),
        "paddle": float(np.exp(-5.0 * paddle_pos_err)),
        "rot": float(np.exp(-10.0 * quat_vec_part_norm(q_paddle, q_target))),
        "drop": -1.0 if dropped else 0.0,
        "hit": 1.0 if hit else 0.0,
        "vel": (float(np.exp(-np.linalg.norm(vec3(v_paddle) - vec3(v_hit))))
                if t_hit - VEL_WINDOW < t < t_hit + VEL_WINDOW else 0.0),
    }


# ---------------------------------------------------------------------------
# LNSGroup family
# ---------------------------------------------------------------------------

def rewards_lns(paddle: PaddleState, plan: HitPlan, torso_angle: float,
                palm_handle_dist: float, hit: bool,
                own_bounce_after_hit: bool, landing, zone: RectZone,
                t: float, torso_coeff: float = 2.0,
                palm_coeff: float = 5.0) -> dict[str, float]:
    d_hit = quat_rotate(plan.q_hit, FACE_AXIS)
    d_paddle = paddle.normal
    cosine = float(np.dot(d_paddle, d_hit)
                   / (np.linalg.norm(d_paddle) * np.linalg.norm(d_hit)))
    # `landing` is the first opponent-side table landing, or None.
    if landing is None:
        success = 0.0
    elif zone.contains(landing):
        success = 1.5
    else:
        success = 1.0
    return {
        "track": float(np.exp(-5.0 * np.linalg.norm(paddle.pos - plan.p_hit))),
        "quat": 0.5 * (cosine + 1.0),
        "torso": float(np.exp(-torso_coeff * abs(torso_angle))),
        "palm": float(np.exp(-palm_coeff * palm_handle_dist)),
        "hit": 1.0 if hit else 0.0,
        "success": success,
        "own": -1.0 if own_bounce_after_hit and t > plan.t_hit else 0.0,
    }


# ---------------------------------------------------------------------------
# Soccer family
# ---------------------------------------------------------------------------

def reward_soccer_reach(delta_prev: float, delta_now: float) -> tuple[float, float]:
    """Progress toward the target and the sparse arrival bonus."""
    if delta_prev < 0 or delta_now < 0:
        raise ValueError("distances must be non-negative")
    r_track = delta_prev - delta_now
    r_success = 1.0 if delta_now < REACH_SUCCESS_RADIUS else 0.0
    return r_track, r_success


def reward_soccer_kick(v_x: float, v_y: float) -> float:
    """Forward ball speed, gated to a +-45 degree cone toward the goal."""
    if v_x >= KICK_SPEED_EPS and v_x / (abs(v_y) + KICK_RATIO_EPS) >= 1.0:
        return float(v_x)
    return 0.0
