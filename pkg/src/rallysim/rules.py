"""Contact classification, rally adjudication, goalkeeper kinematics and
soccer goal/save detection."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import BallState, PaddleState, RngStream, SoccerGeometry, TableGeometry
from .errors import UpdateAfterTerminal

CONTACT_TOL = 1e-3          # geometric contact tolerance, meters
DROP_HEIGHT = 0.3           # ball below this z terminates the rally
ROLLING_STEPS = 3           # consecutive own-side contacts counted as rolling


@dataclass(frozen=True)
class ContactFlags:
    paddle: bool = False
    own: bool = False
    opponent: bool = False
    ground: bool = False
    net: bool = False
    env: bool = False

    def any(self) -> bool:
        return self.paddle or self.own or self.opponent or self.ground \
            or self.net or self.env


class Outcome(enum.Enum):
    SUCCESS = "Success"
    DOUBLE_TOUCH = "DoubleTouch"
    INVALID_BOUNCE = "InvalidBounce"
    MISSED_STRIKE = "MissedStrike"
    INCOMPLETE_PLAY = "IncompletePlay"
    BALL_DROPPED = "BallDropped"
    TIMEOUT = "Timeout"
    FAULTED = "Faulted"      # controller raised; recorded, never adjudicated


class SoccerOutcome(enum.Enum):
    GOAL = "Goal"
    SAVED = "Saved"
    MISSED = "Missed"
    TIMEOUT = "Timeout"


def classify_contact(ball: BallState, paddle: Optional[PaddleState],
                     g: TableGeometry, tol: float = CONTACT_TOL) -> ContactFlags:
    """Geometric contact tests for the six boolean indicators."""
    p = ball.pos
    r = g.ball_radius

    paddle_hit = False
    if paddle is not None:
        rel = p - paddle.pos
        n = paddle.normal
        dist_n = float(np.dot(rel, n))
        in_plane = rel - dist_n * n
        radial = float(np.linalg.norm(in_plane))
        # distance from the ball center to the face disc
        if radial <= g.paddle_face_radius:
            face_dist = abs(dist_n)
        else:
            face_dist = float(np.hypot(abs(dist_n),
                                       radial - g.paddle_face_radius))
        paddle_hit = face_dist <= r + tol

    on_surface = abs((p[2] - r) - g.surface_z) <= tol
    in_extent = abs(p[0]) <= g.half_length and abs(p[1]) <= g.half_width
    own = bool(on_surface and in_extent and p[0] > 0)
    opponent = bool(on_surface and in_extent and p[0] < 0)

    net = bool(abs(p[0]) <= r + tol
               and abs(p[1]) <= g.net_width / 2.0
               and g.surface_z <= p[2] <= g.surface_z + g.net_height + r)

    ground = bool(p[2] <= r + tol and not in_extent)

    return ContactFlags(paddle=paddle_hit, own=own, opponent=opponent,
                        ground=ground, net=net, env=False)


@dataclass(frozen=True)
class RallyStatus:
    paddle_hits: int = 0
    own_bounces_pre_hit: int = 0
    own_bounces_post_hit: int = 0
    opponent_bounce: bool = False
    net_touched: bool = False
    elapsed: float = 0.0
    outcome: Optional[Outcome] = None
    # edge/rolling detection state
    prev_paddle: bool = False
    prev_own: bool = False
    prev_opponent: bool = False
    consecutive_own: int = 0


def update_rally(s: RallyStatus, f: ContactFlags, dt: float, ball_z: float,
                 max_time: float) -> RallyStatus:
    """Advance the rally state machine by one classification step."""
    if s.outcome is not None:
        raise UpdateAfterTerminal("rally outcome already decided")

    elapsed = s.elapsed + dt
    paddle_hits = s.paddle_hits
    pre = s.own_bounces_pre_hit
    post = s.own_bounces_post_hit
    opp = s.opponent_bounce
    net = s.net_touched or f.net
    consec = s.consecutive_own + 1 if f.own else 0
    outcome = None

    if f.paddle and not s.prev_paddle:
        paddle_hits += 1
        if paddle_hits >= 2:
            outcome = Outcome.DOUBLE_TOUCH

    if outcome is None and f.own and not s.prev_own:
        if paddle_hits == 0:
            pre += 1
            if pre >= 2:
                outcome = Outcome.INVALID_BOUNCE
        else:
            post += 1
            outcome = Outcome.INVALID_BOUNCE

    if outcome is None and consec >= ROLLING_STEPS:
        outcome = Outcome.INVALID_BOUNCE

    if outcome is None and f.opponent and not s.prev_opponent:
        opp = True
        if paddle_hits == 0:
            outcome = Outcome.MISSED_STRIKE
        elif paddle_hits == 1:
            outcome = Outcome.SUCCESS

    if outcome is None and ball_z < DROP_HEIGHT:
        if opp and paddle_hits == 1:
            outcome = Outcome.SUCCESS
        else:
            outcome = Outcome.BALL_DROPPED

    if outcome is None and elapsed > max_time:
        if paddle_hits == 1 and not opp:
            outcome = Outcome.INCOMPLETE_PLAY
        else:
            outcome = Outcome.TIMEOUT

    return RallyStatus(paddle_hits=paddle_hits, own_bounces_pre_hit=pre,
                       own_bounces_post_hit=post, opponent_bounce=opp,
                       net_touched=net, elapsed=elapsed, outcome=outcome,
                       prev_paddle=f.paddle, prev_own=f.own,
                       prev_opponent=f.opponent, consecutive_own=consec)


# ---------------------------------------------------------------------------
# Goalkeeper
# ---------------------------------------------------------------------------

class KeeperBehavior(enum.Enum):
    STATIC_RANDOM = "StaticRandom"
    RANDOM_MOVE = "RandomMove"
    TRACK = "Track"


DIRECTION_SWITCH_RATE = 0.5   # per-second probability of resampling direction


@dataclass(frozen=True)
class KeeperState:
    y: float
    behavior: KeeperBehavior
    speed: float
    body_width: float = 0.6
    body_height: float = 1.8
    direction: int = 1

    def clamped(self, half_width: float) -> "KeeperState":
        return replace(self, y=float(np.clip(self.y, -half_width, half_width)))


def goalkeeper_step(k: KeeperState, ball: BallState, dt: float,
                    rng: RngStream, geom: SoccerGeometry) -> KeeperState:
    """Advance the keeper along the goal line for one step."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    half = geom.half_width
    if k.behavior is KeeperBehavior.STATIC_RANDOM:
        return k
    if k.behavior is KeeperBehavior.TRACK:
        err = float(ball.pos[1]) - k.y
        move = float(np.clip(err, -k.speed * dt, k.speed * dt))
        return replace(k, y=k.y + move).clamped(half)
    # RandomMove: resample direction with a fixed per-second probability,
    # and always on boundary contact.
    direction = k.direction
    gen = rng.generator
    if gen.random() < DIRECTION_SWITCH_RATE * dt:
        direction = int(gen.choice([-1, 1]))
    y = k.y + k.speed * direction * dt
    if y >= half:
        y, direction = half, -1
    elif y <= -half:
        y, direction = -half, 1
    return replace(k, y=y, direction=direction).clamped(half)


# ---------------------------------------------------------------------------
# Soccer adjudication
# ---------------------------------------------------------------------------

REST_SPEED = 0.05


def keeper_blocks(ball: BallState, k: KeeperState, geom: SoccerGeometry) -> bool:
    """Ball sphere intersects the keeper's goal-line rectangle."""
    r = geom.ball_radius
    if abs(float(ball.pos[0]) - geom.goal_line_x) > r:
        return False
    return (abs(float(ball.pos[1]) - k.y) <= k.body_width / 2.0 + r
            and float(ball.pos[2]) <= k.body_height + r)


def soccer_adjudicate(ball: BallState, k: Optional[KeeperState],
                      geom: SoccerGeometry, elapsed: float,
                      max_time: float, kicked: bool = True) -> Optional[SoccerOutcome]:
    """Terminal soccer outcome for the current state, if any."""
    x = float(ball.pos[0])
    y = float(ball.pos[1])
    z = float(ball.pos[2])
    approaching = float(ball.vel[0]) > 0

    if k is not None and approaching and keeper_blocks(ball, k, geom):
        return SoccerOutcome.SAVED

    if x >= geom.goal_line_x:
        inside = (abs(y) <= geom.half_width - geom.ball_radius
                  and z <= geom.goal_height - geom.ball_radius)
        return SoccerOutcome.GOAL if inside else SoccerOutcome.MISSED

    speed = float(np.linalg.norm(ball.vel))
    if kicked and speed < REST_SPEED:
        return SoccerOutcome.MISSED

    if elapsed > max_time:
        return SoccerOutcome.TIMEOUT
    return None
