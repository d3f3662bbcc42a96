"""Physics-based hit planning.

Given an incoming ball state, compute where and when to meet it, the paddle
pose and velocity at the strike, and the resulting landing point on the
opponent half.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, least_squares, minimize_scalar

from .ballistics import (BounceModel, MediumModel, flight_pos,
                         predict_landing, predict_plane_crossing)
from .core import (FACE_AXIS, BallState, PaddleState, TableGeometry, quat,
                   quat_from_axis_angle, quat_from_two_vectors, quat_mul,
                   quat_rotate, vec3)
from .errors import BudgetExceeded, Infeasible, NotApproaching

# Paddle reference pose: face normal pointing toward the opponent (-x).
REFERENCE_ORIENT = quat_from_axis_angle([0.0, 0.0, 1.0], np.pi)


@dataclass(frozen=True)
class ContactModel:
    """Ball-paddle impact: normal restitution, tangential retention."""

    restitution_n: float = 0.9
    tangential_retention: float = 1.0

    def __post_init__(self):
        for name in ("restitution_n", "tangential_retention"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {v!r}")


@dataclass(frozen=True)
class HitPlan:
    p_hit: np.ndarray
    t_hit: float
    q_hit: np.ndarray
    v_hit: np.ndarray            # paddle velocity at the strike
    predicted_landing: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_hit", vec3(self.p_hit))
        object.__setattr__(self, "q_hit", quat(self.q_hit))
        object.__setattr__(self, "v_hit", vec3(self.v_hit))
        object.__setattr__(self, "predicted_landing", vec3(self.predicted_landing))
        if self.t_hit < 0:
            raise ValueError("hit time must be non-negative")


def _contact_out(v_in: np.ndarray, normal: np.ndarray, paddle_vel: np.ndarray,
                 c: ContactModel) -> np.ndarray:
    w = v_in - paddle_vel
    wn = float(np.dot(w, normal))
    wt = w - wn * normal
    return paddle_vel + c.tangential_retention * wt - c.restitution_n * wn * normal


def paddle_contact(v_ball_in, paddle: PaddleState, c: ContactModel) -> np.ndarray:
    """Outgoing ball velocity after impact with the paddle face."""
    v_in = vec3(v_ball_in)
    n = paddle.normal
    if np.dot(v_in - paddle.vel, n) >= 0:
        raise NotApproaching("ball is not approaching the paddle face")
    return _contact_out(v_in, n, paddle.vel, c)


# ---------------------------------------------------------------------------
# Ballistic boundary-value solve
# ---------------------------------------------------------------------------

def _velocity_for_flight_time(p_hit, target, t_flight, m: MediumModel) -> np.ndarray:
    """Initial velocity whose flight from p_hit reaches target at t_flight."""
    delta = target - p_hit
    if m.drag_free:
        return delta / t_flight + np.array([0.0, 0.0, 0.5 * m.g * t_flight])
    v_term = np.array([0.0, 0.0, -m.g / m.k])
    alpha = -np.expm1(-m.k * t_flight) / m.k
    return v_term + (delta - v_term * t_flight) / alpha


def _height_at_net(p_hit, v, m: MediumModel, t_flight: float) -> float | None:
    """Ball-center z when the flight crosses the net plane x = 0, or None."""
    s = BallState(p_hit, v)
    if p_hit[0] == 0.0:
        return float(p_hit[2])
    x_end = flight_pos(s, t_flight, m)[0]
    if p_hit[0] * x_end > 0:
        return None  # never crosses the net plane
    if m.drag_free:
        t_net = t_flight * p_hit[0] / (p_hit[0] - x_end)
    else:
        t_net = brentq(lambda t: flight_pos(s, t, m)[0], 0.0, t_flight, xtol=1e-12)
    return float(flight_pos(s, t_net, m)[2])


def solve_outgoing_velocity(p_hit, target, apex_clearance: float,
                            m: MediumModel, g: TableGeometry,
                            t_min: float = 0.05, t_max: float = 2.0) -> np.ndarray:
    """Outgoing ball velocity landing at target while clearing the net.

    Among the one-parameter family of flight times, the minimal-speed
    solution subject to net clearance is returned.
    """
    p_hit = vec3(p_hit)
    target = vec3(target)
    if target[0] >= 0:
        raise ValueError("target must lie on the opponent half (x < 0)")
    z_required = g.surface_z + g.net_height + apex_clearance

    def clearance_ok(t_flight: float) -> bool:
        v = _velocity_for_flight_time(p_hit, target, t_flight, m)
        z_net = _height_at_net(p_hit, v, m, t_flight)
        if z_net is None:
            return True  # no net crossing on this path
        return z_net >= z_required

    # Net height at the crossing grows monotonically with flight time, so
    # the feasible set is an interval [t_clear, t_max].
    if clearance_ok(t_min):
        t_clear = t_min
    elif not clearance_ok(t_max):
        raise Infeasible("no flight time satisfies the net clearance")
    else:
        lo, hi = t_min, t_max
        while hi - lo > 1e-10:
            mid = 0.5 * (lo + hi)
            if clearance_ok(mid):
                hi = mid
            else:
                lo = mid
        t_clear = hi

    def speed(t_flight: float) -> float:
        return float(np.linalg.norm(
            _velocity_for_flight_time(p_hit, target, t_flight, m)))

    res = minimize_scalar(speed, bounds=(t_clear, t_max), method="bounded",
                          options={"xatol": 1e-10})
    t_best = float(res.x)
    if speed(t_clear) < speed(t_best):
        t_best = t_clear
    return _velocity_for_flight_time(p_hit, target, t_best, m)


# ---------------------------------------------------------------------------
# Contact inversion
# ---------------------------------------------------------------------------

def invert_contact(v_in, v_out_desired, c: ContactModel, speed_budget: float
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Paddle face normal and velocity (along the normal) realizing v_out.

    With full tangential retention the bisector closed form is exact; for
    mu < 1 the closed form seeds a small least-squares refinement.
    """
    v_in = vec3(v_in)
    v_out = vec3(v_out_desired)
    delta = v_out - v_in
    dnorm = float(np.linalg.norm(delta))
    if dnorm < 1e-12:
        raise ValueError("desired outgoing velocity equals the incoming one")

    n0 = delta / dnorm
    u0 = float(np.dot(v_in, n0)) + dnorm / (1.0 + c.restitution_n)

    if abs(c.tangential_retention - 1.0) < 1e-12:
        n, u = n0, u0
    else:
        # Rotate n0 by two small angles about axes orthogonal to it.
        e1 = np.cross(n0, [0.0, 0.0, 1.0])
        if np.linalg.norm(e1) < 1e-6:
            e1 = np.cross(n0, [0.0, 1.0, 0.0])
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(n0, e1)

        def unpack(x):
            n = n0 + x[0] * e1 + x[1] * e2
            n /= np.linalg.norm(n)
            return n, float(x[2])

        def resid(x):
            n, u = unpack(x)
            return _contact_out(v_in, n, u * n, c) - v_out

        fit = least_squares(resid, x0=[0.0, 0.0, u0], xtol=1e-15, ftol=1e-15,
                            gtol=1e-15)
        if float(np.linalg.norm(fit.fun)) > 1e-8:
            raise Infeasible("contact inversion did not converge")
        n, u = unpack(fit.x)
        if u < 0:
            n, u = -n, -u

    if abs(u) > speed_budget:
        raise BudgetExceeded(
            f"required paddle speed {abs(u):.3f} m/s exceeds budget {speed_budget}")
    return n, u * n


# ---------------------------------------------------------------------------
# Full plan
# ---------------------------------------------------------------------------

def plan_hit(incoming: BallState, hit_plane_x: float, target, m: MediumModel,
             c: ContactModel, g: TableGeometry,
             bounce_model: BounceModel = BounceModel(),
             apex_clearance: float = 0.1, speed_budget: float = 10.0,
             reference_orient=REFERENCE_ORIENT) -> HitPlan:
    """Compose crossing prediction, outgoing-velocity solve and contact
    inversion into a full hit plan."""
    if incoming.vel[0] <= 0:
        raise ValueError("incoming ball must be moving toward the agent side")
    t_hit, ball_at = predict_plane_crossing(incoming, hit_plane_x, m, g,
                                            bounce_model)
    v_out = solve_outgoing_velocity(ball_at.pos, target, apex_clearance, m, g)
    normal, paddle_vel = invert_contact(ball_at.vel, v_out, c, speed_budget)
    ref_normal = quat_rotate(reference_orient, FACE_AXIS)
    q_hit = quat_mul(quat_from_two_vectors(ref_normal, normal), reference_orient)
    landing = predict_landing(ball_at.pos, v_out,
                              g.surface_z + g.ball_radius, m)
    return HitPlan(p_hit=ball_at.pos, t_hit=t_hit, q_hit=q_hit,
                   v_hit=paddle_vel, predicted_landing=landing)
