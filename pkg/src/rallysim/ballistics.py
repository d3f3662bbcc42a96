"""Ball flight integration, bounce model and event prediction.

Drag-free flight uses exact closed forms; linear drag uses the exact
exponential solution for predictions and semi-implicit integration for
stepping.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, least_squares

from .core import BallState, TableGeometry, vec3
from .errors import Degenerate, InsufficientData, NoCrossing, NoLanding

_DRAG_SUBSTEP = 1e-3
_K_EPS = 1e-10          # below this, treat drag as zero
CONTACT_TOL = 1e-6      # bounce precondition tolerance, meters


@dataclass(frozen=True)
class MediumModel:
    """Gravity plus optional linear drag (acceleration -g z_hat - k v)."""

    g: float = 9.81
    k: float = 0.0

    def __post_init__(self):
        if self.g <= 0:
            raise ValueError("gravity must be positive")
        if self.k < 0:
            raise ValueError("drag coefficient must be non-negative")

    @property
    def drag_free(self) -> bool:
        return self.k < _K_EPS


@dataclass(frozen=True)
class BounceModel:
    """Table bounce: normal restitution and tangential retention."""

    restitution: float = 0.9
    tangential_retention: float = 1.0

    def __post_init__(self):
        for name in ("restitution", "tangential_retention"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {v!r}")


@dataclass(frozen=True)
class TrajectorySample:
    time: float
    state: BallState


# ---------------------------------------------------------------------------
# Closed-form flight
# ---------------------------------------------------------------------------

def flight_pos(s: BallState, t: float, m: MediumModel) -> np.ndarray:
    """Exact position at time t from state s (no bounces)."""
    if m.drag_free:
        return s.pos + s.vel * t + np.array([0.0, 0.0, -0.5 * m.g * t * t])
    v_term = np.array([0.0, 0.0, -m.g / m.k])
    a = -np.expm1(-m.k * t) / m.k    # (1 - e^{-kt}) / k
    return s.pos + v_term * t + (s.vel - v_term) * a


def flight_vel(s: BallState, t: float, m: MediumModel) -> np.ndarray:
    """Exact velocity at time t from state s (no bounces)."""
    if m.drag_free:
        return s.vel + np.array([0.0, 0.0, -m.g * t])
    v_term = np.array([0.0, 0.0, -m.g / m.k])
    return v_term + (s.vel - v_term) * np.exp(-m.k * t)


def flight_state(s: BallState, t: float, m: MediumModel) -> BallState:
    return BallState(flight_pos(s, t, m), flight_vel(s, t, m))


def step(s: BallState, dt: float, m: MediumModel) -> BallState:
    """Advance the ball by dt.

    Drag-free mode is the exact closed-form update; with drag the state is
    advanced semi-implicitly at substeps of at most 1 ms.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if m.drag_free:
        return flight_state(s, dt, m)
    n_sub = max(1, int(np.ceil(dt / _DRAG_SUBSTEP)))
    h = dt / n_sub
    pos = s.pos.copy()
    vel = s.vel.copy()
    g_vec = np.array([0.0, 0.0, -m.g])
    for _ in range(n_sub):
        vel = vel + (g_vec - m.k * vel) * h
        pos = pos + vel * h
    return BallState(pos, vel)


def bounce(s: BallState, b: BounceModel) -> BallState:
    """Reflect a downward-moving ball off a horizontal surface.

    Normal speed is scaled by the restitution, tangential components by the
    tangential retention; position is unchanged.
    """
    if s.vel[2] >= 0:
        raise ValueError("bounce requires a downward-moving ball")
    vel = np.array([
        s.vel[0] * b.tangential_retention,
        s.vel[1] * b.tangential_retention,
        -b.restitution * s.vel[2],
    ])
    return BallState(s.pos, vel)


# ---------------------------------------------------------------------------
# Event prediction
# ---------------------------------------------------------------------------

def _time_descending_to_height(s: BallState, z_target: float, m: MediumModel,
                               t_max: float = 60.0) -> Optional[float]:
    """Smallest t >= 0 at which z(t) == z_target with z decreasing."""
    if m.drag_free:
        vz, dz = s.vel[2], s.pos[2] - z_target
        disc = vz * vz + 2.0 * m.g * dz
        if disc < 0:
            return None
        t = (vz + np.sqrt(disc)) / m.g
        return float(t) if t >= 0 else None
    # Descent starts at the apex (or immediately if already moving down).
    if s.vel[2] > 0:
        t_apex = np.log1p(m.k * s.vel[2] / m.g) / m.k
    else:
        t_apex = 0.0
    if flight_pos(s, t_apex, m)[2] < z_target:
        return None
    t_hi = max(t_apex, 1e-6)
    f = lambda t: flight_pos(s, t, m)[2] - z_target
    while f(t_hi) > 0:
        t_hi *= 2.0
        if t_hi > t_max:
            return None
    return _bisect_height(s, z_target, m, t_apex, t_hi)


def _bisect_height(s, z_target, m, lo, hi):
    f = lambda t: flight_pos(s, t, m)[2] - z_target
    if f(lo) < 0:
        return None
    return float(brentq(f, lo, hi, xtol=1e-12))


def _time_to_plane_x(s: BallState, plane_x: float, m: MediumModel) -> Optional[float]:
    """Smallest t >= 0 with x(t) == plane_x, or None."""
    dx = plane_x - s.pos[0]
    if abs(dx) < 1e-15:
        return 0.0
    vx = s.vel[0]
    if m.drag_free:
        if vx == 0.0:
            return None
        t = dx / vx
        return float(t) if t >= 0 else None
    if vx == 0.0:
        return None
    arg = 1.0 - m.k * dx / vx
    if arg <= 0:
        return None  # plane beyond the drag-limited horizontal reach
    t = -np.log(arg) / m.k
    return float(t) if t >= 0 else None


def predict_landing(pos, vel, plane_z: float, m: MediumModel) -> np.ndarray:
    """First point where the trajectory reaches z == plane_z descending."""
    pos = vec3(pos)
    if pos[2] <= plane_z:
        raise ValueError("start position must be above the landing plane")
    s = BallState(pos, vel)
    t = _time_descending_to_height(s, plane_z, m)
    if t is None:
        raise NoLanding("trajectory never descends to the landing plane")
    p = flight_pos(s, t, m)
    p[2] = plane_z
    return p


def landing_time(pos, vel, plane_z: float, m: MediumModel) -> float:
    s = BallState(vec3(pos), vel)
    t = _time_descending_to_height(s, plane_z, m)
    if t is None:
        raise NoLanding("trajectory never descends to the landing plane")
    return t


def _on_table(p: np.ndarray, g: TableGeometry) -> bool:
    return abs(p[0]) <= g.half_length and abs(p[1]) <= g.half_width


def predict_plane_crossing(s: BallState, plane_x: float, m: MediumModel,
                           geometry: TableGeometry,
                           bounce_model: BounceModel = BounceModel(),
                           ) -> tuple[float, BallState]:
    """Smallest t >= 0 where the flight crosses x == plane_x.

    At most one table bounce is simulated; a second bounce or a floor hit
    before the plane raises NoCrossing.
    """
    surface = geometry.surface_z + geometry.ball_radius
    floor = geometry.ball_radius
    t_base = 0.0
    state = s
    for leg in range(2):
        t_cross = _time_to_plane_x(state, plane_x, m)
        t_surf = _time_descending_to_height(state, surface, m)
        if t_surf is not None and not _on_table(flight_pos(state, t_surf, m), geometry):
            t_surf = None
        t_floor = _time_descending_to_height(state, floor, m)
        candidates = [t for t in (t_cross, t_surf, t_floor) if t is not None]
        if not candidates:
            raise NoCrossing("ball never reaches the plane")
        t_next = min(candidates)
        if t_cross is not None and t_cross <= t_next + 1e-12:
            return t_base + t_cross, flight_state(state, t_cross, m)
        if t_next == t_floor or leg == 1:
            raise NoCrossing("ball drops before reaching the plane")
        # Table bounce; continue on the second leg.
        state = bounce(flight_state(state, t_surf, m), bounce_model)
        t_base += t_surf
    raise NoCrossing("ball drops before reaching the plane")


# ---------------------------------------------------------------------------
# Drag calibration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationResult:
    model: MediumModel
    residual: float


def calibrate(samples: Sequence[TrajectorySample], g_fixed: float = 9.81) -> CalibrationResult:
    """Fit the linear-drag coefficient to sampled trajectory positions.

    The first sample provides the initial condition; k is fit by least
    squares on position residuals against the closed-form drag flight.
    """
    if len(samples) < 4:
        raise InsufficientData("need at least 4 trajectory samples")
    times = np.array([s.time for s in samples])
    if times.max() - times.min() <= 0.05:
        raise InsufficientData("samples must span more than 0.05 s")
    positions = np.array([s.state.pos for s in samples])
    if np.allclose(positions, positions[0], atol=1e-12):
        raise Degenerate("all samples coincide")

    first = min(samples, key=lambda s: s.time)
    s0 = first.state
    rel_t = times - first.time

    def resid(params):
        k = params[0]
        m = MediumModel(g=g_fixed, k=max(k, 0.0))
        model_pos = np.array([flight_pos(s0, t, m) for t in rel_t])
        return (model_pos - positions).ravel()

    fit = least_squares(resid, x0=[0.01], bounds=([0.0], [10.0]), xtol=1e-14,
                        ftol=1e-14, gtol=1e-14)
    k_hat = float(fit.x[0])
    residual = float(np.sqrt(np.mean(fit.fun ** 2)))
    return CalibrationResult(MediumModel(g=g_fixed, k=k_hat), residual)
