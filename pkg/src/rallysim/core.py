"""Shared geometry, quaternion math and deterministic random streams.

Conventions:
  * world frame: x along the table length (agent half at x > 0, opponent
    half at x < 0, net plane at x = 0), y lateral, z up;
  * quaternions are numpy arrays ``[w, x, y, z]``, always unit-norm;
  * vectors are numpy float arrays of shape (3,).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

QUAT_NORM_TOL = 1e-9

# Body-frame axis that the paddle face normal points along at identity
# orientation.
FACE_AXIS = np.array([1.0, 0.0, 0.0])


def vec3(x, y=None, z=None) -> np.ndarray:
    """Build a finite 3-vector from components or any length-3 sequence."""
    if y is None:
        v = np.asarray(x, dtype=float).reshape(3).copy()
    else:
        v = np.array([x, y, z], dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite vector components: {v}")
    return v


# ---------------------------------------------------------------------------
# Quaternions
# ---------------------------------------------------------------------------

def quat(w, x=None, y=None, z=None) -> np.ndarray:
    """Build a unit quaternion, normalizing the input."""
    if x is None:
        q = np.asarray(w, dtype=float).reshape(4).copy()
    else:
        q = np.array([w, x, y, z], dtype=float)
    return quat_normalize(q)


def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = float(np.linalg.norm(q))
    if not np.isfinite(n) or n < 1e-12:
        raise ValueError("cannot normalize a (near-)zero quaternion")
    if abs(n - 1.0) <= QUAT_NORM_TOL:
        return q.copy()
    return q / n


def quat_mul(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q, v) -> np.ndarray:
    """Rotate vector v by unit quaternion q."""
    qv = np.asarray(q[1:], dtype=float)
    w = float(q[0])
    t = 2.0 * np.cross(qv, np.asarray(v, dtype=float))
    return np.asarray(v, dtype=float) + w * t + np.cross(qv, t)


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        raise ValueError("zero rotation axis")
    half = 0.5 * float(angle)
    return np.concatenate(([np.cos(half)], np.sin(half) * axis / n))


def quat_from_two_vectors(u, v) -> np.ndarray:
    """Minimal rotation taking direction u to direction v."""
    u = np.asarray(u, dtype=float) / np.linalg.norm(u)
    v = np.asarray(v, dtype=float) / np.linalg.norm(v)
    d = float(np.dot(u, v))
    if d > 1.0 - 1e-12:
        return quat_identity()
    if d < -1.0 + 1e-12:
        # 180 degrees: any axis orthogonal to u
        axis = np.cross(u, np.array([1.0, 0.0, 0.0]))
        if np.linalg.norm(axis) < 1e-6:
            axis = np.cross(u, np.array([0.0, 1.0, 0.0]))
        return quat_from_axis_angle(axis, np.pi)
    axis = np.cross(u, v)
    q = np.concatenate(([1.0 + d], axis))
    return quat_normalize(q)


def quat_geodesic_angle(a, b) -> float:
    """arccos(|a.b|), the half-geodesic angle in [0, pi/2].

    Symmetric and invariant under sign flip of either argument.
    """
    d = abs(float(np.dot(a, b)))
    return float(np.arccos(min(d, 1.0)))


def quat_vec_part_norm(a, b) -> float:
    """Norm of the vector part of b * a^-1, in [0, 1] for unit quaternions."""
    rel = quat_mul(b, quat_conj(a))
    return float(min(np.linalg.norm(rel[1:]), 1.0))


def quat_component_distance(a, b) -> float:
    """Componentwise quaternion distance, minimized over the sign flip."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(min(np.linalg.norm(a - b), np.linalg.norm(a + b)))


# ---------------------------------------------------------------------------
# State records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BallState:
    pos: np.ndarray
    vel: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pos", vec3(self.pos))
        object.__setattr__(self, "vel", vec3(self.vel))


@dataclass(frozen=True)
class PaddleState:
    pos: np.ndarray
    vel: np.ndarray
    orient: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pos", vec3(self.pos))
        object.__setattr__(self, "vel", vec3(self.vel))
        object.__setattr__(self, "orient", quat(self.orient))

    @property
    def normal(self) -> np.ndarray:
        """Unit face normal: the orientation applied to the face axis."""
        return quat_rotate(self.orient, FACE_AXIS)


def _require_positive(obj, names):
    for name in names:
        if getattr(obj, name) <= 0:
            raise ConfigError(f"{type(obj).__name__}.{name} must be positive, "
                              f"got {getattr(obj, name)!r}")


@dataclass(frozen=True)
class TableGeometry:
    """Table-tennis court dimensions and ball properties (metric units)."""

    table_length: float = 2.74
    table_width: float = 1.52
    table_height: float = 0.76   # top-surface z; config-level, not a constant
    net_height: float = 0.305
    net_width: float = 1.825
    paddle_face_radius: float = 0.093
    ball_radius: float = 0.02
    ball_mass: float = 0.0027
    ball_inertia: float = 7.2e-7

    def __post_init__(self):
        _require_positive(self, [
            "table_length", "table_width", "table_height", "net_height",
            "net_width", "paddle_face_radius", "ball_radius", "ball_mass",
            "ball_inertia",
        ])

    @property
    def half_length(self) -> float:
        return self.table_length / 2.0

    @property
    def half_width(self) -> float:
        return self.table_width / 2.0

    @property
    def surface_z(self) -> float:
        return self.table_height


@dataclass(frozen=True)
class SoccerGeometry:
    """Soccer goal and ball properties (metric units)."""

    goal_width: float = 7.32
    goal_height: float = 2.50
    ball_radius: float = 0.117
    ball_mass: float = 0.450
    goal_line_x: float = 52.0

    def __post_init__(self):
        _require_positive(self, [
            "goal_width", "goal_height", "ball_radius", "ball_mass",
            "goal_line_x",
        ])

    @property
    def half_width(self) -> float:
        return self.goal_width / 2.0


# ---------------------------------------------------------------------------
# Deterministic random streams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream: (master_seed, stream_id) fully determine
    the sequence; distinct stream ids are statistically independent."""

    master_seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        seq = np.random.SeedSequence(entropy=self.master_seed,
                                     spawn_key=(self.stream_id,))
        object.__setattr__(self, "_gen", np.random.Generator(
            np.random.Philox(seq)))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


def derive_stream(master_seed: int, trial_index: int) -> RngStream:
    """Deterministic per-trial stream; injective over trial_index."""
    if trial_index < 0:
        raise ValueError("trial_index must be non-negative")
    return RngStream(master_seed=master_seed, stream_id=trial_index)
