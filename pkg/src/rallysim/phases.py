"""Phase-randomized trial generation and the weakness-aware curriculum."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .ballistics import MediumModel, predict_landing
from .config import KernelConfig
from .core import BallState, RngStream, TableGeometry
from .errors import RejectionExhausted
from .rules import KeeperBehavior

MAX_SERVE_DRAWS = 10_000


@dataclass(frozen=True)
class Range:
    lo: float
    hi: float

    def __post_init__(self):
        if self.hi < self.lo:
            raise ValueError("range must be ordered")

    def draw(self, gen: np.random.Generator) -> float:
        if self.hi == self.lo:
            return self.lo
        return float(gen.uniform(self.lo, self.hi))


@dataclass(frozen=True)
class PhaseSpec:
    track: str                      # "tt" or "soccer"
    name: str
    # table tennis
    paddle_mass: Range = Range(0.15, 0.15)
    sliding: Range = Range(1.0, 1.0)
    torsional: Range = Range(0.005, 0.005)
    rolling: Range = Range(1e-4, 1e-4)
    start_x: Range = Range(-1.25, -1.20)
    start_y: Range = Range(-0.50, -0.45)
    start_z: Range = Range(1.40, 1.50)
    fixed_velocity: Optional[tuple[float, float, float]] = (5.6, 1.6, 0.1)
    # serve-box curriculum weights over a (nx, ny) grid, row-major; None
    # means uniform sampling
    serve_bin_weights: Optional[tuple[float, ...]] = None
    # soccer
    agent_x: Range = Range(39.0, 39.0)
    agent_y: Range = Range(0.0, 0.0)
    position_noise: float = 0.0
    joint_noise: float = 0.0
    keeper_mix: tuple[float, float, float] = (1.0, 0.0, 0.0)  # S, R, T
    keeper_speed: Range = Range(1.0, 5.0)
    max_time: float = 20.0

    def __post_init__(self):
        if self.track not in ("tt", "soccer"):
            raise ValueError(f"unknown track {self.track!r}")
        if abs(sum(self.keeper_mix) - 1.0) > 1e-12:
            raise ValueError("keeper behavior mix must sum to 1")


TT_PHASES = {
    "1": PhaseSpec(track="tt", name="phase1", max_time=2.0),
    "2": PhaseSpec(
        track="tt", name="phase2",
        paddle_mass=Range(0.10, 0.15), sliding=Range(0.9, 1.1),
        torsional=Range(0.004, 0.006), rolling=Range(1e-5, 3e-5),
        start_x=Range(-1.25, -0.50), start_y=Range(-0.50, 0.50),
        start_z=Range(1.40, 1.50), fixed_velocity=None, max_time=2.0),
    "eval": PhaseSpec(
        track="tt", name="eval",
        paddle_mass=Range(0.09, 0.20), sliding=Range(0.9, 1.1),
        torsional=Range(0.004, 0.006), rolling=Range(1e-5, 3e-5),
        start_x=Range(-1.25, -0.40), start_y=Range(-0.50, 0.50),
        start_z=Range(1.30, 1.55), fixed_velocity=None, max_time=2.0),
}

SOCCER_PHASES = {
    "1": PhaseSpec(track="soccer", name="phase1", max_time=20.0),
    "2": PhaseSpec(
        track="soccer", name="phase2",
        agent_x=Range(38.0, 39.0), agent_y=Range(-1.0, 1.0),
        position_noise=1.0, joint_noise=0.02,
        keeper_mix=(0.6, 0.3, 0.1), keeper_speed=Range(1.0, 5.0),
        max_time=10.0),
    "eval": PhaseSpec(
        track="soccer", name="eval",
        agent_x=Range(36.5, 39.0), agent_y=Range(-2.5, 2.5),
        position_noise=2.5, joint_noise=0.03,
        keeper_mix=(0.1, 0.45, 0.45), keeper_speed=Range(3.5, 5.5),
        max_time=10.0),
}


def phase_spec(track: str, phase: str) -> PhaseSpec:
    table = TT_PHASES if track == "tt" else SOCCER_PHASES
    if phase not in table:
        raise KeyError(f"unknown phase {phase!r} for track {track!r}")
    return table[phase]


@dataclass(frozen=True)
class TrialConfig:
    track: str
    phase: str
    trial_index: int
    master_seed: int
    max_time: float
    # table tennis
    ball_start: Optional[BallState] = None
    paddle_mass: float = 0.15
    sliding: float = 1.0
    torsional: float = 0.005
    rolling: float = 1e-4
    serve_bin: Optional[int] = None
    # soccer
    agent_start: Optional[tuple[float, float]] = None
    joint_noise_draw: Optional[tuple[float, ...]] = None
    keeper_behavior: Optional[KeeperBehavior] = None
    keeper_speed: float = 0.0
    keeper_y0: float = 0.0


def _draw_serve_start(spec: PhaseSpec, cfg: KernelConfig,
                      gen: np.random.Generator) -> tuple[np.ndarray, Optional[int]]:
    nx, ny = cfg.curriculum.grid
    if spec.serve_bin_weights is None:
        x = Range(spec.start_x.lo, spec.start_x.hi).draw(gen)
        y = Range(spec.start_y.lo, spec.start_y.hi).draw(gen)
        z = spec.start_z.draw(gen)
        return np.array([x, y, z]), None
    weights = np.asarray(spec.serve_bin_weights, dtype=float)
    if weights.shape != (nx * ny,):
        raise ValueError("serve bin weights do not match the curriculum grid")
    b = int(gen.choice(nx * ny, p=weights / weights.sum()))
    bx, by = divmod(b, ny)
    xw = (spec.start_x.hi - spec.start_x.lo) / nx
    yw = (spec.start_y.hi - spec.start_y.lo) / ny
    x = spec.start_x.lo + (bx + gen.uniform()) * xw
    y = spec.start_y.lo + (by + gen.uniform()) * yw
    z = spec.start_z.draw(gen)
    return np.array([x, y, z]), b


def serve_bin_index(spec: PhaseSpec, cfg: KernelConfig, pos) -> int:
    """Row-major curriculum bin of a serve start position."""
    nx, ny = cfg.curriculum.grid
    xw = (spec.start_x.hi - spec.start_x.lo) / nx or 1.0
    yw = (spec.start_y.hi - spec.start_y.lo) / ny or 1.0
    bx = min(nx - 1, max(0, int((pos[0] - spec.start_x.lo) / xw)))
    by = min(ny - 1, max(0, int((pos[1] - spec.start_y.lo) / yw)))
    return bx * ny + by


def _lands_on_agent_side(pos, vel, cfg: KernelConfig) -> bool:
    table = cfg.table
    try:
        landing = predict_landing(pos, vel,
                                  table.surface_z + table.ball_radius,
                                  cfg.medium)
    except Exception:
        return False
    margin = 0.02
    return (margin < landing[0] <= table.half_length - margin
            and abs(landing[1]) <= table.half_width - margin)


def sample_trial(spec: PhaseSpec, rng: RngStream,
                 cfg: Optional[KernelConfig] = None) -> TrialConfig:
    """Resolve one concrete trial draw from the phase ranges."""
    cfg = cfg or KernelConfig()
    gen = rng.generator
    common = dict(track=spec.track, phase=spec.name,
                  trial_index=rng.stream_id, master_seed=rng.master_seed,
                  max_time=spec.max_time)

    if spec.track == "soccer":
        x = spec.agent_x.draw(gen)
        y = spec.agent_y.draw(gen)
        v = spec.position_noise
        if v > 0:
            x += float(gen.uniform(-v, 0.0))
            y += float(gen.uniform(-v, v))
        joint_noise = tuple(gen.uniform(-spec.joint_noise, spec.joint_noise,
                                        size=8).tolist()) \
            if spec.joint_noise > 0 else tuple([0.0] * 8)
        behavior = [KeeperBehavior.STATIC_RANDOM, KeeperBehavior.RANDOM_MOVE,
                    KeeperBehavior.TRACK][int(gen.choice(3, p=spec.keeper_mix))]
        speed = spec.keeper_speed.draw(gen)
        y0 = float(gen.uniform(-cfg.soccer_geometry.half_width,
                               cfg.soccer_geometry.half_width))
        ball = BallState(np.asarray(cfg.soccer.ball_start, dtype=float),
                         np.zeros(3))
        return TrialConfig(ball_start=ball, agent_start=(x, y),
                           joint_noise_draw=joint_noise,
                           keeper_behavior=behavior, keeper_speed=speed,
                           keeper_y0=y0, **common)

    # table tennis
    mass = spec.paddle_mass.draw(gen)
    sliding = spec.sliding.draw(gen)
    torsional = spec.torsional.draw(gen)
    rolling = spec.rolling.draw(gen)
    pos, bin_idx = _draw_serve_start(spec, cfg, gen)

    if spec.fixed_velocity is not None:
        vel = np.asarray(spec.fixed_velocity, dtype=float)
        if not _lands_on_agent_side(pos, vel, cfg):
            raise RejectionExhausted("fixed serve does not land on the agent side")
    else:
        lo, hi = cfg.tt.serve_speed_range
        for _ in range(MAX_SERVE_DRAWS):
            vel = np.array([
                float(gen.uniform(lo, hi)),
                float(gen.uniform(*cfg.tt.serve_vy_range)),
                float(gen.uniform(*cfg.tt.serve_vz_range)),
            ])
            if _lands_on_agent_side(pos, vel, cfg):
                break
        else:
            raise RejectionExhausted(
                f"no valid serve after {MAX_SERVE_DRAWS} draws")

    return TrialConfig(ball_start=BallState(pos, vel), paddle_mass=mass,
                       sliding=sliding, torsional=torsional, rolling=rolling,
                       serve_bin=bin_idx, **common)


def curriculum_update(report, spec: PhaseSpec, cfg: Optional[KernelConfig] = None,
                      beta: Optional[float] = None) -> PhaseSpec:
    """Reweight serve bins toward measured weak regions.

    Bin weights mix failure-proportional sampling (Laplace-smoothed) with
    uniform; ranges themselves are unchanged and no bin weight is zero.
    """
    cfg = cfg or KernelConfig()
    if beta is None:
        beta = cfg.curriculum.beta
    nx, ny = cfg.curriculum.grid
    n_bins = nx * ny
    counts = np.asarray(report.bin_counts, dtype=float)
    successes = np.asarray(report.bin_successes, dtype=float)
    if counts.shape != (n_bins,):
        raise ValueError("report bin statistics do not match the grid")
    fail_rate = (counts - successes + 1.0) / (counts + 2.0)
    fail_weights = fail_rate / fail_rate.sum()
    uniform = np.full(n_bins, 1.0 / n_bins)
    weights = beta * fail_weights + (1.0 - beta) * uniform
    weights /= weights.sum()
    return replace(spec, serve_bin_weights=tuple(weights.tolist()))
