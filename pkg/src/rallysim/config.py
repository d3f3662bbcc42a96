"""Configuration: embedded defaults plus optional YAML overrides.

The YAML file is a key/value tree whose sections mirror the dataclasses
below; unknown keys are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping, Optional

import numpy as np
import yaml

from .ballistics import BounceModel, MediumModel
from .core import SoccerGeometry, TableGeometry
from .errors import ConfigError
from .planner import ContactModel
from .rewards import ACTINGAI_WEIGHTS, RectZone


@dataclass(frozen=True)
class PlannerConfig:
    hit_plane_offset: float = 0.15      # inside the agent's table edge
    apex_clearance: float = 0.1
    speed_budget: float = 10.0
    target: tuple[float, float, float] | None = None  # None: opponent center

    def resolved_target(self, table: TableGeometry) -> np.ndarray:
        if self.target is not None:
            return np.asarray(self.target, dtype=float)
        return np.array([-table.half_length / 2.0, 0.0,
                         table.surface_z + table.ball_radius])

    def hit_plane_x(self, table: TableGeometry) -> float:
        return table.half_length - self.hit_plane_offset


@dataclass(frozen=True)
class TTHarnessConfig:
    dt: float = 0.002
    max_time: float = 2.0
    paddle_start: tuple[float, float, float] = (1.55, 0.0, 1.05)
    max_lin_acc: float = 60.0
    max_ang_acc: float = 200.0
    contact_cooldown: float = 0.05
    # friction-to-bounce mapping: mu_t = min(1, 1 - c * (sliding - 1))
    friction_to_tangential: float = 0.5
    restitution: float = 0.9
    serve_speed_range: tuple[float, float] = (3.0, 7.0)
    serve_vy_range: tuple[float, float] = (-1.5, 1.5)
    serve_vz_range: tuple[float, float] = (-0.5, 0.5)
    net_touch_is_success: bool = True


@dataclass(frozen=True)
class SoccerHarnessConfig:
    dt: float = 0.002
    ball_start: tuple[float, float, float] = (41.0, 0.0, 0.117)
    max_agent_speed: float = 5.0
    kick_reach: float = 0.3
    max_kick_speed: float = 25.0
    keeper_body_width: float = 0.6
    keeper_body_height: float = 1.8
    ground_restitution: float = 0.6
    ground_tangential: float = 0.8
    rolling_decel: float = 3.0


@dataclass(frozen=True)
class RankConfig:
    threshold: float = 0.10
    relative: bool = False


@dataclass(frozen=True)
class CurriculumConfig:
    beta: float = 0.5
    grid: tuple[int, int] = (4, 4)


@dataclass(frozen=True)
class KernelConfig:
    table: TableGeometry = field(default_factory=TableGeometry)
    soccer_geometry: SoccerGeometry = field(default_factory=SoccerGeometry)
    medium: MediumModel = field(default_factory=MediumModel)
    contact: ContactModel = field(default_factory=ContactModel)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    tt: TTHarnessConfig = field(default_factory=TTHarnessConfig)
    soccer: SoccerHarnessConfig = field(default_factory=SoccerHarnessConfig)
    rank: RankConfig = field(default_factory=RankConfig)
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)
    reward_weights: Mapping[str, float] = field(
        default_factory=lambda: dict(ACTINGAI_WEIGHTS))

    def bounce_model(self, sliding: float = 1.0) -> BounceModel:
        """Map the sliding-friction draw to an effective tangential
        retention; no spin state is modeled."""
        c = self.tt.friction_to_tangential
        mu_t = min(1.0, 1.0 - c * (sliding - 1.0))
        mu_t = max(mu_t, 1e-3)
        return BounceModel(restitution=self.tt.restitution,
                           tangential_retention=mu_t)

    def optimal_zone(self) -> RectZone:
        """Centered rectangle covering the middle third of the opponent
        half."""
        t = self.table
        return RectZone(x_min=-2.0 * t.half_length / 3.0,
                        x_max=-t.half_length / 3.0,
                        y_min=-t.half_width / 3.0,
                        y_max=t.half_width / 3.0)


_TUPLE_FIELDS = {"paddle_start", "ball_start", "target", "grid",
                 "serve_speed_range", "serve_vy_range", "serve_vz_range"}


def _build(cls, data: Mapping[str, Any]):
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    coerced = {}
    for k, v in data.items():
        if k in _TUPLE_FIELDS and isinstance(v, (list, tuple)):
            v = tuple(v)
        coerced[k] = v
    try:
        return cls(**coerced)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {cls.__name__}: {exc}") from exc


_SECTIONS = {
    "table": TableGeometry,
    "soccer_geometry": SoccerGeometry,
    "medium": MediumModel,
    "contact": ContactModel,
    "planner": PlannerConfig,
    "tt": TTHarnessConfig,
    "soccer": SoccerHarnessConfig,
    "rank": RankConfig,
    "curriculum": CurriculumConfig,
}


def load_config(path: Optional[str] = None) -> KernelConfig:
    """Defaults, overridden section-by-section from a YAML file."""
    if path is None:
        return KernelConfig()
    with open(path) as fh:
        tree = yaml.safe_load(fh) or {}
    if not isinstance(tree, dict):
        raise ConfigError("config root must be a mapping")
    kwargs = {}
    for key, sub in tree.items():
        if key == "reward_weights":
            if not isinstance(sub, dict):
                raise ConfigError("reward_weights must be a mapping")
            kwargs[key] = {str(k): float(v) for k, v in sub.items()}
            continue
        if key not in _SECTIONS:
            raise ConfigError(f"unknown config section {key!r}")
        if not isinstance(sub, dict):
            raise ConfigError(f"section {key!r} must be a mapping")
        kwargs[key] = _build(_SECTIONS[key], sub)
    return KernelConfig(**kwargs)
