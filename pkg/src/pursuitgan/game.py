"""Kinematics and scripted agents of the two-stage pursuit-evasion game.

Both agents hold a constant (speed, heading) action for each of the two
stages of ``t_total / 2`` steps.  Red (the evader) picks its first action at
random and its second action by fleeing to the point of its safety circle
farthest from Blue's midgame position.  The scripted Blue used for data
generation aims at Red's projected destination and then re-targets Red's
new destination, subject to the two-stage speed budget ``v_cap``.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple


class Point2(NamedTuple):
    x: float
    y: float


def normalize_heading(theta):
    """Map an angle into (-pi, pi]."""
    h = math.remainder(theta, 2.0 * math.pi)
    if h == -math.pi:
        h = math.pi
    return h


@dataclass(frozen=True)
class PolarAction:
    """Constant speed and heading held for one stage."""

    speed: float
    heading: float

    def __post_init__(self):
        if not (math.isfinite(self.speed) and math.isfinite(self.heading)):
            raise ValueError(f"non-finite action ({self.speed}, {self.heading})")
        if self.speed < 0:
            raise ValueError(f"negative speed {self.speed}")
        object.__setattr__(self, "speed", float(self.speed))
        object.__setattr__(self, "heading", normalize_heading(float(self.heading)))


STILL = PolarAction(0.0, 0.0)


@dataclass(frozen=True)
class GameConfig:
    """Game parameters.  Angles are in radians."""

    t_total: int = 20
    v_mean_red: float = 5.0
    v_std_red: float = 0.7
    theta_mean_red: float = math.radians(60.0)
    theta_std_red: float = math.radians(8.0)
    v_cap: float = 12.0
    safety_pct: float = 10.0
    red_start: Point2 = field(default_factory=lambda: Point2(10.0, 50.0))
    blue_start: Point2 = field(default_factory=lambda: Point2(90.0, 50.0))
    catch_eps: float = 1e-6

    def __post_init__(self):
        if int(self.t_total) != self.t_total or self.t_total < 2 or self.t_total % 2:
            raise ValueError(f"t_total must be an even integer >= 2, got {self.t_total}")
        if self.v_std_red < 0 or self.theta_std_red < 0:
            raise ValueError("standard deviations must be non-negative")
        if not self.v_cap > 0:
            raise ValueError("v_cap must be positive")
        if not 0 <= self.safety_pct <= 100:
            raise ValueError("safety_pct must lie in [0, 100]")
        if not self.catch_eps > 0:
            raise ValueError("catch_eps must be positive")
        object.__setattr__(self, "t_total", int(self.t_total))
        object.__setattr__(self, "red_start", Point2(*map(float, self.red_start)))
        object.__setattr__(self, "blue_start", Point2(*map(float, self.blue_start)))

    @property
    def half(self):
        return self.t_total // 2


@dataclass(frozen=True)
class EpisodeRecord:
    episode_id: int
    r1: PolarAction
    b1: PolarAction
    r2: PolarAction
    b2: PolarAction
    v_cap_rem: float
    d_rb: float
    violated: bool
    red_end: Point2
    blue_end: Point2


def position_after(start, a, steps):
    return Point2(
        start.x + steps * a.speed * math.cos(a.heading),
        start.y + steps * a.speed * math.sin(a.heading),
    )


def endpoint(start, a1, a2, half):
    return position_after(position_after(start, a1, half), a2, half)


def endpoint_distance(p, q):
    return math.hypot(p.x - q.x, p.y - q.y)


def _aim(src, dst, steps):
    """Action moving from src to dst in exactly ``steps`` steps."""
    dx, dy = dst.x - src.x, dst.y - src.y
    dist = math.hypot(dx, dy)
    if dist == 0.0:
        return STILL
    return PolarAction(dist / steps, math.atan2(dy, dx))


def project_destination(cfg, r1):
    return position_after(cfg.red_start, r1, cfg.t_total)


def scripted_blue_stage1(cfg, r1):
    return _aim(cfg.blue_start, project_destination(cfg, r1), cfg.t_total)


def safety_circle(cfg, r1):
    """Center and radius of the circle Red retreats to in stage 2."""
    center = project_destination(cfg, r1)
    radius = cfg.safety_pct / 100.0 * r1.speed * cfg.t_total
    return center, radius


def red_stage2(cfg, r1, blue_mid):
    """Red's stage-2 action and destination.

    The destination is the point of the safety circle farthest from
    ``blue_mid``.  When Blue sits on the circle center every point is
    equally far; Red then keeps its stage-1 heading.
    """
    center, radius = safety_circle(cfg, r1)
    ux, uy = center.x - blue_mid.x, center.y - blue_mid.y
    norm = math.hypot(ux, uy)
    if norm == 0.0:
        ux, uy = math.cos(r1.heading), math.sin(r1.heading)
    else:
        ux, uy = ux / norm, uy / norm
    dest = Point2(center.x + radius * ux, center.y + radius * uy)
    red_mid = position_after(cfg.red_start, r1, cfg.half)
    return _aim(red_mid, dest, cfg.half), dest


def scripted_blue_stage2(cfg, blue_mid, v1b, dest2):
    """Head for dest2, capping speed at whatever budget stage 1 left over."""
    ideal = _aim(blue_mid, dest2, cfg.half)
    budget = max(0.0, cfg.v_cap - v1b)
    if ideal.speed <= budget:
        return ideal
    return PolarAction(budget, ideal.heading)


def finish_episode(cfg, r1, b1, r2, b2):
    """End points and end-point distance for a fully specified game."""
    half = cfg.half
    red_end = endpoint(cfg.red_start, r1, r2, half)
    blue_end = endpoint(cfg.blue_start, b1, b2, half)
    return red_end, blue_end, endpoint_distance(red_end, blue_end)


def sample_red_stage1(cfg, rng):
    # Gaussian speed tail below zero is redrawn; heading is drawn once.
    speed = rng.normal(cfg.v_mean_red, cfg.v_std_red)
    while speed <= 0.0:
        speed = rng.normal(cfg.v_mean_red, cfg.v_std_red)
    heading = rng.normal(cfg.theta_mean_red, cfg.theta_std_red)
    return PolarAction(float(speed), float(heading))


def play_scripted(cfg, r1, episode_id=0):
    b1 = scripted_blue_stage1(cfg, r1)
    blue_mid = position_after(cfg.blue_start, b1, cfg.half)
    r2, dest2 = red_stage2(cfg, r1, blue_mid)
    b2 = scripted_blue_stage2(cfg, blue_mid, b1.speed, dest2)
    red_end, blue_end, d = finish_episode(cfg, r1, b1, r2, b2)
    return EpisodeRecord(
        episode_id=episode_id,
        r1=r1,
        b1=b1,
        r2=r2,
        b2=b2,
        v_cap_rem=cfg.v_cap - b1.speed,
        d_rb=d,
        violated=b1.speed + b2.speed > cfg.v_cap,
        red_end=red_end,
        blue_end=blue_end,
    )


def simulate_episode(cfg, rng, episode_id=0):
    """Draw Red's opening action from ``rng`` and play the scripted game."""
    return play_scripted(cfg, sample_red_stage1(cfg, rng), episode_id)

