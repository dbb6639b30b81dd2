"""Flat ``key = value`` game configuration files.

Angles are written in degrees in files and held in radians in memory.
Unknown keys are rejected so that typos fail loudly.

Example::

    # default setup
    t_total = 20
    v_mean_red = 5
    theta_mean_red_deg = 60
"""

import hashlib
import json
import math

from .game import GameConfig, Point2


class ConfigError(ValueError):
    pass


_KEYS = {
    "t_total": int,
    "v_mean_red": float,
    "v_std_red": float,
    "theta_mean_red_deg": float,
    "theta_std_red_deg": float,
    "v_cap": float,
    "safety_pct": float,
    "red_start_x": float,
    "red_start_y": float,
    "blue_start_x": float,
    "blue_start_y": float,
    "catch_eps": float,
}


def parse_config(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _KEYS[key](val)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for {key}: {val!r}") from None

    d = GameConfig()
    try:
        return GameConfig(
            t_total=values.get("t_total", d.t_total),
            v_mean_red=values.get("v_mean_red", d.v_mean_red),
            v_std_red=values.get("v_std_red", d.v_std_red),
            theta_mean_red=math.radians(values["theta_mean_red_deg"])
            if "theta_mean_red_deg" in values
            else d.theta_mean_red,
            theta_std_red=math.radians(values["theta_std_red_deg"])
            if "theta_std_red_deg" in values
            else d.theta_std_red,
            v_cap=values.get("v_cap", d.v_cap),
            safety_pct=values.get("safety_pct", d.safety_pct),
            red_start=Point2(
                values.get("red_start_x", d.red_start.x),
                values.get("red_start_y", d.red_start.y),
            ),
            blue_start=Point2(
                values.get("blue_start_x", d.blue_start.x),
                values.get("blue_start_y", d.blue_start.y),
            ),
            catch_eps=values.get("catch_eps", d.catch_eps),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def _deg(theta):
    deg = math.degrees(theta)
    short = round(deg, 9)
    return repr(short if math.radians(short) == theta else deg)


def format_config(cfg):
    lines = [
        f"t_total = {cfg.t_total}",
        f"v_mean_red = {cfg.v_mean_red!r}",
        f"v_std_red = {cfg.v_std_red!r}",
        f"theta_mean_red_deg = {_deg(cfg.theta_mean_red)}",
        f"theta_std_red_deg = {_deg(cfg.theta_std_red)}",
        f"v_cap = {cfg.v_cap!r}",
        f"safety_pct = {cfg.safety_pct!r}",
        f"red_start_x = {cfg.red_start.x!r}",
        f"red_start_y = {cfg.red_start.y!r}",
        f"blue_start_x = {cfg.blue_start.x!r}",
        f"blue_start_y = {cfg.blue_start.y!r}",
        f"catch_eps = {cfg.catch_eps!r}",
    ]
    return "\n".join(lines) + "\n"


def config_digest(cfg):
    """Short hash of the in-memory (radian) values; stable across file formatting."""
    payload = {
        "t_total": cfg.t_total,
        "v_mean_red": cfg.v_mean_red,
        "v_std_red": cfg.v_std_red,
        "theta_mean_red": cfg.theta_mean_red,
        "theta_std_red": cfg.theta_std_red,
        "v_cap": cfg.v_cap,
        "safety_pct": cfg.safety_pct,
        "red_start": list(cfg.red_start),
        "blue_start": list(cfg.blue_start),
        "catch_eps": cfg.catch_eps,
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
