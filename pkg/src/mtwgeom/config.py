"""Plain-text experiment configuration.

One ``key = value`` per line; ``#`` starts a comment; keys use underscores
(command-line flags use dashes for the same keys).  Vectors are written
comma-separated, e.g. ``x0 = 0.1, -0.2``.  Unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list:
    parts = [t for t in text.replace(",", " ").split() if t]
    if not parts:
        raise ValueError("empty vector")
    return [float(t) for t in parts]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (parser, help)
KEYS = {
    "cost": (str, "built-in cost name"),
    "params": (_floats, "cost family parameters"),
    "eps": (float, "perturbed_quadratic strength (shortcut for params)"),
    "power": (float, "power_p exponent (shortcut for params)"),
    "dim": (int, "dimension"),
    "excluded_radius": (float, "excluded diagonal radius for singular costs"),
    "omega_lower": (_floats, "source box lower corner"),
    "omega_upper": (_floats, "source box upper corner"),
    "omega_star_lower": (_floats, "target box lower corner"),
    "omega_star_upper": (_floats, "target box upper corner"),
    "method": (str, "MTW checker: a3v, codim1 or tensor"),
    "budget": (int, "number of sampled configurations"),
    "samples": (int, "number of sampled pairs (a1a2)"),
    "configs": (int, "number of section configurations"),
    "seed": (int, "random seed"),
    "tol": (float, "tolerance override"),
    "resolution": (int, "grid resolution per axis"),
    "theta": (float, "section parameter"),
    "thetas": (_floats, "list of theta values"),
    "ball_radius": (float, "ball radius around x0"),
    "x": (_floats, "source point"),
    "y": (_floats, "target point"),
    "p": (_floats, "momentum p = -c_x(x, y)"),
    "y_init": (_floats, "Newton seed"),
    "x0": (_floats, "section anchor"),
    "y0": (_floats, "first target"),
    "y1": (_floats, "second target"),
    "phi": (str, "grid potential file"),
    "out": (str, "output path"),
    "record": (str, "append run records to this file"),
    "binary": (_bool, "write binary grid potentials"),
    "star": (_bool, "apply the c*-transform instead"),
    "r_local": (float, "local ball radius"),
    "potentials": (int, "number of random potentials"),
    "kind": (str, "random potential kind: affine or smooth"),
}


def parse_value(key: str, text: str):
    if key not in KEYS:
        raise ConfigError(f"unknown configuration key {key!r}")
    try:
        return KEYS[key][0](text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}") from None


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            out[key] = parse_value(key, val)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return out


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text)


def dump_config(cfg: dict) -> str:
    lines = []
    for k in sorted(cfg):
        v = cfg[k]
        if isinstance(v, (list, tuple)):
            v = ", ".join(repr(float(t)) for t in v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


def digest(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
