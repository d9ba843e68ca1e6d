"""Scenario configuration files.

A configuration is an INI document with typed ``key = value`` entries in the
sections ``scenario``, ``gains``, ``softplus``, ``extrapolation``,
``identifier``, ``sim``, ``output``, ``compare`` and ``sweep``. Every key
belongs to exactly one section, so overrides may name it bare (``dt=1e-4``)
or qualified (``sim.dt=1e-4``). Unknown sections and keys are rejected.

Vectors are comma separated (``x0 = 1, 0.1``); lists of vectors separate
entries with semicolons (``initial_conditions = 1,0.1; -1,1``).
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import barrier as blf
from .basis import DEFAULT_BASIS, get_basis
from .dynamics import builtin_system, system_names
from .engine import CONTROLLERS, Hyperparams, Scenario, SimConfig

SCENARIO_DIR = Path(__file__).with_name("scenarios")
OUT_ENV = "ACIL_OUT"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _vector(text: str) -> np.ndarray:
    text = text.strip()
    if not text:
        return np.zeros(0)
    return np.array([float(v) for v in text.split(",")])


def _vectors(text: str) -> list:
    return [_vector(part) for part in text.split(";") if part.strip()]


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _words(text: str) -> list:
    return [w.strip() for w in text.split(",") if w.strip()]


def _optional_float(text: str):
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


def _str(text: str) -> str:
    return text.strip()


@dataclass(frozen=True)
class Key:
    section: str
    parse: Callable[[str], Any]
    default: Any


SCHEMA: dict[str, Key] = {
    # scenario
    "system": Key("scenario", _str, None),
    "blf": Key("scenario", _str, None),
    "obstacles": Key("scenario", _str, ""),
    "basis": Key("scenario", _str, ""),
    "x0": Key("scenario", _vector, None),
    "W_a0": Key("scenario", _vector, None),
    "W_c0": Key("scenario", _vector, None),
    "theta0": Key("scenario", _vector, None),
    "box": Key("scenario", _vectors, None),
    "controller": Key("scenario", _str, "acil"),
    "c_b": Key("scenario", float, 0.075),
    "known_theta": Key("scenario", _bool, False),
    "seed": Key("scenario", int, 0),
    # learner
    "eta_c1": Key("gains", float, 0.1),
    "eta_c2": Key("gains", float, 1.0),
    "eta_a1": Key("gains", float, 0.1),
    "eta_a2": Key("gains", float, 1.0),
    "nu": Key("gains", float, 5.0),
    "beta": Key("gains", float, 0.01),
    "gamma0": Key("gains", float, 10.0),
    "wa_bar": Key("gains", _optional_float, None),
    "actor_rho_power": Key("gains", int, 1),
    "k": Key("softplus", float, 0.02),
    "k_sb": Key("softplus", float, 0.2),
    "n_points": Key("extrapolation", int, 20),
    "extrapolation": Key("extrapolation", _str, "fixed"),
    "k_theta": Key("identifier", float, 5.0),
    "id_gain": Key("identifier", float, 1.0),
    "id_gain_mode": Key("identifier", _str, "normalized"),
    "id_eps": Key("identifier", float, 1e-6),
    "window": Key("identifier", float, 0.5),
    "capacity": Key("identifier", int, 20),
    # integration and output
    "dt": Key("sim", float, 1e-3),
    "horizon": Key("sim", float, 20.0),
    "decimation": Key("output", int, 10),
    "out": Key("output", _str, "out"),
    "plots": Key("output", _bool, True),
    # batch commands
    "modes": Key("compare", _words, ["acil", "constant_lambda"]),
    "initial_conditions": Key("compare", _vectors, []),
    "known_theta_variant": Key("compare", _bool, False),
    "parameter": Key("sweep", _str, "k"),
    "values": Key("sweep", lambda t: [float(v) for v in _words(t)], []),
}

SECTIONS = tuple(dict.fromkeys(k.section for k in SCHEMA.values()))
HYPER_KEYS = tuple(f for f in Hyperparams.__dataclass_fields__)
SWEEPABLE = tuple(k for k in HYPER_KEYS + ("c_b",)
                  if SCHEMA[k].parse in (float, int, _optional_float))


def _parse_value(key: str, text: str):
    try:
        return SCHEMA[key].parse(text)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{key}: cannot parse {text!r} ({exc})") from None


def _resolve_key(name: str) -> str:
    name = name.strip()
    section = None
    if "." in name:
        section, name = name.split(".", 1)
    if name not in SCHEMA:
        raise ConfigError(f"unknown key {name!r}")
    if section is not None and SCHEMA[name].section != section:
        raise ConfigError(f"key {name!r} belongs to section [{SCHEMA[name].section}], "
                          f"not [{section}]")
    return name


def defaults() -> dict:
    return {k: key.default for k, key in SCHEMA.items()}


def parse_text(text: str, source: str = "<config>") -> dict:
    """Parse configuration text into a flat dict of typed values."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                   empty_lines_in_values=False)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values = defaults()
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in SCHEMA:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            if SCHEMA[key].section != section:
                raise ConfigError(f"{source}: key {key!r} belongs to [{SCHEMA[key].section}]")
            values[key] = _parse_value(key, raw)
    return values


def resolve_path(path) -> Path:
    """A config path, or the name of a built-in scenario (``deltawing``)."""
    p = Path(path)
    if p.exists():
        return p
    for cand in (SCENARIO_DIR / p.name, SCENARIO_DIR / f"{p.name}.cfg"):
        if cand.exists():
            return cand
    raise ConfigError(f"config file {str(path)!r} not found")


def load(path) -> dict:
    p = resolve_path(path)
    values = parse_text(p.read_text(), str(p))
    values["_dir"] = str(p.parent)
    return values


def apply_overrides(values: dict, overrides) -> dict:
    """Return a copy of ``values`` with ``key=value`` strings applied."""
    out = dict(values)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        name, text = item.split("=", 1)
        key = _resolve_key(name)
        out[key] = _parse_value(key, text)
    return out


def builtin_scenarios() -> list[str]:
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.cfg"))


# -- building simulation objects --------------------------------------------------

def _system(text: str):
    name, _, args = text.partition(":")
    params = [float(v) for v in args.split(",")] if args.strip() else []
    if name.strip() not in system_names():
        raise ConfigError(f"system: unknown system {name!r}; choose from {system_names()}")
    try:
        return builtin_system(name.strip(), *params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"system: {exc}") from None


def _barrier(text: str, obstacles: str, base_dir: str):
    """Build a BLF and its default bounding half-widths from ``kind:args`` text."""
    kind, _, args = text.partition(":")
    kind = kind.strip()
    try:
        if kind == "minefield":
            radius = float(args) if args.strip() else 10.0
            centers = None
            if obstacles:
                path = Path(obstacles)
                if not path.is_absolute():
                    path = Path(base_dir or ".") / path
                centers = blf.load_centers(path)
            return blf.minefield_barrier(centers, field_radius=radius), radius
        params = _vector(args)
        if kind == "box_log":
            return blf.box_log(params), params
        if kind in ("ball_log", "quartic_ratio"):
            if params.size != 1:
                raise ValueError(f"{kind} takes one parameter")
            return blf.make_blf(kind, float(params[0])), float(params[0])
        if kind == "inverse_obstacle":
            raise ValueError("inverse_obstacle has an unbounded safe set; use minefield")
        return blf.make_blf(kind), None
    except (ValueError, OSError) as exc:
        raise ConfigError(f"blf: {exc}") from None


def build(values: dict) -> SimConfig:
    """Turn parsed values into a validated :class:`SimConfig`."""
    for key in ("system", "blf", "x0"):
        if values.get(key) is None:
            raise ConfigError(f"{key}: required key is missing")
    model = _system(values["system"])
    barrier, half = _barrier(values["blf"], values["obstacles"], values.get("_dir", ""))
    basis_name = values["basis"] or DEFAULT_BASIS.get(model.name)
    if not basis_name:
        raise ConfigError(f"basis: no default basis for system {model.name!r}")
    try:
        basis = get_basis(basis_name)
    except ValueError as exc:
        raise ConfigError(f"basis: {exc}") from None

    if values["box"] is not None:
        if len(values["box"]) != 2:
            raise ConfigError("box: expected 'low; high'")
        box = tuple(values["box"])
    else:
        w = np.broadcast_to(np.asarray(half, dtype=float), (model.n,))
        box = (-w.copy(), w.copy())

    if values["controller"] not in CONTROLLERS:
        raise ConfigError(f"controller: unknown mode {values['controller']!r}; "
                          f"choose from {CONTROLLERS}")
    zeros = np.zeros(basis.b)
    W_a0 = values["W_a0"] if values["W_a0"] is not None else zeros
    W_c0 = values["W_c0"] if values["W_c0"] is not None else W_a0

    hp_kwargs = {k: values[k] for k in HYPER_KEYS}
    try:
        hp = Hyperparams(**hp_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        sc = Scenario(model, barrier, basis, values["x0"], W_a0, W_c0, box,
                      theta0=values["theta0"], controller=values["controller"],
                      c_b=values["c_b"], known_theta=values["known_theta"], seed=values["seed"])
        return SimConfig(sc, hp, dt=values["dt"], horizon=values["horizon"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def output_dir(values: dict, flag=None) -> Path:
    """``--out`` wins, then the ``ACIL_OUT`` environment variable, then the file."""
    return Path(flag or os.environ.get(OUT_ENV) or values["out"])
