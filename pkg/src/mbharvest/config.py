"""JSON scenario documents.

Quantities may be written as SI floats or as strings with a unit suffix
(``"0 dBm"``, ``"2.68 GHz"``, ``"1 us"``).  Every omitted field takes its
reference default, so the empty document ``{}`` describes the reference
60-SU, seven-band, 40 m x 40 m network.

Example::

    {
      "seed": 3,
      "n_sus": 60,
      "pu_positions": "center",
      "bands": [{"frequency": "0.9 GHz", "pu_power": "30 dBm"}],
      "sensing": {"sensing_power": "0 dBm", "harvest_threshold": "-20 dBm"},
      "mode": "svm",
      "training_fraction": 0.5
    }
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, fields
from typing import Any

from . import core
from .core import Band, ChannelParams, SensingConfig
from .errors import ConfigError
from .simulator import REFERENCE_FREQUENCIES, Scenario, place_random

_SCALE = {
    "power": {"W": 1.0, "mW": 1e-3, "uW": 1e-6},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "μs": 1e-6, "ns": 1e-9},
    "energy": {"J": 1.0, "mJ": 1e-3, "uJ": 1e-6},
    "length": {"m": 1.0, "km": 1e3},
    "speed": {"m/s": 1.0},
}
_LOG_POWER = {"dBm": 0.0, "dBW": 30.0}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$")

_SENSING_KINDS = {
    "sample_time": "time", "slot_length": "time", "sensing_power": "power",
    "max_false_alarm": None, "min_detection": None, "min_samples": None,
    "harvest_threshold": "power", "n_slots": "int", "battery_threshold": "energy",
}
_CHANNEL_KINDS = {"tx_gain": None, "rx_gain": None, "speed_of_light": "speed", "noise_variance": "power"}
_BAND_KINDS = {"frequency": "frequency", "pu_power": "power", "efficiency": None, "activity": None}
_TOP_KEYS = {
    "seed", "arena", "n_sus", "su_positions", "pu_positions", "bands", "sensing", "channel", "mode",
    "training_fraction", "redraw_training", "penalty", "kernel", "constraint_form", "sca_tol",
    "max_sca_iter", "initial_battery",
}


def parse_quantity(value: Any, kind: str | None, path: str) -> float:
    """Convert a float or unit-suffixed string to SI."""
    if isinstance(value, bool):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if kind == "int":
        if isinstance(value, int) or (isinstance(value, float) and value.is_integer()):
            return int(value)
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if isinstance(value, (int, float)):
        out = float(value)
    elif isinstance(value, str):
        m = _QUANTITY.match(value)
        if not m:
            raise ConfigError(path, f"cannot read quantity {value!r}")
        number, unit = float(m.group(1)), m.group(2)
        if not unit:
            out = number
        elif kind == "power" and unit in _LOG_POWER:
            out = float(core.dbm_to_watt(number + _LOG_POWER[unit]))
        elif kind in _SCALE and unit in _SCALE[kind]:
            out = number * _SCALE[kind][unit]
        else:
            allowed = sorted(_SCALE.get(kind, {})) + (sorted(_LOG_POWER) if kind == "power" else [])
            raise ConfigError(path, f"unit {unit!r} not accepted here (allowed: {', '.join(allowed) or 'none'})")
    else:
        raise ConfigError(path, f"expected a number or quantity string, got {type(value).__name__}")
    if not math.isfinite(out):
        raise ConfigError(path, "value must be finite")
    return out


def _section(doc: dict, kinds: dict, path: str) -> dict:
    if not isinstance(doc, dict):
        raise ConfigError(path, "expected an object")
    unknown = set(doc) - set(kinds)
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown field")
    return {k: parse_quantity(v, kinds[k], f"{path}.{k}") for k, v in doc.items()}


def _points(value, path: str, n: int | None = None) -> list[tuple[float, float]]:
    if not isinstance(value, list):
        raise ConfigError(path, "expected a list of [x, y] pairs")
    if n is not None and len(value) != n:
        raise ConfigError(path, f"expected {n} positions, got {len(value)}")
    out = []
    for i, p in enumerate(value):
        if not (isinstance(p, (list, tuple)) and len(p) == 2):
            raise ConfigError(f"{path}[{i}]", "expected [x, y]")
        out.append((parse_quantity(p[0], "length", f"{path}[{i}][0]"),
                    parse_quantity(p[1], "length", f"{path}[{i}][1]")))
    return out


def _arena(value) -> tuple[float, float]:
    if isinstance(value, dict):
        unknown = set(value) - {"width", "height"}
        if unknown:
            raise ConfigError(f"arena.{sorted(unknown)[0]}", "unknown field")
        return (parse_quantity(value.get("width", 40.0), "length", "arena.width"),
                parse_quantity(value.get("height", 40.0), "length", "arena.height"))
    if isinstance(value, list) and len(value) == 2:
        return (parse_quantity(value[0], "length", "arena[0]"), parse_quantity(value[1], "length", "arena[1]"))
    raise ConfigError("arena", "expected {width, height} or [width, height]")


def _build(cls, kwargs, path):
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def _typed(doc, key, typ, default):
    value = doc.get(key, default)
    if typ is float:
        return parse_quantity(value, None, key)
    if typ is int:
        return parse_quantity(value, "int", key)
    if not isinstance(value, typ):
        raise ConfigError(key, f"expected {typ.__name__}, got {type(value).__name__}")
    return value


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ConfigError("", "top level must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    seed = _typed(doc, "seed", int, 0)
    arena = _arena(doc.get("arena", [40.0, 40.0]))

    sec = _section(doc.get("sensing", {}), _SENSING_KINDS, "sensing")
    for key, lo, hi in (("max_false_alarm", 0.0, 0.5), ("min_detection", 0.5, 1.0)):
        if key in sec and not lo < sec[key] < hi:
            raise ConfigError(f"sensing.{key}", f"must lie strictly between {lo} and {hi}, got {sec[key]}")
    sensing = _build(SensingConfig, sec, "sensing")
    channel = _build(ChannelParams, _section(doc.get("channel", {}), _CHANNEL_KINDS, "channel"), "channel")

    band_docs = doc.get("bands", [{"frequency": f} for f in REFERENCE_FREQUENCIES])
    if not isinstance(band_docs, list) or not band_docs:
        raise ConfigError("bands", "expected a non-empty list")
    bands = []
    for i, bd in enumerate(band_docs):
        bands.append(_build(Band, dict(index=i, **_section(bd, _BAND_KINDS, f"bands[{i}]")), f"bands[{i}]"))

    su = doc.get("su_positions", "random")
    if su == "random":
        n = _typed(doc, "n_sus", int, 60)
        if n < 1:
            raise ConfigError("n_sus", "need at least one SU")
        su_pos = place_random(n, arena, seed)
    else:
        su_pos = _points(su, "su_positions")
        if "n_sus" in doc and _typed(doc, "n_sus", int, 0) != len(su_pos):
            raise ConfigError("n_sus", "disagrees with the number of su_positions")

    pu = doc.get("pu_positions", "center")
    if pu == "center":
        pu_pos = [(arena[0] / 2.0, arena[1] / 2.0)] * len(bands)
    elif pu == "random":
        # separate stream so PU and SU layouts do not share draws
        pu_pos = place_random(len(bands), arena, [seed, 1])
    else:
        pu_pos = _points(pu, "pu_positions", len(bands))

    init = doc.get("initial_battery")
    try:
        return Scenario(
            arena=arena, bands=tuple(bands), pu_positions=pu_pos, su_positions=su_pos, sensing=sensing,
            channel=channel, mode=_typed(doc, "mode", str, "all-sensing"),
            training_fraction=_typed(doc, "training_fraction", float, 0.5),
            redraw_training=_typed(doc, "redraw_training", bool, False),
            penalty=_typed(doc, "penalty", float, 10.0), kernel=_typed(doc, "kernel", str, "rbf"),
            constraint_form=_typed(doc, "constraint_form", str, "corrected"),
            sca_tol=_typed(doc, "sca_tol", float, 1e-6), max_sca_iter=_typed(doc, "max_sca_iter", int, 50),
            initial_battery=None if init is None else parse_quantity(init, "energy", "initial_battery"),
            seed=seed,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("scenario", str(exc)) from exc


def parse_scenario(text: str) -> Scenario:
    """Parse a JSON scenario document; an empty string means ``{}``."""
    if not text.strip():
        return scenario_from_dict({})
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}", exc.msg) from exc
    return scenario_from_dict(doc)


def scenario_to_dict(scenario: Scenario) -> dict:
    """Fully explicit SI form, including every applied default."""
    return {
        "seed": scenario.seed,
        "arena": {"width": scenario.arena[0], "height": scenario.arena[1]},
        "n_sus": scenario.n_sus,
        "su_positions": [list(p) for p in scenario.su_positions],
        "pu_positions": [list(p) for p in scenario.pu_positions],
        "bands": [{k: v for k, v in asdict(b).items() if k != "index"} for b in scenario.bands],
        "sensing": {f.name: getattr(scenario.sensing, f.name) for f in fields(SensingConfig)},
        "channel": asdict(scenario.channel),
        "mode": scenario.mode,
        "training_fraction": scenario.training_fraction,
        "redraw_training": scenario.redraw_training,
        "penalty": scenario.penalty,
        "kernel": scenario.kernel,
        "constraint_form": scenario.constraint_form,
        "sca_tol": scenario.sca_tol,
        "max_sca_iter": scenario.max_sca_iter,
        "initial_battery": scenario.initial_battery,
    }


def serialize_scenario(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario), indent=2)

