"""Scenario configuration: INI files with sections, validated against a schema.

Example::

    [scenario]
    t0 = 0
    T = 1
    r0 = 0
    x = 1

    [model]
    preset = gaussian
    alpha = 0.3
    beta = 1.0

    [generator]
    family = case1_sqrt
    level = 0.5

    [grid]
    n_steps = 100
    n_paths = 50000
    seed = 20240101

Unknown sections or keys are rejected. Model and payoff sections accept the
keyword arguments of the chosen preset factory.
"""
from __future__ import annotations

import configparser
import copy
import inspect
import json
import math
from dataclasses import dataclass, field

from .generators import FAMILIES
from .market import MODEL_PRESETS
from .pricing import PAYOFF_PRESETS


class ConfigError(ValueError):
    """Validation failure; ``field`` names the offending section.key."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


DEFAULT_TOLERANCES = {
    "closed_form": 1e-7,
    "duality": 1e-7,
    "analytic": 1e-9,
    "bsde_abs": 2e-2,
    "mc_sigmas": 3.0,
    "malliavin_rel": 1e-2,
    "fixed_point": 1e-4,
}

# section -> {key: (type, default)}; default None means required
SCHEMA = {
    "scenario": {"t0": (float, 0.0), "T": (float, 1.0), "r0": (float, 0.0), "x": (float, 0.0)},
    "generator": {"family": (str, "case1_sqrt"), "level": (float, 0.5), "decay": (float, 0.0)},
    "grid": {
        "n_steps": (int, 100),
        "n_paths": (int, 50000),
        "seed": (int, 20240101),
        "antithetic": (bool, True),
        "basis_degree": (int, 4),
    },
    "constraint": {"lower": (float, -math.inf), "upper": (float, math.inf)},
    "tables": {
        "x_values": (list, [0.0, 1.0, 2.0]),
        "r_values": (list, [-1.0, 0.0, 1.0]),
        "time_points": (int, 5),
        "mu_min": (float, -1.5),
        "mu_max": (float, 1.5),
        "mu_count": (int, 31),
        "samples": (int, 200),
    },
    "tolerances": {k: (float, v) for k, v in DEFAULT_TOLERANCES.items()},
    "output": {"dir": (str, "out"), "timestamp": (bool, False)},
}
PRESET_SECTIONS = {"model": MODEL_PRESETS, "payoff": PAYOFF_PRESETS}
PRESET_DEFAULTS = {"model": "gaussian", "payoff": "linear"}


def _convert(section, key, typ, raw):
    where = f"{section}.{key}"
    if isinstance(raw, str):
        raw = raw.strip()
    try:
        if typ is bool:
            if isinstance(raw, bool):
                return raw
            low = str(raw).lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(raw)
        if typ is float:
            return float(raw)
        if typ is list:
            items = raw if isinstance(raw, list) else [v for v in str(raw).split(",") if v.strip()]
            return [float(v) for v in items]
        return str(raw)
    except (TypeError, ValueError):
        raise ConfigError(where, f"cannot read {raw!r} as {typ.__name__}") from None


def _preset_params(section, registry, preset, raw_items):
    if preset not in registry:
        raise ConfigError(f"{section}.preset", f"unknown preset {preset!r}; known: {sorted(registry)}")
    sig = inspect.signature(registry[preset])
    params = {}
    for key, raw in raw_items.items():
        if key == "preset":
            continue
        if key not in sig.parameters:
            raise ConfigError(f"{section}.{key}", f"not a parameter of preset {preset!r}")
        params[key] = _convert(section, key, float, raw)
    for name, p in sig.parameters.items():
        if name not in params and p.default is not inspect.Parameter.empty:
            params[name] = float(p.default)
    return params


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: dict
    model: dict
    generator: dict
    grid: dict
    payoff: dict
    constraint: dict
    tables: dict
    tolerances: dict
    output: dict = field(compare=False)

    SECTIONS = ("scenario", "model", "generator", "grid", "payoff", "constraint", "tables", "tolerances", "output")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = data or {}
        for section in data:
            if section not in cls.SECTIONS:
                raise ConfigError(section, "unknown section")
        out = {}
        for section, keys in SCHEMA.items():
            raw = dict(data.get(section, {}))
            for key in raw:
                if key not in keys:
                    raise ConfigError(f"{section}.{key}", "unknown key")
            out[section] = {k: _convert(section, k, typ, raw[k]) if k in raw else copy.deepcopy(default)
                            for k, (typ, default) in keys.items()}
        for section, registry in PRESET_SECTIONS.items():
            raw = dict(data.get(section, {}))
            preset = str(raw.get("preset", PRESET_DEFAULTS[section])).strip()
            out[section] = {"preset": preset, **_preset_params(section, registry, preset, raw)}
        cfg = cls(**out)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        parser.optionxform = str
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError("file", str(exc)) from None
        return cls.from_dict({s: dict(parser.items(s)) for s in parser.sections()})

    def validate(self):
        sc, gr = self.scenario, self.grid
        if not sc["T"] > sc["t0"]:
            raise ConfigError("scenario.T", "must exceed t0")
        for key in ("n_steps", "n_paths", "basis_degree"):
            if gr[key] < 1:
                raise ConfigError(f"grid.{key}", "must be positive")
        if gr["antithetic"] and gr["n_paths"] % 2:
            raise ConfigError("grid.n_paths", "must be even with antithetic sampling")
        if self.generator["family"] not in FAMILIES:
            raise ConfigError("generator.family", f"choose from {FAMILIES}")
        if self.generator["level"] <= 0:
            raise ConfigError("generator.level", "must be positive")
        if self.generator["decay"] < 0:
            raise ConfigError("generator.decay", "must be non-negative")
        if not self.constraint["lower"] <= self.constraint["upper"]:
            raise ConfigError("constraint.lower", "must not exceed constraint.upper")
        if self.tables["mu_count"] < 1 or self.tables["samples"] < 1 or self.tables["time_points"] < 1:
            raise ConfigError("tables", "counts must be positive")

    def with_overrides(self, seed=None, n_paths=None, n_steps=None, out_dir=None) -> "ScenarioConfig":
        d = self.to_dict()
        if seed is not None:
            d["grid"]["seed"] = seed
        if n_paths is not None:
            d["grid"]["n_paths"] = n_paths
        if n_steps is not None:
            d["grid"]["n_steps"] = n_steps
        if out_dir is not None:
            d["output"]["dir"] = str(out_dir)
        return ScenarioConfig.from_dict(d)

    def to_dict(self) -> dict:
        return {s: copy.deepcopy(getattr(self, s)) for s in self.SECTIONS}

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def echo(self) -> dict:
        """Everything that determines the numbers; the output location is left out."""
        d = self.to_dict()
        del d["output"]
        return d


# --- serialization -------------------------------------------------------

def _fmt_float(v: float, digits: int) -> str:
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    text = f"{v:.{digits}g}"
    # keep the float type visible to readers of the JSON
    return text if any(ch in text for ch in ".en") else text + ".0"


def dumps(obj, digits: int = 17) -> str:
    """Compact JSON with floats at a fixed number of significant digits."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj, digits)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v, digits)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v, digits) for v in obj) + "]"
    if hasattr(obj, "item"):
        return dumps(obj.item(), digits)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _revive(obj):
    if isinstance(obj, dict):
        return {k: _revive(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_revive(v) for v in obj]
    if obj in ("nan", "inf", "-inf"):
        return float(obj)
    return obj


def loads(text: str):
    return _revive(json.loads(text))


def csv_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float) or hasattr(v, "dtype"):
        v = float(v)
        if math.isnan(v) or math.isinf(v):
            return str(v)
        return f"{v:.12g}"
    if v is None:
        return ""
    return str(v)


def config_from_echo(path) -> ScenarioConfig:
    """Parse the resolved configuration echoed into a CSV or JSON report."""
    with open(path) as fh:
        text = fh.read()
    if path.__str__().endswith(".json"):
        return ScenarioConfig.from_dict(loads(text)["config"])
    first = text.splitlines()[0]
    if not first.startswith("# config: "):
        raise ConfigError("file", "no configuration echo in header")
    return ScenarioConfig.from_dict(loads(first[len("# config: "):]))
