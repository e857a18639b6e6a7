"""Flat ``key = value`` run configuration with dotted keys.

Precedence, lowest first: built-in defaults, the chosen preset's
defaults, the file's keys, command-line overrides.  Unknown or repeated
keys and unparsable values raise :class:`ConfigError`.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Dict, Mapping, Optional

from .errors import ConfigError
from .grid import GridSpec
from .linstep import StepConfig
from .model import ModelParams
from .picard import PicardConfig
from .presets import PRESETS, preset_defaults


def _int(text):
    return int(text)


def _float(text):
    val = float(text)
    if not math.isfinite(val):
        raise ValueError(f"{text!r} is not finite")
    return val


def _bool(text):
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


def _optional(conv):
    def parse(text):
        return None if text.lower() in ("none", "") else conv(text)

    parse.__name__ = f"optional_{conv.__name__}"
    return parse


def _list(conv):
    def parse(text):
        return tuple(conv(part.strip()) for part in text.split(",") if part.strip())

    parse.__name__ = f"list_{conv.__name__}"
    return parse


def _str(text):
    return text


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"{text!r} is not one of {', '.join(options)}")
        return text

    parse.__name__ = "choice"
    return parse


# key -> (parser, default)
SCHEMA = {
    "grid.dim": (_int, 1),
    "grid.n": (_list(_int), (64,)),
    "grid.length": (_list(_float), (1.0,)),
    "grid.bc": (_choice("walls", "periodic"), "walls"),
    "params.mu": (_float, 1.0),
    "params.mu_t": (_float, 1.0),
    "params.mu_e": (_float, 2.0),
    "params.c1": (_float, 1.44),
    "params.c2": (_float, 1.92),
    "params.gamma": (_float, 1.4),
    "params.m": (_float, 0.1),
    "params.c_generic": (_float, 1.0),
    "time.dt": (_float, 1e-3),
    "time.t_end": (_float, 0.1),
    "picard.tol": (_float, 1e-10),
    "picard.relative": (_bool, True),
    "picard.max_outer": (_int, 40),
    "picard.ratio_window": (_int, 3),
    "picard.auto_shrink": (_bool, False),
    "picard.window": (_optional(_float), None),
    "linsolve.tol": (_float, 1e-10),
    "linsolve.maxit": (_int, 2000),
    "step.k_floor": (_optional(_float), None),
    "step.implicit_sink": (_bool, False),
    "step.cfl_max": (_float, 0.9),
    "init.preset": (_choice(*PRESETS), "uniform"),
    "init.files": (_optional(_list(_str)), None),
    "init.rho0": (_float, 1.0),
    "init.u0": (_float, 0.0),
    "init.h0": (_float, 0.0),
    "init.k0": (_float, 1.0),
    "init.eps0": (_float, 0.0),
    "init.amplitude": (_float, 1.0),
    "decay.tol_per_dt": (_float, 5.0),
    "output.dir": (_str, "keps_out"),
    "output.dump_every": (_int, 0),
    "output.norms_every": (_int, 1),
}

INIT_FILE_ORDER = ("rho", "u", "h", "k", "eps")


def parse_text(text, source="<config>"):
    """Raw ``{key: text}`` pairs from config text; rejects unknown and repeated keys."""
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in pairs:
            raise ConfigError(f"{source}:{lineno}: key {key!r} given twice")
        pairs[key] = value
    return pairs


def _convert(key, text, source):
    conv = SCHEMA[key][0]
    try:
        return conv(text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: bad value for {key}: {exc}") from None


def resolve(pairs: Mapping[str, str], overrides: Optional[Mapping[str, object]] = None,
            source="<config>"):
    """Typed effective configuration with defaults and preset defaults applied."""
    cfg: Dict[str, object] = {key: default for key, (_, default) in SCHEMA.items()}
    preset = _convert("init.preset", pairs["init.preset"], source) if "init.preset" in pairs else cfg["init.preset"]
    cfg.update(preset_defaults(preset))
    for key, text in pairs.items():
        cfg[key] = _convert(key, text, source)
    cfg["init.preset"] = preset
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = value
    if isinstance(cfg["grid.n"], int):
        cfg["grid.n"] = (cfg["grid.n"],)
    if isinstance(cfg["grid.length"], float):
        cfg["grid.length"] = (cfg["grid.length"],)
    _check(cfg)
    return cfg


def _check(cfg):
    dim = cfg["grid.dim"]
    if dim not in (1, 2, 3):
        raise ConfigError(f"grid.dim must be 1, 2 or 3, got {dim}")
    for key in ("grid.n", "grid.length"):
        if len(cfg[key]) == 1:
            cfg[key] = cfg[key] * dim
        if len(cfg[key]) != dim:
            raise ConfigError(f"{key} needs 1 or {dim} entries, got {len(cfg[key])}")
    files = cfg["init.files"]
    if files is not None and len(files) != len(INIT_FILE_ORDER):
        raise ConfigError(
            f"init.files needs {len(INIT_FILE_ORDER)} paths ({', '.join(INIT_FILE_ORDER)})"
        )
    if cfg["output.dump_every"] < 0 or cfg["output.norms_every"] < 1:
        raise ConfigError("output.dump_every must be >= 0 and output.norms_every >= 1")


def load(path=None, overrides=None):
    """Read and resolve a config file (``None`` means defaults only)."""
    if path is None:
        return resolve({}, overrides)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return resolve(parse_text(text, str(path)), overrides, str(path))


def format_value(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def echo(cfg):
    """The effective configuration as config text; parsing it back reproduces ``cfg``."""
    return "\n".join(f"{key} = {format_value(cfg[key])}" for key in SCHEMA) + "\n"


# -- builders ---------------------------------------------------------------


def build_grid(cfg):
    try:
        return GridSpec.box(cfg["grid.n"], cfg["grid.length"], periodic=cfg["grid.bc"] == "periodic")
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None


def build_params(cfg):
    try:
        return ModelParams(
            mu=cfg["params.mu"],
            mu_t=cfg["params.mu_t"],
            mu_e=cfg["params.mu_e"],
            c1=cfg["params.c1"],
            c2=cfg["params.c2"],
            gamma=cfg["params.gamma"],
            m=cfg["params.m"],
            c_generic=cfg["params.c_generic"],
        )
    except ValueError as exc:
        raise ConfigError(f"params: {exc}") from None


def build_step(cfg):
    try:
        return StepConfig(
            dt=cfg["time.dt"],
            lin_tol=cfg["linsolve.tol"],
            lin_maxit=cfg["linsolve.maxit"],
            k_floor=cfg["step.k_floor"],
            implicit_sink=cfg["step.implicit_sink"],
            cfl_max=cfg["step.cfl_max"],
        )
    except ValueError as exc:
        raise ConfigError(f"step: {exc}") from None


def build_picard(cfg):
    try:
        return PicardConfig(
            horizon=cfg["time.t_end"],
            max_outer=cfg["picard.max_outer"],
            tol_phi=cfg["picard.tol"],
            relative=cfg["picard.relative"],
            ratio_window=cfg["picard.ratio_window"],
            auto_shrink=cfg["picard.auto_shrink"],
        )
    except ValueError as exc:
        raise ConfigError(f"picard: {exc}") from None
