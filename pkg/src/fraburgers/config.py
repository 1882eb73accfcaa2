"""Run configuration: one INI file per run.

Every section maps onto a dataclass; unknown sections or keys are errors so
that a typo never silently falls back to a default.  Lengths may be written
as multiples of pi (``16pi``, ``pi``, ``0.5pi``).  Example::

    [grid]
    n_modes = 256
    half_period = 16pi

    [params]
    alpha = 1.2
    dt = 0.01
    t_end = 20

    [forcing]
    seed = 7
    target_x_norm = auto-gate
    margin = 0.5
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, fields
from typing import Any

from .errors import ConfigError, ContractViolation
from .forcing import AUTO_GATE, ForcingSpec
from .spectral import Grid, Params

_PI_RE = re.compile(r"^\s*([-+]?[0-9.eE+-]*)\s*\*?\s*pi\s*$")


def parse_real(text: str) -> float:
    s = text.strip().lower()
    m = _PI_RE.match(s)
    try:
        if m:
            coef = m.group(1)
            return (float(coef) if coef not in ("", "+", "-") else float(coef + "1")) * math.pi
        return float(s)
    except ValueError:
        raise ConfigError(f"not a real number: {text!r}") from None


def parse_bool(text: str) -> bool:
    s = text.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_int(text: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}") from None


def parse_real_or_auto(text: str):
    return "auto" if text.strip().lower() == "auto" else parse_real(text)


@dataclass
class EvolveConfig:
    u0_amplitude: float = 0.0
    u0_seed: int = 0
    u0_k_max: float = 4.0
    stride: int = 10


@dataclass
class SteadyConfig:
    tol: float = 1e-10
    max_iter: int = 40
    tail_tol: float = 1e-10
    max_time: float = 1000.0
    n_perturb: int = 5
    perturb_seed: int = 0
    workers: int = 1


@dataclass
class DecayConfig:
    stride: int = 10
    window_start: float = 0.0
    window_end: Any = "auto"
    slack: float = 1e-6


@dataclass
class StabilityConfig:
    theta_fraction: float = 0.1
    theta_seed: int = 1
    stride: int = 10
    threshold: float = 1e-3


@dataclass
class DeGiorgiConfig:
    t0: float = 1.0
    n_max: int = 6
    u0_amplitude: float = 1.0
    u0_seed: int = 0
    u0_k_max: float = 4.0
    level_constant: Any = "auto"
    target: float = 1e-8
    tol: float = 1e-8
    stride: int = 1


@dataclass
class VerifyConfig:
    family_size: int = 100
    seed: int = 0
    lp: float = 4.0


_SECTION_TYPES = {
    "evolve": EvolveConfig,
    "steady": SteadyConfig,
    "decay": DecayConfig,
    "stability": StabilityConfig,
    "degiorgi": DeGiorgiConfig,
    "verify": VerifyConfig,
}

_AUTO_FIELDS = {("decay", "window_end"), ("degiorgi", "level_constant")}


@dataclass
class RunConfig:
    grid: Grid
    params: Params
    forcing: ForcingSpec
    evolve: EvolveConfig = field(default_factory=EvolveConfig)
    steady: SteadyConfig = field(default_factory=SteadyConfig)
    decay: DecayConfig = field(default_factory=DecayConfig)
    stability: StabilityConfig = field(default_factory=StabilityConfig)
    degiorgi: DeGiorgiConfig = field(default_factory=DeGiorgiConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    text: str = ""

    def echo(self) -> dict:
        """Parsed values, for the manifest."""
        out = {
            "grid": {"n_modes": self.grid.n_modes, "half_period": self.grid.half_period},
            "params": {f.name: getattr(self.params, f.name) for f in fields(Params)},
            "forcing": {f.name: getattr(self.forcing, f.name) for f in fields(ForcingSpec)},
        }
        for name in _SECTION_TYPES:
            sec = getattr(self, name)
            out[name] = {f.name: getattr(sec, f.name) for f in fields(sec)}
        return out


def _convert(section: str, key: str, raw: str, default):
    if (section, key) in _AUTO_FIELDS:
        return parse_real_or_auto(raw)
    if isinstance(default, bool):
        return parse_bool(raw)
    if isinstance(default, int):
        return parse_int(raw)
    if isinstance(default, float):
        return parse_real(raw)
    return raw.strip()


def _section(parser, name, defaults: dict) -> dict:
    if not parser.has_section(name):
        return dict(defaults)
    out = dict(defaults)
    for key, raw in parser.items(name):
        if key not in defaults:
            raise ConfigError(f"unknown key [{name}] {key}")
        out[key] = _convert(name, key, raw, defaults[key])
    return out


def _defaults(cls) -> dict:
    return {f.name: cls.__dataclass_fields__[f.name].default for f in fields(cls)}


_GRID_DEFAULTS = {"n_modes": 256, "half_period": 16 * math.pi}
_PARAM_DEFAULTS = {"alpha": 1.2, "eps": 0.1, "rho": 1.0, "nu": 0.0, "dt": 0.01, "t_end": 1.0}
_FORCING_DEFAULTS = {
    "seed": 0,
    "rho": "params",
    "k_max_frac": 0.25,
    "target_x_norm": AUTO_GATE,
    "margin": 0.5,
    "profile": "random-phase",
}


def loads(text: str) -> RunConfig:
    parser = configparser.ConfigParser(
        interpolation=None, default_section="__none__", inline_comment_prefixes=(";", "#")
    )
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    known = {"grid", "params", "forcing", *_SECTION_TYPES}
    for s in parser.sections():
        if s not in known:
            raise ConfigError(f"unknown section [{s}]")
    try:
        g = _section(parser, "grid", _GRID_DEFAULTS)
        grid = Grid(g["n_modes"], g["half_period"])
        pr = _section(parser, "params", _PARAM_DEFAULTS)
        params = Params(**pr)
        fr = _section(parser, "forcing", _FORCING_DEFAULTS)
        rho = params.rho if fr["rho"] == "params" else parse_real(fr["rho"])
        target = fr["target_x_norm"]
        if target != AUTO_GATE:
            target = parse_real(target)
        forcing = ForcingSpec(
            fr["seed"], rho, fr["k_max_frac"], target, fr["margin"], fr["profile"]
        )
        sections = {
            name: cls(**_section(parser, name, _defaults(cls)))
            for name, cls in _SECTION_TYPES.items()
        }
    except ContractViolation as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(grid, params, forcing, text=text, **sections)


def load(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return loads(text)
