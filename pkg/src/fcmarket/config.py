"""Configuration files.

Plain INI text with three sections; every key is optional and falls back to
the documented default::

    [model]
    b = 1.63
    gamma = 0.005
    sigma = 1.0
    p_f = 100.0
    B = 0.2
    r = 0.5
    delta = 0.165
    horizons = 10          ; comma separated, e.g. 5, 10, 20
    weights = 1.0          ; optional, defaults to equal weights
    exp_coupling = true
    price_floor =          ; empty means no floor

    [run]
    n_initial = 500
    steps = 100000
    seed = 0
    record_every = 1
    burn_in = 0
    initial_chartist_fraction = 0.0
    variance_window =      ; empty means not computed

    [selforg]              ; presence switches on the variable-N dynamics
    theta_in = 9.0
    theta_out = 1.1
    window_T = 20
    flow_rate = 1
    n_min = 20
    n_max = 10000
    entrant_strategy = proportional

Keys are case sensitive (``b`` and ``B`` are different parameters). Floats
are written with ``repr`` so a written file parses back to the identical
configuration.
"""

from __future__ import annotations

import configparser
import re
from pathlib import Path
from typing import Callable, Mapping

from .engine import SimConfig
from .params import HorizonPolicy, ModelError, ModelParams, ValidationError
from .selforg import SelfOrgPolicy


class ConfigError(ModelError):
    """A configuration file could not be parsed."""


MODEL_KEYS = {
    "b": float, "gamma": float, "sigma": float, "p_f": float, "B": float, "r": float, "delta": float,
    "horizons": "ints", "weights": "floats", "exp_coupling": bool, "price_floor": "optfloat",
}
RUN_KEYS = {
    "n_initial": int, "steps": int, "seed": int, "record_every": int, "burn_in": int,
    "initial_chartist_fraction": float, "variance_window": "optint",
}
SELFORG_KEYS = {
    "theta_in": float, "theta_out": float, "window_T": int, "flow_rate": int,
    "n_min": int, "n_max": int, "entrant_strategy": str,
}
SECTIONS = {"model": MODEL_KEYS, "run": RUN_KEYS, "selforg": SELFORG_KEYS}

_BOOL = {"true": True, "yes": True, "on": True, "1": True, "false": False, "no": False, "off": False, "0": False}


def _new_parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    return cp


def _line_index(text: str) -> dict[tuple[str, str], int]:
    lines: dict[tuple[str, str], int] = {}
    section = None
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"^\[(.+)\]$", s)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"^([^=:;#\s][^=:]*?)\s*[=:]", s)
        if m and section is not None:
            lines.setdefault((section, m.group(1).strip()), no)
    return lines


def _convert(kind, raw: str, where: str):
    raw = raw.strip()
    try:
        if kind is float:
            return float(raw)
        if kind is int:
            return int(raw, 0)
        if kind is bool:
            return _BOOL[raw.lower()]
        if kind is str:
            return raw
        if kind == "ints":
            return tuple(int(v, 0) for v in raw.split(",") if v.strip())
        if kind == "floats":
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if kind == "optfloat":
            return None if raw.lower() in ("", "none") else float(raw)
        if kind == "optint":
            return None if raw.lower() in ("", "none") else int(raw, 0)
    except (ValueError, KeyError):
        raise ConfigError(f"{where}: cannot parse {raw!r}") from None
    raise AssertionError(kind)


def _read(text: str, source: str):
    cp = _new_parser()
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    return cp


def _typed_sections(cp, lines, source: str, skip: Callable[[str], bool] = lambda name: False) -> dict[str, dict]:
    out: dict[str, dict] = {}
    for section in cp.sections():
        if skip(section):
            continue
        if section not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        schema = SECTIONS[section]
        values = {}
        for key, raw in cp.items(section):
            where = f"{source}:{lines.get((section, key), '?')}: [{section}] {key}"
            if key not in schema:
                raise ConfigError(f"{where}: unknown key")
            values[key] = _convert(schema[key], raw, where)
        out[section] = values
    return out


def build_config(sections: Mapping[str, Mapping]) -> SimConfig:
    """Assemble a validated SimConfig from typed section dictionaries."""
    model = dict(sections.get("model", {}))
    horizons = model.pop("horizons", None)
    weights = model.pop("weights", None)
    if horizons is None:
        if weights is not None:
            raise ValidationError("weights", "given without horizons")
        m_policy = ModelParams().m_policy
    else:
        m_policy = HorizonPolicy.mixed(horizons, weights)
    params = ModelParams(m_policy=m_policy, **model)
    run = dict(sections.get("run", {}))
    selforg = SelfOrgPolicy(**sections["selforg"]) if "selforg" in sections else None
    return SimConfig(params=params, selforg=selforg, **run)


def loads_config(text: str, source: str = "<string>") -> SimConfig:
    cp = _read(text, source)
    return build_config(_typed_sections(cp, _line_index(text), source))


def parse_config(path) -> SimConfig:
    """Read and validate a configuration file.

    Raises :class:`ConfigError` for syntax problems and unknown keys (with file
    and line) and :class:`ValidationError` naming the violated field.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return loads_config(text, str(path))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def config_sections(config: SimConfig) -> dict[str, dict]:
    p = config.params
    model = {
        "b": p.b, "gamma": p.gamma, "sigma": p.sigma, "p_f": p.p_f, "B": p.B, "r": p.r, "delta": p.delta,
        "horizons": p.m_policy.horizons, "weights": p.m_policy.weights,
        "exp_coupling": p.exp_coupling, "price_floor": p.price_floor,
    }
    run = {k: getattr(config, k) for k in RUN_KEYS}
    out = {"model": model, "run": run}
    if config.selforg is not None:
        out["selforg"] = {k: getattr(config.selforg, k) for k in SELFORG_KEYS}
    return out


def write_config(config: SimConfig) -> str:
    """Serialize a config; ``loads_config(write_config(c)) == c``."""
    chunks = []
    for section, values in config_sections(config).items():
        chunks.append(f"[{section}]")
        chunks.extend(f"{k} = {_fmt(v)}".rstrip() for k, v in values.items())
        chunks.append("")
    return "\n".join(chunks)


def apply_overrides(config: SimConfig, overrides: Mapping[str, object]) -> SimConfig:
    """Return ``config`` with dotted ``section.key`` overrides applied and revalidated."""
    sections = {s: dict(v) for s, v in config_sections(config).items()}
    for dotted, value in overrides.items():
        section, _, key = dotted.partition(".")
        if section not in SECTIONS or key not in SECTIONS[section]:
            raise ConfigError(f"unknown override key {dotted!r}")
        if section == "selforg" and "selforg" not in sections:
            sections["selforg"] = {k: getattr(SelfOrgPolicy(), k) for k in SELFORG_KEYS}
        sections[section][key] = value
        if section == "model" and key == "horizons" and "weights" not in overrides:
            sections["model"]["weights"] = None
    return build_config(sections)


def parse_overrides(cp, section: str, source: str, lines) -> dict[str, object]:
    """Typed ``section.key`` entries of one section of a preset or sweep file."""
    out = {}
    for dotted, raw in cp.items(section):
        sec, _, key = dotted.partition(".")
        where = f"{source}:{lines.get((section, dotted), '?')}: [{section}] {dotted}"
        if sec not in SECTIONS or key not in SECTIONS[sec]:
            raise ConfigError(f"{where}: unknown key")
        out[dotted] = _convert(SECTIONS[sec][key], raw, where)
    return out
