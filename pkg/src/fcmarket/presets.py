"""Reference experiment recipes, one preset file per figure.

Each preset file is read on top of ``presets/reference.ini``. Its ``[model]``,
``[run]`` and ``[selforg]`` sections form the shared base and every
``[member NAME]`` section lists ``section.key`` overrides for one run.
"""

from __future__ import annotations

from importlib import resources

from .config import (
    ConfigError,
    _line_index,
    _read,
    _typed_sections,
    apply_overrides,
    build_config,
    parse_overrides,
)
from .engine import SimConfig, derive_seeds

PRESET_NAMES = ("fig1_dist", "fig2_intermittency", "fig3_sf", "fig4_volatility", "fig5_selforg")


class UnknownPresetError(ConfigError, KeyError):
    pass


def _text(filename: str) -> str:
    return resources.files("fcmarket").joinpath("presets", filename).read_text()


def reference_config() -> SimConfig:
    return build_config(_typed_sections(_read(_text("reference.ini"), "reference.ini"), {}, "reference.ini"))


def preset_members(name: str) -> list[tuple[str, SimConfig]]:
    if name not in PRESET_NAMES:
        raise UnknownPresetError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    source = f"{name}.ini"
    text = _text("reference.ini") + "\n" + _text(source)
    cp = _read(text, source)
    lines = _line_index(_text(source))
    skip = lambda s: s == "preset" or s.startswith("member ")  # noqa: E731
    base = build_config(_typed_sections(cp, lines, source, skip=skip))
    members = []
    for section in cp.sections():
        if section.startswith("member "):
            overrides = parse_overrides(cp, section, source, lines)
            members.append((section[len("member "):].strip(), apply_overrides(base, overrides)))
    if not members:
        members.append((name, base))
    return members


def preset(name: str) -> list[SimConfig]:
    """The reference configurations of one figure recipe."""
    return [c for _, c in preset_members(name)]


def preset_description(name: str) -> str:
    preset_members(name)
    cp = _read(_text(f"{name}.ini"), name)
    return cp.get("preset", "description", fallback="")


def reseeded(configs: list[SimConfig], replicate: int, n_replicates: int) -> list[SimConfig]:
    """Replicate ``replicate`` of a preset: each member gets its derived seed."""
    return [c.replace(seed=derive_seeds(c.seed, n_replicates)[replicate]) for c in configs]
