"""Grid and random parameter sweeps.

A sweep file is an ordinary configuration file (the base run) plus::

    [sweep]
    mode = grid            ; or random
    samples = 20           ; random mode only
    seed = 7               ; random mode only, drives the parameter draws
    replicates = 1         ; seeds per point, derived from run.seed when > 1

    [grid]                 ; every combination (grid) or a uniform choice (random)
    model.b = 1.2, 1.4, 1.6
    run.n_initial = 50, 500, 5000
    model.horizons = 10 | 5, 10, 20      ; tuple-valued keys use | between values

    [range]                ; random mode only: uniform on [low, high]
    model.gamma = 0.001, 0.1

With a single point and one replicate the run is the base configuration
itself, so its time series is byte-identical to ``fcmarket simulate``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from statistics import median

import numpy as np

from .config import (
    SECTIONS,
    ConfigError,
    _convert,
    _line_index,
    _read,
    _typed_sections,
    apply_overrides,
    build_config,
)
from .engine import RunFailure, SimConfig, SimOutput, derive_seeds
from .stats import InsufficientDataError, ZeroVarianceError, excess_kurtosis, volatility_clustering_report
from .strategy import residence_times

SWEEP_SECTIONS = ("sweep", "grid", "range")
_TUPLE_KINDS = ("ints", "floats")


@dataclass(frozen=True)
class SweepSpec:
    base: SimConfig
    mode: str
    grid: dict[str, list]
    ranges: dict[str, tuple[float, float]]
    samples: int = 1
    seed: int = 0
    replicates: int = 1

    def points(self) -> list[dict]:
        """Override dictionaries, one per parameter point, in a fixed order."""
        if self.mode == "grid":
            keys = list(self.grid)
            return [dict(zip(keys, combo)) for combo in itertools.product(*(self.grid[k] for k in keys))]
        rng = np.random.Generator(np.random.PCG64(self.seed))
        out = []
        for _ in range(self.samples):
            point = {}
            for key, values in self.grid.items():
                point[key] = values[int(rng.integers(len(values)))]
            for key, (lo, hi) in self.ranges.items():
                if _kind(key) is int:
                    point[key] = int(rng.integers(int(lo), int(hi), endpoint=True))
                else:
                    point[key] = float(rng.uniform(lo, hi))
            out.append(point)
        return out

    def configs(self) -> list[tuple[dict, SimConfig]]:
        runs = []
        for point in self.points():
            cfg = apply_overrides(self.base, point) if point else self.base
            if self.replicates == 1:
                runs.append((point, cfg))
            else:
                for s in derive_seeds(cfg.seed, self.replicates):
                    runs.append((point, cfg.replace(seed=s)))
        return runs


def _kind(dotted: str):
    section, _, key = dotted.partition(".")
    if section not in SECTIONS or key not in SECTIONS[section]:
        raise ConfigError(f"unknown sweep key {dotted!r}")
    return SECTIONS[section][key]


def loads_sweep(text: str, source: str = "<string>") -> SweepSpec:
    cp = _read(text, source)
    lines = _line_index(text)
    base = build_config(_typed_sections(cp, lines, source, skip=lambda s: s in SWEEP_SECTIONS))

    def where(section, key):
        return f"{source}:{lines.get((section, key), '?')}: [{section}] {key}"

    opts = dict(cp.items("sweep")) if cp.has_section("sweep") else {}
    unknown = set(opts) - {"mode", "samples", "seed", "replicates"}
    if unknown:
        raise ConfigError(f"{where('sweep', sorted(unknown)[0])}: unknown key")
    mode = opts.get("mode", "grid").strip()
    if mode not in ("grid", "random"):
        raise ConfigError(f"{where('sweep', 'mode')}: must be grid or random")
    samples = _convert(int, opts.get("samples", "1"), where("sweep", "samples"))
    seed = _convert(int, opts.get("seed", "0"), where("sweep", "seed"))
    replicates = _convert(int, opts.get("replicates", "1"), where("sweep", "replicates"))
    if samples < 1 or replicates < 1:
        raise ConfigError(f"{source}: samples and replicates must be >= 1")

    grid: dict[str, list] = {}
    if cp.has_section("grid"):
        for key, raw in cp.items("grid"):
            kind = _kind(key)
            parts = raw.split("|") if kind in _TUPLE_KINDS else raw.split(",")
            values = [_convert(kind, v, where("grid", key)) for v in parts if v.strip()]
            if not values:
                raise ConfigError(f"{where('grid', key)}: no values")
            grid[key] = values
    ranges: dict[str, tuple[float, float]] = {}
    if cp.has_section("range"):
        if mode != "random":
            raise ConfigError(f"{source}: [range] requires mode = random")
        for key, raw in cp.items("range"):
            kind = _kind(key)
            if kind not in (int, float):
                raise ConfigError(f"{where('range', key)}: only scalar numeric keys can take a range")
            parts = [v for v in raw.split(",") if v.strip()]
            if len(parts) != 2:
                raise ConfigError(f"{where('range', key)}: expected 'low, high'")
            lo, hi = (_convert(float, v, where("range", key)) for v in parts)
            if not lo <= hi:
                raise ConfigError(f"{where('range', key)}: low exceeds high")
            ranges[key] = (lo, hi)
    return SweepSpec(base, mode, grid, ranges, samples, seed, replicates)


def parse_sweep(path) -> SweepSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return loads_sweep(text, str(path))


def _safe(fn):
    try:
        return fn()
    except (InsufficientDataError, ZeroVarianceError, ValueError):
        return None


def run_summary(result) -> dict:
    """Scalar diagnostics of one run, used in sweep indexes and for calibration."""
    if isinstance(result, RunFailure):
        return {"status": "failed", "error": result.error}
    out: SimOutput = result
    x = out.x
    rv = out.rolling_variance
    f_res, c_res = residence_times(x, 0.3, 0.7) if len(out) else ([], [])
    vol = _safe(lambda: volatility_clustering_report(out.ret, 10))

    def num(v):
        return None if v is None or (isinstance(v, float) and not math.isfinite(v)) else v

    return {
        "status": "aborted" if out.aborted else "ok",
        "records": len(out),
        "mean_x": num(float(x.mean())) if len(out) else None,
        "mean_N": num(float(out.n.mean())) if len(out) else None,
        "final_N": int(out.n[-1]) if len(out) else None,
        "return_std": num(float(out.ret.std())) if len(out) else None,
        "excess_kurtosis": num(_safe(lambda: excess_kurtosis(out.ret))),
        "vol_acf_lag10": num(float(vol.values[10])) if vol is not None else None,
        "mean_rolling_variance": num(float(np.nanmean(rv))) if len(out) and not np.all(np.isnan(rv)) else None,
        "median_residence_F": float(median(f_res)) if f_res else None,
        "median_residence_C": float(median(c_res)) if c_res else None,
    }
