"""Serialized outputs: time series CSV, delimited tables and the run manifest.

Floats are written with ``repr`` (shortest string that parses back to the
same double), so every file round-trips losslessly and is byte-stable for a
given configuration, seed and code version. NaN is written as an empty cell.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import config_sections
from .engine import SimOutput

TIMESERIES_HEADER = ("step", "price", "return", "N_c", "N_f", "N", "rolling_variance")
MANIFEST_NAME = "manifest.json"


def fmt_float(v: float) -> str:
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    return str(v)


def write_table(path, header, rows) -> Path:
    """Comma-delimited table with a header row."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def write_timeseries(path, out: SimOutput) -> Path:
    path = Path(path)
    cols = (
        out.step.tolist(),
        [fmt_float(v) for v in out.price.tolist()],
        [fmt_float(v) for v in out.ret.tolist()],
        out.n_c.tolist(),
        out.n_f.tolist(),
        out.n.tolist(),
        [fmt_float(v) for v in out.rolling_variance.tolist()],
    )
    with path.open("w", newline="") as fh:
        fh.write(",".join(TIMESERIES_HEADER) + "\n")
        fh.writelines(f"{a},{b},{c},{d},{e},{f},{g}\n" for a, b, c, d, e, f, g in zip(*cols))
    return path


@dataclass
class Timeseries:
    step: np.ndarray
    price: np.ndarray
    ret: np.ndarray
    n_c: np.ndarray
    n_f: np.ndarray
    n: np.ndarray
    rolling_variance: np.ndarray


def read_timeseries(path) -> Timeseries:
    """Parse a file written by :func:`write_timeseries`."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TIMESERIES_HEADER:
            raise ValueError(f"{path}: expected header {','.join(TIMESERIES_HEADER)}")
        rows = list(reader)
    cols = list(zip(*rows)) if rows else [()] * len(TIMESERIES_HEADER)

    def floats(c):
        return np.array([float(v) if v else math.nan for v in c], dtype=float)

    def ints(c):
        return np.array([int(v) for v in c], dtype=np.int64)

    return Timeseries(ints(cols[0]), floats(cols[1]), floats(cols[2]), ints(cols[3]), ints(cols[4]),
                      ints(cols[5]), floats(cols[6]))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """Record of one command invocation. Written last: its presence means the
    listed files are complete."""

    command: str
    started: str
    config: dict | None = None
    seed: int | None = None
    finished: str = ""
    files: dict[str, str] = field(default_factory=dict)
    status: str = "ok"
    notes: list[str] = field(default_factory=list)
    code_version: str = __version__

    def add_file(self, path, root) -> None:
        rel = os.path.relpath(path, root)
        self.files[Path(rel).as_posix()] = sha256_file(path)

    def write(self, out_dir) -> Path:
        self.finished = now_iso()
        self.files = dict(sorted(self.files.items()))
        path = Path(out_dir) / MANIFEST_NAME
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(self.__dict__, indent=2) + "\n")
        os.replace(tmp, path)
        return path


def config_echo(config) -> dict:
    return {s: {k: (list(v) if isinstance(v, tuple) else v) for k, v in vals.items()}
            for s, vals in config_sections(config).items()}


def write_json(path, data) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, allow_nan=True) + "\n")
    return path
