from __future__ import annotations

import csv

import pytest

from fcmarket.cli import main
from fcmarket.config import ConfigError
from fcmarket.sweep import loads_sweep

BASE = "[run]\nn_initial = 100\nsteps = 3000\nseed = 5\nvariance_window = 20\n"


def test_single_point_matches_simulate(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(BASE)
    sw = tmp_path / "s.ini"
    sw.write_text(BASE + "[sweep]\nmode = grid\n[grid]\nrun.n_initial = 100\n")
    assert main(["simulate", str(cfg), "--out", str(tmp_path / "sim")]) == 0
    assert main(["sweep", str(sw), "--out", str(tmp_path / "sw")]) == 0
    a = (tmp_path / "sim" / "timeseries.csv").read_bytes()
    b = (tmp_path / "sw" / "run_0000" / "timeseries.csv").read_bytes()
    assert a == b


def test_grid_product_and_index(tmp_path):
    sw = tmp_path / "s.ini"
    sw.write_text(BASE + "[grid]\nmodel.b = 0.5, 1.0\nrun.n_initial = 50, 100, 200\nmodel.horizons = 5 | 5, 10\n")
    assert main(["sweep", str(sw), "--out", str(tmp_path / "o"), "--max-parallel", "2"]) == 0
    with open(tmp_path / "o" / "index.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 12
    assert {r["model.horizons"] for r in rows} == {"5", "5, 10"}
    assert all(r["status"] == "ok" for r in rows)
    assert (tmp_path / "o" / "run_0011" / "summary.json").exists()


def test_random_mode_reproducible():
    text = BASE + "[sweep]\nmode = random\nsamples = 6\nseed = 3\n[range]\nmodel.gamma = 0.001, 0.1\nrun.n_initial = 50, 60\n"
    a, b = loads_sweep(text).points(), loads_sweep(text).points()
    assert a == b and len(a) == 6
    assert all(0.001 <= p["model.gamma"] <= 0.1 and 50 <= p["run.n_initial"] <= 60 for p in a)
    assert isinstance(a[0]["run.n_initial"], int)


def test_replicates_get_derived_seeds():
    spec = loads_sweep(BASE + "[sweep]\nreplicates = 3\n[grid]\nmodel.b = 1.0\n")
    seeds = [c.seed for _, c in spec.configs()]
    assert len(set(seeds)) == 3


@pytest.mark.parametrize("text", [
    BASE + "[grid]\nmodel.zeta = 1\n",
    BASE + "[range]\nmodel.b = 0, 1\n",
    BASE + "[sweep]\nmode = random\n[range]\nmodel.b = 2, 1\n",
    BASE + "[sweep]\nmode = spiral\n",
    BASE + "[sweep]\nfoo = 1\n",
])
def test_bad_specs(text):
    with pytest.raises(ConfigError):
        loads_sweep(text)


def test_invalid_point_exit_code(tmp_path):
    sw = tmp_path / "s.ini"
    sw.write_text(BASE + "[grid]\nmodel.gamma = 0.1, 1.5\n")
    assert main(["sweep", str(sw), "--out", str(tmp_path / "o")]) == 2
