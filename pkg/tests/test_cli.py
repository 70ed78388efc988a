from __future__ import annotations

import json

import numpy as np
import pytest

from fcmarket.cli import main
from fcmarket.io import read_timeseries, sha256_file, write_timeseries

SMALL = "[run]\nn_initial = 100\nsteps = 3000\nseed = 5\nvariance_window = 20\n"


@pytest.fixture
def cfg(tmp_path):
    f = tmp_path / "run.ini"
    f.write_text(SMALL)
    return f


def test_simulate_writes_bundle(cfg, tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", str(cfg), "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert set(man["files"]) == {"timeseries.csv", "config.ini"}
    for name, digest in man["files"].items():
        assert sha256_file(out / name) == digest
    assert man["seed"] == 5 and man["status"] == "ok"
    ts = read_timeseries(out / "timeseries.csv")
    assert ts.step.tolist() == list(range(1, 3001))
    assert np.array_equal(ts.n_c + ts.n_f, ts.n)


def test_simulate_checksums_stable(cfg, tmp_path):
    for d in ("a", "b"):
        assert main(["simulate", str(cfg), "--out", str(tmp_path / d)]) == 0
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert ma["files"] == mb["files"]


def test_flags_override(cfg, tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", str(cfg), "--out", str(out), "--seed", "9", "--record-every", "10", "--burn-in", "100"]) == 0
    ts = read_timeseries(out / "timeseries.csv")
    assert ts.step[0] == 110 and len(ts.step) == 290
    assert "seed = 9" in (out / "config.ini").read_text()


def test_env_default_out(cfg, tmp_path, monkeypatch):
    monkeypatch.setenv("FCMARKET_OUT", str(tmp_path / "env"))
    assert main(["simulate", str(cfg)]) == 0
    assert (tmp_path / "env" / "manifest.json").exists()


def test_selforg_alias(cfg, tmp_path):
    out = tmp_path / "o"
    assert main(["selforg", str(cfg), "--out", str(out)]) == 0
    text = (out / "config.ini").read_text()
    assert "[selforg]" in text and "theta_in = 9.0" in text


def test_timeseries_round_trip(cfg, tmp_path):
    from fcmarket import SimConfig, run_simulation

    out = run_simulation(SimConfig(n_initial=50, steps=500, seed=1, variance_window=5))
    write_timeseries(tmp_path / "t.csv", out)
    ts = read_timeseries(tmp_path / "t.csv")
    assert ts.price.tobytes() == out.price.tobytes()
    assert ts.rolling_variance.tobytes() == out.rolling_variance.tobytes()
    nan_out = run_simulation(SimConfig(n_initial=50, steps=20, seed=1))
    write_timeseries(tmp_path / "n.csv", nan_out)
    assert (tmp_path / "n.csv").read_text().splitlines()[1].endswith(",")
    assert np.all(np.isnan(read_timeseries(tmp_path / "n.csv").rolling_variance))


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[model]\ngamma = -0.1\n")
    assert main(["simulate", str(bad), "--out", str(tmp_path)]) == 2
    assert "gamma" in capsys.readouterr().err
    unknown = tmp_path / "u.ini"
    unknown.write_text("[model]\nfoo = 1\n")
    assert main(["simulate", str(unknown), "--out", str(tmp_path)]) == 2
    assert main(["simulate", str(tmp_path / "missing.ini"), "--out", str(tmp_path)]) == 2
    assert main([]) == 1
    assert main(["simulate"]) == 1
    assert main(["preset", "fig9"]) == 1
    assert main(["simulate", "x.ini", "--seed", "-3"]) == 1


def test_overflow_exit_code(tmp_path):
    f = tmp_path / "boom.ini"
    f.write_text("[model]\nb = 50\nB = 0.9\ndelta = -0.9\n[run]\nn_initial = 20\nsteps = 5000\n"
                 "initial_chartist_fraction = 1.0\n")
    out = tmp_path / "o"
    assert main(["simulate", str(f), "--out", str(out)]) == 3
    assert json.loads((out / "manifest.json").read_text())["status"] == "aborted"


def test_stats_gaussian(tmp_path):
    rng = np.random.Generator(np.random.PCG64(0))
    n = 200_000
    ret = rng.standard_normal(n)
    price = 100 + np.cumsum(ret)
    lines = ["step,price,return,N_c,N_f,N,rolling_variance"]
    lines += [f"{i + 1},{p!r},{r!r},0,10,10," for i, (p, r) in enumerate(zip(price.tolist(), ret.tolist()))]
    src = tmp_path / "g.csv"
    src.write_text("\n".join(lines) + "\n")
    out = tmp_path / "s"
    assert main(["stats", str(src), "--out", str(out), "--max-lag", "50"]) == 0
    rows = dict(line.split(",", 1) for line in (out / "series_stats.csv").read_text().splitlines()[1:])
    assert abs(float(rows["excess_kurtosis"])) < 0.05
    for name in ("acf_returns.csv", "acf_volatility.csv", "hill.csv", "conditional_variance.csv", "volatility_decay.csv"):
        assert (out / name).exists()
    assert len((out / "acf_returns.csv").read_text().splitlines()) == 52


def test_stats_bad_header(tmp_path):
    f = tmp_path / "x.csv"
    f.write_text("a,b\n1,2\n")
    assert main(["stats", str(f), "--out", str(tmp_path / "s")]) == 3


def test_preset_bundle(tmp_path):
    out = tmp_path / "p"
    assert main(["preset", "fig4_volatility", "--out", str(out), "--record-every", "50", "--max-parallel", "2"]) == 0
    root = out / "fig4_volatility"
    man = json.loads((root / "manifest.json").read_text())
    for member in ("N50", "N500", "N5000"):
        for f in ("timeseries.csv", "config.ini", "x_histogram.csv", "summary.json"):
            assert f"{member}/{f}" in man["files"]
    var = [json.loads((root / m / "summary.json").read_text())["mean_rolling_variance"] for m in ("N50", "N500", "N5000")]
    assert var[0] > var[1] > var[2]
