"""Command-line front end.

Exit codes: 0 success, 1 usage, 2 invalid configuration or parameters,
3 runtime failure (numeric overflow, I/O, failed ensemble members).
The default output directory is ``$FCMARKET_OUT`` or ``./fcmarket_out``.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, apply_overrides, parse_config, write_config
from .engine import RunFailure, SimConfig, run_ensemble, run_simulation
from .io import RunManifest, config_echo, fmt_float, now_iso, read_timeseries, write_json, write_table, write_timeseries
from .params import ModelError, ValidationError
from .presets import PRESET_NAMES, preset_description, preset_members
from .selforg import SelfOrgPolicy
from . import stats as sf
from .sweep import parse_sweep, run_summary

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3
ENV_OUT = "FCMARKET_OUT"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(ENV_OUT) or "fcmarket_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_overrides(config: SimConfig, args) -> SimConfig:
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "record_every", None) is not None:
        changes["record_every"] = args.record_every
    if getattr(args, "burn_in", None) is not None:
        changes["burn_in"] = args.burn_in
    return config.replace(**changes) if changes else config


def _x_histogram(out, bins: int = 50):
    counts, edges = np.histogram(out.x, bins=bins, range=(0.0, 1.0), density=True)
    return [(float(lo), float(hi), float(c)) for lo, hi, c in zip(edges[:-1], edges[1:], counts)]


def _write_run(out, directory: Path, manifest: RunManifest, root: Path, histogram: bool = False) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    files = [write_timeseries(directory / "timeseries.csv", out)]
    cfg = directory / "config.ini"
    cfg.write_text(write_config(out.config))
    files.append(cfg)
    if histogram and len(out):
        files.append(write_table(directory / "x_histogram.csv", ("x_low", "x_high", "density"), _x_histogram(out)))
    for f in files:
        manifest.add_file(f, root)


# -- commands ---------------------------------------------------------------

def cmd_simulate(config_path, out_dir, seed_override=None, *, selforg=False, record_every=None, burn_in=None,
                 backend="compiled") -> int:
    config = parse_config(config_path)
    if selforg and config.selforg is None:
        config = apply_overrides(config, {"run.variance_window": None, "selforg.window_T": SelfOrgPolicy().window_T})
    config = _run_overrides(config, argparse.Namespace(seed=seed_override, record_every=record_every, burn_in=burn_in))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("selforg" if selforg else "simulate", now_iso(), config_echo(config), config.seed)
    out = run_simulation(config, backend)
    _write_run(out, out_dir, manifest, out_dir)
    if out.aborted:
        manifest.status = "aborted"
        manifest.notes.append(out.abort_reason)
    manifest.write(out_dir)
    if out.aborted:
        print(f"error: {out.abort_reason}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_preset(name, out_dir, *, seed_override=None, max_parallel=1, record_every=None, burn_in=None,
               backend="compiled") -> int:
    members = preset_members(name)
    ns = argparse.Namespace(seed=seed_override, record_every=record_every, burn_in=burn_in)
    members = [(m, _run_overrides(c, ns)) for m, c in members]
    root = Path(out_dir) / name
    root.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("preset", now_iso(), {m: config_echo(c) for m, c in members})
    manifest.notes.append(preset_description(name))
    results = run_ensemble([c for _, c in members], max_parallel=max_parallel, backend=backend)
    rows, code = [], EXIT_OK
    for (member, _), res in zip(members, results):
        summary = run_summary(res)
        rows.append((member, summary["status"]))
        if isinstance(res, RunFailure):
            manifest.notes.append(f"{member}: {res.error}")
            code = EXIT_RUNTIME
            continue
        _write_run(res, root / member, manifest, root, histogram=True)
        manifest.add_file(write_json(root / member / "summary.json", summary), root)
        if res.aborted:
            manifest.notes.append(f"{member}: {res.abort_reason}")
            code = EXIT_RUNTIME
    manifest.status = "ok" if code == EXIT_OK else "partial"
    manifest.add_file(write_table(root / "members.csv", ("member", "status"), rows), root)
    manifest.write(root)
    return code


def cmd_stats(timeseries_path, out_dir, *, max_lag=100, vol_mode="abs", hill_k_fraction=0.05,
              burn_in_fraction=0.1, bins=10) -> int:
    ts = read_timeseries(timeseries_path)
    r = sf.drop_burn_in(ts.ret, burn_in_fraction)
    r = r[~np.isnan(r)]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("stats", now_iso(), {
        "input": str(timeseries_path), "max_lag": max_lag, "vol_mode": vol_mode,
        "hill_k_fraction": hill_k_fraction, "burn_in_fraction": burn_in_fraction, "bins": bins,
    })
    files = []

    s = sf.series_stats(r)
    files.append(write_table(out_dir / "series_stats.csv", ("quantity", "value"),
                             [(k, getattr(s, k)) for k in ("n", "mean", "variance", "skewness", "excess_kurtosis")]))
    acf = sf.autocorrelation(r, max_lag)
    files.append(write_table(out_dir / "acf_returns.csv", ("lag", "acf", "noise_band"), acf.to_rows()))
    vol = sf.volatility_clustering_report(r, max_lag, vol_mode)
    files.append(write_table(out_dir / "acf_volatility.csv", ("lag", "acf", "noise_band"), vol.to_rows()))

    tail_rows = []
    for tail, series in (("abs", r), ("upper", r[r > 0]), ("lower", -r[r < 0])):
        try:
            alpha = sf.hill_tail_index(series, hill_k_fraction)
        except sf.InsufficientDataError as exc:
            alpha = math.nan
            manifest.notes.append(f"hill {tail}: {exc}")
        tail_rows.append((tail, hill_k_fraction, alpha))
    files.append(write_table(out_dir / "hill.csv", ("tail", "k_fraction", "alpha"), tail_rows))

    lag = sf.decay_lag(vol)
    decay_rows = [("decay_lag_0.05", "" if lag is None else lag)]
    try:
        fit = sf.effective_decay_exponent(vol)
        decay_rows += [("effective_exponent", fit.exponent), ("ci_low", fit.ci_low), ("ci_high", fit.ci_high),
                       ("lag_min", fit.lag_min), ("lag_max", fit.lag_max), ("note", fit.disclaimer)]
    except sf.InsufficientDataError as exc:
        manifest.notes.append(f"decay exponent: {exc}")
    files.append(write_table(out_dir / "volatility_decay.csv", ("quantity", "value"), decay_rows))

    try:
        rows = sf.conditional_variance_diagnostic(r, bins)
        files.append(write_table(
            out_dir / "conditional_variance.csv",
            ("bin", "lower", "upper", "count", "mean_abs_current", "mean_abs_next", "stderr_next"),
            [(c.bin, c.lower, c.upper, c.count, c.mean_current, c.mean_next, c.stderr_next) for c in rows]))
    except sf.InsufficientDataError as exc:
        manifest.notes.append(f"conditional variance: {exc}")

    for f in files:
        manifest.add_file(f, out_dir)
    manifest.write(out_dir)
    print(f"n={s.n} excess_kurtosis={fmt_float(s.excess_kurtosis)} acf1={fmt_float(acf.values[1])} "
          f"vol_acf{min(10, max_lag)}={fmt_float(vol.values[min(10, max_lag)])}")
    return EXIT_OK


def cmd_sweep(sweep_spec_path, out_dir, max_parallel=1, *, backend="compiled") -> int:
    spec = parse_sweep(sweep_spec_path)
    runs = spec.configs()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("sweep", now_iso(), {"base": config_echo(spec.base), "mode": spec.mode,
                                                "points": len(runs)})
    results = run_ensemble([c for _, c in runs], max_parallel=max_parallel, backend=backend)
    keys = sorted({k for point, _ in runs for k in point})
    summary_keys = None
    rows, code = [], EXIT_OK
    for i, ((point, cfg), res) in enumerate(zip(runs, results)):
        run_dir = out_dir / f"run_{i:04d}"
        summary = run_summary(res)
        run_dir.mkdir(parents=True, exist_ok=True)
        if isinstance(res, RunFailure):
            code = EXIT_RUNTIME
            (run_dir / "config.ini").write_text(write_config(cfg))
            manifest.add_file(run_dir / "config.ini", out_dir)
        else:
            _write_run(res, run_dir, manifest, out_dir)
            if res.aborted:
                code = EXIT_RUNTIME
        manifest.add_file(write_json(run_dir / "summary.json", summary), out_dir)
        if summary_keys is None or "error" in summary_keys:
            summary_keys = [k for k in summary if k != "error"]
        vals = [", ".join(map(str, point[k])) if isinstance(point.get(k), tuple) else point.get(k, "") for k in keys]
        rows.append([run_dir.name, cfg.seed, *vals, *[summary.get(k, "") for k in summary_keys]])
    header = ["run", "seed", *keys, *summary_keys]
    rows = [[("" if v is None else v) for v in row] for row in rows]
    manifest.add_file(write_table(out_dir / "index.csv", header, rows), out_dir)
    manifest.status = "ok" if code == EXIT_OK else "partial"
    manifest.write(out_dir)
    return code


# -- argument parsing -------------------------------------------------------

def _nonneg_int(text):
    v = int(text, 0)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _pos_int(text):
    v = int(text, 0)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", help=f"output directory (default ${ENV_OUT} or ./fcmarket_out)")
    common.add_argument("--backend", choices=("compiled", "python"), default="compiled", help=argparse.SUPPRESS)

    run_flags = _Parser(add_help=False)
    run_flags.add_argument("--seed", type=_nonneg_int, help="override run.seed")
    run_flags.add_argument("--record-every", type=_pos_int, help="override run.record_every")
    run_flags.add_argument("--burn-in", type=_nonneg_int, help="override run.burn_in")

    p = _Parser(prog="fcmarket", description="Fundamentalist/chartist market simulator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common, run_flags], help="run one configuration file")
    s.add_argument("config")
    s = sub.add_parser("selforg", parents=[common, run_flags],
                       help="simulate with variable N (default entry/exit policy if the file has none)")
    s.add_argument("config")

    s = sub.add_parser("preset", parents=[common, run_flags], help="run a reference figure recipe")
    s.add_argument("name", choices=PRESET_NAMES)
    s.add_argument("--max-parallel", type=_pos_int, default=1)

    s = sub.add_parser("stats", parents=[common], help="stylized-facts report for a time series file")
    s.add_argument("timeseries")
    s.add_argument("--max-lag", type=_pos_int, default=100)
    s.add_argument("--vol-mode", choices=("abs", "squared"), default="abs")
    s.add_argument("--hill-k-fraction", type=float, default=0.05)
    s.add_argument("--burn-in-fraction", type=float, default=0.1)
    s.add_argument("--bins", type=_pos_int, default=10, help="conditional-variance bins")

    s = sub.add_parser("sweep", parents=[common], help="grid or random parameter sweep")
    s.add_argument("spec")
    s.add_argument("--max-parallel", type=_pos_int, default=1)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        out = _out_dir(args)
        if args.command in ("simulate", "selforg"):
            return cmd_simulate(args.config, out, args.seed, selforg=args.command == "selforg",
                                record_every=args.record_every, burn_in=args.burn_in, backend=args.backend)
        if args.command == "preset":
            return cmd_preset(args.name, out, seed_override=args.seed, max_parallel=args.max_parallel,
                              record_every=args.record_every, burn_in=args.burn_in, backend=args.backend)
        if args.command == "stats":
            return cmd_stats(args.timeseries, out, max_lag=args.max_lag, vol_mode=args.vol_mode,
                             hill_k_fraction=args.hill_k_fraction, burn_in_fraction=args.burn_in_fraction,
                             bins=args.bins)
        if args.command == "sweep":
            return cmd_sweep(args.spec, out, args.max_parallel, backend=args.backend)
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ModelError, ValueError, OSError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    raise AssertionError(args.command)


if __name__ == "__main__":
    sys.exit(main())
