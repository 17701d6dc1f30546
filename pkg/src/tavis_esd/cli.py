"""Command line front end: ``tavis-esd {evolve,esd,sweep,figure,oracle-check}``.

Exit status is 0 on success, 2 for configuration errors and 3 when a
numerical accuracy check fails.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .analytic import NumericalError
from .config import ConfigError, RunConfig, Truncation, load_config
from .esd import (AXES, Engine, TimeGrid, analyze, build_initial, first_plateau,
                  make_propagator, scan, sweep)
from .figures import FIGURES, get_figure
from .model import TruncationError

log = logging.getLogger("tavis_esd")

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

SWEEP_COLUMNS = ("death_fraction", "n_intervals", "first_onset", "first_length",
                 "first_peak_tau", "first_peak_height", "sync_overlap", "error")


def fmt(x) -> str:
    """Shortest decimal form up to 15 significant digits."""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if x == 0:
        return "0"
    return f"{x:.15g}"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def run_series(cfg: RunConfig):
    """Scan for one config; returns ``(csv_text, sidecar_dict, series)``."""
    t0 = time.perf_counter()
    series = scan(cfg.params, cfg.atomic(), cfg.grid, cfg.engine,
                  cfg.truncation.tail_eps, cfg.truncation.low_block_policy)
    cols = [series.tau] + [getattr(series, name) for name in cfg.outputs]
    text = _csv_text(("tau",) + tuple(cfg.outputs), zip(*cols))
    side = {"config": cfg.to_dict(), "dropped_mass": series.dropped_mass,
            "wall_time": time.perf_counter() - t0}
    return text, side, series


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _apply_flags(cfg: RunConfig, args) -> RunConfig:
    over = {}
    if getattr(args, "engine", None):
        over["engine"] = Engine(args.engine)
    if getattr(args, "grid", None):
        try:
            over["grid"] = TimeGrid.parse(args.grid)
        except ValueError as exc:
            raise ConfigError("--grid", str(exc)) from None
    if getattr(args, "tail_eps", None) is not None:
        if not 0 < args.tail_eps <= 1e-6:
            raise ConfigError("--tail-eps", "must lie in (0, 1e-6]")
        over["truncation"] = Truncation(args.tail_eps, cfg.truncation.low_block_policy)
    return cfg.with_overrides(**over)


def _config_from(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config", "a config file is required")
    return _apply_flags(load_config(args.config), args)


def cmd_evolve(args) -> int:
    cfg = _config_from(args)
    text, side, _ = run_series(cfg)
    out = Path(args.out)
    _write(out / "evolve.csv", text)
    _write(out / "evolve.json", _dump(side))
    log.info("wrote %s", out / "evolve.csv")
    return 0


def esd_report(cfg: RunConfig) -> dict:
    series = scan(cfg.params, cfg.atomic(), cfg.grid, cfg.engine,
                  cfg.truncation.tail_eps, cfg.truncation.low_block_policy)
    rep = analyze(series).to_dict()
    span = first_plateau(series)
    if span is not None:
        m = (series.tau >= span[0]) & (series.tau <= span[1])
        rep["plateau"] = {"tau_on": span[0], "tau_off": span[1],
                          "eof_median": float(np.median(series.eof[m])),
                          "eof_min": float(np.min(series.eof[m]))}
    else:
        rep["plateau"] = None
    rep["config"] = cfg.to_dict()
    return rep


def cmd_esd(args) -> int:
    rep = esd_report(_config_from(args))
    text = _dump(rep)
    if args.out:
        _write(Path(args.out) / "esd.json", text)
    sys.stdout.write(text)
    return 0


def parse_values(text: str) -> list:
    """``"a,b,c"`` or inclusive ``"START:STOP:STEP"``."""
    try:
        if ":" in text:
            a, b, step = (float(p) for p in text.split(":"))
            if step <= 0 or b < a:
                raise ValueError
            n = int(math.floor((b - a) / step + 1e-9)) + 1
            return [float(round(a + k * step, 12)) for k in range(n)]
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError("--values", f"cannot parse {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise ConfigError("--values", "need at least one finite value")
    return vals


def cmd_sweep(args) -> int:
    cfg = _config_from(args)
    if args.axis not in AXES:
        raise ConfigError("--axis", f"expected one of {AXES}")
    values = parse_values(args.values)
    rows = sweep(cfg.params, cfg.atomic(), cfg.grid, args.axis, values, cfg.engine,
                 jobs=args.jobs, tail_eps=cfg.truncation.tail_eps)
    text = _csv_text((args.axis,) + SWEEP_COLUMNS,
                     ([r.value] + [getattr(r, c) for c in SWEEP_COLUMNS] for r in rows))
    _write(Path(args.out) / "sweep.csv", text)
    failed = sum(1 for r in rows if r.error)
    if failed:
        log.warning("%d of %d sweep rows failed", failed, len(rows))
    return 0


def _curve_job(cfg: RunConfig):
    text, side, _ = run_series(cfg)
    return text, side


def cmd_figure(args) -> int:
    try:
        fig = get_figure(args.id)
    except KeyError as exc:
        raise ConfigError("figure", exc.args[0]) from None
    cfgs = [_apply_flags(c, args) for _, c in fig.curves]
    if args.jobs > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=min(args.jobs, len(cfgs))) as pool:
            results = list(pool.map(_curve_job, cfgs))
    else:
        results = [_curve_job(c) for c in cfgs]
    out = Path(args.out) / fig.id
    manifest = fig.manifest()
    for (text, side), entry in zip(results, manifest["curves"]):
        _write(out / entry["file"], text)
        entry["config"] = side["config"]
        entry["dropped_mass"] = side["dropped_mass"]
    _write(out / "manifest.json", _dump(manifest))
    log.info("wrote %d curves to %s", len(results), out)
    return 0


def cmd_oracle_check(args) -> int:
    cfg = _config_from(args)
    initial = build_initial(cfg.params, cfg.atomic(), cfg.truncation.tail_eps,
                            cfg.truncation.low_block_policy)
    taus = cfg.grid.taus()
    a = make_propagator(initial, cfg.params, "analytic").evolve(taus)
    o = make_propagator(initial, cfg.params, "oracle").evolve(taus)
    coeff = max(float(np.max(np.abs(a.blocks - o.blocks))), float(np.max(np.abs(a.low - o.low))))
    sa = scan(cfg.params, cfg.atomic(), cfg.grid, "analytic", cfg.truncation.tail_eps)
    so = scan(cfg.params, cfg.atomic(), cfg.grid, "oracle", cfg.truncation.tail_eps)
    cell = max(float(np.max(np.abs(getattr(sa, n) - getattr(so, n)))) for n in cfg.outputs)
    ok = coeff < args.tol and cell < args.tol
    sys.stdout.write(_dump({"max_coefficient_deviation": coeff, "max_cell_deviation": cell,
                            "tolerance": args.tol, "ok": ok}))
    return 0 if ok else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tavis-esd",
                                description="Two-atom Tavis-Cummings entanglement dynamics.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default=".", config=True):
        if config:
            sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--engine", choices=("analytic", "oracle"))
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--out", metavar="DIR", default=out_default)
        sp.add_argument("--tail-eps", type=float, dest="tail_eps")
        sp.add_argument("--grid", metavar="START:END:SAMPLES")

    sp = sub.add_parser("evolve", help="time series CSV plus JSON sidecar")
    common(sp)
    sp.set_defaults(func=cmd_evolve)

    sp = sub.add_parser("esd", help="ESD intervals, revival peaks and sync metric as JSON")
    common(sp, out_default=None)
    sp.set_defaults(func=cmd_esd)

    sp = sub.add_parser("sweep", help="one report row per parameter value")
    common(sp)
    sp.add_argument("--axis", required=True, choices=AXES)
    sp.add_argument("--values", required=True, help="a,b,c or START:STOP:STEP")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("figure", help="datasets for one figure panel")
    sp.add_argument("id", help=", ".join(FIGURES))
    common(sp, config=False)
    sp.set_defaults(func=cmd_figure)

    sp = sub.add_parser("oracle-check", help="compare analytic and RK4 engines")
    common(sp)
    sp.add_argument("--tol", type=float, default=1e-7)
    sp.set_defaults(func=cmd_oracle_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, TruncationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
