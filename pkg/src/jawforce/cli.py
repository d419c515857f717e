"""``jawforce`` command line: simulate, calibrate, evaluate, resolve, grip.

Exit codes: 0 success, 2 input or configuration error, 3 numerical error
(rank-deficient calibration data).
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .calib import (AXES, HYSTERESIS_KEYS, CalibrationError, calibration_report,
                    check_excitation, concat_samples, fit_sensitivity, read_sensitivity,
                    sample_arrays, write_sensitivity)
from .config import Config, ConfigError, load_config
from .io import (LogError, NoOverlap, align_streams, ForceStream, parse_dual_jaw,
                 parse_force_stream, parse_single_jaw, write_dual_jaw, write_force_stream,
                 write_single_jaw, fmt)
from .kinematics import ChainFormatError, ChainMismatch
from .pipeline import AxisMetrics, MountAngles, force_metrics, grip_metrics, resolve
from .sim import (AXIS_INDEX, calibration_runs, manipulation_scenario, pinch_scenario)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class InputError(Exception):
    pass


# --- output helpers -----------------------------------------------------------

def _cell(x: Optional[float], digits: int = 4) -> str:
    return "n/a" if x is None else f"{x:.{digits}f}"


def print_table(header: Sequence[str], rows: Sequence[Sequence[str]], as_csv: bool) -> None:
    if as_csv:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    line = "  ".join(h.rjust(wd) for h, wd in zip(header, widths))
    print(line)
    print("-" * len(line))
    for r in rows:
        print("  ".join(str(c).rjust(wd) for c, wd in zip(r, widths)))


def metric_header(axes: Sequence[str]) -> list[str]:
    return (["log"] + [f"rmse_{a}_n" for a in axes] + [f"nrmsd_{a}_pct" for a in axes]
            + [f"max_err_{a}_n" for a in axes])


def metric_row(label: str, m: AxisMetrics) -> list[str]:
    return [label] + [_cell(x) for x in (*m.rmse_n, *m.nrmsd_pct, *m.max_error_n)]


def aggregate_rows(metrics: Sequence[AxisMetrics]) -> list[list[str]]:
    """Mean and sample standard deviation across trials (one log = one trial)."""
    table = np.array([[*m.rmse_n, *m.nrmsd_pct, *m.max_error_n] for m in metrics])
    mean = table.mean(axis=0)
    sd = table.std(axis=0, ddof=1) if len(metrics) > 1 else np.zeros_like(mean)
    return [["mean"] + [_cell(x) for x in mean], ["sd"] + [_cell(x) for x in sd]]


# --- commands -------------------------------------------------------------------

def cmd_simulate(args, cfg: Config) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed
    if args.scenario:
        left, right = cfg.sim("left"), cfg.sim("right")
        rng = np.random.default_rng(seed if seed is not None else right.seed)
        pose = cfg.pose(cfg.chain(args.chain))
        if args.scenario == "pinch":
            fr = cfg.number("scenario", "normal_force_n", 1.35)
            fl = cfg.number("scenario", "normal_force_left_n", fr)
            try:
                log = pinch_scenario(left, right, (fr, fl), pose,
                                     cycles=cfg.integer("scenario", "cycles", 5), rng=rng)
            except ValueError as exc:
                raise ConfigError("scenario.normal_force_n", str(exc)) from None
        else:
            log = manipulation_scenario(left, right, args.scenario, pose,
                                        duration_s=cfg.number("scenario", "duration_s", 24.0),
                                        rng=rng)
        path = out / f"{args.scenario}.csv"
        write_dual_jaw(path, log)
        print(f"wrote {path} ({len(log)} rows)")
        return EXIT_OK

    sim = cfg.sim(args.sensor)
    rng = np.random.default_rng(seed if seed is not None else sim.seed)
    axes = AXES if args.profile == "all" else (args.profile,)
    peaks = {}
    for a in axes:
        peak = cfg.number("profile", f"peak_{a}_n", sim.geom.ranges_n[AXIS_INDEX[a]])
        if not 0 < peak <= sim.geom.ranges_n[AXIS_INDEX[a]]:
            raise ConfigError(f"profile.peak_{a}_n",
                              f"peak {peak} N outside (0, {sim.geom.ranges_n[AXIS_INDEX[a]]}] N")
        peaks[a] = peak
    step = cfg.number("profile", "step_n", 0.5)
    dwell = cfg.integer("profile", "dwell_samples", 25)
    if not 0 < step <= min(peaks.values()):
        raise ConfigError("profile.step_n", f"step {step} N must be in (0, peak]")
    if dwell < 1:
        raise ConfigError("profile.dwell_samples", "must be >= 1")
    runs = calibration_runs(sim, axes, step, dwell, peaks,
                            cfg.boolean("profile", "includes_unloading", True), rng)
    for axis, samples in runs.items():
        path = out / f"profile_{axis}.csv"
        write_single_jaw(path, samples)
        print(f"wrote {path} ({len(samples)} samples, peak {peaks[axis]:g} N)")
    return EXIT_OK


def _load_single(paths: Sequence[str]):
    return concat_samples(parse_single_jaw(p).samples for p in paths)


def cmd_calibrate(args, cfg: Config) -> int:
    samples = _load_single(args.logs)
    geom = cfg.geometry()
    check_excitation(samples)
    fitted = fit_sensitivity(samples, geom)
    write_sensitivity(args.out, fitted)
    rep = calibration_report(samples, fitted, args.bin_n)
    header = ([f"rmse_{a}_n" for a in AXES] + [f"nrmsd_{a}_pct" for a in AXES]
              + [f"r2_{a}" for a in AXES] + [f"hyst_{k}_pct" for k in HYSTERESIS_KEYS])
    row = ([_cell(x) for x in rep.rmse_n] + [_cell(x, 3) for x in rep.nrmsd_pct]
           + [_cell(x) for x in rep.r2]
           + [_cell(rep.hysteresis_pct.get(k), 3) for k in HYSTERESIS_KEYS])
    if not args.csv:
        print(f"fitted {len(samples)} samples -> {args.out}")
    print_table(header, [row], args.csv)
    return EXIT_OK


def cmd_evaluate(args, cfg: Config) -> int:
    geom = cfg.geometry()
    fitted = read_sensitivity(args.sensitivity, geom)
    rows, metrics = [], []
    for path in args.logs:
        v, ref = sample_arrays(parse_single_jaw(path).samples)
        m = force_metrics(fitted.apply_many(v), ref, geom)
        metrics.append(m)
        rows.append(metric_row(Path(path).name, m))
    if args.aggregate:
        rows += aggregate_rows(metrics)
    print_table(metric_header(AXES), rows, args.csv)
    return EXIT_OK


def _resolve_all(args, cfg: Config):
    geom = cfg.geometry()
    left = read_sensitivity(args.left, geom)
    right = read_sensitivity(args.right, geom)
    chain = cfg.chain(args.chain)
    mounts = cfg.mounts()
    if args.theta_r is not None or args.theta_l is not None:
        mounts = MountAngles(
            math.radians(args.theta_r) if args.theta_r is not None else mounts.theta_r,
            math.radians(args.theta_l) if args.theta_l is not None else mounts.theta_l)
    theta_min_deg = args.theta_min if args.theta_min is not None else cfg.theta_min_deg()
    if theta_min_deg < 0:
        raise InputError("--theta-min must be >= 0")
    results = []
    for path in args.logs:
        log = parse_dual_jaw(path)
        results.append((Path(path), log,
                        resolve(log, left, right, chain, mounts, math.radians(theta_min_deg))))
    return geom, results


def _out_paths(args, results, suffix: str) -> list[Path]:
    out = Path(args.out)
    if len(results) == 1 and out.suffix:
        out.parent.mkdir(parents=True, exist_ok=True)
        return [out]
    out.mkdir(parents=True, exist_ok=True)
    return [out / f"{p.stem}_{suffix}.csv" for p, _, _ in results]


def cmd_resolve(args, cfg: Config) -> int:
    geom, results = _resolve_all(args, cfg)
    reference = parse_force_stream(args.reference) if args.reference else None
    rows, metrics = [], []
    for (path, log, res), out in zip(results, _out_paths(args, results, "resolved")):
        write_force_stream(out, res.t_s, res.resultant)
        if reference is not None:
            al = align_streams(ForceStream(res.t_s, res.resultant), reference)
            m = force_metrics(al.sensor, al.reference, geom)
        elif log.f_true is not None:
            m = force_metrics(res.resultant, log.f_true, geom)
        else:
            continue
        metrics.append(m)
        rows.append(metric_row(path.name, m))
    if rows:
        if args.aggregate:
            rows += aggregate_rows(metrics)
        print_table(metric_header(AXES), rows, args.csv)
    elif not args.csv:
        print("no ground truth in the log(s); wrote resolved forces only")
    return EXIT_OK


def cmd_grip(args, cfg: Config) -> int:
    geom, results = _resolve_all(args, cfg)
    rows, metrics = [], []
    for (path, log, res), out in zip(results, _out_paths(args, results, "grip")):
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_s", "fg"])
            w.writerows([fmt(t), fmt(g)] for t, g in zip(res.t_s, res.grasp))
        peak = float(res.grasp.max()) if len(res.grasp) else 0.0
        if log.fg_true is not None:
            m = grip_metrics(res.grasp, log.fg_true, geom)
            metrics.append(m)
            rows.append(metric_row(path.name, m) + [_cell(peak)])
        else:
            rows.append([path.name, "n/a", "n/a", "n/a", _cell(peak)])
    if args.aggregate and metrics:
        rows += [r + [""] for r in aggregate_rows(metrics)]
    print_table(["log", "rmse_n", "nrmsd_pct", "max_err_n", "peak_fg_n"], rows, args.csv)
    return EXIT_OK


# --- argument parsing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jawforce", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI config file (default: $JAWFORCE_CONFIG)")
        sp.add_argument("--csv", action="store_true", help="print reports as CSV")

    s = sub.add_parser("simulate", help="write synthetic calibration or dual-jaw logs")
    common(s)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--profile", choices=["x", "y", "z", "all"])
    g.add_argument("--scenario", choices=["pinch", "flat", "stem"])
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int, help="RNG seed (overrides [sim] seed)")
    s.add_argument("--sensor", choices=["left", "right"],
                   help="apply the [sim.left] or [sim.right] overrides")
    s.add_argument("--chain", help="chain file used for scenarios")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("calibrate", help="fit the 3x9 sensitivity matrix")
    common(c)
    c.add_argument("logs", nargs="+", help="single-jaw CSV logs")
    c.add_argument("--out", required=True, help="sensitivity file to write")
    c.add_argument("--bin-n", type=float, default=0.5,
                   help="reference bin width for hysteresis pairing (N)")
    c.set_defaults(func=cmd_calibrate)

    e = sub.add_parser("evaluate", help="RMSE, NRMSD and max error on held-out logs")
    common(e)
    e.add_argument("logs", nargs="+")
    e.add_argument("--sensitivity", required=True)
    e.add_argument("--aggregate", action="store_true", help="add mean and sd over logs")
    e.set_defaults(func=cmd_evaluate)

    for name, func, helptext in (("resolve", cmd_resolve, "resultant force in the base frame"),
                                 ("grip", cmd_grip, "two-point grasp force")):
        r = sub.add_parser(name, help=helptext)
        common(r)
        r.add_argument("logs", nargs="+", help="dual-jaw CSV logs")
        r.add_argument("--left", required=True, help="sensitivity file of the left jaw")
        r.add_argument("--right", required=True, help="sensitivity file of the right jaw")
        r.add_argument("--chain", help="chain file (default: shipped illustrative chain)")
        r.add_argument("--theta-min", type=float, help="minimum jaw angle in degrees (8.4)")
        r.add_argument("--theta-r", type=float, help="right sensor mount angle in degrees")
        r.add_argument("--theta-l", type=float, help="left sensor mount angle in degrees")
        r.add_argument("--out", required=True,
                       help="output CSV (one log) or directory (several logs)")
        r.add_argument("--aggregate", action="store_true",
                       help="add mean and sd over logs (one log = one trial)")
        if name == "resolve":
            r.add_argument("--reference", help="reference force stream CSV (t_s,fx,fy,fz)")
        r.set_defaults(func=func)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except CalibrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, LogError, ChainMismatch, ChainFormatError, NoOverlap,
            InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
