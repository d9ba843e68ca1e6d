"""Command-line front end: ``acil run | compare | sweep | list``.

Exit status: 0 when every episode stays safe, 2 when one leaves the safe set,
1 on configuration or integration errors.
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfg
from . import report
from .engine import FeasibilityError, IntegrationError, run_episode

EXIT_OK, EXIT_ERROR, EXIT_UNSAFE = 0, 1, 2


def _fmt_vec(v) -> str:
    return "[" + ", ".join(f"{float(a):g}" for a in np.atleast_1d(v)) + "]"


def _planar_extras(values: dict):
    """Field radius and mine centers for the planar figure, when known."""
    kind, _, arg = values["blf"].partition(":")
    kind = kind.strip()
    if kind == "minefield":
        from . import barrier as blf

        radius = float(arg) if arg.strip() else 10.0
        if values["obstacles"]:
            path = Path(values["obstacles"])
            if not path.is_absolute():
                path = Path(values.get("_dir", ".")) / path
            return radius, blf.load_centers(path)
        return radius, blf.minefield_layout()
    if kind in ("ball_log", "quartic_ratio") and arg.strip():
        return float(arg), None
    return None, None


def episode_job(values: dict, out_dir: str | None, decimation: int, plots: bool,
                trajectory: bool = True) -> dict:
    """Run one episode and write its artifacts; returns the summary.

    Errors are reported in the returned dict (``error`` key) so that batch
    commands can mark the failing cell and keep going.
    """
    try:
        sim = cfg.build(values)
        log = run_episode(sim)
    except (cfg.ConfigError, IntegrationError, FeasibilityError, ValueError) as exc:
        return {"error": str(exc)}
    summary = log.summary()
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if trajectory:
            log.to_csv(out / "trajectory.csv", decimation)
        report.write_plot_data(out / "plot_data.csv", log, decimation)
        report.write_summary(out / "summary.txt", summary)
        if plots:
            report.render_episode(log, out / "episode.png",
                                  f"{summary['system']} / {summary['controller']}")
            if log.n == 2:
                radius, centers = _planar_extras(values)
                report.render_plane(log, out / "plane.png", radius, centers)
    return summary


def _load(args) -> dict:
    values = cfg.load(args.config)
    values = cfg.apply_overrides(values, args.override)
    if args.seed is not None:
        values["seed"] = args.seed
    return values


def _map(jobs: int, fn, tasks):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, *t) for t in tasks]
        return [f.result() for f in futures]


def _status(summaries) -> int:
    if any("error" in s for s in summaries):
        return EXIT_ERROR
    if any(not s["safe"] for s in summaries):
        return EXIT_UNSAFE
    return EXIT_OK


def _cell(s: dict) -> str:
    if "error" in s:
        return "ERROR"
    mark = "" if s["safe"] else " (unsafe)"
    return f"{s['total_cost']:.3f}{mark}"


# -- subcommands ----------------------------------------------------------------


def cmd_run(args) -> int:
    values = _load(args)
    out = cfg.output_dir(values, args.out)
    plots = values["plots"] and not args.no_plots
    cfg.build(values)  # surface config errors before creating any output
    s = episode_job(values, str(out), values["decimation"], plots)
    if "error" in s:
        print(f"error: {s['error']}", file=sys.stderr)
        return EXIT_ERROR
    print(f"total_cost={report.format_value(s['total_cost'])} safe={report.format_value(s['safe'])}"
          f" reason={s['reason']} max_B_f={s['max_B_f']:.6g}")
    print(f"artifacts written to {out}")
    if not s["safe"]:
        print(f"safety violation: {s['reason']}", file=sys.stderr)
        return EXIT_UNSAFE
    return EXIT_OK


def cmd_compare(args) -> int:
    values = _load(args)
    modes = cfg._words(args.modes) if args.modes else values["modes"]
    ics = cfg._vectors(args.ics) if args.ics else values["initial_conditions"]
    if not ics:
        ics = [values["x0"]]
    if not modes:
        raise cfg.ConfigError("modes: empty mode list")
    variants = [False, True] if (args.known_theta or values["known_theta_variant"]) else \
        [values["known_theta"]]
    out = cfg.output_dir(values, args.out)
    plots = values["plots"] and not args.no_plots

    rows, tasks = [], []
    for known in variants:
        for mode in modes:
            rows.append((mode, known))
            for j, x0 in enumerate(ics):
                v = dict(values, controller=mode, known_theta=known, x0=np.asarray(x0))
                sub = out / "runs" / f"{mode}{'_known' if known else ''}_ic{j + 1}"
                tasks.append((v, str(sub), values["decimation"], plots, False))
    for mode, _ in rows:
        if mode not in cfg.CONTROLLERS:
            raise cfg.ConfigError(f"modes: unknown mode {mode!r}")
    summaries = _map(args.jobs, episode_job, tasks)

    labels = [f"x0={_fmt_vec(x)}" for x in ics]
    header = ["mode", "known_theta"] + labels
    csv_rows, txt_rows = [], []
    it = iter(summaries)
    for mode, known in rows:
        cells = [next(it) for _ in ics]
        csv_rows.append([mode, known] + [c.get("total_cost", float("nan")) if "error" not in c
                                         else "ERROR" for c in cells])
        txt_rows.append([mode, "yes" if known else "no"] + [_cell(c) for c in cells])
    out.mkdir(parents=True, exist_ok=True)
    report.write_table(out / "compare.csv", header, csv_rows)
    text = report.aligned(header, txt_rows)
    (out / "compare.txt").write_text(text)
    print(text, end="")
    for s in summaries:
        if "error" in s:
            print(f"error: {s['error']}", file=sys.stderr)
    return _status(summaries)


def cmd_sweep(args) -> int:
    values = _load(args)
    param = args.parameter or values["parameter"]
    if param not in cfg.SWEEPABLE:
        raise cfg.ConfigError(f"parameter: {param!r} is not a sweepable hyperparameter; "
                              f"choose from {cfg.SWEEPABLE}")
    if args.values is not None:
        raw = cfg._words(args.values)
        grid = [cfg._parse_value(param, r) for r in raw]
    else:
        grid = values["values"]
    if not grid:
        raise cfg.ConfigError("values: empty value list")
    out = cfg.output_dir(values, args.out)
    plots = values["plots"] and not args.no_plots
    tasks = []
    for val in grid:
        v = dict(values)
        v[param] = int(val) if cfg.SCHEMA[param].parse is int else float(val)
        tasks.append((v, str(out / "runs" / f"{param}={val:g}"), values["decimation"], plots,
                      False))
    summaries = _map(args.jobs, episode_job, tasks)

    header = [param, "total_cost", "safe"]
    csv_rows, txt_rows = [], []
    for val, s in zip(grid, summaries):
        if "error" in s:
            csv_rows.append([val, "ERROR", "ERROR"])
            txt_rows.append([f"{val:g}", "ERROR", "-"])
        else:
            csv_rows.append([val, s["total_cost"], s["safe"]])
            txt_rows.append([f"{val:g}", f"{s['total_cost']:.3f}", "yes" if s["safe"] else "no"])
    out.mkdir(parents=True, exist_ok=True)
    report.write_table(out / "sweep.csv", header, csv_rows)
    text = report.aligned(header, txt_rows)
    (out / "sweep.txt").write_text(text)
    print(text, end="")
    ok = [(v, s["total_cost"]) for v, s in zip(grid, summaries) if "error" not in s]
    if plots and len(ok) > 1:
        report.render_sweep(param, [v for v, _ in ok], [c for _, c in ok], out / "sweep.png")
    for s in summaries:
        if "error" in s:
            print(f"error: {s['error']}", file=sys.stderr)
    return _status(summaries)


def cmd_list(args) -> int:
    for name in cfg.builtin_scenarios():
        print(f"{name}\t{cfg.SCENARIO_DIR / (name + '.cfg')}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="acil", description="Safe actor-critic simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True,
                        help="config file, or a built-in scenario name (see 'acil list')")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="replace a config value; KEY may be bare or section.key")
        sp.add_argument("--out", help="output directory (default: the config's output.out)")
        sp.add_argument("--seed", type=int, help="random seed for extrapolation points")
        sp.add_argument("--no-plots", action="store_true", help="skip rendering figures")

    r = sub.add_parser("run", help="run one episode")
    common(r)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="cost table over controller modes and initial states")
    common(c)
    c.add_argument("--modes", help="comma-separated controller modes")
    c.add_argument("--ics", help="initial conditions, e.g. '1,0.1; -1,1'")
    c.add_argument("--known-theta", action="store_true",
                   help="add rows with the true parameters and the identifier off")
    c.add_argument("--jobs", type=int, default=1, help="parallel episodes")
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("sweep", help="cost as a function of one hyperparameter")
    common(s)
    s.add_argument("--parameter", help="hyperparameter key to vary")
    s.add_argument("--values", help="comma-separated values")
    s.add_argument("--jobs", type=int, default=1, help="parallel episodes")
    s.set_defaults(func=cmd_sweep)

    ls = sub.add_parser("list", help="list built-in scenario files")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except cfg.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (IntegrationError, FeasibilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
