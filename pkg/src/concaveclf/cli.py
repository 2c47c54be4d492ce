"""Command-line front end: analyze, tune, simulate, reproduce.

Configs are single JSON documents (see configs/ for shipped presets);
outputs are header-carrying CSV/JSON files. Exit codes: 0 success,
2 config error, 3 tolerance failure, 4 infeasibility.
"""

import argparse
import csv
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import actuation, comparison, reproduce, sim, tuning, windowed
from .errors import ConfigError, NoCrossingError, PreconditionError, RecipeError, TuningError
from .plant import get_plant

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TOLERANCE = 3
EXIT_INFEASIBLE = 4


def _load_config(path):
    if path is None:
        raise ConfigError("this command needs --config")
    p = Path(path)
    if not p.exists():
        builtin = resources.files("concaveclf").joinpath("configs", f"{path}.json")
        if builtin.is_file():
            p = builtin
        else:
            raise ConfigError(f"config file {path!r} not found")
    try:
        with open(p) as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{p}: line {e.lineno}, column {e.colno}: {e.msg}") from e


def _write_csv(out_dir, name, header, rows):
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def _resolve_windows(cfg, c_default=None):
    if "windows" in cfg:
        return [windowed.Window(float(a), float(b)) for a, b in cfg["windows"]]
    if "xi" in cfg:
        c = float(cfg.get("c", c_default if c_default is not None else 1.0))
        return [windowed.Window(float(x) * c, c) for x in cfg["xi"]]
    raise ConfigError("config needs either 'windows' ([[eps, c], ...]) or 'xi' + 'c'")


def cmd_analyze(cfg, out_dir, seed, threads, tol_scale):
    plant = get_plant(cfg["plant"], float(cfg.get("theta", 1.0))) if "plant" in cfg else None
    fns = [comparison.from_dict(d) for d in cfg.get("comparisons", [])]
    if plant is not None and plant.name == "integrator" \
            and cfg.get("include_level_cap_comparison", not fns):
        # the integrator's level cap 2*theta*sqrt(V) is itself a comparison
        fns.append(comparison.SqrtComparison(2.0 * float(cfg.get("theta", 1.0))))
    if not fns:
        raise ConfigError("no comparison functions configured")
    wins = _resolve_windows(cfg, plant.c_max if plant is not None else None)

    rows = []
    for i, fn in enumerate(fns):
        for w in wins:
            rep = windowed.rate_report(fn, w)
            row = rep.csv_row(f"fn{i}", w)
            coded = fn.kernel_code()
            if coded is not None and coded[0] == 3:  # rational: add the closed form
                sigma, kmin, kmax, ell = coded[1]
                row.append(tuning.closed_form_rate(kmin, kmax, ell, sigma, w))
            else:
                row.append("")
            rows.append(row)
    paths = [_write_csv(out_dir, "rates.csv",
                        ["fn_id", "eps_level", "c_level", "T_s", "sigma_nom_1_per_s",
                         "relaxation_ratio", "sigma_closed_form"], rows)]

    verdict_rows = []
    for trip in cfg.get("ordering", []):
        v = windowed.verify_ordering(fns[trip["cave"]], fns[trip["lin"]],
                                     fns[trip["vex"]], wins[0])
        verdict_rows.append([trip["cave"], trip["lin"], trip["vex"], v.sigma_cave,
                             v.sigma_lin, v.sigma_vex, v.ok, v.note])
    if verdict_rows:
        paths.append(_write_csv(out_dir, "ordering.csv",
                                ["cave_idx", "lin_idx", "vex_idx", "sigma_cave",
                                 "sigma_lin", "sigma_vex", "verdict", "note"],
                                verdict_rows))
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_tune(cfg, out_dir, seed, threads, tol_scale):
    plant = get_plant(cfg["plant"], float(cfg.get("theta", 1.0))) if "plant" in cfg else None
    if "window" in cfg:
        w = windowed.Window(*map(float, cfg["window"]))
    else:
        c = plant.c_max if plant is not None else float(cfg["c"])
        w = windowed.Window(float(cfg.get("xi", 1e-2)) * c, c)
    consts = None
    if plant is not None:
        consts = actuation.regularity_from_plant(plant, seed=seed)
    spec = tuning.TuningSpec(
        window=w, sigma=float(cfg["sigma"]), sigma_star=float(cfg["sigma_star"]),
        r=float(cfg.get("r", 1.0)), k_min=float(cfg.get("k_min", 0.1)),
        k_max=float(cfg.get("k_max", 2.0)), theta=float(cfg.get("theta", math.inf)),
        consts=consts, p=cfg.get("p"))
    try:
        res = tuning.tuning_recipe(spec, plant=plant, seed=seed)
    except (RecipeError, TuningError) as e:
        out_dir.mkdir(parents=True, exist_ok=True)
        trace = getattr(e, "trace", [])
        with open(out_dir / "tuning_trace.json", "w") as fh:
            json.dump({"error": str(e), "trace": trace}, fh, indent=2, default=float)
        print(f"tuning failed: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "k_min": res.params.k_min, "k_max": res.params.k_max, "ell": res.params.ell,
        "r": res.r, "p": res.p, "sigma": res.sigma, "sigma_alpha": res.sigma_alpha,
        "margin": res.margin,
    }
    with open(out_dir / "tuned_params.json", "w") as fh:
        json.dump(payload, fh, indent=2, default=float)
    with open(out_dir / "tuning_trace.json", "w") as fh:
        json.dump(res.trace, fh, indent=2, default=float)
    print(f"tuned: {payload}")
    print(f"wrote {out_dir / 'tuned_params.json'} and tuning_trace.json")
    return EXIT_OK


def cmd_simulate(cfg, out_dir, seed, threads, tol_scale):
    plant = get_plant(cfg["plant"], float(cfg.get("theta", 1.0)))
    ctrl = cfg.get("controller", {})
    fn = comparison.from_dict(cfg["comparison"]) if "comparison" in cfg else None
    kappa = ctrl.get("kappa", 0.5)
    if isinstance(kappa, list):
        kappa = tuple(kappa)
    sim_cfg = sim.SimConfig(
        controller=ctrl.get("type", "soft_qp"),
        horizon=float(cfg.get("horizon", 5.0)), dt=float(cfg.get("dt", 1e-3)),
        comparison=fn, theta=float(ctrl.get("theta", cfg.get("theta", 10.0))),
        q=float(ctrl.get("q", 1e5)),
        H=np.asarray(ctrl["H"], dtype=float) if "H" in ctrl else None,
        sigma_min=float(ctrl.get("sigma_min", 0.1)),
        sigma_max=float(ctrl.get("sigma_max", 10.0)), kappa=kappa,
        substeps=int(cfg.get("substeps", 4)), seed=seed)
    x0 = np.asarray(cfg["x0"], dtype=float) if "x0" in cfg else plant.x0_protocol
    rec = sim.simulate(plant, sim_cfg, x0)
    if len(rec.u) == 0:
        print("empty record: V(x0) = 0, nothing to simulate", file=sys.stderr)
        return EXIT_CONFIG
    out_dir.mkdir(parents=True, exist_ok=True)
    rec.to_csv(out_dir / "trajectory.csv")
    c = float(rec.V[0])
    xi = cfg.get("xi", [1e-2, 1e-3, 1e-4])
    try:
        rep = sim.metrics(rec, c, [float(x) * c for x in xi])
    except NoCrossingError as e:
        print(f"metrics unavailable: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    _write_csv(out_dir, "metrics.csv",
               ["eps_level", "T_s", "sigma_nom_1_per_s", "energy_u2_s"],
               rep.csv_rows())
    with open(out_dir / "metrics.json", "w") as fh:
        json.dump({"c": c, "eps": list(map(float, rep.eps_list)),
                   "T": rep.crossing_times.tolist(),
                   "sigma_nom": rep.nominal_rates.tolist(),
                   "energy": rep.energies.tolist(),
                   "peak_input": rep.peak_input}, fh, indent=2)
    print(f"wrote {out_dir / 'trajectory.csv'}, metrics.csv, metrics.json")
    return EXIT_OK


def cmd_reproduce(target, out_dir, seed, threads, tol_scale):
    try:
        report = reproduce.run_target(target, tol_scale=tol_scale, threads=threads)
    except KeyError as e:
        raise ConfigError(str(e)) from e
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in report.tables.items():
        _write_csv(out_dir, f"{name}.csv", header, rows)
    lines = [c.line() for c in report.checks]
    for line in lines:
        print(line)
    for note in report.notes:
        print(f"[NOTE] {note}")
    with open(out_dir / f"{target}_report.json", "w") as fh:
        json.dump({"target": target, "ok": report.ok,
                   "checks": [c.__dict__ for c in report.checks],
                   "notes": report.notes}, fh, indent=2, default=float)
    if not report.ok:
        failed = [c.name for c in report.checks if not c.ok]
        print(f"tolerance failures: {', '.join(failed)}", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


def main(argv=None):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=0, help="sampling seed")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for batch reproduction")
    common.add_argument("--tolerance-scale", type=float, default=1.0,
                        help="scale factor applied to every pass/fail tolerance")
    parser = argparse.ArgumentParser(
        prog="concaveclf",
        description="Concave comparison-function shaping for saturated CLF-QP control")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("analyze", "tune", "simulate"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("--config", required=True,
                        help="JSON config path or shipped preset name")
    rp = sub.add_parser("reproduce", parents=[common])
    rp.add_argument("target", choices=sorted(reproduce.TARGETS))

    args = parser.parse_args(argv)
    out_dir = Path(args.out)
    try:
        if args.command == "reproduce":
            return cmd_reproduce(args.target, out_dir, args.seed, args.threads,
                                 args.tolerance_scale)
        cfg = _load_config(args.config)
        fn = {"analyze": cmd_analyze, "tune": cmd_tune, "simulate": cmd_simulate}
        return fn[args.command](cfg, out_dir, args.seed, args.threads,
                                args.tolerance_scale)
    except (ConfigError, PreconditionError, KeyError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
