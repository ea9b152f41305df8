"""Command-line entry point: ``ssdim <subcommand> ...``.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import ConvergenceError, DegenerateError
from .experiment_runner import (
    ExperimentConfig,
    _dump_json,
    _write_rows,
    build_setup,
    eigen_ratios,
    fmt,
    oracle_report,
    run_figure,
    run_table,
)
from .hankel_stats import (
    autocov_sample_spectrum,
    build_hankel_pair,
    cca_sample_spectrum,
    estimate_s_ratio,
    estimate_s_threshold,
    read_samples_csv,
    write_samples_csv,
)
from .noise_equivalents import (
    NoiseModel,
    autocov_support,
    cca_density,
    cca_density_grid,
    cca_support,
    density_autocov,
    support_edge_autocov,
)
from .state_space import StateSpaceModel, noise_from_descriptor, simulate

EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


def positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def grid_arg(text):
    out = []
    for item in text.split(","):
        try:
            M, N = item.lower().split("x")
            out.append((int(M), int(N)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"grid entries look like 200x800, got {item!r}") from None
    return out


def _load_json(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"{path} must hold a JSON object")
    return data


def _noise_from_config(cfg):
    if "noise" in cfg:
        return noise_from_descriptor(cfg["noise"])
    if "c" in cfg:
        return NoiseModel.from_ratio(float(cfg["c"]), float(cfg.get("sigma2", 1.0)))
    raise UsageError("config needs a 'noise' descriptor or a ratio 'c'")


def _setup_from_config(cfg):
    """``(model, noise)`` from either a preset config or an explicit model/noise pair."""
    if "preset" in cfg:
        keys = {k: cfg[k] for k in ("preset", "L", "model_params", "noise", "seed") if k in cfg}
        exp = ExperimentConfig.from_dict({**keys, "grid": [(cfg.get("M", 200), cfg.get("N", 800))]})
        return build_setup(exp, *exp.grid[0])
    noise = _noise_from_config(cfg)
    model = cfg.get("model")
    return (None if model is None else StateSpaceModel.from_dict(model)), noise


def cmd_density(args):
    cfg = _load_json(args.config)
    os.makedirs(args.out, exist_ok=True)
    if args.kind == "cca":
        c = float(cfg["c"]) if "c" in cfg else _noise_from_config(cfg).c
        sup = cca_support(c)
        meas = cca_density(c, cca_density_grid(c, args.points))
        summary = {"kind": "cca", "c": c, "bulk_right": sup.bulk_right, "has_unit_atom": sup.has_unit_atom,
                   "atom_mass_at_one": sup.atom_mass_at_one}
    else:
        noise = _noise_from_config(cfg)
        sup = autocov_support(noise)
        grid = np.linspace(sup.x_plus * 1e-3, sup.x_plus, args.points)
        meas = density_autocov(noise, grid)
        summary = {"kind": "autocov", "c": noise.c, "x_plus": sup.x_plus, "w_plus": sup.w_plus,
                   "intervals": [list(iv) for iv in sup.intervals], "missing_mass": meas.missing_mass}
    _write_rows(os.path.join(args.out, "density.csv"), ["x", "density"],
                [(fmt(a), fmt(b)) for a, b in zip(meas.grid, meas.density)])
    _dump_json(os.path.join(args.out, "support.json"), summary)
    print(json.dumps(summary))


def cmd_oracle(args):
    cfg = _load_json(args.config)
    model, noise = _setup_from_config(cfg)
    kinds = ("autocov", "cca") if args.kind == "both" else (args.kind,)
    out = {k: oracle_report(model, noise, k).to_dict() for k in kinds}
    print(json.dumps(out if len(kinds) > 1 else out[kinds[0]], default=float))


def cmd_simulate(args):
    cfg = _load_json(args.config)
    model, noise = _setup_from_config(cfg)
    y = simulate(model, noise, args.seed)
    write_samples_csv(args.out, y, noise.L)
    print(f"wrote {y.shape[0]} x {y.shape[1]} samples to {args.out}")


def cmd_estimate(args):
    if not os.path.isfile(args.input):
        raise UsageError(f"no such file: {args.input}")
    y, L = read_samples_csv(args.input)
    pair = build_hankel_pair(y, L)
    if args.kind == "cca":
        spec = cca_sample_spectrum(pair)
        edge = 4 * pair.c * (1 - pair.c)
    else:
        spec = autocov_sample_spectrum(pair)
        edge = support_edge_autocov(NoiseModel.white(pair.M, L, pair.N, args.sigma2)).x_plus
    s_thr = estimate_s_threshold(spec, edge, args.eps1)
    s_rat, over = estimate_s_ratio(spec, args.eps2, args.kmax, with_flag=True)
    print(json.dumps({"kind": args.kind, "M": pair.M, "L": L, "N": pair.N, "edge": edge,
                      "s_threshold": s_thr, "s_ratio": s_rat, "ratio_overflow": over}))


def _table(args, kind):
    # command-line flags win over the config file, which wins over the defaults
    base = _load_json(args.config) if args.config else {}
    if base.get("kind", kind) != kind:
        raise UsageError(f"config kind {base['kind']!r} does not match this subcommand ({kind})")
    flags = {k: getattr(args, k) for k in ("trials", "grid", "seed", "workers", "eps1", "eps2")
             if getattr(args, k) is not None}
    if args.out is not None:
        flags["outputs"] = args.out
    if args.snr is not None:
        flags["model_params"] = {**base.get("model_params", {}), "snr": args.snr}
    defaults = {"preset": "table", "outputs": args.default_out}
    cfg = ExperimentConfig.from_dict({**defaults, **base, **flags, "kind": kind})
    if cfg.outputs is None:
        raise UsageError("no output directory")
    res = run_table(cfg)
    for point in res.summary["points"]:
        thr, rat = point["threshold"], point["ratio"]
        print(f"M={point['M']} N={point['N']} oracle_s={point['oracle_s']} "
              f"P(s_threshold=1)={thr['1']:.3f} P(s_ratio=1)={rat['1']:.3f}")
    print(f"wrote {os.path.join(cfg.outputs, 'table.csv')}")


def cmd_table1(args):
    _table(args, "autocov")


def cmd_table2(args):
    _table(args, "cca")


FIGURES = {
    "fig1_autocov_r2": dict(preset="odd_s", kind="autocov", grid=[(600, 1200)], model_params={"r": 2}),
    "fig2_autocov_r3": dict(preset="odd_s", kind="autocov", grid=[(600, 1200)], model_params={"r": 3}),
    "fig3_autocov_s2": dict(preset="s2", kind="autocov", grid=[(600, 1200)]),
    "fig4_cca_s1": dict(preset="cca_fig", kind="cca", grid=[(130, 2000)], model_params={"variant": "s1"}),
    "fig5_cca_s2": dict(preset="cca_fig", kind="cca", grid=[(130, 2000)], model_params={"variant": "s2"}),
}


def cmd_figures(args):
    for key, value in (("trials", 1), ("grid", None), ("seed", 0), ("workers", 1), ("out", args.default_out)):
        if getattr(args, key) is None:
            setattr(args, key, value)
    for name, spec in FIGURES.items():
        cfg = ExperimentConfig(**spec, trials=args.trials, seed=args.seed, workers=args.workers,
                               outputs=os.path.join(args.out, name))
        fig = run_figure(cfg)
        print(f"{name}: {fig.eigs.size} eigenvalues, {len(fig.rho)} oracle markers")
    # eigenvalue ratios of one realisation of the table model, both sample matrices
    ratio_grid = args.grid[:1] if args.grid else [(200, 800)]
    rows = []
    for kind in ("autocov", "cca"):
        cfg = ExperimentConfig(preset="table", kind=kind, grid=ratio_grid, trials=1, seed=args.seed)
        for i, v in enumerate(eigen_ratios(cfg), start=1):
            rows.append((kind, i, fmt(v)))
    path = os.path.join(args.out, "fig6_ratios")
    os.makedirs(path, exist_ok=True)
    _write_rows(os.path.join(path, "ratios.csv"), ["kind", "k", "ratio"], rows)
    print(f"fig6_ratios: {len(rows)} ratios")


def build_parser():
    p = argparse.ArgumentParser(prog="ssdim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, metavar="subcommand")

    d = sub.add_parser("density", help="deterministic-equivalent density and support")
    d.add_argument("--kind", choices=("autocov", "cca"), required=True)
    d.add_argument("--config", required=True, help="JSON with a 'noise' descriptor or a ratio 'c'")
    d.add_argument("--out", required=True, help="output directory")
    d.add_argument("--points", type=positive_int, default=400, help="grid size (default 400)")
    d.set_defaults(func=cmd_density)

    o = sub.add_parser("oracle", help="print the predicted outliers as JSON")
    o.add_argument("--config", required=True, help="preset or explicit model JSON")
    o.add_argument("--kind", choices=("autocov", "cca", "both"), default="both")
    o.set_defaults(func=cmd_oracle)

    s = sub.add_parser("simulate", help="write simulated samples in the sample-file format")
    s.add_argument("--config", required=True, help="preset or explicit model JSON")
    s.add_argument("--out", required=True, help="output CSV path")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="run both estimators on a sample file")
    e.add_argument("--input", required=True, help="sample CSV (header M=..,L=.., 2M rows)")
    e.add_argument("--kind", choices=("autocov", "cca"), default="cca")
    e.add_argument("--eps1", type=float, default=0.01, help="threshold margin (default 0.01)")
    e.add_argument("--eps2", type=float, default=0.05, help="ratio margin (default 0.05)")
    e.add_argument("--kmax", type=positive_int, default=20, help="ratio search bound (default 20)")
    e.add_argument("--sigma2", type=float, default=1.0, help="white-noise level for the autocov edge")
    e.set_defaults(func=cmd_estimate)

    for name, func, kind in (("reproduce-table1", cmd_table1, "autocovariance"),
                             ("reproduce-table2", cmd_table2, "canonical-correlation")):
        t = sub.add_parser(name, help=f"estimator frequencies, {kind} side")
        _campaign_flags(t, default_out=f"out/{name.split('-')[1]}", default_trials=100)
        t.add_argument("--config", help="experiment config JSON (see README); flags override its fields")
        t.add_argument("--snr", type=float, help="override delta^2/sigma^2 of the table model")
        t.add_argument("--eps1", type=float, help="threshold margin (default 0.01)")
        t.add_argument("--eps2", type=float, help="ratio margin (default 0.05)")
        t.set_defaults(func=func)

    f = sub.add_parser("reproduce-figures", help="histogram, density and marker data for all figures")
    _campaign_flags(f, default_out="out/figures", default_trials=1)
    f.set_defaults(func=cmd_figures)
    return p


def _campaign_flags(p, default_out, default_trials):
    # None marks "not given", so a config file can fill the gap
    p.add_argument("--trials", type=positive_int, help=f"realisations per grid point (default {default_trials})")
    p.add_argument("--grid", type=grid_arg, help="comma list of MxN (default 200x800)")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--out", help=f"output directory (default {default_out})")
    p.add_argument("--workers", type=positive_int, help="thread pool size (default 1)")
    p.set_defaults(default_out=default_out)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ConvergenceError, DegenerateError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"ssdim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"ssdim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
