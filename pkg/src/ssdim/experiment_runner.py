"""Seeded Monte-Carlo campaigns: estimator tables, figure data, oracle checks.

Per-trial seeds come from :func:`trial_seed`, a splitmix64 chain over
``(master_seed, M, N, trial_index)``.  The signal model for a grid point
uses trial index ``MODEL_SLOT`` so that it is shared by all trials.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .hankel_stats import (
    autocov_sample_spectrum,
    build_hankel_pair,
    cca_sample_spectrum,
    estimate_s_ratio,
    estimate_s_threshold,
)
from .noise_equivalents import (
    NoiseModel,
    cca_density,
    cca_density_grid,
    density_autocov,
    support_edge_autocov,
)
from .spike_oracle import SpikeReport, autocov_outliers, cca_outliers
from .state_space import (
    cca_fig_model,
    example_model_odd_s,
    example_model_s2,
    noise_from_descriptor,
    simulate,
    table_model,
    theoretical_stats,
)

MASK64 = (1 << 64) - 1
MODEL_SLOT = MASK64
MAX_BIN = 9  # values >= 9 share the overflow bin "9+"
TOP_EIGS = 12
KINDS = ("autocov", "cca")
PRESETS = ("table", "cca_fig", "odd_s", "s2", "noise")


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def trial_seed(master: int, M: int, N: int, idx: int) -> int:
    h = _splitmix64(master & MASK64)
    for v in (M, N, idx):
        h = _splitmix64(h ^ (v & MASK64))
    return h


def fmt(x) -> str:
    return f"{float(x):.17g}"


@dataclass
class ExperimentConfig:
    preset: str = "table"
    kind: str = "cca"
    grid: list = field(default_factory=lambda: [(200, 800)])
    trials: int = 100
    eps1: float = 0.01
    eps2: float = 0.05
    kmax: int = 20
    seed: int = 0
    outputs: str | None = None
    L: int | None = None
    model_params: dict = field(default_factory=dict)
    noise: dict | None = None
    workers: int = 1
    bins: str | int = "fd"

    def __post_init__(self):
        self.grid = [tuple(int(v) for v in g) for g in self.grid]
        if self.preset not in PRESETS:
            raise ValueError(f"preset must be one of {PRESETS}")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.grid:
            raise ValueError("grid is empty")
        for M, N in self.grid:
            if M < 1 or N < 1 or M * self.depth / N >= 1:
                raise ValueError(f"grid point (M={M}, N={N}) gives c = ML/N >= 1")

    @property
    def depth(self) -> int:
        if self.L is not None:
            return self.L
        if self.preset == "cca_fig":
            return 4
        if self.noise and "L" in self.noise:
            return int(self.noise["L"])
        return 1

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def build_setup(config: ExperimentConfig, M: int, N: int):
    """Signal model (or ``None``) and noise model for one grid point."""
    mseed = trial_seed(config.seed, M, N, MODEL_SLOT)
    p = dict(config.model_params)
    if config.preset == "table":
        ex = table_model(M, N, seed=mseed, **p)
    elif config.preset == "cca_fig":
        ex = cca_fig_model(M, N, config.depth, seed=mseed, **p)
    elif config.preset == "odd_s":
        ex = example_model_odd_s(p.pop("r", 3), M / N, M=M, seed=mseed, **p)
    elif config.preset == "s2":
        ex = example_model_s2(M / N, M=M, seed=mseed, **p)
    else:
        desc = dict(config.noise or {"kind": "white"})
        desc.update({"M": M, "N": N, "L": config.depth})
        return None, noise_from_descriptor(desc)
    return ex.model, ex.noise


def oracle_report(model, noise: NoiseModel, kind: str) -> SpikeReport:
    if model is None:
        edge = support_edge_autocov(noise).x_plus if kind == "autocov" else 4 * noise.c * (1 - noise.c)
        return SpikeReport(0, (), (), edge, kind, {"noise_only": True})
    stats = theoretical_stats(model, noise)
    if kind == "autocov":
        return autocov_outliers(noise, stats)
    return cca_outliers(noise.c, stats)


def edge_for(noise: NoiseModel, kind: str) -> float:
    return support_edge_autocov(noise).x_plus if kind == "autocov" else 4 * noise.c * (1 - noise.c)


def sample_spectrum(model, noise: NoiseModel, kind: str, seed: int):
    y = simulate(model, noise, seed)
    pair = build_hankel_pair(y, noise.L)
    return autocov_sample_spectrum(pair) if kind == "autocov" else cca_sample_spectrum(pair)


@dataclass
class TrialRecord:
    seed: int
    M: int
    N: int
    model_kind: str
    s_threshold: int
    s_ratio: int
    ratio_overflow: bool
    top_eigs: list
    oracle: dict


def _run_trials(config, M, N, fn):
    seeds = [trial_seed(config.seed, M, N, i) for i in range(config.trials)]
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(fn, seeds))
    return [fn(s) for s in seeds]


def _bin(v: int) -> str:
    return str(v) if v < MAX_BIN else f"{MAX_BIN}+"


BIN_LABELS = [str(v) for v in range(MAX_BIN)] + [f"{MAX_BIN}+"]


@dataclass
class TableResult:
    rows: list
    records: list
    summary: dict

    def probability(self, M, N, estimator, value) -> float:
        key = _bin(value) if isinstance(value, int) else value
        for row in self.rows:
            if row[:4] == (M, N, estimator, key):
                return row[4]
        raise KeyError((M, N, estimator, value))


def run_table(config: ExperimentConfig) -> TableResult:
    """Empirical distribution of both estimators at each grid point."""
    rows, records, summary = [], [], {"config": _config_dict(config), "points": []}
    for M, N in config.grid:
        model, noise = build_setup(config, M, N)
        report = oracle_report(model, noise, config.kind)
        edge = edge_for(noise, config.kind)

        def one(seed, model=model, noise=noise, edge=edge, report=report, M=M, N=N):
            spec = sample_spectrum(model, noise, config.kind, seed)
            s_thr = estimate_s_threshold(spec, edge, config.eps1)
            s_rat, over = estimate_s_ratio(spec, config.eps2, config.kmax, with_flag=True)
            return TrialRecord(seed, M, N, config.kind, s_thr, s_rat, over,
                               [float(v) for v in spec.eigs[:TOP_EIGS]], report.to_dict())

        recs = _run_trials(config, M, N, one)
        records.extend(recs)
        point = {"M": M, "N": N, "c": noise.c, "edge": edge, "oracle_s": report.s, "oracle_rho": list(report.rho)}
        for est, attr in (("threshold", "s_threshold"), ("ratio", "s_ratio")):
            counts = {b: 0 for b in BIN_LABELS}
            for r in recs:
                counts[_bin(getattr(r, attr))] += 1
            probs = {b: counts[b] / len(recs) for b in BIN_LABELS}
            for b in BIN_LABELS:
                rows.append((M, N, est, b, probs[b]))
            point[est] = probs
        summary["points"].append(point)
    result = TableResult(rows, records, summary)
    if config.outputs:
        _write_table(config.outputs, result)
    return result


def _config_dict(config):
    d = asdict(config)
    # where and how fast a run happens does not change its numbers
    d.pop("outputs")
    d.pop("workers")
    d["grid"] = [list(g) for g in config.grid]
    return d


def _write_table(outdir, result: TableResult):
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "table.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["M", "N", "estimator", "value", "probability"])
        for M, N, est, b, p in result.rows:
            w.writerow([M, N, est, b, fmt(p)])
    _dump_json(os.path.join(outdir, "summary.json"), result.summary)
    _dump_json(os.path.join(outdir, "trials.json"), [asdict(r) for r in result.records])


def _dump_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_round17(obj), fh, indent=1, sort_keys=True)
        fh.write("\n")


def _round17(obj):
    if isinstance(obj, float):
        return float(fmt(obj))
    if isinstance(obj, dict):
        return {str(k): _round17(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round17(v) for v in obj]
    if isinstance(obj, np.generic):
        return _round17(obj.item())
    return obj


@dataclass
class FigureData:
    bin_edges: np.ndarray
    counts: np.ndarray
    grid: np.ndarray
    density: np.ndarray
    rho: tuple
    edge: float
    eigs: np.ndarray


def run_figure(config: ExperimentConfig, n_density: int = 400) -> FigureData:
    """Histogram of pooled sample eigenvalues, deterministic density and oracle markers (first grid point)."""
    M, N = config.grid[0]
    model, noise = build_setup(config, M, N)
    report = oracle_report(model, noise, config.kind)
    specs = _run_trials(config, M, N, lambda s: sample_spectrum(model, noise, config.kind, s))
    eigs = np.concatenate([sp.nonzero() for sp in specs])
    edges = np.histogram_bin_edges(eigs, bins=config.bins)
    counts, _ = np.histogram(eigs, bins=edges)
    if config.kind == "autocov":
        x_plus = support_edge_autocov(noise).x_plus
        grid = np.linspace(1e-3 * x_plus, x_plus, n_density)
        meas = density_autocov(noise, grid)
    else:
        grid = cca_density_grid(noise.c, n_density)
        meas = cca_density(noise.c, grid)
    fig = FigureData(edges, counts, meas.grid, meas.density, report.rho, report.edge, eigs)
    if config.outputs:
        os.makedirs(config.outputs, exist_ok=True)
        _write_rows(os.path.join(config.outputs, "histogram.csv"), ["bin_left", "bin_right", "count"],
                    [(fmt(a), fmt(b), int(n)) for a, b, n in zip(edges[:-1], edges[1:], counts)])
        _write_rows(os.path.join(config.outputs, "density.csv"), ["x", "density"],
                    [(fmt(a), fmt(b)) for a, b in zip(meas.grid, meas.density)])
        _dump_json(os.path.join(config.outputs, "oracle.json"), report.to_dict())
    return fig


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def oracle_vs_empirical(config: ExperimentConfig) -> dict:
    """Median and 90th percentile of ``|lam_k - rho_k|`` (and relative) for ``k = 1..s``."""
    out = {}
    for M, N in config.grid:
        model, noise = build_setup(config, M, N)
        report = oracle_report(model, noise, config.kind)
        rho = np.asarray(report.rho)
        specs = _run_trials(config, M, N, lambda s: sample_spectrum(model, noise, config.kind, s))
        if rho.size == 0:
            out[(M, N)] = {"s": 0, "abs": [], "rel": [], "median_abs": [], "p90_abs": [],
                           "median_rel": [], "p90_rel": []}
            continue
        top = np.array([sp.eigs[sp.structural_ones:][: rho.size] for sp in specs])
        dev = np.abs(top - rho[None, :])
        rel = dev / rho[None, :]
        out[(M, N)] = {
            "s": int(rho.size),
            "rho": rho.tolist(),
            "abs": dev.tolist(),
            "rel": rel.tolist(),
            "median_abs": np.median(dev, axis=0).tolist(),
            "p90_abs": np.quantile(dev, 0.9, axis=0).tolist(),
            "median_rel": np.median(rel, axis=0).tolist(),
            "p90_rel": np.quantile(rel, 0.9, axis=0).tolist(),
        }
    if config.outputs:
        os.makedirs(config.outputs, exist_ok=True)
        _dump_json(os.path.join(config.outputs, "deviations.json"),
                   {f"{M}x{N}": v for (M, N), v in out.items()})
    return out


def eigen_ratios(config: ExperimentConfig, count: int = 20) -> np.ndarray:
    """``lam_{i+1} / lam_i`` for one realisation at the first grid point."""
    M, N = config.grid[0]
    model, noise = build_setup(config, M, N)
    spec = sample_spectrum(model, noise, config.kind, trial_seed(config.seed, M, N, 0))
    eigs = spec.eigs[spec.structural_ones:][: count + 1]
    return eigs[1:] / eigs[:-1]
