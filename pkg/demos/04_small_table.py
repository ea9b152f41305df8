"""
A pocket-sized Monte-Carlo table
================================

Twenty trials per size for both spectra.  Bump ``trials`` for real numbers;
``ssdim reproduce-table1`` and ``reproduce-table2`` do the full runs.
"""

from ssdim import ExperimentConfig, run_table

for kind in ("autocov", "cca"):
    cfg = ExperimentConfig(preset="table", kind=kind, grid=[(100, 400), (200, 800)], trials=20, seed=0)
    res = run_table(cfg)
    for M, N in cfg.grid:
        print(f"{kind:8s} M={M} N={N}  P(threshold=1)={res.probability(M, N, 'threshold', 1):.2f}"
              f"  P(ratio=1)={res.probability(M, N, 'ratio', 1):.2f}")
