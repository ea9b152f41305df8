"""
Canonical correlations find P
=============================

Same kind of model, now read through the canonical correlations between
past and future.  Only the state survives, so one eigenvalue escapes.
"""

from ssdim import (
    build_hankel_pair,
    cca_outliers,
    cca_sample_spectrum,
    estimate_s_ratio,
    estimate_s_threshold,
    simulate,
    table_model,
    theoretical_stats,
)

ex = table_model(200, 800)
stats = theoretical_stats(ex.model, ex.noise)
rep = cca_outliers(ex.noise.c, stats)
print(f"oracle: s = {rep.s}, rho = {rep.rho}, bulk edge = {rep.edge}")

for seed in range(5):
    spec = cca_sample_spectrum(build_hankel_pair(simulate(ex.model, ex.noise, seed), 1))
    top = spec.nonzero()[:3]
    print(f"seed {seed}: top = {top.round(4)}  threshold s = {estimate_s_threshold(spec, rep.edge)}"
          f"  ratio s = {estimate_s_ratio(spec)}")
