"""
The autocovariance counts too many
==================================

A one-dimensional state (P = 1) driven by r - 1 inputs that also leak
straight into the observation.  The outlier oracle says 2r - 1 eigenvalues
leave the bulk, and a simulation agrees.
"""

import numpy as np

from ssdim import (
    autocov_outliers,
    autocov_sample_spectrum,
    build_hankel_pair,
    example_model_odd_s,
    simulate,
    theoretical_stats,
)

for r in (2, 3):
    ex = example_model_odd_s(r, 0.5, M=300)
    stats = theoretical_stats(ex.model, ex.noise)
    rep = autocov_outliers(ex.noise, stats)
    eigs = autocov_sample_spectrum(build_hankel_pair(simulate(ex.model, ex.noise, 1), 1)).eigs
    print(f"r = {r}: P = {ex.model.P}, predicted s = {rep.s}, edge = {rep.edge:.3f}")
    print("  predicted:", np.round(rep.rho, 3))
    print("  observed: ", np.round(eigs[: rep.s + 1], 3))
