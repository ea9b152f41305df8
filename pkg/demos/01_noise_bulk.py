"""
Where does pure noise live?
===========================

White noise, M = 200 sensors, N = 800 snapshots.  The squared singular
values of the lag-one autocovariance stay below x_plus, and the
past/future canonical correlations stay below 4c(1 - c).
"""

import numpy as np

from ssdim import (
    NoiseModel,
    autocov_sample_spectrum,
    build_hankel_pair,
    cca_sample_spectrum,
    cca_support,
    density_autocov,
    simulate,
    support_edge_autocov,
)

noise = NoiseModel.white(200, 1, 800)
edge = support_edge_autocov(noise)
print(f"c = {noise.c}, w_plus = {edge.w_plus:.4f}, x_plus = {edge.x_plus:.4f}")

y = simulate(None, noise, seed=0)
pair = build_hankel_pair(y, L=1)

auto = autocov_sample_spectrum(pair).eigs
print(f"largest autocov eigenvalue: {auto[0]:.4f}")

# coarse text histogram against the deterministic density
bins = np.linspace(0, 1.1 * edge.x_plus, 12)
# the density blows up at 0, so compare bin masses through the CDF
law = density_autocov(noise, np.geomspace(1e-6, bins[-1], 2000))
predicted = np.diff(law.cdf(bins)) * auto.size
counts, _ = np.histogram(auto, bins)
for lo, k, p in zip(bins, counts, predicted):
    print(f"{lo:6.3f} | {'#' * int(k):<100s} predicted {p:5.1f}")

cca = cca_sample_spectrum(pair).nonzero()
print(f"largest canonical correlation^2: {cca[0]:.4f}  bulk edge: {cca_support(noise.c).bulk_right:.4f}")
