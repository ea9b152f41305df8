"""Finite-N predictions of the outliers of both sample matrices.

Autocovariance side: the ``2r x 2r`` function ``H(y)`` whose zero
eigenvalues locate the outliers, and its value at the bulk edge.
Projector side: the ``r x r`` matrix ``F`` compared with ``c/(1-c)``
through the increasing function ``f_ratio``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, DegenerateError
from .noise_equivalents import NoiseModel, SupportAutocov, f_ratio, support_edge_autocov, w_of_x
from .state_space import SignalStats

NEG_RTOL = 1e-10


@dataclass(frozen=True)
class SpikeReport:
    s: int
    rho: tuple
    oracle_eigs: tuple
    edge: float
    model_kind: str
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), default=float)


def _tiled(noise: NoiseModel, L: int) -> np.ndarray:
    return np.tile(noise.lam, L)


def _inner_gram(noise, stats, w):
    # Theta^* (I_L kron (w I - R)^{-1}) Theta
    d = 1.0 / (w - _tiled(noise, stats.L))
    K = stats.theta.conj().T @ (d[:, None] * stats.theta)
    return 0.5 * (K + K.conj().T)


def _trace_term(noise, w):
    # (1/M) Tr R (w I - R)^{-1}
    return float(np.mean(noise.lam / (w - noise.lam)))


def edge_gram_autocov(noise: NoiseModel, stats: SignalStats, edge: SupportAutocov | None = None) -> np.ndarray:
    """``G = (c w_+ / sqrt(x_+)) m_+ [K_+^{-1} - Delta^2]`` with ``K_+ = Theta^*(I kron (w_+ - R)^{-1})Theta``."""
    edge = edge or support_edge_autocov(noise)
    w, x = edge.w_plus, edge.x_plus
    K = _inner_gram(noise, stats, w)
    try:
        Kinv = np.linalg.inv(K)
    except np.linalg.LinAlgError as exc:
        raise DegenerateError("inner Gram matrix is singular") from exc
    G = noise.c * w / np.sqrt(x) * _trace_term(noise, w) * (Kinv - np.diag(stats.delta2))
    return 0.5 * (G + G.conj().T)


def edge_matrix(G: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    return np.block([[G, gamma.conj().T], [gamma, G]])


def _count_negative(mat: np.ndarray):
    eigs = np.linalg.eigvalsh(mat)
    scale = max(np.max(np.abs(eigs)), 1e-300)
    degenerate = bool(np.any(np.abs(eigs) <= NEG_RTOL * scale))
    return int(np.sum(eigs < -NEG_RTOL * scale)), eigs, degenerate


def autocov_spike_count(noise: NoiseModel, stats: SignalStats, strict: bool = False) -> int:
    """Number of negative eigenvalues of ``[[G, Gamma^*], [Gamma, G]]``.

    With ``strict=True`` an eigenvalue numerically equal to 0 raises
    :class:`DegenerateError`; otherwise it is counted as nonnegative.
    """
    G = edge_gram_autocov(noise, stats)
    s, _, degenerate = _count_negative(edge_matrix(G, stats.gamma))
    if strict and degenerate:
        raise DegenerateError("edge matrix has an eigenvalue at 0")
    return s


def H_matrix(noise: NoiseModel, stats: SignalStats, y: float, edge: SupportAutocov | None = None,
             _at_edge: bool = False) -> np.ndarray:
    """``H(y)`` for real ``y > sqrt(x_+)``; ``y = sqrt(x_+)`` is allowed as the edge limit."""
    edge = edge or support_edge_autocov(noise)
    x = y * y
    if _at_edge or np.isclose(x, edge.x_plus, rtol=1e-15, atol=0):
        w = edge.w_plus
        x = edge.x_plus
        y = np.sqrt(x)
    elif x > edge.x_plus:
        w = w_of_x(noise, x, edge)
    else:
        raise ValueError(f"y = {y} must be at least sqrt(x_plus) = {np.sqrt(edge.x_plus)}")
    c = noise.c
    # t(x) = (w/x) (1/M) Tr R (R - w)^{-1} and bold t(y) = y t(y^2)
    t_bold = y * (w / x) * (-_trace_term(noise, w))
    # bold T_beta(y) = y (w/x) Theta^* (I kron (R - w)^{-1}) Theta
    T_bold = -y * (w / x) * _inner_gram(noise, stats, w)
    try:
        T_inv = np.linalg.inv(T_bold)
    except np.linalg.LinAlgError as exc:
        raise DegenerateError("T_beta is singular") from exc
    q = 1.0 - (c * t_bold) ** 2
    diag = (c * t_bold / q) * np.diag(stats.delta2) - T_inv
    H = np.block([[diag, stats.gamma.conj().T / q], [stats.gamma / q, diag]])
    return 0.5 * (H + H.conj().T)


def autocov_outliers(noise: NoiseModel, stats: SignalStats, delta0: float = 1e-6) -> SpikeReport:
    """Count and locations ``rho_k = y_k^2`` of the autocovariance outliers."""
    edge = support_edge_autocov(noise)
    G = edge_gram_autocov(noise, stats, edge)
    s, eigs, degenerate = _count_negative(edge_matrix(G, stats.gamma))
    flags = {"edge_degenerate": degenerate}
    y0 = np.sqrt(edge.x_plus)
    if s == 0:
        return SpikeReport(0, (), tuple(eigs.tolist()), edge.x_plus, "autocov", flags)

    def lam_k(y, k):
        return np.linalg.eigvalsh(H_matrix(noise, stats, y, edge))[k]

    lo = y0 + delta0
    y_max = 2.0 * y0
    while lam_k(y_max, 0) <= 0:
        y_max *= 2.0
        if y_max > 1e12 * y0:
            raise ConvergenceError("could not bracket the outliers")
    ys = []
    for k in range(s):
        f_lo = lam_k(lo, k)
        if f_lo >= 0:
            flags["unbracketed"] = True
            raise ConvergenceError(f"eigenvalue {k} of H is already nonnegative just above the edge")
        ys.append(brentq(lambda y: lam_k(y, k), lo, y_max, xtol=1e-14, rtol=1e-14, maxiter=300))
    rho = sorted((y * y for y in ys), reverse=True)
    return SpikeReport(s, tuple(rho), tuple(eigs.tolist()), edge.x_plus, "autocov", flags)


def cca_F_matrix(stats: SignalStats) -> tuple[np.ndarray, np.ndarray]:
    """``F = Omega^* J Omega J`` with ``J = (I + Delta^{-1} G^{-1} Delta^{-1})^{-1}``.

    Returns ``(F, eigenvalues)`` with eigenvalues real and nonincreasing.
    """
    dinv = 1.0 / np.sqrt(stats.delta2)
    try:
        Ginv = np.linalg.inv(stats.gcca)
    except np.linalg.LinAlgError as exc:
        raise DegenerateError("G is singular") from exc
    J = np.linalg.inv(np.eye(stats.r) + dinv[:, None] * Ginv * dinv[None, :])
    F = stats.omega.conj().T @ J @ stats.omega @ J
    ev = np.linalg.eigvals(F)
    if np.max(np.abs(ev.imag), initial=0.0) > 1e-8 * max(1.0, np.max(np.abs(ev))):
        raise DegenerateError("F has eigenvalues with non-negligible imaginary part")
    return F, np.sort(ev.real)[::-1]


def solve_f_ratio(c: float, value: float) -> float:
    """The ``x`` in ``(4c(1-c), 1)`` with ``f_ratio(c, x) = value``."""
    b = 4 * c * (1 - c)
    lo_v, hi_v = c / (1 - c), 1.0
    if not lo_v < value < hi_v:
        raise ValueError(f"value {value} outside ({lo_v}, {hi_v})")
    return brentq(lambda x: f_ratio(c, x) - value, b, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                  maxiter=500)


def cca_outliers(c: float, stats: SignalStats, kappa: float = 1e-3) -> SpikeReport:
    """Canonical-correlation outliers: eigenvalues of ``F`` above ``c/(1-c) + kappa``."""
    if not 0 < c < 1:
        raise ValueError("c must lie in (0, 1)")
    b = 4 * c * (1 - c)
    _, ev = cca_F_matrix(stats)
    thr = c / (1 - c)
    flags = {"boundary_degenerate": bool(np.any(np.abs(ev - thr) < 1e-8)), "no_escape": c >= 0.5}
    if c >= 0.5:
        return SpikeReport(0, (), tuple(ev.tolist()), b, "cca", flags)
    escaping = [v for v in ev if v > thr + kappa]
    rho = tuple(solve_f_ratio(c, v) for v in escaping)
    return SpikeReport(len(rho), rho, tuple(ev.tolist()), b, "cca", flags)


def snr_threshold_cca(c: float) -> float:
    """Smallest ``delta^2 / sigma^2`` giving one canonical-correlation outlier in the equal-delta model."""
    if not 0 < c < 0.5:
        raise ValueError("threshold defined only for 0 < c < 1/2")
    return np.sqrt(c) / (np.sqrt(1 - c) - np.sqrt(c))
