"""State-space signals, their L-block second-order statistics, and simulation."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from .noise_equivalents import NoiseModel, support_edge_autocov

RANK_RTOL = 1e-8
RANK_ATOL = 1e-10


def _as_matrix(x, rows=None, name="matrix"):
    a = np.atleast_2d(np.asarray(x, dtype=complex))
    if rows is not None and a.shape[0] != rows:
        raise ValueError(f"{name} has {a.shape[0]} rows, expected {rows}")
    a = a.copy()
    a.flags.writeable = False
    return a


def _matrix_rank(a, rtol=1e-10):
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(s > rtol * max(s[0], 1e-300)))


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """``x_{n+1} = A x_n + B i_n``, ``u_n = C x_n + D i_n`` with ``i_n`` white, unit covariance."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, name="A")
        P = A.shape[0]
        if A.shape != (P, P):
            raise ValueError("A must be square")
        B = _as_matrix(self.B, P, "B")
        C = _as_matrix(self.C, name="C")
        if C.shape[1] != P:
            raise ValueError("C must have P columns")
        D = _as_matrix(self.D, C.shape[0], "D")
        if D.shape[1] != B.shape[1]:
            raise ValueError("B and D must have the same number of columns K")
        for name, val in zip("ABCD", (A, B, C, D)):
            object.__setattr__(self, name, val)
        if spectral_radius(A) >= 1:
            raise ValueError("A must be stable (spectral radius < 1)")
        if _matrix_rank(observability_matrix(A, C, P)) < P:
            raise ValueError("(C, A) is not observable")
        if _matrix_rank(np.hstack([np.linalg.matrix_power(A, k) @ B for k in range(P)])) < P:
            raise ValueError("(A, B) is not controllable")

    @property
    def P(self) -> int:
        return self.A.shape[0]

    @property
    def K(self) -> int:
        return self.B.shape[1]

    @property
    def M(self) -> int:
        return self.C.shape[0]

    def scaled(self, factor: float) -> "StateSpaceModel":
        """Same dynamics with the output multiplied by ``factor``."""
        return StateSpaceModel(self.A, self.B, factor * self.C, factor * self.D)

    def to_dict(self) -> dict:
        return {k: _encode(getattr(self, k)) for k in "ABCD"}

    @classmethod
    def from_dict(cls, d: dict) -> "StateSpaceModel":
        return cls(*(_decode(d[k]) for k in "ABCD"))


def _encode(a):
    a = np.asarray(a)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def _decode(d):
    if isinstance(d, dict):
        return np.asarray(d["re"], dtype=float) + 1j * np.asarray(d.get("im", 0.0), dtype=float)
    return np.asarray(d, dtype=complex)


@dataclass(frozen=True, eq=False)
class SignalStats:
    L: int
    Ru: np.ndarray
    Rfp: np.ndarray
    theta: np.ndarray
    delta2: np.ndarray
    gamma: np.ndarray
    omega: np.ndarray
    gcca: np.ndarray
    r: int
    P: int

    @property
    def chi(self) -> np.ndarray:
        """Singular values of ``gamma``."""
        return np.linalg.svd(self.gamma, compute_uv=False)

    def scaled(self, factor: float) -> "SignalStats":
        """Statistics of the signal multiplied in power by ``factor``."""
        return SignalStats(self.L, factor * self.Ru, factor * self.Rfp, self.theta, factor * self.delta2,
                           factor * self.gamma, self.omega, self.gcca, self.r, self.P)


def spectral_radius(A) -> float:
    A = np.atleast_2d(A)
    return float(np.max(np.abs(np.linalg.eigvals(A)))) if A.size else 0.0


def observability_matrix(A, C, L: int) -> np.ndarray:
    blocks, cur = [], np.asarray(C, dtype=complex)
    for _ in range(L):
        blocks.append(cur)
        cur = cur @ A
    return np.vstack(blocks)


def lyapunov_state_cov(A, B) -> np.ndarray:
    """Stationary state covariance ``R_x = A R_x A^* + B B^*``."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    B = np.atleast_2d(np.asarray(B, dtype=complex))
    if spectral_radius(A) >= 1:
        raise ValueError("A must be stable (spectral radius < 1)")
    Q = B @ B.conj().T
    X = solve_discrete_lyapunov(A, Q)
    X = 0.5 * (X + X.conj().T)
    return X


def block_toeplitz_h(model: StateSpaceModel, L: int) -> np.ndarray:
    """Lower block-triangular Toeplitz map from stacked inputs to stacked outputs."""
    M, K = model.M, model.K
    H = np.zeros((M * L, K * L), dtype=complex)
    markov = [model.D] + [model.C @ np.linalg.matrix_power(model.A, k - 1) @ model.B for k in range(1, L)]
    for i in range(L):
        for j in range(i + 1):
            H[i * M:(i + 1) * M, j * K:(j + 1) * K] = markov[i - j]
    return H


def theoretical_stats(model: StateSpaceModel, noise: NoiseModel, L: int | None = None) -> SignalStats:
    """Exact ``R_u^L``, ``R_{f|p}^L`` and the derived oracle inputs."""
    L = noise.L if L is None else L
    if L < model.P:
        raise ValueError(f"L = {L} must be at least P = {model.P}")
    if model.M != noise.M:
        raise ValueError("model and noise dimensions differ")
    A = model.A
    Rx = lyapunov_state_cov(A, model.B)
    O = observability_matrix(A, model.C, L)
    H = block_toeplitz_h(model, L)
    Ru = O @ Rx @ O.conj().T + H @ H.conj().T
    Ru = 0.5 * (Ru + Ru.conj().T)
    G = A @ Rx @ model.C.conj().T + model.B @ model.D.conj().T
    ctrl = np.hstack([np.linalg.matrix_power(A, L - 1 - j) @ G for j in range(L)])
    Rfp = O @ ctrl

    evals, evecs = np.linalg.eigh(Ru)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    keep = evals > max(RANK_ATOL, RANK_RTOL * evals[0])
    r = int(np.sum(keep))
    if r == 0:
        raise ValueError("signal covariance has rank 0")
    theta = evecs[:, :r]
    # phase convention: largest-modulus entry of each column real positive
    idx = np.argmax(np.abs(theta), axis=0)
    phase = theta[idx, np.arange(r)]
    theta = theta * (np.abs(phase) / phase)[None, :]
    delta2 = evals[:r].copy()
    gamma = theta.conj().T @ Rfp @ theta
    dinv = 1.0 / np.sqrt(delta2)
    omega = dinv[:, None] * gamma * dinv[None, :]
    rinv = np.tile(1.0 / noise.lam, L)
    gcca = theta.conj().T @ (rinv[:, None] * theta)
    gcca = 0.5 * (gcca + gcca.conj().T)
    return SignalStats(L, Ru, Rfp, theta, delta2, gamma, omega, gcca, r, model.P)


def _cgauss(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _psd_sqrt(X):
    w, V = np.linalg.eigh(X)
    return (V * np.sqrt(np.clip(w, 0, None))) @ V.conj().T


def simulate(model: StateSpaceModel | None, noise: NoiseModel, seed, N: int | None = None,
             L: int | None = None, real: bool = False) -> np.ndarray:
    """``M x (N + 2L - 1)`` samples of ``y_n = u_n + v_n``.

    ``model=None`` gives noise only.  The state starts at stationarity.
    ``real=True`` draws real Gaussians instead of circular complex ones.
    """
    N = int(noise.N) if N is None else int(N)
    L = noise.L if L is None else L
    if N < 1:
        raise ValueError("N must be positive")
    T = N + 2 * L - 1
    rng = np.random.default_rng(seed)
    draw = (lambda shape: rng.standard_normal(shape)) if real else (lambda shape: _cgauss(rng, shape))
    y = np.sqrt(noise.lam)[:, None] * draw((noise.M, T))
    if model is None:
        return y
    if model.M != noise.M:
        raise ValueError("model and noise dimensions differ")
    if real and any(np.any(getattr(model, k).imag != 0) for k in "ABCD"):
        raise ValueError("real=True needs a model with real matrices")
    Rx = lyapunov_state_cov(model.A, model.B)
    x = _psd_sqrt(Rx) @ draw((model.P,))
    inputs = draw((model.K, T))
    states = np.empty((model.P, T), dtype=complex)
    for n in range(T):
        states[:, n] = x
        x = model.A @ x + model.B @ inputs[:, n]
    u = model.C @ states + model.D @ inputs
    return y + (u.real if real else u)


def haar_orthonormal(M: int, r: int, rng) -> np.ndarray:
    """``M x r`` matrix with Haar-distributed orthonormal complex columns."""
    Z = _cgauss(rng, (M, r))
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))[None, :]


@dataclass(frozen=True, eq=False)
class ExampleModel:
    model: StateSpaceModel
    noise: NoiseModel
    expected_s: int | None
    params: dict


def odd_s_inequality(a, b, delta2, sigma2, c, w_plus) -> float:
    """Left minus right side of the condition ensuring ``s = 2r - 1``; positive when it holds."""
    b = np.asarray(b, dtype=float)
    delta2 = np.asarray(delta2, dtype=float)
    e = w_plus - sigma2
    rhs = sigma2 * c / (sigma2 * c + e) * (1 - e / delta2[0]) ** 2
    rhs -= np.sum(b**2 / delta2[0] * (1 - e / delta2[0]) / (1 - e / delta2[1:]))
    return a**2 - rhs


def example_model_odd_s(r: int, c: float, sigma: float = 1.0, *, M: int = 100, a: float = 0.2,
                        margin: float = 0.3, delta: float | None = None, seed=0) -> ExampleModel:
    """``P = L = 1``, ``K = r - 1`` signal whose autocovariance oracle gives ``s = 2r - 1``.

    All ``delta_k`` equal ``delta`` (default ``sqrt(w_+ - sigma^2) + margin``) and
    the ``b_k`` are equal with ``a^2 + sum b_k^2 / delta^2 = 1``.
    """
    if r < 2:
        raise ValueError("r must be at least 2 (K = r - 1 >= 1)")
    if M < r:
        raise ValueError("M must be at least r")
    sigma2 = sigma**2
    noise = NoiseModel.white(M, 1, M / c, sigma2)
    w_plus = support_edge_autocov(noise).w_plus
    if delta is None:
        delta = np.sqrt(w_plus - sigma2) + margin
    K = r - 1
    delta2 = np.full(r, delta**2)
    if not np.all(delta2 > w_plus - sigma2):
        raise ValueError("delta^2 must exceed w_+ - sigma^2")
    if not 0 <= a < 1:
        raise ValueError("a must lie in [0, 1)")
    b = np.full(K, delta * np.sqrt((1 - a**2) / K))
    gap = odd_s_inequality(a, b, delta2, sigma2, c, w_plus)
    if gap <= 0:
        raise ValueError("parameters violate the s = 2r - 1 condition")
    theta = haar_orthonormal(M, r, np.random.default_rng(seed))
    model = StateSpaceModel(A=[[a]], B=b[None, :], C=theta[:, :1], D=theta[:, 1:] * np.sqrt(delta2[1:])[None, :])
    params = {"r": r, "c": c, "sigma": sigma, "a": a, "b": b.tolist(), "delta": float(delta), "w_plus": w_plus,
              "condition_gap": float(gap)}
    return ExampleModel(model, noise, 2 * r - 1, params)


def s2_bound(c, sigma2, w_plus, delta2) -> float:
    e = w_plus - sigma2
    return sigma2 * c / (sigma2 * c + e) * (1 - e / delta2) ** 2


def example_model_s2(c: float, sigma: float = 1.0, *, M: int = 100, delta2: float | None = None,
                     a: float | None = None, a_scale: float = 0.9, seed=0) -> ExampleModel:
    """``u_n = theta x_{n+1}``, ``P = K = r = L = 1``, built so that ``s = 2``.

    ``a`` defaults to ``a_scale * sqrt(bound)`` where ``a^2 < bound`` is the
    condition for two outliers.  An explicit ``a`` above the bound is
    accepted with a warning and ``expected_s=None``.
    """
    sigma2 = sigma**2
    noise = NoiseModel.white(M, 1, M / c, sigma2)
    w_plus = support_edge_autocov(noise).w_plus
    if delta2 is None:
        delta2 = (w_plus - sigma2) + 1.0
    if delta2 <= w_plus - sigma2:
        raise ValueError("delta^2 must exceed w_+ - sigma^2")
    bound = s2_bound(c, sigma2, w_plus, delta2)
    if a is None:
        a = a_scale * np.sqrt(bound)
    if not 0 < a < 1:
        raise ValueError("a must lie in (0, 1)")
    expected = 2
    if a**2 >= bound:
        warnings.warn("a^2 is not below the two-outlier bound; s = 2 is not guaranteed", stacklevel=2)
        expected = None
    b = np.sqrt(delta2 * (1 - a**2))
    theta = haar_orthonormal(M, 1, np.random.default_rng(seed))
    model = StateSpaceModel(A=[[a]], B=[[b]], C=a * theta, D=b * theta)
    params = {"c": c, "sigma": sigma, "a": float(a), "b": float(b), "delta2": float(delta2), "bound": bound,
              "w_plus": w_plus}
    return ExampleModel(model, noise, expected, params)


def table_model(M: int, N: int, *, a: float = 0.2, K: int = 2, snr: float | None = None,
                margin: float = 0.3, seed=0) -> ExampleModel:
    """Monte-Carlo model for both tables: ``R = I``, ``L = 1``, ``r = K + 1``.

    ``snr`` (``delta^2 / sigma^2``) overrides the default
    ``delta = sqrt(w_+ - 1) + margin``.
    """
    c = M / N
    noise = NoiseModel.white(M, 1, N)
    w_plus = support_edge_autocov(noise).w_plus
    delta = np.sqrt(snr) if snr is not None else np.sqrt(w_plus - 1.0) + margin
    r = K + 1
    b = np.full(K, delta * np.sqrt((1 - a**2) / K))
    theta = haar_orthonormal(M, r, np.random.default_rng(seed))
    model = StateSpaceModel(A=[[a]], B=b[None, :], C=theta[:, :1], D=theta[:, 1:] * delta)
    expected = 2 * r - 1 if delta**2 > w_plus - 1.0 and odd_s_inequality(
        a, b, np.full(r, delta**2), 1.0, c, w_plus) > 0 else None
    params = {"c": c, "a": a, "K": K, "delta": float(delta), "w_plus": w_plus, "snr": float(delta**2)}
    return ExampleModel(model, noise, expected, params)


# pole pairs checked against the canonical-correlation oracle at the default size
CCA_FIG_POLES = {"s1": (0.9, 0.3), "s2": (0.95, -0.9)}
CCA_FIG_EXPECTED = {"s1": 1, "s2": 2}


def cca_fig_model(M: int = 130, N: int = 2000, L: int = 4, *, variant: str = "s1", gain: float = 1.0,
                  seed=0) -> ExampleModel:
    """``P = 2``, ``K = 1`` model with diagonal ``A`` and the cosine noise spectrum."""
    if variant not in CCA_FIG_POLES:
        raise ValueError(f"variant must be one of {sorted(CCA_FIG_POLES)}")
    a1, a2 = CCA_FIG_POLES[variant]
    noise = NoiseModel.cosine(M, L, N)
    rng = np.random.default_rng(seed)
    theta = haar_orthonormal(M, 3, rng)
    A = np.diag([a1, a2])
    B = np.array([[np.sqrt(1 - a1**2)], [np.sqrt(1 - a2**2)]])
    C = gain * theta[:, :2]
    D = gain * theta[:, 2:3]
    model = StateSpaceModel(A, B, C, D)
    expected = CCA_FIG_EXPECTED[variant] if (M, N, L, gain) == (130, 2000, 4, 1.0) else None
    return ExampleModel(model, noise, expected, {"a1": a1, "a2": a2, "gain": gain, "variant": variant})


def mc_model(preset: str, M: int | None = None, N: int | None = None, **kw) -> tuple[StateSpaceModel, NoiseModel]:
    """Presets used by the Monte-Carlo harness: ``"table"`` and ``"cca_fig"``."""
    if preset == "table":
        ex = table_model(M or 200, N or 4 * (M or 200), **kw)
    elif preset == "cca_fig":
        ex = cca_fig_model(M or 130, N or 2000, **kw)
    else:
        raise ValueError(f"unknown preset {preset!r}")
    return ex.model, ex.noise


def noise_from_descriptor(d: dict) -> NoiseModel:
    kind = d.get("kind", "white")
    M, L, N = int(d["M"]), int(d.get("L", 1)), d["N"]
    if kind == "white":
        return NoiseModel.white(M, L, N, float(d.get("sigma2", 1.0)))
    if kind == "cosine":
        return NoiseModel.cosine(M, L, N)
    if kind == "explicit":
        return NoiseModel(M, L, N, d["lambda"])
    raise ValueError(f"unknown noise kind {kind!r}")


def dump_preset(model: StateSpaceModel | None, noise_descriptor: dict) -> str:
    return json.dumps({"model": None if model is None else model.to_dict(), "noise": noise_descriptor})


def load_preset(text: str) -> tuple[StateSpaceModel | None, NoiseModel]:
    d = json.loads(text)
    model = None if d.get("model") is None else StateSpaceModel.from_dict(d["model"])
    return model, noise_from_descriptor(d["noise"])
