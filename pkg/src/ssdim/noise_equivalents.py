"""Deterministic equivalents for the two noise-only models.

Autocovariance side: the eigenvalue law of ``W_f W_p^* W_p W_f^*`` is
described through the scalar fixed point ``t(z)`` and the map ``phi``.
Projector side: the eigenvalue law of ``Pi_p Pi_f`` is the free
multiplicative square of a Bernoulli(c) law and has closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Dimensions plus the spectrum of the noise covariance ``R``.

    ``R`` is represented in its eigenbasis, i.e. ``R = diag(lam)``.
    ``N`` may be a non-integer when the model is only used for
    deterministic computations at a prescribed ratio ``c``.
    """

    M: int
    L: int
    N: float
    lam: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float).reshape(-1)
        if self.M < 1 or self.L < 1:
            raise ValueError("M and L must be positive")
        if lam.shape[0] != self.M:
            raise ValueError(f"lam has length {lam.shape[0]}, expected M={self.M}")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise ValueError("noise spectrum must be finite and positive")
        if np.any(np.diff(lam) > 0):
            raise ValueError("noise spectrum must be sorted nonincreasing")
        if not self.N > 0:
            raise ValueError("N must be positive")
        c = self.M * self.L / self.N
        if not 0 < c < 1:
            raise ValueError(f"c = ML/N = {c} must lie in (0, 1)")
        lam = lam.copy()
        lam.flags.writeable = False
        object.__setattr__(self, "lam", lam)
        # distinct eigenvalues with weights; fixed points only need these
        vals, counts = np.unique(lam, return_counts=True)
        object.__setattr__(self, "_vals", vals[::-1].copy())
        object.__setattr__(self, "_wts", (counts[::-1] / self.M).astype(float))

    @property
    def c(self) -> float:
        return self.M * self.L / self.N

    @property
    def lam_max(self) -> float:
        return float(self.lam[0])

    @property
    def n_samples(self) -> int:
        """Number of time samples needed to fill both Hankel matrices."""
        return int(self.N) + 2 * self.L - 1

    def mean(self, values: np.ndarray) -> complex:
        # (1/M) sum_k f(lam_k) given f evaluated on the distinct eigenvalues
        return np.dot(self._wts, values)

    @classmethod
    def white(cls, M: int, L: int, N: float, sigma2: float = 1.0) -> "NoiseModel":
        return cls(M, L, N, np.full(M, float(sigma2)))

    @classmethod
    def cosine(cls, M: int, L: int, N: float) -> "NoiseModel":
        k = np.arange(M)
        lam = 0.5 + (np.pi / 4) * np.cos(np.pi * k / (2 * M))
        return cls(M, L, N, lam)

    @classmethod
    def from_ratio(cls, c: float, sigma2: float = 1.0, M: int = 1, L: int = 1) -> "NoiseModel":
        """White noise model at a prescribed ratio ``c`` (``N = ML/c``)."""
        return cls.white(M, L, M * L / c, sigma2)

    def with_spectrum(self, lam) -> "NoiseModel":
        return NoiseModel(self.M, self.L, self.N, lam)

    def to_dict(self) -> dict:
        return {"M": self.M, "L": self.L, "N": self.N, "lambda": self.lam.tolist()}


@dataclass(frozen=True)
class SupportAutocov:
    intervals: tuple
    w_plus: float
    x_plus: float


@dataclass(frozen=True)
class SupportCca:
    c: float
    bulk_right: float
    has_unit_atom: bool
    atom_mass_at_one: float


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """Density on a grid plus point masses.

    ``missing_mass`` records probability mass that is known to sit
    outside the grid (for the autocovariance law, next to 0).
    """

    grid: np.ndarray
    density: np.ndarray
    atoms: tuple = ()
    missing_mass: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        d = np.asarray(self.density, dtype=float)
        if g.ndim != 1 or g.shape != d.shape:
            raise ValueError("grid and density must be 1-D of equal length")
        if g.size > 1 and np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(d < 0):
            raise ValueError("density must be nonnegative")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "density", d)
        object.__setattr__(self, "atoms", tuple((float(x), float(m)) for x, m in self.atoms))

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.grid))

    def total_mass(self) -> float:
        return self.integral() + sum(m for _, m in self.atoms)

    def check_probability(self, tol: float = 1e-3) -> bool:
        return abs(self.total_mass() + self.missing_mass - 1.0) <= tol

    def cdf(self, x) -> np.ndarray:
        """CDF evaluated at ``x``; the missing mass is placed left of the grid."""
        x = np.asarray(x, dtype=float)
        steps = np.diff(self.grid) * 0.5 * (self.density[1:] + self.density[:-1])
        cum = np.concatenate([[0.0], np.cumsum(steps)])
        # integrate from the right so mass lost near the left edge lands below the grid
        right = cum[-1] - cum
        out = 1.0 - np.interp(x, self.grid, right, left=right[0], right=0.0)
        for loc, mass in self.atoms:
            out = out - mass * (x < loc)
        return out


# ---------------------------------------------------------------------------
# autocovariance law

def _phi_parts(noise: NoiseModel, w):
    v = noise._vals
    w = np.asarray(w, dtype=float)
    diff = v[:, None] - w.reshape(1, -1)
    m = noise._wts @ (v[:, None] / diff)
    dm = noise._wts @ (v[:, None] / diff**2)
    return m.reshape(w.shape), dm.reshape(w.shape)


def phi_autocov(noise: NoiseModel, w, derivative: bool = False):
    """``phi(w) = c w^2 m(w) (c m(w) - 1)`` with ``m(w) = mean(lam/(lam - w))``.

    With ``derivative=True`` returns ``(phi, phi')``.
    """
    w_arr = np.asarray(w, dtype=float)
    if np.any(np.isin(w_arr, noise._vals)):
        raise ValueError("phi is undefined at an eigenvalue of R")
    c = noise.c
    m, dm = _phi_parts(noise, w_arr)
    phi = c * w_arr**2 * m * (c * m - 1.0)
    if not derivative:
        return phi if w_arr.ndim else float(phi)
    dphi = c * (2 * w_arr * m * (c * m - 1.0) + w_arr**2 * dm * (2 * c * m - 1.0))
    if w_arr.ndim:
        return phi, dphi
    return float(phi), float(dphi)


def _bisect_roots(f, grid):
    vals = f(grid)
    roots = []
    sign = np.sign(vals)
    for i in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
        roots.append(brentq(lambda x: float(f(np.array([x]))[0]), grid[i], grid[i + 1],
                            xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))
    return roots


def support_edge_autocov(noise: NoiseModel, n_grid: int = 10_000, w_max_factor: float = 1e3) -> SupportAutocov:
    """Right edge ``x_plus = phi(w_plus)``, ``w_plus`` the largest critical point above ``lam_1``."""
    lam1 = noise.lam_max
    grid = np.geomspace(lam1 * (1 + 1e-6), lam1 * w_max_factor, n_grid)
    roots = _bisect_roots(lambda w: phi_autocov(noise, w, derivative=True)[1], grid)
    if not roots:
        raise ConvergenceError("no critical point of phi found above the largest noise eigenvalue")
    w_plus = max(roots)
    x_plus = phi_autocov(noise, w_plus)
    return SupportAutocov(intervals=((0.0, x_plus),), w_plus=w_plus, x_plus=x_plus)


def autocov_support(noise: NoiseModel, n_grid: int = 4000) -> SupportAutocov:
    """All intervals of the support, from the increasing branches of ``phi``.

    ``x`` lies outside the support iff ``x = phi(w)`` for an admissible ``w``
    (``w m(w) < 0``) with ``phi'(w) > 0``.  Each such branch of ``phi``
    removes an open interval from ``[0, x_plus]``.
    """
    edge = support_edge_autocov(noise)
    vals = noise._vals  # decreasing
    excluded = []
    # gaps between consecutive distinct eigenvalues
    for hi, lo in zip(vals[:-1], vals[1:]):
        width = hi - lo
        # cluster the grid near the poles where phi blows up
        s = 0.5 - 0.5 * np.cos(np.linspace(0, np.pi, n_grid))
        g = lo + width * s
        g = g[1:-1]
        cuts = sorted(set([lo, hi] + _bisect_roots(lambda w: phi_autocov(noise, w, True)[1], g)
                          + _bisect_roots(lambda w: _phi_parts(noise, w)[0], g)))
        for a, b in zip(cuts[:-1], cuts[1:]):
            mid = 0.5 * (a + b)
            m_mid = _phi_parts(noise, np.array([mid]))[0][0]
            if mid * m_mid >= 0 or phi_autocov(noise, mid, True)[1] <= 0:
                continue
            pa = _branch_limit(noise, a, b, left=True)
            pb = _branch_limit(noise, a, b, left=False)
            if pb > pa:
                excluded.append((max(pa, 0.0), pb))
    intervals = [(0.0, edge.x_plus)]
    for a, b in excluded:
        if b <= 0:
            continue
        new = []
        for lo, hi in intervals:
            if b <= lo or a >= hi:
                new.append((lo, hi))
                continue
            if a > lo:
                new.append((lo, a))
            if b < hi:
                new.append((b, hi))
        intervals = new
    return SupportAutocov(intervals=tuple(intervals), w_plus=edge.w_plus, x_plus=edge.x_plus)


def _branch_limit(noise, a, b, left):
    # value of phi at an end of a monotone branch; poles give +-inf
    w = a if left else b
    if np.any(np.isclose(w, noise._vals, rtol=0, atol=1e-14 * max(1.0, abs(w)))):
        inner = a + (b - a) * (1e-9 if left else 1 - 1e-9)
        return phi_autocov(noise, inner)
    return phi_autocov(noise, w)


def w_of_x(noise: NoiseModel, x: float, edge: SupportAutocov | None = None) -> float:
    """The real ``w > w_plus`` with ``phi(w) = x``, for ``x > x_plus``."""
    edge = edge or support_edge_autocov(noise)
    if not x > edge.x_plus:
        raise ValueError(f"x = {x} must exceed x_plus = {edge.x_plus}")
    lo = edge.w_plus
    hi = 2.0 * lo
    while phi_autocov(noise, hi) < x:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise ConvergenceError("could not bracket w(x)")
    return brentq(lambda w: phi_autocov(noise, w) - x, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                  maxiter=500)


def t_autocov_real(noise: NoiseModel, x: float, edge: SupportAutocov | None = None) -> float:
    """Boundary value ``t(x)`` for real ``x > x_plus`` through ``w(x)``."""
    w = w_of_x(noise, x, edge)
    m, _ = _phi_parts(noise, np.array([w]))
    return float(w / x * m[0])


def _rhs(noise, z, t):
    v = noise._vals
    q = 1.0 - z * noise.c**2 * t * t
    u = z * noise.c * t / q
    denom = -z - u * v
    return noise.mean(v / denom), denom, u, q


def _newton(noise, z, t, tol=1e-13, max_iter=100):
    c = noise.c
    v = noise._vals
    for _ in range(max_iter):
        g, denom, u, q = _rhs(noise, z, t)
        du = z * c * (1.0 + z * c * c * t * t) / q**2
        dg = noise.mean(v * v * du / denom**2)
        step = (t - g) / (1.0 - dg)
        t = t - step
        if abs(step) <= tol * max(1.0, abs(t)):
            return t
    return None


def autocov_residual(noise: NoiseModel, z: complex, t: complex) -> float:
    return abs(t - _rhs(noise, z, t)[0])


def _admissible(z, t):
    if z.imag > 0:
        return t.imag > 0 and (z * t).imag > 0
    return True


def solve_t_autocov(noise: NoiseModel, z: complex, *, tol: float = 1e-12, max_iter: int = 10_000,
                    gamma: float = 0.5, t0: complex | None = None) -> complex:
    """Solution of ``t = mean(lam / (-z - z c t lam / (1 - z c^2 t^2)))``.

    The admissible branch has ``Im t > 0`` and ``Im(z t) > 0`` on the upper half
    plane.  Damped Picard first, then Newton with a continuation in ``Im z``
    when Picard stalls.
    """
    z = complex(z)
    if z.imag == 0 and z.real >= 0:
        raise ValueError("z must lie off the positive real axis")
    if z.imag < 0:
        return solve_t_autocov(noise, z.conjugate(), tol=tol, max_iter=max_iter, gamma=gamma,
                               t0=None if t0 is None else complex(t0).conjugate()).conjugate()
    mean_r = noise.mean(noise._vals)
    t = complex(t0) if t0 is not None else -mean_r / z
    if z.imag == 0:
        t = complex(t.real, 0.0)

    for _ in range(max_iter):
        g = _rhs(noise, z, t)[0]
        new = (1.0 - gamma) * t + gamma * g
        if abs(new - t) <= tol * max(1.0, abs(new)):
            t = new
            break
        t = new
    if _accept(noise, z, t):
        return _polish(noise, z, t)

    # continuation from far above the real axis
    y_hi = max(1.0, 4 * abs(z))
    t = None
    for y in np.geomspace(y_hi, max(z.imag, 1e-300), 60) if z.imag > 0 else [None]:
        if y is None:
            break
        zz = complex(z.real, y)
        start = -mean_r / zz if t is None else t
        t = _newton(noise, zz, start)
        if t is None or not _admissible(zz, t):
            raise ConvergenceError(f"fixed point failed to converge at z = {z}")
    if t is not None and _accept(noise, z, t):
        return _polish(noise, z, t)
    raise ConvergenceError(f"fixed point failed to converge at z = {z}")


def _accept(noise, z, t):
    return np.isfinite(t) and _admissible(z, t) and autocov_residual(noise, z, t) < 1e-10


def _polish(noise, z, t):
    t2 = _newton(noise, z, t, max_iter=5)
    if t2 is not None and _accept(noise, z, t2):
        return complex(t2)
    return complex(t)


def stieltjes_nu_autocov(noise: NoiseModel, z: complex, t: complex) -> complex:
    """``(1/M) Tr T(z)`` given the scalar ``t(z)``."""
    return noise.mean(1.0 / _rhs(noise, z, t)[1])


def density_autocov(noise: NoiseModel, grid, eps: float = 1e-6, richardson: bool = False) -> SpectralMeasure:
    """Density of the deterministic equivalent of the autocovariance spectrum.

    Evaluated as ``Im (1/M) Tr T(x + i eps) / pi`` with warm starts along the
    grid, sweeping from the right edge towards 0.  The mass the grid misses
    (the density is unbounded at 0) is reported as ``missing_mass``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(grid <= 0):
        raise ValueError("grid must be a 1-D array of positive reals")
    dens = np.empty_like(grid)
    order = np.argsort(grid)[::-1]
    t_prev = None
    for idx in order:
        x = grid[idx]
        val, t_prev = _density_point(noise, x, eps, t_prev)
        if richardson:
            # first-order bias in eps: extrapolate from eps and eps/10
            val2, _ = _density_point(noise, x, eps / 10, t_prev)
            val = val2 + (val2 - val) / 9.0
        dens[idx] = max(val, 0.0)
    meas = SpectralMeasure(grid, dens)
    return SpectralMeasure(grid, dens, (), max(0.0, 1.0 - meas.integral()),
                           {"eps": eps, "kind": "autocov"})


def _density_point(noise, x, eps, t_prev):
    z = complex(x, eps)
    t = None
    if t_prev is not None:
        cand = _newton(noise, z, t_prev)
        if cand is not None and _accept(noise, z, cand):
            t = cand
    if t is None:
        t = solve_t_autocov(noise, z)
    return float(stieltjes_nu_autocov(noise, z, t).imag / np.pi), t


# ---------------------------------------------------------------------------
# projector-product law

def cca_support(c: float) -> SupportCca:
    _check_c(c)
    mass = max(2 * c - 1, 0.0)
    return SupportCca(c=c, bulk_right=4 * c * (1 - c), has_unit_atom=mass > 0, atom_mass_at_one=mass)


def _check_c(c):
    if not 0 < c < 1:
        raise ValueError(f"c = {c} must lie in (0, 1)")


def _sqrt_upper(q: complex) -> complex:
    # branch with argument in [0, pi), i.e. theta in [0, 2 pi) halved
    s = np.sqrt(complex(q))
    if s.imag < 0 or (s.imag == 0 and s.real < 0):
        s = -s
    return s


def _in_cca_support(c, x):
    b = 4 * c * (1 - c)
    return 0 <= x <= b or (c >= 0.5 and x == 1.0)


def cca_stieltjes_tilde(c: float, z: complex) -> complex:
    """Stieltjes transform of the free square of Bernoulli(c), ``Pi_p Pi_f`` side.

    Real arguments off the support return a real number.
    """
    _check_c(c)
    z = complex(z)
    b = 4 * c * (1 - c)
    if z.imag == 0:
        x = z.real
        if _in_cca_support(c, x):
            raise ValueError(f"x = {x} lies in the support")
        if x == 1.0:  # removable singularity when c < 1/2
            return -(1 - c) ** 2 / (1 - 2 * c)
        r = math.sqrt(x * (x - b))
        if x < 0:
            r = -r
        return (x - 2 * (1 - c) + r) / (2 * (1 - x) * x)
    if z.imag < 0:
        return cca_stieltjes_tilde(c, z.conjugate()).conjugate()
    return (z - 2 * (1 - c) + _sqrt_upper(z * (z - b))) / (2 * (1 - z) * z)


def cca_stieltjes(c: float, z: complex) -> complex:
    """Stieltjes transform of the law of the nonzero ``Pi_p Pi_f`` eigenvalues."""
    tt = cca_stieltjes_tilde(c, z)
    return tt / c + (1 - c) / (c * z)


def cca_quadratic_residual(c: float, z: complex, tt: complex) -> float:
    z = complex(z)
    return abs(z * (1 - z) * tt * tt + (2 * (1 - c) - z) * tt + (1 - c) ** 2 / z)


def cca_density(c: float, grid) -> SpectralMeasure:
    """Density ``sqrt(x (b - x)) / (2 pi c x (1 - x))`` on ``(0, b)``, ``b = 4c(1-c)``.

    For ``c > 1/2`` the law has an atom at 1 of mass ``(2c - 1)/c``.
    """
    _check_c(c)
    grid = np.asarray(grid, dtype=float)
    b = 4 * c * (1 - c)
    if np.any(grid <= 0) or np.any(grid >= b):
        raise ValueError("grid must lie inside the open bulk (0, 4c(1-c))")
    dens = np.sqrt(grid * (b - grid)) / (2 * np.pi * c * grid * (1 - grid))
    atoms = ((1.0, (2 * c - 1) / c),) if c > 0.5 else ()
    return SpectralMeasure(grid, dens, atoms, 0.0, {"kind": "cca", "c": c})


def cca_density_grid(c: float, n: int = 2000) -> np.ndarray:
    """Chebyshev-type grid on the open bulk, dense near both edges."""
    b = 4 * c * (1 - c)
    s = 0.5 - 0.5 * np.cos(np.linspace(0, np.pi, n + 2)[1:-1])
    return b * s


def cca_cdf(c: float, x) -> np.ndarray:
    """CDF of the nonzero-eigenvalue law, by quadrature of the density."""
    x = np.asarray(x, dtype=float)
    b = 4 * c * (1 - c)
    # x = b sin^2(u) turns the density into b cos^2(u) / (pi c (1 - x)) du
    u = np.linspace(0, np.pi / 2, 20001)
    xs = b * np.sin(u) ** 2
    cos2 = np.cos(u) ** 2
    one_minus = 1 - xs
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(one_minus > 1e-300, cos2 / one_minus, 1.0)  # c = 1/2 limit at u = pi/2
    integrand = b * ratio / (np.pi * c)
    cum = np.concatenate([[0.0], np.cumsum(np.diff(u) * 0.5 * (integrand[1:] + integrand[:-1]))])
    out = np.interp(x, xs, cum, left=0.0, right=cum[-1])
    if c > 0.5:
        out = out + (2 * c - 1) / c * (x >= 1.0)
    return out


def f_ratio(c: float, x: float) -> float:
    """``f(x) = x (t~(x) / ((1 - c) t(x)))^2`` on ``[4c(1-c), 1]``."""
    _check_c(c)
    b = 4 * c * (1 - c)
    tol = 1e-14
    if x < b - tol or x > 1 + tol:
        raise ValueError(f"x = {x} outside [{b}, 1]")
    x = min(max(x, b), 1.0)
    if x == 1.0:
        if c < 0.5:
            return 1.0
        return (c / (1 - c)) ** 2
    if x == b:
        # square root vanishes at the bulk edge
        tt = (x - 2 * (1 - c)) / (2 * (1 - x) * x)
    else:
        tt = (x - 2 * (1 - c) + math.sqrt(x * (x - b))) / (2 * (1 - x) * x)
    t = tt / c + (1 - c) / (c * x)
    return x * (tt / ((1 - c) * t)) ** 2
