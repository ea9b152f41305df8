"""Block-Hankel matrices, sample spectra and the two estimators of ``s``."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

ROW_SPACE_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class HankelPair:
    Yp: np.ndarray
    Yf: np.ndarray
    M: int
    L: int
    N: int

    @property
    def c(self) -> float:
        return self.M * self.L / self.N


@dataclass(frozen=True, eq=False)
class EmpiricalSpectrum:
    eigs: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)

    @property
    def structural_ones(self) -> int:
        """Eigenvalues of ``Pi_p Pi_f`` forced to 1 by dimension counting."""
        if self.kind != "cca":
            return 0
        return max(2 * self.meta["M"] * self.meta["L"] - self.meta["N"], 0)

    def nonzero(self) -> np.ndarray:
        """The ``ML`` eigenvalues carried by the row spaces (drops the padding zeros)."""
        if self.kind == "cca":
            return self.eigs[: self.meta["M"] * self.meta["L"]]
        return self.eigs

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eigenvalue"])
        for v in self.eigs:
            w.writerow([f"{v:.17g}"])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "meta": self.meta, "eigs": [float(f"{v:.17g}") for v in self.eigs]})


def build_hankel_pair(samples, L: int, N: int | None = None) -> HankelPair:
    """Past and future block-Hankel matrices.

    Block row ``i`` (0-based) of ``Yp`` holds ``y[:, i:i+N]`` and block row
    ``i`` of ``Yf`` holds ``y[:, L+i:L+i+N]``.
    """
    y = np.asarray(samples)
    if y.ndim != 2:
        raise ValueError("samples must be an M x T array")
    M, T = y.shape
    if L < 1:
        raise ValueError("L must be positive")
    if N is None:
        N = T - 2 * L + 1
    if N < 1 or T < N + 2 * L - 1:
        raise ValueError(f"need at least N + 2L - 1 = {N + 2 * L - 1} samples, got {T}")
    Yp = np.vstack([y[:, i:i + N] for i in range(L)])
    Yf = np.vstack([y[:, L + i:L + i + N] for i in range(L)])
    return HankelPair(Yp, Yf, M, L, N)


def _meta(pair):
    return {"M": pair.M, "L": pair.L, "N": pair.N, "c": pair.c}


def autocov_sample_spectrum(pair: HankelPair) -> EmpiricalSpectrum:
    """Squared singular values of ``Yf Yp^* / N``, i.e. eigenvalues of ``Sigma_f Sigma_p^* Sigma_p Sigma_f^*``."""
    cross = pair.Yf @ pair.Yp.conj().T / pair.N
    sv = np.linalg.svd(cross, compute_uv=False)
    return EmpiricalSpectrum(np.sort(sv**2)[::-1], "autocov_squared", _meta(pair))


def _row_basis(Y):
    # orthonormal basis of the row space, as columns of an N x rank matrix
    U, s, Vh = np.linalg.svd(Y, full_matrices=False)
    rank = int(np.sum(s > ROW_SPACE_RTOL * s[0])) if s.size and s[0] > 0 else 0
    return Vh[:rank].conj().T, rank


def cca_sample_spectrum(pair: HankelPair, require_full_rank: bool = True) -> EmpiricalSpectrum:
    """Eigenvalues of ``Pi_p Pi_f`` as squared cosines of principal angles.

    The first ``min(ML, N)`` entries come from the row spaces (including the
    ``2ML - N`` unit values when ``2ML > N``); the rest are zeros up to ``N``.
    """
    Qp, rp = _row_basis(pair.Yp)
    Qf, rf = _row_basis(pair.Yf)
    ml = pair.M * pair.L
    if require_full_rank and (rp < min(ml, pair.N) or rf < min(ml, pair.N)):
        raise ValueError("degenerate sample: a Hankel matrix is rank deficient")
    cos = np.linalg.svd(Qp.conj().T @ Qf, compute_uv=False)
    vals = np.clip(cos**2, 0.0, 1.0)
    eigs = np.zeros(pair.N)
    eigs[: vals.size] = np.sort(vals)[::-1]
    return EmpiricalSpectrum(eigs, "cca", _meta(pair))


def _usable(spec):
    eigs = np.asarray(spec.eigs if isinstance(spec, EmpiricalSpectrum) else spec, dtype=float)
    eigs = np.sort(eigs)[::-1]
    if isinstance(spec, EmpiricalSpectrum):
        eigs = eigs[spec.structural_ones:]
    return eigs


def estimate_s_threshold(spec, edge: float, eps1: float = 0.01) -> int:
    """Number of eigenvalues above ``edge (1 + eps1)``; structural unit eigenvalues are skipped."""
    eigs = _usable(spec)
    return int(np.sum(eigs > edge * (1.0 + eps1)))


def estimate_s_ratio(spec, eps2: float = 0.05, kmax: int = 20, with_flag: bool = False):
    """First ``k`` with ``lam_{k+1} / lam_k > 1 - eps2``, minus one.

    Eigenvalues below ``1e-12 lam_1`` end the search.  When no ``k <= kmax``
    qualifies the result is ``kmax`` and the overflow flag is set.
    """
    eigs = _usable(spec)
    if eigs.size < 2:
        raise ValueError("need at least two eigenvalues")
    floor = 1e-12 * max(eigs[0], 0.0)
    for k in range(1, min(kmax, eigs.size - 1) + 1):
        lk, lk1 = eigs[k - 1], eigs[k]
        if lk <= floor or lk1 / lk > 1.0 - eps2:
            return (k - 1, False) if with_flag else k - 1
    return (kmax, True) if with_flag else kmax


def write_samples_csv(path: str, samples, L: int) -> None:
    """Write ``M x T`` complex samples: header ``M=<M>,L=<L>``, then real rows, then imaginary rows."""
    y = np.asarray(samples)
    M = y.shape[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"M={M}", f"L={L}"])
        for part in (y.real, np.imag(y)):
            for row in part:
                w.writerow([f"{v:.17g}" for v in row])


def read_samples_csv(path: str) -> tuple[np.ndarray, int]:
    """Inverse of :func:`write_samples_csv`; returns ``(samples, L)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty sample file")
    try:
        meta = dict(cell.strip().split("=", 1) for cell in rows[0] if cell.strip())
        M, L = int(meta["M"]), int(meta["L"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: header must read 'M=<int>,L=<int>'") from exc
    body = rows[1:]
    if len(body) != 2 * M:
        raise ValueError(f"{path}: expected {2 * M} data rows, found {len(body)}")
    try:
        data = np.array([[float(v) for v in row] for row in body])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric sample value") from exc
    return data[:M] + 1j * data[M:], L
