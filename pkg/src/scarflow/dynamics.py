"""Exact quench dynamics on the constrained space."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.signal import find_peaks

from .basis import ConfigNotFoundError, ConstrainedBasis
from .ops import sz_profile

DENSE_LIMIT = 4000


class KrylovError(RuntimeError):
    """Propagation could not reach the requested accuracy."""


def product_state(basis: ConstrainedBasis, pattern="z2") -> np.ndarray:
    """Unit vector on a product configuration.

    ``z2`` excites the odd-indexed sites (0101...), ``z2_prime`` the even ones,
    ``all_zero`` is the empty configuration; anything else is read as a level
    string or sequence.
    """
    L, top = basis.L, basis.two_s
    if isinstance(pattern, str) and pattern in ("all_zero", "z2", "z2_prime"):
        if pattern == "all_zero":
            levels = [0] * L
        else:
            start = 1 if pattern == "z2" else 0
            levels = [top if (i - start) % 2 == 0 else 0 for i in range(L)]
            if basis.periodic and L % 2 and start == 0:
                levels[-1] = 0
    else:
        levels = [int(c) for c in pattern]
    psi = np.zeros(basis.dim, dtype=np.complex128)
    try:
        psi[basis.rank(levels)] = 1.0
    except ConfigNotFoundError as exc:
        raise ValueError(f"pattern {pattern!r} violates the constraint") from exc
    return psi


def _lanczos(H, v, m):
    """Orthonormal Krylov basis with full reorthogonalisation."""
    n = v.size
    Q = np.zeros((n, m + 1), dtype=np.complex128)
    alpha = np.zeros(m)
    beta = np.zeros(m)
    Q[:, 0] = v
    for j in range(m):
        w = H @ Q[:, j]
        alpha[j] = np.vdot(Q[:, j], w).real
        w -= Q[:, : j + 1] @ (Q[:, : j + 1].conj().T @ w)
        w -= Q[:, : j + 1] @ (Q[:, : j + 1].conj().T @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] < 1e-13:
            return Q[:, : j + 1], alpha[: j + 1], beta[: j + 1], True
        Q[:, j + 1] = w / beta[j]
    return Q, alpha, beta, False


def krylov_step(H, psi, dt, m=30, tol=1e-10, max_substeps=100_000):
    """exp(-i H dt) psi by Lanczos with adaptive sub-steps.

    The local error of a sub-step tau is estimated by
    beta_m |e_m^T exp(-i tau T_m) e_1|, and tau is shrunk until that stays
    below ``tol * tau / dt``.
    """
    norm = np.linalg.norm(psi)
    v = psi / norm
    t_done, tau = 0.0, dt
    steps = 0
    while t_done < dt * (1 - 1e-15):
        tau = min(tau, dt - t_done)
        Q, a, b, happy = _lanczos(H, v, min(m, v.size))
        k = a.size
        Tm = np.diag(a) + np.diag(b[: k - 1], 1) + np.diag(b[: k - 1], -1)
        evals, evecs = np.linalg.eigh(Tm)
        while True:
            coef = evecs @ (np.exp(-1j * tau * evals) * evecs[0].conj())
            err = 0.0 if happy else b[k - 1] * abs(coef[-1])
            if err <= tol * tau / dt or happy:
                break
            tau *= 0.5
            steps += 1
            if steps > max_substeps:
                raise KrylovError(f"no convergence, residual estimate {err:.3e}")
        v = Q[:, :k] @ coef
        t_done += tau
        steps += 1
        if steps > max_substeps:
            raise KrylovError(f"sub-step budget exhausted at t={t_done:.6g}")
        if not happy and err < 0.1 * tol * tau / dt:
            tau *= 1.5
    return norm * v


def _mul(A, x):
    """A @ x without promoting a real matrix to complex."""
    if np.isrealobj(A) and np.iscomplexobj(x):
        return A @ x.real + 1j * (A @ x.imag)
    return A @ x


class Propagator:
    """exp(-i H t) applied repeatedly.

    ``method='dense'`` diagonalises once (dimension <= 4000); ``'krylov'``
    uses the Lanczos stepper; ``'auto'`` picks dense when allowed.
    """

    def __init__(self, H, method="auto", m=30, tol=1e-10):
        dim = H.shape[0]
        if method == "auto":
            method = "dense" if dim <= DENSE_LIMIT else "krylov"
        if method == "dense":
            if dim > DENSE_LIMIT:
                raise ValueError(f"dense propagation limited to dimension {DENSE_LIMIT}")
            Hd = H.toarray() if sp.issparse(H) else np.asarray(H)
            self.evals, self.evecs = sla.eigh(Hd)
        self.H, self.method, self.m, self.tol = H, method, m, tol

    def __call__(self, psi, dt):
        if dt < 0:
            raise ValueError("dt must be non-negative")
        if dt == 0:
            return psi.copy()
        if self.method == "dense":
            c = _mul(self.evecs.conj().T, psi)
            return _mul(self.evecs, np.exp(-1j * dt * self.evals) * c)
        return krylov_step(self.H, psi, dt, self.m, self.tol)


def evolve(H, psi, dt, method="auto"):
    if not dt > 0:
        raise ValueError("dt must be positive")
    return Propagator(H, method)(psi, dt)


def dense_expm_evolve(H, psi, dt):
    """Reference propagation through the full matrix exponential."""
    Hd = H.toarray() if sp.issparse(H) else np.asarray(H)
    return sla.expm(-1j * dt * Hd) @ psi


def _segment_index(digits: np.ndarray) -> np.ndarray:
    """Dense labels of the distinct rows of a digit block."""
    if digits.shape[1] == 0:
        return np.zeros(digits.shape[0], dtype=np.int64)
    _, inv = np.unique(digits, axis=0, return_inverse=True)
    return inv.ravel()


def bipartition_indices(basis: ConstrainedBasis, start: int, length: int):
    """Row/column labels placing each configuration in the region x complement matrix."""
    if not 0 < length < basis.L:
        raise ValueError("region must be non-empty and proper")
    sites = [(start + j) % basis.L for j in range(length)]
    rest = [i for i in range(basis.L) if i not in sites]
    return _segment_index(basis.digits[:, sites]), _segment_index(basis.digits[:, rest])


def bipartition_matrix(basis: ConstrainedBasis, psi: np.ndarray, start: int, length: int, indices=None):
    """Amplitudes arranged as (region configs) x (complement configs)."""
    left, right = indices if indices is not None else bipartition_indices(basis, start, length)
    M = np.zeros((left.max() + 1, right.max() + 1), dtype=np.complex128)
    M[left, right] = psi
    return M, left, right


def _entropy_bits(M: np.ndarray) -> float:
    sv = np.linalg.svd(M, compute_uv=False)
    p = sv**2 / np.sum(sv**2)
    p = p[p > 1e-300]
    return float(max(0.0, -np.sum(p * np.log2(p))))


def entanglement_entropy(basis: ConstrainedBasis, psi: np.ndarray, start: int, length: int,
                         indices=None) -> float:
    """Von Neumann entropy (bits) of a contiguous region."""
    M, _, _ = bipartition_matrix(basis, psi, start, length, indices)
    return _entropy_bits(M)


@dataclass
class QuenchSeries:
    times: np.ndarray
    sz: np.ndarray
    fidelity: np.ndarray
    entropies: dict[str, np.ndarray] = field(default_factory=dict)

    def sublattice_sz(self) -> tuple[np.ndarray, np.ndarray]:
        return self.sz[:, 0::2].mean(axis=1), self.sz[:, 1::2].mean(axis=1)

    def to_csv(self, path) -> None:
        """Write to a path or an open text stream."""
        if hasattr(path, "write"):
            self._write(path)
        else:
            with open(path, "w", newline="") as fh:
                self._write(fh)

    def _write(self, fh) -> None:
        L = self.sz.shape[1]
        names = sorted(self.entropies)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *[f"sz_site_{i}" for i in range(L)], "fidelity", *[f"ee_{n}" for n in names]])
        for j, t in enumerate(self.times):
            row = [t, *self.sz[j], self.fidelity[j], *[self.entropies[n][j] for n in names]]
            w.writerow([f"{v:.16e}" for v in row])


def default_cuts(L: int) -> dict[str, tuple[int, int]]:
    return {"half": (0, L // 2), "one": (0, 1)}


def quench_series(H, psi0, basis: ConstrainedBasis, t_max: float, dt_out: float,
                  cuts: Mapping[str, tuple[int, int]] | None = None,
                  method: str = "auto") -> QuenchSeries:
    """Sample <Sz_i>, return fidelity and entropies on a uniform time grid."""
    if not dt_out > 0:
        raise ValueError("dt_out must be positive")
    cuts = default_cuts(basis.L) if cuts is None else dict(cuts)
    n = int(np.floor(t_max / dt_out + 1e-9)) + 1
    times = dt_out * np.arange(n)
    prop = Propagator(H, method)
    sz = np.empty((n, basis.L))
    fid = np.empty(n)
    ents = {name: np.empty(n) for name in cuts}
    psi = psi0.astype(np.complex128)
    parts = {name: bipartition_indices(basis, a, ln) for name, (a, ln) in cuts.items()}
    for j in range(n):
        if j:
            psi = prop(psi, dt_out)
        sz[j] = sz_profile(basis, psi)
        fid[j] = min(1.0, abs(np.vdot(psi0, psi)) ** 2)
        for name, (a, ln) in cuts.items():
            ents[name][j] = entanglement_entropy(basis, psi, a, ln, parts[name])
    return QuenchSeries(times, sz, fid, ents)


def time_average(times: np.ndarray, values: np.ndarray, t0: float, t1: float) -> float:
    mask = (times >= t0 - 1e-12) & (times <= t1 + 1e-12)
    return float(np.trapezoid(values[mask], times[mask]) / (times[mask][-1] - times[mask][0]))


def refine_extremum(times: np.ndarray, values: np.ndarray, j: int) -> float:
    """Vertex of the parabola through three samples around index j."""
    y0, y1, y2 = values[j - 1], values[j], values[j + 1]
    den = y0 - 2 * y1 + y2
    dt = times[1] - times[0]
    return float(times[j] + (0.5 * dt * (y0 - y2) / den if den != 0 else 0.0))


def revival_times(times: np.ndarray, fidelity: np.ndarray, height: float = 0.1,
                  min_separation: float = 1.0) -> np.ndarray:
    """Times of fidelity maxima after t = 0."""
    dist = max(1, int(min_separation / (times[1] - times[0])))
    peaks, _ = find_peaks(fidelity, height=height, distance=dist)
    return np.array([refine_extremum(times, fidelity, j) for j in peaks if 0 < j < len(times) - 1])


def entropy_minima(times: np.ndarray, entropy: np.ndarray, min_separation: float = 1.0,
                   prominence: float = 0.02) -> np.ndarray:
    dist = max(1, int(min_separation / (times[1] - times[0])))
    troughs, _ = find_peaks(-entropy, distance=dist, prominence=prominence)
    return np.array([refine_extremum(times, entropy, j) for j in troughs if 0 < j < len(times) - 1])


def sector_quench_sz(basis: ConstrainedBasis, sector, H, pattern: str, times: Sequence[float]) -> np.ndarray:
    """Translation-averaged <Sz> for a symmetric initial state, evolved in one sector."""
    psi0 = product_state(basis, pattern)
    phi0 = sector.project(psi0)
    if abs(np.linalg.norm(phi0) - 1) > 1e-10:
        raise ValueError("initial state is not contained in the sector")
    Hs = sector.restrict(H)
    evals, evecs = sla.eigh(Hs)
    c = evecs.conj().T @ phi0
    out = np.empty(len(times))
    for j, t in enumerate(times):
        psi = sector.lift(evecs @ (np.exp(-1j * t * evals) * c))
        out[j] = sz_profile(basis, psi).mean()
    return out
