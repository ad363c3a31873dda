"""Sector diagonalisation and level-spacing ratios."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .basis import ConstrainedBasis, SymmetrySector

DENSE_CAP = 20_000


class CapacityExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralData:
    label: str
    eigenvalues: np.ndarray
    r: float
    eigenvectors: np.ndarray | None = None


def collapse_degeneracies(energies, rel_tol: float = 1e-10) -> np.ndarray:
    """Sorted levels with clusters closer than rel_tol * width merged."""
    E = np.sort(np.asarray(energies, dtype=float))
    if E.size < 2:
        return E
    width = E[-1] - E[0]
    keep = np.concatenate(([True], np.diff(E) > rel_tol * width))
    return E[keep]


def r_statistic(energies, rel_tol: float = 1e-10) -> float:
    """Mean of min(s_n, s_{n-1}) / max(s_n, s_{n-1}) over consecutive gaps."""
    E = collapse_degeneracies(energies, rel_tol)
    if E.size < 3:
        raise ValueError("need at least three distinct levels")
    gaps = np.diff(E)
    a, b = gaps[1:], gaps[:-1]
    return float(np.mean(np.minimum(a, b) / np.maximum(a, b)))


def diagonalize_sector(basis: ConstrainedBasis, sector: SymmetrySector, H,
                       cap: int = DENSE_CAP, vectors: bool = False) -> SpectralData:
    if sector.dim > cap:
        raise CapacityExceeded(f"sector dimension {sector.dim} exceeds dense cap {cap}")
    Hs = sector.restrict(H)
    Hs = 0.5 * (Hs + Hs.conj().T)
    if vectors:
        evals, evecs = sla.eigh(Hs)
    else:
        evals, evecs = sla.eigh(Hs, eigvals_only=True), None
    r = r_statistic(evals) if collapse_degeneracies(evals).size >= 3 else float("nan")
    return SpectralData(sector.label, evals, r, evecs)
