"""Infinite-temperature references in the constrained space.

At infinite temperature every admissible configuration is equally likely,
so local reduced density matrices are diagonal and their weights are
environment counts: the number of admissible completions of a local pattern.
Counts come from powers of the adjacency matrix, exactly in integers for
finite rings and from its dominant eigenvector in the infinite ring.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .basis import adjacency_matrix

GOLDEN = (1 + math.sqrt(5)) / 2


def _check(two_s: int) -> None:
    if two_s < 1:
        raise ValueError("two_s must be a positive integer")


def dominant_eigenvalue(two_s: int) -> float:
    """Growth rate of the number of admissible configurations per site."""
    _check(two_s)
    return (1 + math.sqrt(1 + 4 * two_s)) / 2


def occupation_ratio(two_s: int) -> float:
    """r = (1 + sqrt(1 + 8s)) / (4s)."""
    _check(two_s)
    s = two_s / 2
    return (1 + math.sqrt(1 + 8 * s)) / (4 * s)


def thermal_sz(two_s: int) -> float:
    """Closed-form infinite-temperature <Sz> per site."""
    _check(two_s)
    s = two_s / 2
    root = math.sqrt(1 + 8 * s)
    return -s * (-1 + 4 * s + root) / (1 + 8 * s + root)


def level_probabilities(two_s: int) -> np.ndarray:
    """Single-site level distribution in the infinite ring.

    Empty has weight lambda^2, each excited level weight one, where lambda is
    the dominant eigenvalue; equivalently excited/empty = 1 / (2s (1 + r)).
    """
    lam = dominant_eigenvalue(two_s)
    w = np.ones(two_s + 1)
    w[0] = lam * lam
    return w / w.sum()


def rho_one(two_s: int) -> np.ndarray:
    return np.diag(level_probabilities(two_s))


def entropy_one(two_s: int) -> float:
    """Von Neumann entropy of rho_one in bits."""
    p = level_probabilities(two_s)
    return float(-np.sum(p * np.log2(p)))


def sz_from_rho(two_s: int, rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ np.diag(np.arange(two_s + 1) - two_s / 2))))


def _matrix_power(M: np.ndarray, n: int) -> np.ndarray:
    out = np.identity(M.shape[0], dtype=object)
    for _ in range(n):
        out = out.dot(M)
    return out


def window_patterns(two_s: int, width: int):
    """Admissible level patterns on an open window of ``width`` sites."""
    for pat in itertools.product(range(two_s + 1), repeat=width):
        if all(a == 0 or b == 0 for a, b in zip(pat, pat[1:])):
            yield pat


def site_weights(width: int, two_s: int = 1, L: int | None = None) -> dict[tuple[int, ...], Fraction | float]:
    """Probability of every admissible pattern on a contiguous window of a ring.

    With ``L`` given the result is exact (Fractions) for the L-site ring;
    otherwise it is the infinite-ring limit.
    """
    _check(two_s)
    if width < 1:
        raise ValueError("window must contain at least one site")
    pats = list(window_patterns(two_s, width))
    if L is not None:
        if L < width + 1:
            raise ValueError("ring must be longer than the window")
        # environment: a path of L - width + 1 steps from the last to the first window site
        P = _matrix_power(adjacency_matrix(two_s), L - width + 1)
        counts = {p: int(P[p[-1], p[0]]) for p in pats}
        total = sum(counts.values())
        return {p: Fraction(c, total) for p, c in counts.items()}
    lam = dominant_eigenvalue(two_s)
    v = np.ones(two_s + 1)
    v[0] = lam
    weights = {p: v[p[0]] * v[p[-1]] for p in pats}
    total = sum(weights.values())
    return {p: w / total for p, w in weights.items()}


def rho_window(width: int, two_s: int = 1, L: int | None = None) -> np.ndarray:
    """Diagonal reduced density matrix on a window; index = packed level string."""
    d = two_s + 1
    rho = np.zeros((d**width, d**width))
    for pat, w in site_weights(width, two_s, L).items():
        idx = int(np.dot(pat, d ** np.arange(width - 1, -1, -1)))
        rho[idx, idx] = float(w)
    return rho


def rho_three(L: int | None = None) -> np.ndarray:
    """Three-site spin-1/2 density matrix from environment counting."""
    return rho_window(3, 1, L)


def partial_trace_keep_first(rho: np.ndarray, d: int, width: int) -> np.ndarray:
    """Reduce a diagonal-or-not window matrix to its first site."""
    R = rho.reshape(d, d ** (width - 1), d, d ** (width - 1))
    return np.einsum("aibi->ab", R)


@dataclass(frozen=True)
class ThermalReference:
    s: float
    r: float
    sz_inf: float
    S1: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def reference(two_s: int) -> ThermalReference:
    return ThermalReference(two_s / 2, occupation_ratio(two_s), thermal_sz(two_s), entropy_one(two_s))
