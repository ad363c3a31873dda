"""Constrained Hilbert space of a spin-s ring or chain.

A configuration assigns a level ``n in {0, ..., 2s}`` to every site, and two
neighbouring sites may not both be excited. Configurations are stored as
packed base-(2s+1) integers in lexicographic order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from ._kernels import K

DEFAULT_MAX_DIM = 50_000_000


class CapacityError(RuntimeError):
    """Requested space exceeds the configured dimension cap."""


class ConfigNotFoundError(KeyError):
    """Configuration is not part of the constrained space."""


class UnsupportedError(ValueError):
    """Operation is not defined for the given boundary or spin."""


def adjacency_matrix(two_s: int) -> np.ndarray:
    """0/1 matrix allowing a neighbour pair unless both levels are nonzero."""
    d = two_s + 1
    M = np.ones((d, d), dtype=object)
    M[1:, 1:] = 0
    return M


def transfer_count(L: int, two_s: int, boundary: str = "periodic") -> int:
    """Exact dimension from powers of the adjacency matrix."""
    M = adjacency_matrix(two_s)
    if boundary == "periodic":
        P = np.identity(two_s + 1, dtype=object)
        for _ in range(L):
            P = P.dot(M)
        return int(np.trace(P))
    v = np.ones(two_s + 1, dtype=object)
    for _ in range(L - 1):
        v = M.dot(v)
    return int(v.sum())


def _check_boundary(boundary: str) -> bool:
    if boundary not in ("periodic", "open"):
        raise ValueError(f"boundary must be 'periodic' or 'open', got {boundary!r}")
    return boundary == "periodic"


@dataclass(frozen=True, eq=False)
class ConstrainedBasis:
    L: int
    two_s: int
    boundary: str
    codes: np.ndarray = field(repr=False)

    @property
    def d(self) -> int:
        return self.two_s + 1

    @property
    def s(self) -> float:
        return self.two_s / 2

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    @property
    def dim(self) -> int:
        return int(self.codes.size)

    def __len__(self) -> int:
        return self.dim

    @cached_property
    def powers(self) -> np.ndarray:
        return self.d ** np.arange(self.L - 1, -1, -1, dtype=np.int64)

    @cached_property
    def digits(self) -> np.ndarray:
        """Levels of every configuration, shape (dim, L)."""
        return ((self.codes[:, None] // self.powers[None, :]) % self.d).astype(np.int8)

    def is_admissible(self, levels: Sequence[int]) -> bool:
        n = list(levels)
        if len(n) != self.L or any(not 0 <= v <= self.two_s for v in n):
            return False
        pairs = range(self.L if self.periodic and self.L > 1 else self.L - 1)
        return all(n[i] == 0 or n[(i + 1) % self.L] == 0 for i in pairs)

    def encode(self, levels: Sequence[int] | str) -> int:
        if isinstance(levels, str):
            levels = [int(ch) for ch in levels]
        if not self.is_admissible(levels):
            raise ConfigNotFoundError(f"inadmissible configuration {levels!r}")
        return int(np.dot(np.asarray(levels, dtype=np.int64), self.powers))

    def rank(self, levels: Sequence[int] | str) -> int:
        code = self.encode(levels)
        i = int(np.searchsorted(self.codes, code))
        if i >= self.dim or self.codes[i] != code:
            raise ConfigNotFoundError(f"configuration {levels!r} not in basis")
        return i

    def rank_codes(self, codes: np.ndarray) -> np.ndarray:
        """Vectorised rank of packed codes known to be admissible."""
        return np.searchsorted(self.codes, codes)

    def unrank(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.dim:
            raise IndexError(f"ordinal {index} outside [0, {self.dim})")
        return tuple(int(v) for v in self.digits[index])

    def config_string(self, index: int) -> str:
        return "".join(str(v) for v in self.unrank(index))

    def dump(self) -> Iterable[str]:
        for row in self.digits:
            yield "".join(map(str, row))


def enumerate_basis(L: int, two_s: int, boundary: str = "periodic",
                    max_dim: int = DEFAULT_MAX_DIM) -> ConstrainedBasis:
    """All admissible configurations, sorted."""
    periodic = _check_boundary(boundary)
    if L < 2:
        raise ValueError("need at least two sites")
    if two_s < 1:
        raise ValueError("two_s must be a positive integer")
    if L * np.log2(two_s + 1) >= 62:
        raise CapacityError(f"{L} sites at 2s={two_s} do not fit a 64-bit code")
    expected = transfer_count(L, two_s, boundary)
    if expected > max_dim:
        raise CapacityError(f"dimension {expected} exceeds cap {max_dim}")
    codes = np.asarray(K.enumerate(L, two_s + 1, periodic), dtype=np.int64)
    if codes.size != expected:  # pragma: no cover - guards the kernels
        raise RuntimeError(f"enumeration produced {codes.size}, expected {expected}")
    return ConstrainedBasis(L, two_s, boundary, codes)


def translate_codes(basis: ConstrainedBasis, codes: np.ndarray, shift: int = 1) -> np.ndarray:
    """Move the content of site i to site i + shift (periodic)."""
    return np.asarray(K.rotate(np.asarray(codes, np.int64), basis.L, basis.d, shift % basis.L))


def reflect_codes(basis: ConstrainedBasis, codes: np.ndarray) -> np.ndarray:
    """Map site i to site L - 1 - i."""
    return np.asarray(K.reflect(np.asarray(codes, np.int64), basis.L, basis.d))


def _permutation(basis: ConstrainedBasis, image: np.ndarray) -> sp.csr_matrix:
    n = basis.dim
    rows = basis.rank_codes(image)
    return sp.csr_matrix((np.ones(n), (rows, np.arange(n))), shape=(n, n))


def translation_matrix(basis: ConstrainedBasis) -> sp.csr_matrix:
    if not basis.periodic:
        raise UnsupportedError("translation needs periodic boundary")
    return _permutation(basis, translate_codes(basis, basis.codes))


def inversion_matrix(basis: ConstrainedBasis) -> sp.csr_matrix:
    return _permutation(basis, reflect_codes(basis, basis.codes))


@dataclass(frozen=True, eq=False)
class SymmetrySector:
    """Momentum/inversion adapted subspace.

    ``k`` is the integer momentum label in ``0..L//2``. For ``0 < k < L/2``
    the block mixes ``k`` and ``-k`` so that inversion is diagonal; its
    spectrum equals that of the pure momentum-``k`` block.
    """

    L: int
    k: int
    parity: int
    representatives: np.ndarray = field(repr=False)
    norms: np.ndarray = field(repr=False)
    isometry: sp.csc_matrix = field(repr=False)

    @property
    def dim(self) -> int:
        return int(self.representatives.size)

    @property
    def label(self) -> str:
        return f"k={self.k},I={'+' if self.parity > 0 else '-'}"

    def project(self, psi: np.ndarray) -> np.ndarray:
        return self.isometry.conj().T @ psi

    def lift(self, phi: np.ndarray) -> np.ndarray:
        return self.isometry @ phi

    def restrict(self, op) -> np.ndarray:
        """Dense sector block of a full-space operator."""
        V = self.isometry
        return np.asarray((V.conj().T @ (op @ V)).todense()) if sp.issparse(op) \
            else V.conj().T @ (op @ V.toarray())


def build_sector(basis: ConstrainedBasis, k: int, parity: int) -> SymmetrySector:
    """Orthonormal basis of the (k, parity) sector, zero-norm states dropped."""
    if not basis.periodic:
        raise UnsupportedError("symmetry sectors need periodic boundary")
    if parity not in (1, -1):
        raise ValueError("parity must be +1 or -1")
    L = basis.L
    k %= L
    if k > L // 2:
        raise ValueError(f"momentum label must lie in 0..{L // 2}; use the mirror label {L - k}")
    self_conjugate = (2 * k) % L == 0
    reps = basis.codes[K.canonical(basis.codes, L, basis.d, self_conjugate) == basis.codes]

    phases = np.exp(-2j * np.pi * k * np.arange(L) / L)
    cols, rows, vals = [], [], []
    images = reps
    refl = reflect_codes(basis, reps)
    # inversion turns T^j into T^-j, hence the conjugate phase on the mirrored orbit
    for j in range(L):
        for codes, weight in ((images, phases[j]),
                              (translate_codes(basis, refl, j), parity * np.conj(phases[j]))):
            rows.append(basis.rank_codes(codes))
            cols.append(np.arange(reps.size))
            vals.append(np.full(reps.size, weight))
        images = translate_codes(basis, images, 1)
    V = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(basis.dim, reps.size))
    V.sum_duplicates()
    norms = np.sqrt(np.asarray(abs(V.multiply(V.conj())).sum(axis=0)).ravel())
    keep = norms > 1e-8 * np.sqrt(2 * L)
    V = V[:, keep] @ sp.diags(1.0 / norms[keep])
    if self_conjugate:
        if V.nnz == 0 or abs(V.imag).max() < 1e-12:
            V = V.real
    return SymmetrySector(L, k, parity, reps[keep], norms[keep], sp.csc_matrix(V))


def all_sectors(basis: ConstrainedBasis) -> list[SymmetrySector]:
    return [build_sector(basis, k, p) for k in range(basis.L // 2 + 1) for p in (1, -1)]
