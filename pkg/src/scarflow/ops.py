"""Constrained spin-flip Hamiltonians and local observables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from ._kernels import K
from .basis import ConstrainedBasis, UnsupportedError

MATRIX_FREE_THRESHOLD = 1_000_000


def spin_matrices(two_s: int) -> tuple[np.ndarray, np.ndarray]:
    """(Sx, Sz) in the level basis n = 0..2s, with Sz = n - s."""
    s = two_s / 2
    m = np.arange(two_s + 1) - s
    up = np.sqrt(s * (s + 1) - m[:-1] * (m[:-1] + 1))
    sx = np.zeros((two_s + 1, two_s + 1))
    sx[np.arange(1, two_s + 1), np.arange(two_s)] = up / 2
    sx += sx.T
    return sx, np.diag(m)


def ladder_elements(two_s: int) -> np.ndarray:
    """<n+1|Sx|n> for n = 0..2s-1."""
    sx, _ = spin_matrices(two_s)
    return np.ascontiguousarray(np.diag(sx, -1))


@dataclass(frozen=True)
class ModelParams:
    two_s: int
    L: int
    omega: float = 1.0
    h: float = 0.0
    boundary: str = "periodic"

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.h != 0 and self.two_s != 1:
            raise UnsupportedError("the deformation is defined for spin 1/2 only")

    def check(self, basis: ConstrainedBasis) -> None:
        if (basis.L, basis.two_s, basis.boundary) != (self.L, self.two_s, self.boundary):
            raise ValueError("basis and model parameters describe different systems")


def _build(basis: ConstrainedBasis, omega: float, h: float) -> sp.csr_matrix:
    deform = h != 0.0
    rows, cols, vals, wts = K.hamiltonian(basis.codes, basis.L, basis.d, basis.periodic,
                                          ladder_elements(basis.two_s), deform)
    data = vals * (omega + h * wts) if deform else vals * omega
    H = sp.csr_matrix((data, (rows, cols)), shape=(basis.dim, basis.dim))
    H.sort_indices()
    return H


def build_pxp(basis: ConstrainedBasis, params: ModelParams | None = None) -> sp.csr_matrix:
    """Omega * sum_i P_{i-1} Sx_i P_{i+1} as a real symmetric CSR matrix."""
    params = params or ModelParams(basis.two_s, basis.L, boundary=basis.boundary)
    params.check(basis)
    return _build(basis, params.omega, 0.0)


def build_deformed(basis: ConstrainedBasis, params: ModelParams) -> sp.csr_matrix:
    """PXP plus h * sum_i (PXP_i Z_{i+2} + Z_{i-2} PXP_i) on a spin-1/2 ring.

    The diagonal factor Z takes the value s - n, i.e. +1/2 on the empty level.
    With this sign the variational equations in ``flow.eom_rhs_deformed``
    are the exact tangent projection of this operator.
    """
    params.check(basis)
    if basis.two_s != 1:
        raise UnsupportedError("the deformation is defined for spin 1/2 only")
    if not basis.periodic:
        raise UnsupportedError("the deformation is built with periodic wraparound")
    if basis.L < 4:
        raise ValueError("the deformed model needs at least four sites")
    return _build(basis, params.omega, params.h)


def matrix_free(basis: ConstrainedBasis, params: ModelParams) -> LinearOperator:
    """Applies the (possibly deformed) Hamiltonian without storing it."""
    params.check(basis)
    if params.h and not basis.periodic:
        raise UnsupportedError("the deformation is built with periodic wraparound")
    sx_up = ladder_elements(basis.two_s)

    def mv(x):
        x = np.asarray(x).ravel()
        return K.matvec(basis.codes, basis.L, basis.d, basis.periodic, sx_up,
                        params.omega, params.h, x)

    return LinearOperator((basis.dim, basis.dim), matvec=mv, rmatvec=mv, dtype=np.complex128)


def hamiltonian(basis: ConstrainedBasis, params: ModelParams):
    """Sparse matrix below ``MATRIX_FREE_THRESHOLD``, matrix-free above."""
    if basis.dim > MATRIX_FREE_THRESHOLD:
        return matrix_free(basis, params)
    return build_deformed(basis, params) if params.h else build_pxp(basis, params)


def local_sz(basis: ConstrainedBasis, site: int) -> sp.dia_matrix:
    if not 0 <= site < basis.L:
        raise IndexError(f"site {site} outside [0, {basis.L})")
    return sp.diags(basis.digits[:, site] - basis.s)


def sz_profile(basis: ConstrainedBasis, psi: np.ndarray) -> np.ndarray:
    """<Sz_i> for every site of a normalised state."""
    p = np.abs(psi) ** 2
    return p @ basis.digits - basis.s * p.sum()


def particle_hole(basis: ConstrainedBasis) -> sp.dia_matrix:
    """Diagonal (-1)^(total level); anticommutes with every constrained flip."""
    return sp.diags((-1.0) ** basis.digits.sum(axis=1))


def apply(op, x: np.ndarray) -> np.ndarray:
    if op.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: operator {op.shape}, vector {x.shape}")
    return op @ x
