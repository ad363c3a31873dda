"""Bond-dimension-2 variational states on the constrained space.

Site tensors follow

    A(theta, phi) = [[x |0>, Q|theta, phi>],
                     [  |0>,            0 ]],    x = <0|theta, phi> = cos(theta/2)^(2s),

stored as arrays indexed ``[level, left, right]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.linalg as sla

from ._kernels import K
from .basis import ConstrainedBasis

GOLDEN = (1 + np.sqrt(5)) / 2


class DegenerateStateError(ValueError):
    """The projected state has zero norm."""


class GaugeMapError(RuntimeError):
    pass


class TransferMatrixError(RuntimeError):
    pass


def _half_angles(theta):
    theta = np.asarray(theta, dtype=float)
    return np.cos(theta / 2), np.sin(theta / 2)


def coherent_amplitudes(theta, phi, two_s: int) -> np.ndarray:
    """<n|theta, phi> for n = 0..2s; trailing axis is the level."""
    c, sn = _half_angles(theta)
    phase = -1j * np.exp(1j * np.asarray(phi, dtype=float))
    n = np.arange(two_s + 1)
    binom = np.sqrt([comb(two_s, k) for k in n])
    return binom * c[..., None] ** (two_s - n) * (phase[..., None] * sn[..., None]) ** n


def coherent_derivative(theta, phi, two_s: int) -> np.ndarray:
    """d/dtheta of ``coherent_amplitudes``."""
    c, sn = _half_angles(theta)
    c, sn = c[..., None], sn[..., None]
    phase = (-1j * np.exp(1j * np.asarray(phi, dtype=float)))[..., None]
    n = np.arange(two_s + 1)
    binom = np.sqrt([comb(two_s, k) for k in n])
    a = two_s - n
    lead = np.where(a > 0, a * c ** np.maximum(a - 1, 0) * (-sn / 2) * sn**n, 0.0)
    tail = np.where(n > 0, n * sn ** np.maximum(n - 1, 0) * (c / 2) * c**a, 0.0)
    return binom * phase**n * (lead + tail)


def _assemble(amp: np.ndarray, two_s: int, derivative: bool = False) -> np.ndarray:
    A = np.zeros(amp.shape[:-1] + (two_s + 1, 2, 2), dtype=np.complex128)
    A[..., 0, 0, 0] = amp[..., 0]
    A[..., 1:, 0, 1] = amp[..., 1:]
    if not derivative:
        A[..., 0, 1, 0] = 1.0
    return A


def site_tensor(theta, phi, two_s: int) -> np.ndarray:
    return _assemble(coherent_amplitudes(theta, phi, two_s), two_s)


def site_tensor_derivative(theta, phi, two_s: int) -> np.ndarray:
    return _assemble(coherent_derivative(theta, phi, two_s), two_s, derivative=True)


def mps_dense(basis: ConstrainedBasis, theta, phi=None) -> np.ndarray:
    """Unnormalised amplitudes Tr(A_1 ... A_L) on every configuration."""
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (basis.L,))
    phi = np.zeros(basis.L) if phi is None else np.broadcast_to(np.asarray(phi, float), (basis.L,))
    if not basis.periodic:
        raise ValueError("the trace form needs a periodic ring")
    tensors = np.ascontiguousarray(site_tensor(theta, phi, basis.two_s))
    return np.asarray(K.mps_amplitudes(basis.codes, basis.L, basis.d, tensors))


def reduced_transfer(theta, two_s: int) -> np.ndarray:
    """2x2 norm transfer matrices [[x^2, 1 - x^2], [1, 0]] per site."""
    x2 = np.cos(np.asarray(theta, float) / 2) ** (2 * two_s)
    out = np.zeros(x2.shape + (2, 2))
    out[..., 0, 0] = x2
    out[..., 0, 1] = 1 - x2
    out[..., 1, 0] = 1
    return out


def mps_norm(theta, two_s: int = 1) -> float:
    """Squared norm of the finite periodic MPS via 2x2 transfer products."""
    M = np.eye(2)
    for t in reduced_transfer(theta, two_s):
        M = M @ t
    return float(np.trace(M))


def mps_norm_formula(theta) -> float:
    """Closed form 1 + prod(-sin^2(theta_j/2)) for spin 1/2."""
    return float(1 + np.prod(-np.sin(np.asarray(theta, float) / 2) ** 2))


DEGENERATE_NORM = 1e-12


def gutzwiller_state(basis: ConstrainedBasis, vartheta, varphi=None) -> np.ndarray:
    """Normalised projection of a product of spin-coherent states."""
    vartheta = np.broadcast_to(np.asarray(vartheta, float), (basis.L,))
    varphi = np.zeros(basis.L) if varphi is None else np.broadcast_to(np.asarray(varphi, float), (basis.L,))
    table = coherent_amplitudes(vartheta, varphi, basis.two_s)
    dig = basis.digits
    psi = np.prod(table[np.arange(basis.L)[None, :], dig], axis=1)
    norm = np.linalg.norm(psi)
    # the unprojected product state has unit norm; cos(pi/2) is only ~1e-17 in floating point
    if not norm > DEGENERATE_NORM:
        raise DegenerateStateError("projected product state vanishes")
    return psi / norm


@dataclass(frozen=True)
class GaugeAngles:
    theta: np.ndarray
    phi: np.ndarray
    G: np.ndarray
    c: np.ndarray
    sweeps: int


def continued_fraction(F: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100_000):
    """Periodic solution of G_i = 1 + F_i / G_{i+1} by cyclic substitution."""
    F = np.asarray(F, float)
    G = 1 + F
    L = F.size
    for sweep in range(1, max_sweeps + 1):
        old = G.copy()
        for i in range(L - 1, -1, -1):
            G[i] = 1 + F[i] / G[(i + 1) % L]
        if np.max(np.abs(G - old) / G) < tol:
            return G, sweep
    raise GaugeMapError(f"continued fraction did not converge in {max_sweeps} sweeps")


def gauge_map(vartheta, varphi=None, tol: float = 1e-14, max_sweeps: int = 100_000) -> GaugeAngles:
    """Angles of the normalised MPS equal (up to norm) to the projected product state.

    Spin 1/2 only: a_i = cos(vartheta_i/2), b_i = -i e^{i varphi_i} sin(vartheta_i/2).
    """
    vartheta = np.asarray(vartheta, float)
    varphi = np.zeros_like(vartheta) if varphi is None else np.asarray(varphi, float)
    a = np.cos(vartheta / 2)
    b = -1j * np.exp(1j * varphi) * np.sin(vartheta / 2)
    if np.any(np.abs(a) < 1e-14):
        raise GaugeMapError("a site with cos(vartheta/2) = 0 has no gauge image")
    F = np.abs(b) ** 2 / a**2
    G, sweeps = continued_fraction(F, tol, max_sweeps)
    c = np.sqrt(G) * np.abs(a)
    nxt = np.roll(np.arange(a.size), -1)
    cos_half = a / c
    off = b * a[nxt] / (c * c[nxt])
    theta = 2 * np.arctan2(np.abs(off), cos_half)
    phi = np.angle(1j * off)
    return GaugeAngles(theta, phi, G, c, sweeps)


def site_transfer(bra: np.ndarray, ket: np.ndarray, op: np.ndarray | None = None) -> np.ndarray:
    """4x4 map sum_{n n'} conj(bra[n]) op[n, n'] ket[n'] with index (left pair, right pair)."""
    if op is None:
        T = np.einsum("pab,pcd->acbd", bra.conj(), ket)
    else:
        T = np.einsum("pab,pn,ncd->acbd", bra.conj(), op, ket)
    return T.reshape(4, 4)


@dataclass(frozen=True)
class TransferMatrix:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    left: np.ndarray
    right: np.ndarray
    x: float

    @property
    def gap(self) -> float:
        return float(abs(self.eigenvalues[0]) - abs(self.eigenvalues[1]))


def _eigendata(T: np.ndarray, strict: bool):
    w, R = sla.eig(T)
    order = np.lexsort((-w.real, -np.round(np.abs(w), 12)))
    w, R = w[order], R[:, order]
    if np.linalg.cond(R) > 1e10:
        raise TransferMatrixError("transfer matrix is defective")
    Lm = np.linalg.inv(R)
    if strict and abs(w[1]) > abs(w[0]) * (1 - 1e-12):
        raise TransferMatrixError("dominant eigenvalue is not unique")
    return w, Lm, R


def transfer_matrix(theta: float, phi: float = 0.0, two_s: int = 1, strict: bool = False) -> TransferMatrix:
    """Single-site transfer matrix with biorthonormal eigenvectors.

    Rows of ``left`` and columns of ``right`` are paired so that left @ right = 1.
    """
    A = site_tensor(theta, phi, two_s)
    T = site_transfer(A, A)
    w, Lm, R = _eigendata(T, strict)
    return TransferMatrix(T, w, Lm, R, float(np.cos(theta / 2) ** two_s))


def two_site_transfer(theta_o: float, theta_e: float, two_s: int = 1,
                      phi_o: float = 0.0, phi_e: float = 0.0, strict: bool = False) -> TransferMatrix:
    Ao, Ae = site_tensor(theta_o, phi_o, two_s), site_tensor(theta_e, phi_e, two_s)
    T = site_transfer(Ao, Ao) @ site_transfer(Ae, Ae)
    w, Lm, R = _eigendata(T, strict)
    return TransferMatrix(T, w, Lm, R, float("nan"))


MEASURE_ALPHA = (2 + np.sqrt(5)) / ((3 + np.sqrt(5)) * np.pi)
MEASURE_BETA = 2 / ((3 + np.sqrt(5)) * np.pi)


def measure_density(theta):
    return (MEASURE_ALPHA + MEASURE_BETA * np.cos(theta)) / (2 * np.pi)


def quadrature_nodes(n_theta: int = 64, n_phi: int = 64):
    """Gauss-Legendre in theta on [0, 2pi], trapezoid in phi; weights include the measure."""
    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = np.pi * (x + 1)
    wt = np.pi * w * measure_density(theta)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    wp = np.full(n_phi, 2 * np.pi / n_phi)
    T, P = np.meshgrid(theta, phi, indexing="ij")
    W = np.outer(wt, wp)
    return T.ravel(), P.ravel(), W.ravel()


def measure_total(n_theta: int = 64, n_phi: int = 64) -> float:
    return float(quadrature_nodes(n_theta, n_phi)[2].sum())


def measure_quadrature(two_s: int = 1, n_theta: int = 64, n_phi: int = 64) -> np.ndarray:
    """Integrated outer-product tensor, shape (4, 4, 2, 2).

    Entry [(a a'), (b b')] is the single-site operator int mu A_ab A_{a'b'}^dagger.
    """
    if two_s != 1:
        raise ValueError("the measure is constructed for spin 1/2 only")
    th, ph, w = quadrature_nodes(n_theta, n_phi)
    A = site_tensor(th, ph, 1)  # (nodes, level, a, b)
    out = np.einsum("q,qnab,qmcd->acbdnm", w, A, A.conj())
    return out.reshape(4, 4, 2, 2)


def golden_matrix() -> np.ndarray:
    P = np.diag([1.0, 0.0])
    Q = np.diag([0.0, 1.0])
    out = np.zeros((4, 4, 2, 2))
    out[0, 0] = P
    out[0, 3] = Q / GOLDEN
    out[3, 0] = GOLDEN * P
    return out


def identity_resolution(L: int, n_theta: int = 64, n_phi: int = 64) -> np.ndarray:
    """Tr(AA_1 ... AA_L) as a 2^L x 2^L operator on the unconstrained chain."""
    AA = measure_quadrature(1, n_theta, n_phi)
    R = np.eye(4, dtype=np.complex128)[None, None]  # (bra cfg, ket cfg, 4, 4)
    for _ in range(L):
        R = np.einsum("xyij,jknm->xnymik", R, AA)
        n = R.shape[0] * 2
        R = R.reshape(n, n, 4, 4)
    return np.trace(R, axis1=2, axis2=3)


def identity_resolution_check(basis: ConstrainedBasis, n_theta: int = 64, n_phi: int = 64) -> float:
    """Max entrywise deviation of the resolved identity from the constrained projector."""
    if basis.two_s != 1 or not basis.periodic:
        raise ValueError("identity resolution is available for periodic spin-1/2 rings")
    if basis.L > 10:
        raise ValueError("limited to ten sites")
    O = identity_resolution(basis.L, n_theta, n_phi)
    target = np.zeros(2**basis.L)
    target[basis.codes] = 1.0
    return float(np.max(np.abs(O - np.diag(target))))
