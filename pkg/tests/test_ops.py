from functools import reduce

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from scarflow.basis import UnsupportedError, enumerate_basis, inversion_matrix, translation_matrix
from scarflow.ops import (
    ModelParams,
    apply,
    build_deformed,
    build_pxp,
    local_sz,
    matrix_free,
    particle_hole,
    spin_matrices,
)


def kron_all(ops):
    return reduce(np.kron, ops)


def dense_oracle(L, two_s, omega=1.0, h=0.0, periodic=True):
    """Full tensor-product construction restricted to admissible configurations."""
    d = two_s + 1
    sx, sz = spin_matrices(two_s)
    P = np.zeros((d, d))
    P[0, 0] = 1
    Z = -sz  # s - n
    eye = np.eye(d)

    def site_op(pieces):
        ops = [eye] * L
        for i, o in pieces:
            ops[i % L] = o @ ops[i % L]  # factors on coinciding sites multiply
        return kron_all(ops)

    H = np.zeros((d**L, d**L))
    for i in range(L):
        pieces = [(i, sx)]
        if periodic or i > 0:
            pieces.append((i - 1, P))
        if periodic or i < L - 1:
            pieces.append((i + 1, P))
        H += omega * site_op(pieces)
        if h:
            H += h * site_op(pieces + [(i + 2, Z)])
            H += h * site_op(pieces + [(i - 2, Z)])
    b = enumerate_basis(L, two_s, "periodic" if periodic else "open")
    idx = b.codes
    return H[np.ix_(idx, idx)], b


@pytest.mark.parametrize("L,two_s,periodic", [(2, 1, True), (5, 1, True), (6, 1, False), (4, 2, True),
                                              (5, 2, False), (4, 3, True), (3, 4, True)])
def test_pxp_matches_tensor_product(L, two_s, periodic):
    H_ref, b = dense_oracle(L, two_s, periodic=periodic)
    H = build_pxp(b, ModelParams(two_s, L, boundary=b.boundary)).toarray()
    assert np.allclose(H, H_ref, atol=1e-14)


@pytest.mark.parametrize("L", [6, 7, 8])
def test_deformed_matches_tensor_product(L):
    H_ref, b = dense_oracle(L, 1, omega=1.0, h=0.37)
    H = build_deformed(b, ModelParams(1, L, 1.0, 0.37)).toarray()
    assert np.allclose(H, H_ref, atol=1e-14)


def test_two_site_elements():
    b = enumerate_basis(2, 1)
    H = build_pxp(b).toarray()
    i00, i01, i10 = b.rank("00"), b.rank("01"), b.rank("10")
    assert H[i00, i01] == H[i00, i10] == 0.5
    assert H[i01, i10] == 0.0
    assert np.count_nonzero(H) == 4


@pytest.mark.parametrize("L,two_s", [(6, 1), (8, 1), (5, 2), (4, 4)])
def test_trace_hermiticity_and_symmetries(L, two_s):
    b = enumerate_basis(L, two_s)
    H = build_pxp(b)
    assert abs(H.diagonal().sum()) == 0
    assert abs(H - H.T).max() < 1e-14
    T, I = translation_matrix(b), inversion_matrix(b)
    assert abs(H @ T - T @ H).max() < 1e-14
    assert abs(H @ I - I @ H).max() < 1e-14
    C = particle_hole(b)
    assert abs(C @ H + H @ C).max() < 1e-14


def test_particle_hole_spectrum():
    E = np.linalg.eigvalsh(build_pxp(enumerate_basis(6, 1)).toarray())
    assert np.allclose(np.sort(E), np.sort(-E), atol=1e-12)


def test_deformed_h_zero_and_z2():
    b = enumerate_basis(8, 1)
    assert (build_deformed(b, ModelParams(1, 8, 1.0, 0.0)) != build_pxp(b)).nnz == 0
    H = build_deformed(b, ModelParams(1, 8, 1.0, 0.1))
    assert abs(H - H.T).max() < 1e-14
    z2 = b.rank("01010101")
    assert H[z2, z2] == 0
    with pytest.raises(UnsupportedError):
        build_deformed(enumerate_basis(6, 2), ModelParams(2, 6, 1.0, 0.1))
    with pytest.raises(UnsupportedError):
        ModelParams(2, 6, 1.0, 0.1)


def test_local_sz():
    b = enumerate_basis(4, 1)
    assert np.all(local_sz(b, 2).diagonal()[b.rank("0000")] == -0.5)
    assert local_sz(b, 1).diagonal()[b.rank("0101")] == 0.5
    psi = np.ones(b.dim) / np.sqrt(b.dim)
    total = sum(psi @ local_sz(b, i) @ psi for i in range(4))
    # 7 configurations carrying 8 excitations on 28 site slots
    assert total == pytest.approx(4 * (8 * 0.5 - 20 * 0.5) / 28, abs=1e-14)
    assert total == pytest.approx(-6 / 7, abs=1e-14)
    with pytest.raises(IndexError):
        local_sz(b, 4)


@pytest.mark.parametrize("L,two_s,h", [(10, 1, 0.0), (10, 1, 0.2), (6, 2, 0.0), (7, 1, 0.05)])
def test_matrix_free_matches_sparse(rng, L, two_s, h):
    b = enumerate_basis(L, two_s)
    p = ModelParams(two_s, L, 1.3, h)
    H = build_deformed(b, p) if h else build_pxp(b, p)
    x = rng.standard_normal(b.dim) + 1j * rng.standard_normal(b.dim)
    assert np.max(np.abs(matrix_free(b, p) @ x - H @ x)) < 1e-13


def test_apply(rng):
    b = enumerate_basis(6, 1)
    H = build_pxp(b)
    x = rng.standard_normal(b.dim)
    assert np.allclose(apply(3.0 * sp.identity(b.dim), x), 3 * x)
    E, V = np.linalg.eigh(H.toarray())
    assert np.max(np.abs(apply(H, V[:, 3]) - E[3] * V[:, 3])) < 1e-10
    with pytest.raises(ValueError):
        apply(H, x[:-1])


@given(st.integers(0, 2**32 - 1))
def test_expectation_real(seed):
    g = np.random.default_rng(seed)
    b = enumerate_basis(8, 1)
    H = build_pxp(b)
    x = g.standard_normal(b.dim) + 1j * g.standard_normal(b.dim)
    assert abs(np.vdot(x, H @ x).imag) < 1e-10 * np.vdot(x, x).real


def test_omega_scales_operator():
    b = enumerate_basis(6, 2)
    assert abs(build_pxp(b, ModelParams(2, 6, 2.5)) - 2.5 * build_pxp(b)).max() < 1e-15
