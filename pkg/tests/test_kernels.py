import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp

from scarflow._kernels import NUMBA_KERNELS, NUMPY_KERNELS
from scarflow.ops import ladder_elements
from scarflow.varmps import site_tensor

pytestmark = pytest.mark.skipif(NUMBA_KERNELS is None, reason="numba not importable")

CASES = [(2, 1, True), (9, 1, True), (10, 1, False), (7, 2, True), (6, 3, False), (5, 4, True), (12, 1, True)]


def assembled(out, n):
    r, c, v, w = out
    return sp.csr_matrix((v, (r, c)), shape=(n, n)), sp.csr_matrix((v * w, (r, c)), shape=(n, n))


@pytest.mark.parametrize("L,two_s,periodic", CASES)
def test_backends_agree(L, two_s, periodic, rng):
    d = two_s + 1
    codes = np.asarray(NUMPY_KERNELS.enumerate(L, d, periodic), np.int64)
    assert np.array_equal(codes, NUMBA_KERNELS.enumerate(L, d, periodic))
    sx = ladder_elements(two_s)
    deform = two_s == 1 and periodic
    a = assembled(NUMPY_KERNELS.hamiltonian(codes, L, d, periodic, sx, deform), codes.size)
    b = assembled(NUMBA_KERNELS.hamiltonian(codes, L, d, periodic, sx, deform), codes.size)
    for x, y in zip(a, b):
        assert (x != y).nnz == 0
    vec = rng.standard_normal(codes.size) + 1j * rng.standard_normal(codes.size)
    h = 0.3 if deform else 0.0
    assert np.allclose(NUMPY_KERNELS.matvec(codes, L, d, periodic, sx, 1.1, h, vec),
                       NUMBA_KERNELS.matvec(codes, L, d, periodic, sx, 1.1, h, vec), atol=1e-13)
    tensors = np.array([site_tensor(t, p, two_s) for t, p in rng.uniform(-3, 3, (L, 2))])
    assert np.allclose(NUMPY_KERNELS.mps_amplitudes(codes, L, d, tensors),
                       NUMBA_KERNELS.mps_amplitudes(codes, L, d, tensors), atol=1e-14)
    for shift in range(L):
        assert np.array_equal(NUMPY_KERNELS.rotate(codes, L, d, shift), NUMBA_KERNELS.rotate(codes, L, d, shift))
    assert np.array_equal(NUMPY_KERNELS.reflect(codes, L, d), NUMBA_KERNELS.reflect(codes, L, d))
    for refl in (True, False):
        assert np.array_equal(NUMPY_KERNELS.canonical(codes, L, d, refl), NUMBA_KERNELS.canonical(codes, L, d, refl))


def test_rotate_reflect_semantics():
    L, d = 5, 2
    code = int("10010", 2)
    codes = np.array([code], np.int64)
    assert int(NUMPY_KERNELS.rotate(codes, L, d, 1)[0]) == int("01001", 2)
    assert int(NUMPY_KERNELS.reflect(codes, L, d)[0]) == int("01001", 2)


@pytest.mark.parametrize("flag,expected", [("1", "numpy"), ("", "numba")])
def test_environment_selects_backend(flag, expected):
    env = dict(os.environ, SCARFLOW_DISABLE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "import scarflow; print(scarflow.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
