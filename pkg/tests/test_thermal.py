import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scarflow.basis import enumerate_basis
from scarflow.thermal import (
    GOLDEN,
    entropy_one,
    occupation_ratio,
    partial_trace_keep_first,
    reference,
    rho_one,
    rho_three,
    site_weights,
    sz_from_rho,
    thermal_sz,
)


def test_reference_values():
    assert round(thermal_sz(1), 4) == -0.2236
    assert thermal_sz(2) == pytest.approx(-0.5, abs=1e-15)
    assert round(thermal_sz(4), 3) == -1.053
    assert thermal_sz(1) == pytest.approx(-0.5 * GOLDEN / (2 + GOLDEN), abs=1e-15)
    assert entropy_one(1) == pytest.approx(0.8505, abs=5e-4)
    assert occupation_ratio(1) == pytest.approx(GOLDEN)


def test_rho_one_closed_form():
    for two_s in range(1, 7):
        r = occupation_ratio(two_s)
        Z = (2 + r) / (1 + r)
        # each excited level relative to the empty one; reduces to 1/(1+r) at spin 1/2
        exc = 1 / (two_s * (1 + r))
        rho = rho_one(two_s)
        if two_s == 1:
            assert np.allclose(np.diag(rho), [1 / Z, exc / Z])
        assert np.trace(rho) == pytest.approx(1.0)
        assert rho[1, 1] / rho[0, 0] == pytest.approx(exc)
        assert sz_from_rho(two_s, rho) == pytest.approx(thermal_sz(two_s), abs=1e-14)
        assert 0 < entropy_one(two_s) < math.log2(two_s + 1)


@pytest.mark.parametrize("two_s,L", [(1, 24), (2, 14), (4, 10)])
def test_counting_matches_enumeration(two_s, L):
    b = enumerate_basis(L, two_s)
    excited = np.mean(b.digits[:, 0] > 0)
    exact = site_weights(1, two_s, L)
    assert float(sum(w for (n,), w in exact.items() if n > 0)) == pytest.approx(excited, abs=1e-14)
    levels = np.bincount(b.digits[:, 0], minlength=two_s + 1) / b.dim
    assert np.allclose(levels, [float(exact[(n,)]) for n in range(two_s + 1)], atol=1e-14)


def test_zero_to_one_ratio_at_24_sites():
    b = enumerate_basis(24, 1)
    n1 = np.count_nonzero(b.digits[:, 0])
    assert (b.dim - n1) / n1 == pytest.approx(1 + GOLDEN, rel=5e-3)


def test_rho_three_counting():
    rho = rho_three()
    assert np.trace(rho) == pytest.approx(1.0)
    assert np.all(np.linalg.eigvalsh(rho) >= -1e-15)
    for pat in itertools.product((0, 1), repeat=3):
        if (pat[0] and pat[1]) or (pat[1] and pat[2]):
            i = int("".join(map(str, pat)), 2)
            assert rho[i, i] == 0
    assert np.allclose(partial_trace_keep_first(rho, 2, 3), rho_one(1), atol=1e-12)


def brute_environment(L, pattern):
    """Admissible completions of a three-site window on an L-ring by enumeration."""
    b = enumerate_basis(L, 1)
    return int(np.sum(np.all(b.digits[:, :3] == pattern, axis=1)))


def test_rho_three_ratio_vs_brute_force():
    ratios = [Fraction(brute_environment(L, (0, 0, 0)), brute_environment(L, (1, 0, 1))) for L in range(20, 27)]
    exact = [site_weights(3, 1, L) for L in range(20, 27)]
    for r, w in zip(ratios, exact):
        assert r == w[(0, 0, 0)] / w[(1, 0, 1)]
    w_inf = site_weights(3, 1)
    assert float(ratios[-1]) == pytest.approx(w_inf[(0, 0, 0)] / w_inf[(1, 0, 1)], rel=1e-8)
    assert w_inf[(0, 0, 0)] / w_inf[(1, 0, 1)] == pytest.approx(GOLDEN**2)


@given(st.integers(1, 6), st.integers(1, 4))
def test_windows_normalised(two_s, width):
    w = site_weights(width, two_s)
    assert sum(w.values()) == pytest.approx(1.0)
    assert all(v > 0 for v in w.values())


def test_reference_json():
    ref = reference(2)
    assert ref.sz_inf == pytest.approx(-0.5)
    assert '"S1"' in ref.to_json()
    with pytest.raises(ValueError):
        thermal_sz(0)
