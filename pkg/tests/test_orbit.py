import math

import numpy as np
import pytest

from scarflow import flow
from scarflow.orbit import (
    OrbitError,
    OrbitResult,
    find_orbit,
    integrate,
    orbit_error,
    reversal,
    scan_h,
    zero_orbit,
)


@pytest.fixture(scope="module")
def half_orbit():
    return find_orbit(1)


def test_constant_rhs_is_exact():
    tr = integrate(lambda a, b: (0.5, -2.0), (0.1, 0.2), 3.0)
    assert np.allclose(tr.y[:, -1], [1.6, -5.8], atol=1e-14)
    assert not tr.truncated


def test_endpoint_converges_with_tolerance():
    rhs = flow.velocity_field(1)
    a = integrate(rhs, (0.5, -0.3), 2.0, rtol=1e-8)
    b = integrate(rhs, (0.5, -0.3), 2.0, rtol=5e-9)
    assert not (a.truncated or b.truncated)
    assert np.linalg.norm(a.y[:, -1] - b.y[:, -1]) < 10 * 1e-8 * np.linalg.norm(a.y[:, -1])


def test_truncates_at_singularity():
    tr = integrate(flow.velocity_field(1), (0.0, 0.0), 40.0, rtol=1e-10)
    assert tr.truncated and tr.t[-1] < 40.0
    with pytest.raises(ValueError):
        integrate(lambda a, b: (math.inf, 0.0), (0.0, 0.0), 1.0)


def test_events_follow_solve_ivp_conventions():
    def ev(t, p):
        return p[0] - 1.0
    ev.terminal = True
    tr = integrate(lambda a, b: (1.0, 0.0), (0.0, 0.0), 5.0, events=ev)
    assert tr.t_events[0][0] == pytest.approx(1.0, abs=1e-14)
    assert tr.t[-1] == pytest.approx(1.0, abs=1e-14)


def test_dense_output_solves_the_flow(half_orbit):
    tr = half_orbit.trajectory
    rhs = flow.velocity_field(1)
    mid = (tr.t[1:] + tr.t[:-1]) / 2
    d = 1e-6
    numeric = (tr(mid + d) - tr(mid - d)) / (2 * d)
    exact = np.array([rhs(*tr(m)) for m in mid]).T
    assert np.max(np.abs(numeric - exact)) < 1e-7


def test_energy_invariant_along_orbit(half_orbit):
    for _, te, to in half_orbit.samples(25):
        assert flow.energy(te, to, 0.0, 0.0, 1) == 0.0


def test_orbit_report(half_orbit):
    r = half_orbit
    assert isinstance(r, OrbitResult)
    assert r.period > 0 and r.epsilon > 0 and r.fidelity_loss > 0
    assert r.closure_error < 1e-6
    assert orbit_error(r) == (r.epsilon, r.fidelity_loss)
    s = r.summary()
    assert {"period", "epsilon", "fidelity_loss", "closure_error", "delta_c", "multipliers"} <= set(s)
    te, to = r.samples(3)[0, 1:]
    assert (te, to) == pytest.approx(r.start)


def test_orbit_error_flags_singular():
    r = find_orbit(1, monodromy=False)
    r.epsilon = math.nan
    with pytest.raises(OrbitError):
        orbit_error(r)


@pytest.mark.parametrize("two_s", [1, 2])
def test_omega_rescaling(two_s):
    a = find_orbit(two_s, 1.0, monodromy=False)
    b = find_orbit(two_s, 2.5, monodromy=False)
    assert b.period == pytest.approx(a.period / 2.5, rel=1e-7)
    assert b.epsilon == pytest.approx(a.epsilon, rel=1e-7)


@pytest.mark.parametrize("two_s", [2, 4])
def test_integer_spin_orbit_unstable(two_s):
    r = find_orbit(two_s)
    assert max(abs(m) for m in r.multipliers) > 1.5


@pytest.mark.parametrize("two_s", [1, 2, 3, 4])
def test_reversal_is_involution(two_s):
    p = np.array([2.1, -0.4])
    assert np.allclose(reversal(two_s, reversal(two_s, p)), p)


def test_zero_orbit():
    z = zero_orbit(2)
    assert z.period > 0 and z.epsilon > 0
    with pytest.raises(ValueError):
        zero_orbit(1)


def test_no_orbit_for_large_deformation():
    with pytest.raises(OrbitError):
        find_orbit(1, h=1.5, monodromy=False)


def test_scan_records_gaps(tmp_path):
    res = scan_h([0.0, 1.5], rtol=1e-10)
    assert np.isfinite(res.epsilon[0]) and np.isnan(res.epsilon[1])
    assert res.argmin_epsilon == 0.0
    res.to_csv(tmp_path / "scan.csv")
    assert (tmp_path / "scan.csv").read_text().splitlines()[0] == "h,period,epsilon,F"


def test_input_validation():
    with pytest.raises(ValueError):
        find_orbit(1, omega=0.0)
    with pytest.raises(ValueError):
        find_orbit(2, h=0.1)
    with pytest.raises(ValueError):
        find_orbit(1, delta_c=0.5)
