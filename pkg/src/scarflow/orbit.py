"""Periodic orbit of the two-angle flow through the |Z2> corner.

The orbit leaves the corner (pi, 0), where the velocity field is singular,
so integration starts a short distance ``delta_c`` away on the regular
branch. Time-reversal symmetry then fixes a quarter period: the orbit
crosses the symmetry line of a reflection that reverses the flow exactly
one quarter period after leaving the corner.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import OdeSolution
from scipy.integrate._ivp.ivp import METHODS
from scipy.optimize import brentq

from . import flow

DEFAULT_METHOD = "DOP853"
CLOSURE_FRACTION = 0.9
HORIZON = 50.0  # units of 1/omega
ZERO_ORBIT_PANELS = 200


class OrbitError(RuntimeError):
    """Shooting failed to reach the symmetry line."""


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray
    t_events: list
    y_events: list
    sol: Callable | None = field(default=None, repr=False)
    truncated: bool = False
    message: str = ""

    def __call__(self, t):
        return self.sol(t)


class _SingularVelocity(ArithmeticError):
    pass


_EPS4 = 4 * np.finfo(float).eps


def integrate(rhs: Callable[[float, float], tuple[float, float]], p0: Sequence[float], t_end: float,
              rtol: float = 1e-12, atol: float | None = None, events=None,
              method: str = DEFAULT_METHOD) -> Trajectory:
    """Integrate the planar flow with dense output.

    Events follow the ``solve_ivp`` conventions (``terminal``, ``direction``).
    If the velocity stops being finite, or the step size underflows near a
    singular line, integration stops and the trajectory up to the last good
    state is returned with ``truncated`` set.
    """
    atol = rtol * 0.1 if atol is None else atol

    def fun(t, p):
        v = np.asarray(rhs(p[0], p[1]), dtype=float)
        if not np.all(np.isfinite(v)):
            raise _SingularVelocity(f"velocity not finite at {p[0]:.6g}, {p[1]:.6g}")
        return v

    events = [] if events is None else (list(events) if isinstance(events, (list, tuple)) else [events])
    try:
        solver = METHODS[method](fun, 0.0, np.asarray(p0, dtype=float), t_end, rtol=rtol, atol=atol)
    except _SingularVelocity as exc:
        raise ValueError(f"start point lies on a singular line: {exc}") from None
    ts, ys, interps = [0.0], [solver.y.copy()], []
    t_events = [[] for _ in events]
    y_events = [[] for _ in events]
    g_old = [ev(0.0, solver.y) for ev in events]
    truncated, message, stop = False, "", False
    while solver.status == "running" and not stop:
        try:
            solver.step()
        except _SingularVelocity as exc:
            truncated, message = True, str(exc)
            break
        if solver.status == "failed":
            truncated, message = True, "step size underflow"
            break
        interp = solver.dense_output()
        t_old, t_new = solver.t_old, solver.t
        for k, ev in enumerate(events):
            g_new = ev(t_new, solver.y)
            direction = getattr(ev, "direction", 0)
            crossed = (g_old[k] < 0 <= g_new) if direction > 0 else (g_old[k] > 0 >= g_new) if direction < 0 \
                else (np.sign(g_old[k]) != np.sign(g_new) and g_old[k] != 0)
            if crossed:
                root = brentq(lambda t: ev(t, interp(t)), t_old, t_new, xtol=_EPS4, rtol=_EPS4)
                t_events[k].append(root)
                y_events[k].append(interp(root))
                if getattr(ev, "terminal", False):
                    stop = True
                    t_new = root
            g_old[k] = g_new
        interps.append(interp)
        ts.append(t_new)
        ys.append(interp(t_new) if stop else solver.y.copy())
    sol = OdeSolution(np.array(ts), interps) if interps else None
    return Trajectory(np.array(ts), np.array(ys).T, [np.array(v) for v in t_events],
                      [np.array(v).reshape(-1, 2) for v in y_events], sol, truncated, message)


def _half_integer(two_s: int) -> bool:
    return two_s % 2 == 1


def reversal(two_s: int, p):
    """Reflection that maps the orbit onto itself with time reversed."""
    te, to = p
    if _half_integer(two_s):
        return np.array([to + 2 * np.pi, te - 2 * np.pi])
    return np.array([2 * np.pi - to, 2 * np.pi - te])


def reversal_linear(two_s: int) -> np.ndarray:
    S = np.array([[0.0, 1.0], [1.0, 0.0]])
    return S if _half_integer(two_s) else -S


def _symmetry_line(two_s: int):
    if _half_integer(two_s):
        def event(t, p):
            return p[0] - p[1] - 2 * np.pi
    else:
        def event(t, p):
            return p[0] + p[1] - 2 * np.pi
    event.terminal = True
    event.direction = 0
    return event


def bridge(rhs, two_s: int, delta_c: float, eta: float = 1e-9) -> tuple[float, float]:
    """Start value of theta_o at theta_e = pi + delta_c, and the time spent reaching it.

    Near the corner theta_e grows linearly at rate c1 and theta_o follows the
    branch that stays regular at the corner. Matching that branch against
    the local linearisation v' ~ A + B v gives v0 = A / ((2s + 1) / t - B).
    """
    c1 = rhs(np.pi, 0.0)[0]
    if not c1 > 0:
        raise OrbitError("flow does not leave the corner")
    t_delta = delta_c / c1
    A = rhs(np.pi + delta_c, 0.0)[1]
    B = (rhs(np.pi + delta_c, eta)[1] - rhs(np.pi + delta_c, -eta)[1]) / (2 * eta)
    return A / ((two_s + 1) / t_delta - B), t_delta


@dataclass
class OrbitResult:
    two_s: int
    omega: float
    h: float
    period: float
    epsilon: float
    fidelity_loss: float
    quarter: float
    t_delta: float
    delta_c: float
    start: tuple[float, float]
    closure_error: float
    multipliers: tuple[complex, complex]
    trajectory: Trajectory | None = field(default=None, repr=False)

    @property
    def period_ratio(self) -> float:
        """Period in units of 2 pi / Omega."""
        return self.period * self.omega / (2 * np.pi)

    def summary(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("trajectory", "multipliers")}
        d["start"] = list(self.start)
        d["period_ratio"] = self.period_ratio
        d["multipliers"] = [[m.real, m.imag] for m in self.multipliers]
        return d

    def samples(self, n: int = 200) -> np.ndarray:
        """(t, theta_e, theta_o) over one quarter, t measured from the corner."""
        t = np.linspace(0.0, self.quarter - self.t_delta, n)
        y = self.trajectory(t)
        return np.column_stack((t + self.t_delta, y[0], y[1]))


def _gl_composite(fun, a: float, b: float, panels: int, order: int = 8) -> float:
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = (hi - lo) / 2
        total += half * sum(wi * fun(lo + half * (xi + 1)) for xi, wi in zip(x, w))
    return total


def find_orbit(two_s: int = 1, omega: float = 1.0, h: float = 0.0, delta_c: float = 1e-5,
               rtol: float = 1e-12, panels: int | None = None, monodromy: bool = True,
               method: str = DEFAULT_METHOD) -> OrbitResult:
    """Period, integrated leakage epsilon and its square integral F for the |Z2> orbit."""
    if two_s < 1:
        raise ValueError("two_s must be positive")
    if not omega > 0:
        raise ValueError("omega must be positive")
    if h and two_s != 1:
        raise ValueError("the deformation is defined for spin 1/2 only")
    if not 0 < delta_c < 0.1:
        raise ValueError("delta_c must lie in (0, 0.1)")
    rhs = flow.velocity_field(two_s, omega, h)
    v0, t_delta = bridge(rhs, two_s, delta_c)
    p0 = (np.pi + delta_c, v0)
    horizon = HORIZON / omega
    traj = integrate(rhs, p0, horizon, rtol=rtol, events=_symmetry_line(two_s), method=method)
    if not traj.t_events or traj.t_events[0].size == 0:
        raise OrbitError("orbit never reached the symmetry line")
    t_event = float(traj.t_events[0][0])
    quarter = t_event + t_delta

    # points symmetric about the crossing must be mirror images; checked away from the corners
    u = CLOSURE_FRACTION * t_event
    long = integrate(rhs, p0, t_event + u, rtol=rtol, method=method)
    closure = float(np.linalg.norm(long.y[:, -1] - reversal(two_s, traj(t_event - u))))

    def g2(t):
        te, to = traj(t)
        return max(0.0, flow.gamma_squared(te, to, two_s, omega, h))

    # gamma^2 vanishes at the corner up to roundoff, so its square root is noisy
    # there; fixed composite Gauss-Legendre is insensitive to that
    n = panels or (32 if h else 200)
    eps_q = _gl_composite(lambda t: math.sqrt(g2(t)), 0.0, t_event, n)
    F_q = _gl_composite(g2, 0.0, t_event, n)
    corner_g2 = max(0.0, flow.gamma_squared(np.pi, 0.0, two_s, omega, h))
    epsilon = 4 * (eps_q + t_delta * math.sqrt(corner_g2))
    F = 4 * (F_q + t_delta * corner_g2)

    multipliers = (complex("nan"), complex("nan"))
    if monodromy:
        multipliers = tuple(complex(m) for m in half_monodromy(rhs, two_s, p0, 2 * t_event, rtol, method))
    return OrbitResult(two_s, omega, h, 4 * quarter, epsilon, F, quarter, t_delta, delta_c,
                       (float(p0[0]), float(p0[1])), closure, multipliers, traj)


def orbit_error(result: OrbitResult) -> tuple[float, float]:
    """(epsilon, F): period integrals of gamma and gamma squared."""
    if not (np.isfinite(result.epsilon) and np.isfinite(result.fidelity_loss)):
        raise OrbitError("leakage rate is singular on the orbit")
    return result.epsilon, result.fidelity_loss


def half_monodromy(rhs, two_s: int, p0, duration: float, rtol: float = 1e-12,
                   method: str = DEFAULT_METHOD, step: float = 1e-7) -> np.ndarray:
    """Eigenvalues of the reflected half-orbit map linearised at the start point.

    The start lies a distance delta_c from the singular corner, so the values
    depend on delta_c and characterise the neighbourhood rather than the
    exact orbit.
    """
    J = np.empty((2, 2))
    for k in range(2):
        dp = np.zeros(2)
        dp[k] = step
        plus = integrate(rhs, np.asarray(p0) + dp, duration, rtol=rtol, method=method).y[:, -1]
        minus = integrate(rhs, np.asarray(p0) - dp, duration, rtol=rtol, method=method).y[:, -1]
        J[:, k] = (plus - minus) / (2 * step)
    return np.linalg.eigvals(reversal_linear(two_s) @ J)


def orbit_sensitivity(two_s: int = 1, omega: float = 1.0, h: float = 0.0, delta_c: float = 1e-5,
                      rtol: float = 1e-12) -> dict:
    """Relative change of T, epsilon, F under halving rtol and halving delta_c."""
    base = find_orbit(two_s, omega, h, delta_c, rtol, monodromy=False)
    out = {}
    for name, kw in (("rtol", dict(delta_c=delta_c, rtol=rtol / 2)), ("delta_c", dict(delta_c=delta_c / 2, rtol=rtol))):
        alt = find_orbit(two_s, omega, h, monodromy=False, **kw)
        out[name] = {q: abs(getattr(alt, q) - getattr(base, q)) / abs(getattr(base, q))
                     for q in ("period", "epsilon", "fidelity_loss")}
    return out


@dataclass(frozen=True)
class ZeroOrbit:
    two_s: int
    period: float
    epsilon: float
    fidelity_loss: float


def zero_orbit(two_s: int, omega: float = 1.0) -> ZeroOrbit:
    """Orbit of the empty state, which stays on the diagonal theta_e = theta_o."""
    if two_s < 2:
        raise ValueError("for spin 1/2 the empty state flows into a fixed point")

    def speed(x):
        return flow.eom_rhs(x, x, two_s, omega)[0]

    def g2(x):
        return max(0.0, flow.gamma_squared(x, x, two_s, omega))

    # sqrt(gamma^2) is noisy where gamma vanishes; fixed Gauss-Legendre panels on
    # each side of the far corner are insensitive to that
    def integral(fun):
        return sum(_gl_composite(fun, a, b, ZERO_ORBIT_PANELS) for a, b in ((0, np.pi), (np.pi, 2 * np.pi)))

    T = integral(lambda x: 1 / speed(x))
    eps = integral(lambda x: math.sqrt(g2(x)) / speed(x))
    F = integral(lambda x: g2(x) / speed(x))
    return ZeroOrbit(two_s, float(T), float(eps), float(F))


# deformation scan


@dataclass
class ScanResult:
    h: np.ndarray
    period: np.ndarray
    epsilon: np.ndarray
    fidelity_loss: np.ndarray

    @property
    def argmin_F(self) -> float:
        return float(self.h[int(np.nanargmin(self.fidelity_loss))])

    @property
    def argmin_epsilon(self) -> float:
        return float(self.h[int(np.nanargmin(self.epsilon))])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["h", "period", "epsilon", "F"])
            for row in zip(self.h, self.period, self.epsilon, self.fidelity_loss):
                w.writerow([f"{v:.16e}" for v in row])

    def to_json(self, path) -> None:
        data = {"h": self.h.tolist(), "period": self.period.tolist(), "epsilon": self.epsilon.tolist(),
                "F": self.fidelity_loss.tolist(), "argmin_F": self.argmin_F, "argmin_epsilon": self.argmin_epsilon}
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2)


def _scan_point(args):
    h, omega, delta_c, rtol = args
    try:
        r = find_orbit(1, omega, h, delta_c, rtol, monodromy=False)
    except OrbitError:
        return math.nan, math.nan, math.nan
    return r.period, r.epsilon, r.fidelity_loss


def scan_h(h_grid: Sequence[float], omega: float = 1.0, delta_c: float = 1e-5, rtol: float = 1e-11,
           workers: int = 1) -> ScanResult:
    """Orbit quantities of the deformed spin-1/2 model over a grid of h.

    Values of h where no orbit is found are kept as NaN rows.
    """
    h_grid = np.asarray(h_grid, float)
    jobs = [(float(h), omega, delta_c, rtol) for h in h_grid]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_scan_point, jobs))
    else:
        rows = [_scan_point(j) for j in jobs]
    arr = np.array(rows)
    return ScanResult(h_grid, arr[:, 0], arr[:, 1], arr[:, 2])
