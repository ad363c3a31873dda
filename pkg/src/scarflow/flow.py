"""Two-angle variational flow in the thermodynamic limit.

The unit cell holds an odd site (angle ``theta_o``) followed by an even site
(``theta_e``); the |Z2> product state sits at (theta_e, theta_o) = (pi, 0).
All per-cell quantities are divided by two to give per-site values.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from math import comb
from typing import Callable, Sequence

import mpmath as mp
import numpy as np

from .ops import spin_matrices
from .varmps import site_tensor, site_tensor_derivative, site_transfer

SINGULAR_COS = 1e-12
CORNER_TOL = 1e-10


class DegenerateMetricError(ValueError):
    """Both angles sit at pi and the tangent metric vanishes."""


def wrap(theta):
    """Map angles into [-pi, pi)."""
    return (np.asarray(theta) + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True)
class AnglePoint:
    theta_e: float
    theta_o: float
    phi_e: float = 0.0
    phi_o: float = 0.0

    def wrapped(self) -> "AnglePoint":
        return AnglePoint(float(wrap(self.theta_e)), float(wrap(self.theta_o)), self.phi_e, self.phi_o)


@dataclass(frozen=True)
class FlowSample:
    point: AnglePoint
    dtheta_e: float
    dtheta_o: float
    gamma: float
    singular: bool


# velocity field


def _component(x: float, y: float, two_s: int) -> tuple[float, bool]:
    """f(x, y) / Omega in the form multiplied through by cos(y/2)."""
    cx, sx = math.cos(x / 2), math.sin(x / 2)
    cy, sy = math.cos(y / 2), math.sin(y / 2)
    k = cx ** (2 * two_s - 2)
    num = cy * (1 - k) + k * cy ** (two_s + 1) + two_s * sx * cx ** (3 * two_s - 1) * sy
    if abs(cy) >= SINGULAR_COS:
        return num / cy, False
    if abs(sx) < CORNER_TOL:
        # corner: continuous limit along the coordinate axis
        return 0.0, True
    return math.copysign(math.inf, num * cy if cy else num), True


def eom_rhs(theta_e: float, theta_o: float, two_s: int = 1, omega: float = 1.0) -> tuple[float, float]:
    """(dtheta_e/dt, dtheta_o/dt) of the variational flow."""
    de, _ = _component(theta_e, theta_o, two_s)
    do, _ = _component(theta_o, theta_e, two_s)
    return omega * de, omega * do


def is_singular(theta_e: float, theta_o: float) -> bool:
    return abs(math.cos(theta_e / 2)) < SINGULAR_COS or abs(math.cos(theta_o / 2)) < SINGULAR_COS


def _deformed_component(x: float, y: float, omega: float, h: float) -> float:
    cx, sx = math.cos(x / 2), math.sin(x / 2)
    cy, sy = math.cos(y / 2), math.sin(y / 2)
    num = omega * (cy * cy + cx * cx * sx * sy) + h * (math.cos(x) * cy * cy + cx * cx * math.cos(y) * sx * sy)
    if abs(cy) >= SINGULAR_COS:
        return num / cy
    if abs(sx) < CORNER_TOL:
        return 0.0
    return math.copysign(math.inf, num)


def eom_rhs_deformed(theta_e: float, theta_o: float, omega: float = 1.0, h: float = 0.0) -> tuple[float, float]:
    """Spin-1/2 flow of the deformed Hamiltonian (sec form)."""
    return (_deformed_component(theta_e, theta_o, omega, h),
            _deformed_component(theta_o, theta_e, omega, h))


def velocity_field(two_s: int = 1, omega: float = 1.0, h: float = 0.0) -> Callable[[float, float], tuple[float, float]]:
    if h:
        if two_s != 1:
            raise ValueError("the deformation is defined for spin 1/2 only")
        return lambda te, to: eom_rhs_deformed(te, to, omega, h)
    return lambda te, to: eom_rhs(te, to, two_s, omega)


# closed forms


def _x(theta, two_s):
    return math.cos(theta / 2) ** two_s


def _den(xe, xo):
    return xo * xo + xe * xe - xo * xo * xe * xe


def _check_metric(theta_e: float, theta_o: float) -> None:
    # cos(pi/2) is ~6e-17 rather than 0, so test the half angles, not den
    if abs(math.cos(theta_e / 2)) < SINGULAR_COS and abs(math.cos(theta_o / 2)) < SINGULAR_COS:
        raise DegenerateMetricError("metric degenerates with both angles at pi")


def gram_diag(theta_e: float, theta_o: float, two_s: int = 1) -> tuple[float, float]:
    """(G_ee, G_oo) of the tangent metric per unit cell; G_eo vanishes."""
    _check_metric(theta_e, theta_o)
    xe, xo = _x(theta_e, two_s), _x(theta_o, two_s)
    den = _den(xe, xo)
    s = two_s / 2
    return s / 2 * xo * xo / den, s / 2 * xe * xe / den


def energy(theta_e: float, theta_o: float, phi_e: float = 0.0, phi_o: float = 0.0,
           two_s: int = 1, omega: float = 1.0) -> float:
    """Energy per site; proportional to sin(phi) and zero on the phi = 0 plane.

    Each site contributes its coherent <Sx> weighted by the probability that
    both neighbours are empty, except that the 0<->1 channel picks up one
    more factor of the neighbour's empty amplitude.
    """
    s = two_s / 2
    xe, xo = _x(theta_e, two_s), _x(theta_o, two_s)

    def site(theta, phi, x_nb):
        c, sn = math.cos(theta / 2), math.sin(theta / 2)
        full = s * math.sin(theta) * math.sin(phi)
        low = two_s * c ** (2 * two_s - 1) * sn * math.sin(phi)
        return x_nb * x_nb * (full - (1 - x_nb) * low)

    _check_metric(theta_e, theta_o)
    den = _den(xe, xo)
    return omega * (site(theta_e, phi_e, xo) + site(theta_o, phi_o, xe)) / den / 2


def _sx_pieces(theta: float, two_s: int) -> tuple[float, float]:
    """(Y, w) with <0|Sx|theta> = iY and w = <0|Sx^2|theta> at phi = 0."""
    s = two_s / 2
    c, sn = math.cos(theta / 2), math.sin(theta / 2)
    Y = -s * sn * c ** (two_s - 1)
    second = 0.0 if two_s == 1 else (two_s - 1) * sn * sn * c ** (two_s - 2)
    return Y, s / 2 * (c**two_s - second)


def h_squared_cell(theta_e: float, theta_o: float, two_s: int = 1, omega: float = 1.0) -> float:
    """Connected <H^2> per unit cell at phi = 0."""
    s = two_s / 2
    xe, xo = _x(theta_e, two_s), _x(theta_o, two_s)
    Ye, we = _sx_pieces(theta_e, two_s)
    Yo, wo = _sx_pieces(theta_o, two_s)
    _check_metric(theta_e, theta_o)
    den = _den(xe, xo)

    def half(xa, xb, wb):
        return xa * xa * (s / 2 * (xa * xa * xb * xb - 2 * xa * xb * xb + 1 + xb * xb) + 2 * wb * (xa * xb - xb))

    total = half(xo, xe, we) + half(xe, xo, wo) + 4 * xo * xo * xe * xe * Ye * Yo
    return omega * omega * total / den


def h_squared(theta_e: float, theta_o: float, two_s: int = 1, omega: float = 1.0) -> float:
    """Connected <H^2> per site."""
    return h_squared_cell(theta_e, theta_o, two_s, omega) / 2


def gamma_squared(theta_e: float, theta_o: float, two_s: int = 1, omega: float = 1.0, h: float = 0.0) -> float:
    """Squared leakage rate per site, not clamped."""
    if h:
        return umps_gamma_squared(theta_e, theta_o, omega, h)
    de, do = eom_rhs(theta_e, theta_o, two_s, omega)
    gee, goo = gram_diag(theta_e, theta_o, two_s)
    tangent = (gee * de * de if gee else 0.0) + (goo * do * do if goo else 0.0)
    return (h_squared_cell(theta_e, theta_o, two_s, omega) - tangent) / 2


def gamma(theta_e: float, theta_o: float, two_s: int = 1, omega: float = 1.0, h: float = 0.0) -> float:
    """Leakage rate per site: norm of the part of the exact evolution leaving the manifold."""
    return math.sqrt(max(0.0, gamma_squared(theta_e, theta_o, two_s, omega, h)))


def flow_sample(theta_e: float, theta_o: float, two_s: int = 1, omega: float = 1.0, h: float = 0.0) -> FlowSample:
    de, do = velocity_field(two_s, omega, h)(theta_e, theta_o)
    singular = is_singular(theta_e, theta_o)
    try:
        g = gamma(theta_e, theta_o, two_s, omega, h) if math.isfinite(de) and math.isfinite(do) else math.nan
    except DegenerateMetricError:
        g = math.nan
    return FlowSample(AnglePoint(theta_e, theta_o), de, do, g, singular)


# uniform MPS channel evaluator

Component = tuple[complex, dict]  # (coefficient, {site: operator or insertion})


@dataclass(frozen=True)
class Insertion:
    """Site factor: operator plus optional theta-derivatives on bra or ket."""

    op: np.ndarray | None = None
    dbra: bool = False
    dket: bool = False

    def __matmul__(self, other: "Insertion") -> "Insertion":
        if (self.dbra and other.dbra) or (self.dket and other.dket):
            raise ValueError("a site carries at most one derivative per side")
        if self.op is None:
            op = other.op
        elif other.op is None:
            op = self.op
        else:
            op = self.op @ other.op
        return Insertion(op, self.dbra or other.dbra, self.dket or other.dket)


def _mp_tensor(theta: float, phi: float, two_s: int, derivative: bool) -> np.ndarray:
    """Site tensor (or its theta-derivative) as an object array of mpmath numbers."""
    c, sn = mp.cos(mp.mpf(theta) / 2), mp.sin(mp.mpf(theta) / 2)
    phase = -1j * mp.expj(mp.mpf(phi))
    A = np.full((two_s + 1, 2, 2), mp.mpc(0), dtype=object)
    for n in range(two_s + 1):
        a = two_s - n
        if derivative:
            lead = a * c ** (a - 1) * (-sn / 2) * sn**n if a > 0 else 0
            tail = n * sn ** (n - 1) * (c / 2) * c**a if n > 0 else 0
            amp = mp.sqrt(comb(two_s, n)) * phase**n * (lead + tail)
        else:
            amp = mp.sqrt(comb(two_s, n)) * c**a * (phase * sn) ** n
        A[n, 0, 0 if n == 0 else 1] = mp.mpc(amp)
    if not derivative:
        A[0, 1, 0] = mp.mpc(1)
    return A


def _mp_eigendata(T: np.ndarray):
    E, EL, ER = mp.eig(mp.matrix(T.tolist()), left=True, right=True)
    mags = [abs(e) for e in E]
    k = max(range(len(E)), key=lambda i: mags[i])
    r = np.array([ER[i, k] for i in range(4)], dtype=object)
    l = np.array([EL[k, i] for i in range(4)], dtype=object)
    return E[k], l, r, mags


class UniformMPS:
    """Two-site translation-invariant MPS with cell (odd, even).

    Expectation values of finite operator strings come from the dominant
    eigenvectors of the cell transfer matrix; sums of connected correlations
    over all separations use (1 - T~)^-1 on the complement of the dominant
    eigenspace. That resolvent amplifies roundoff by the inverse spectral
    gap, which closes when both angles approach pi; pass ``dps`` to run the
    whole evaluation in mpmath with that many decimal digits.
    """

    def __init__(self, theta_e: float, theta_o: float, two_s: int = 1, phi_e: float = 0.0,
                 phi_o: float = 0.0, dps: int | None = None):
        self.two_s = two_s
        self.dps = dps
        with self._precision():
            if dps is None:
                self.A = (site_tensor(theta_o, phi_o, two_s), site_tensor(theta_e, phi_e, two_s))
                self.dA = (site_tensor_derivative(theta_o, phi_o, two_s),
                           site_tensor_derivative(theta_e, phi_e, two_s))
            else:
                self.A = tuple(_mp_tensor(t, f, two_s, False) for t, f in ((theta_o, phi_o), (theta_e, phi_e)))
                self.dA = tuple(_mp_tensor(t, f, two_s, True) for t, f in ((theta_o, phi_o), (theta_e, phi_e)))
            T = site_transfer(self.A[0], self.A[0]) @ site_transfer(self.A[1], self.A[1])
            if dps is None:
                w, vr = np.linalg.eig(T)
                k = int(np.argmax(np.abs(w)))
                wl, vl = np.linalg.eig(T.T)
                kl = int(np.argmin(np.abs(wl - w[k])))
                lam, r, l, mags = w[k], vr[:, k], vl[:, kl], np.abs(w)
                tol = 1e-10
            else:
                lam, l, r, mags = _mp_eigendata(T)
                tol = mp.mpf(10) ** (-dps // 2)
            if sum(1 for m in mags if abs(m - abs(lam)) < tol * abs(lam)) > 1:
                raise DegenerateMetricError("dominant transfer eigenvalue is not simple")
            self.lam = lam
            self.r = r
            self.l = l / (l @ r)
            self.T = T / lam
            self.Tt = self.T - np.outer(self.r, self.l)
            if dps is None:
                self.R = np.linalg.inv(np.eye(4) - self.Tt)
            else:
                self.R = np.array(mp.inverse(mp.matrix((np.eye(4, dtype=object) - self.Tt).tolist())).tolist(),
                                  dtype=object)
        self._cache: dict = {}

    def _precision(self):
        return mp.workdps(self.dps) if self.dps else contextlib.nullcontext()

    def _eye(self):
        return np.eye(4, dtype=np.complex128) if self.dps is None else np.eye(4, dtype=object) * mp.mpc(1)

    def _op(self, op):
        if self.dps is None or op is None or op.dtype == object:
            return op
        return op.astype(object)

    def _site(self, j: int, ins: Insertion | None) -> np.ndarray:
        sub = j % 2
        if ins is None:
            key = (sub, None)
        else:
            key = (sub, id(ins.op), ins.dbra, ins.dket)
        hit = self._cache.get(key)
        if hit is not None and (ins is None or hit[1] is ins.op):
            return hit[0]
        bra = self.dA[sub] if ins is not None and ins.dbra else self.A[sub]
        ket = self.dA[sub] if ins is not None and ins.dket else self.A[sub]
        M = site_transfer(bra, ket, None if ins is None else self._op(ins.op))
        self._cache[key] = (M, None if ins is None else ins.op)
        return M

    @staticmethod
    def _window(sites) -> tuple[int, int]:
        lo, hi = min(sites), max(sites)
        return (lo // 2) * 2, ((hi + 2) // 2) * 2

    def window_matrix(self, term: Sequence[Component], a: int, b: int) -> np.ndarray:
        total = self._eye() * 0
        for coef, ops in term:
            M = self._eye()
            for j in range(a, b):
                M = M @ self._site(j, ops.get(j))
            total += coef * M
        return total / self.lam ** ((b - a) // 2)

    def expect(self, term: Sequence[Component]) -> complex:
        a, b = self._window([j for _, ops in term for j in ops])
        with self._precision():
            return self.l @ self.window_matrix(term, a, b) @ self.r

    @staticmethod
    def _product(X: Sequence[Component], Y: Sequence[Component]) -> list[Component]:
        out = []
        for cx, ox in X:
            for cy, oy in Y:
                merged = dict(ox)
                for j, v in oy.items():
                    merged[j] = merged[j] @ v if j in merged else v
                out.append((cx * cy, merged))
        return out

    @staticmethod
    def _shift(X: Sequence[Component], m: int) -> list[Component]:
        return [(c, {j + m: v for j, v in ops.items()}) for c, ops in X]

    def connected_tail(self, X: Sequence[Component], Y: Sequence[Component]) -> complex:
        """sum over m >= 0 of <X Y(+2m)> - <X><Y>."""
        with self._precision():
            return self._connected_tail(X, Y)

    def _connected_tail(self, X, Y):
        mx, my = self.expect(X), self.expect(Y)
        ax, bx = self._window([j for _, o in X for j in o])
        total = 0j
        m = 0
        while True:
            Ym = self._shift(Y, 2 * m)
            ay, by = self._window([j for _, o in Ym for j in o])
            if ay >= bx + 2:
                gap = (ay - bx) // 2
                WX = self.window_matrix(X, ax, bx)
                WY = self.window_matrix(Ym, ay, by)
                return total + self.l @ WX @ np.linalg.matrix_power(self.Tt, gap) @ self.R @ WY @ self.r
            total += self.expect(self._product(X, Ym)) - mx * my
            m += 1

    def density(self, local_term: Callable[[int], list[Component]]) -> complex:
        """Per-site expectation of sum_i h_i."""
        with self._precision():
            return (self.expect(local_term(2)) + self.expect(local_term(3))) / 2

    def variance_density(self, local_term: Callable[[int], list[Component]]) -> float:
        """Per-site connected <H^2> for H = sum_i h_i."""
        with self._precision():
            return self._variance(local_term)

    def _variance(self, local_term):
        total = 0j
        for i in (2, 3):
            X = local_term(i)
            total += self.expect(self._product(X, X)) - self.expect(X) ** 2
            total += 2 * self.connected_tail(X, local_term(i + 1)).real
            total += 2 * self.connected_tail(X, local_term(i + 2)).real
        return float(total.real) / 2

    def gram(self) -> np.ndarray:
        """Tangent metric per unit cell, rows/cols ordered (e, o)."""
        with self._precision():
            return self._gram()

    def _gram(self) -> np.ndarray:
        G = np.zeros((2, 2))
        sites = (3, 2)  # an even and an odd site inside the reference cell
        for a, sa in enumerate(sites):
            X = [(1.0, {sa: Insertion(dbra=True)})]
            for b, sb in enumerate(sites):
                right = sa if (sa - sb) % 2 == 0 else sa + 1
                ahead = self.connected_tail(X, [(1.0, {right: Insertion(dket=True)})])
                behind = self.connected_tail([(1.0, {right - 2: Insertion(dket=True)})], X)
                G[a, b] = (ahead + behind).real
        return G


def pxp_terms(two_s: int = 1, omega: float = 1.0, h: float = 0.0,
              exact: bool = False) -> Callable[[int], list[Component]]:
    """Local terms h_i of the (deformed) Hamiltonian for the channel evaluator.

    ``exact`` builds the site operators from mpmath square roots, for use
    with a high-precision ``UniformMPS``.
    """
    d = two_s + 1
    if exact:
        s = mp.mpf(two_s) / 2
        sx = np.full((d, d), mp.mpf(0), dtype=object)
        for n in range(two_s):
            m = n - s
            sx[n + 1, n] = sx[n, n + 1] = mp.sqrt(s * (s + 1) - m * (m + 1)) / 2
        P = np.full((d, d), mp.mpf(0), dtype=object)
        P[0, 0] = mp.mpf(1)
        Z = np.diag([s - n for n in range(d)]).astype(object)
    else:
        sx, _ = spin_matrices(two_s)
        P = np.zeros((d, d))
        P[0, 0] = 1.0
        Z = np.diag(two_s / 2 - np.arange(d))  # +s on the empty level, as in ops.build_deformed
    Pi, Xi, Zi = Insertion(P), Insertion(sx), Insertion(Z)

    def term(i: int) -> list[Component]:
        base = {i - 1: Pi, i: Xi, i + 1: Pi}
        out: list[Component] = [(omega, base)]
        if h:
            out.append((h, {**base, i + 2: Zi}))
            out.append((h, {i - 2: Zi, **base}))
        return out

    return term


def umps_density(theta_e: float, theta_o: float, two_s: int = 1, omega: float = 1.0, h: float = 0.0,
                 phi_e: float = 0.0, phi_o: float = 0.0, dps: int | None = None) -> tuple[float, float]:
    """(energy per site, connected <H^2> per site) from the channel evaluator."""
    u = UniformMPS(theta_e, theta_o, two_s, phi_e, phi_o, dps)
    terms = pxp_terms(two_s, omega, h, exact=dps is not None)
    return float(u.density(terms).real), u.variance_density(terms)


def umps_gamma_squared(theta_e: float, theta_o: float, omega: float = 1.0, h: float = 0.0) -> float:
    """Squared leakage rate per site of the deformed spin-1/2 model."""
    u = UniformMPS(theta_e, theta_o, 1)
    var = u.variance_density(pxp_terms(1, omega, h))
    de, do = eom_rhs_deformed(theta_e, theta_o, omega, h)
    gee, goo = gram_diag(theta_e, theta_o, 1)
    tangent = (gee * de * de if gee else 0.0) + (goo * do * do if goo else 0.0)
    return var - tangent / 2


# Lagrangians (spin 1/2)


def lagrangian_weights(theta: Sequence[float]) -> np.ndarray:
    """K_i of the full-chain Lagrangian, summing the string series around the ring."""
    theta = np.asarray(theta, float)
    L = theta.size
    g = 1 / (np.sin(theta / 2) ** 2 + 1)
    q = -np.sin(theta / 2) ** 2
    K = np.empty(L)
    for i in range(L):
        total, string = g[i], 1.0
        for m in range(1, L):
            j = (i - m) % L
            total += (g[j] - g[(j + 1) % L]) * string
            string *= q[j]
        K[i] = total
    return K


def lagrangian(theta, phi, phi_dot, omega: float = 1.0) -> float:
    theta, phi, phi_dot = (np.asarray(v, float) for v in (theta, phi, phi_dot))
    K = lagrangian_weights(theta)
    nxt = np.roll(theta, -1)
    body = np.sin(theta / 2) ** 2 * phi_dot + omega / 2 * np.cos(nxt / 2) * np.sin(theta) * np.sin(phi)
    return float(np.sum(K * body))


def two_site_weights(theta_e: float, theta_o: float) -> tuple[float, float]:
    se2, so2 = math.sin(theta_e / 2) ** 2, math.sin(theta_o / 2) ** 2
    den = 1 - se2 * so2
    return math.cos(theta_o / 2) ** 2 / den, math.cos(theta_e / 2) ** 2 / den


def lagrangian_two_site(theta_e: float, theta_o: float, phi_e: float, phi_o: float,
                        phi_e_dot: float, phi_o_dot: float, omega: float = 1.0) -> float:
    """Lagrangian per unit cell."""
    Ke, Ko = two_site_weights(theta_e, theta_o)
    e = math.sin(theta_e / 2) ** 2 * phi_e_dot + omega / 2 * math.cos(theta_o / 2) * math.sin(theta_e) * math.sin(phi_e)
    o = math.sin(theta_o / 2) ** 2 * phi_o_dot + omega / 2 * math.cos(theta_e / 2) * math.sin(theta_o) * math.sin(phi_o)
    return Ke * e + Ko * o


# fixed points and grids

_DIAG = np.array([1.0, 1.0]) / math.sqrt(2)
_ANTI = np.array([1.0, -1.0]) / math.sqrt(2)


def jacobian(rhs: Callable[[float, float], tuple[float, float]], theta_e: float, theta_o: float,
             step: float = 1e-6) -> np.ndarray:
    """Central differences along the diagonal and anti-diagonal.

    Those directions avoid the coordinate-singular lines through the corners.
    """
    cols = []
    for d in (_DIAG, _ANTI):
        p = np.array(rhs(theta_e + step * d[0], theta_o + step * d[1]))
        m = np.array(rhs(theta_e - step * d[0], theta_o - step * d[1]))
        cols.append((p - m) / (2 * step))
    D = np.column_stack(cols)
    return D @ np.linalg.inv(np.column_stack((_DIAG, _ANTI)))


def classify(eigs: np.ndarray, tol: float = 1e-6) -> str:
    if np.all(np.abs(eigs.imag) > tol) and np.all(np.abs(eigs.real) < tol):
        return "center"
    if np.all(np.abs(eigs.imag) < tol):
        re = eigs.real
        if re.min() < -tol and re.max() > tol:
            return "saddle"
        if re.max() < -tol:
            return "stable node"
        if re.min() > tol:
            return "unstable node"
    return "focus" if np.all(np.abs(eigs.imag) > tol) else "degenerate"


@dataclass(frozen=True)
class FixedPoint:
    point: AnglePoint
    eigenvalues: np.ndarray
    kind: str


SNAP_TOL = 1e-3


def _snap(p: np.ndarray) -> np.ndarray:
    """Wrap, then pin coordinates that Newton left next to a singular line onto it."""
    q = wrap(p)
    q[np.abs(np.abs(q) - np.pi) < SNAP_TOL] = np.pi
    return q


def fixed_points(two_s: int = 1, omega: float = 1.0, h: float = 0.0, n_seeds: int = 12,
                 tol: float = 1e-10, max_iter: int = 60, merge_radius: float = 1e-2) -> list[FixedPoint]:
    """Zeros of the velocity field found by damped Newton from a seed grid.

    Where the field vanishes to high order Newton converges slowly and stops
    at slightly different points, so converged points closer than
    ``merge_radius`` are merged, keeping the smallest residual.
    """
    rhs = velocity_field(two_s, omega, h)
    seeds = -np.pi + (np.arange(n_seeds) + 0.37) * 2 * np.pi / n_seeds
    hits: list[tuple[float, np.ndarray]] = []
    for te0 in seeds:
        for to0 in seeds:
            p = np.array([te0, to0])
            F = np.array(rhs(*p))
            for _ in range(max_iter):
                if not np.all(np.isfinite(F)) or np.linalg.norm(F) < tol:
                    break
                try:
                    step = np.linalg.solve(jacobian(rhs, *p), F)
                except np.linalg.LinAlgError:
                    break
                lam = 1.0
                while lam > 1e-4:
                    q = p - lam * step
                    Fq = np.array(rhs(*q))
                    if np.all(np.isfinite(Fq)) and np.linalg.norm(Fq) < np.linalg.norm(F):
                        break
                    lam /= 2
                p, F = q, Fq
            if np.all(np.isfinite(F)) and np.linalg.norm(F) < tol:
                hits.append((float(np.linalg.norm(F)), _snap(p)))
    hits.sort(key=lambda item: item[0])
    kept: list[np.ndarray] = []
    for _, p in hits:
        if all(np.linalg.norm(wrap(p - k)) >= merge_radius for k in kept):
            kept.append(p)
    out = []
    for p in kept:
        eigs = np.linalg.eigvals(jacobian(rhs, *p))
        out.append(FixedPoint(AnglePoint(float(p[0]), float(p[1])), eigs, classify(eigs)))
    return out


@dataclass
class FlowGrid:
    theta: np.ndarray
    dtheta_e: np.ndarray
    dtheta_o: np.ndarray
    gamma: np.ndarray
    singular: np.ndarray

    def rows(self):
        n = self.theta.size
        for a in range(n):
            for b in range(n):
                yield (self.theta[a], self.theta[b], self.dtheta_e[a, b], self.dtheta_o[a, b],
                       self.gamma[a, b], int(self.singular[a, b]))


def flow_grid(two_s: int = 1, omega: float = 1.0, h: float = 0.0, n: int = 64) -> FlowGrid:
    """Samples on the node grid -pi + 2 pi k / n; index [a, b] is (theta_e, theta_o)."""
    if n < 2:
        raise ValueError("grid needs at least two nodes per axis")
    theta = -np.pi + 2 * np.pi * np.arange(n) / n
    de = np.empty((n, n))
    do = np.empty((n, n))
    g = np.empty((n, n))
    sing = np.zeros((n, n), dtype=bool)
    for a, te in enumerate(theta):
        for b, to in enumerate(theta):
            fs = flow_sample(te, to, two_s, omega, h)
            de[a, b], do[a, b], g[a, b], sing[a, b] = fs.dtheta_e, fs.dtheta_o, fs.gamma, fs.singular
    return FlowGrid(theta, de, do, g, sing)


# finite-ring brute force


def finite_gamma_squared(L: int, theta_e: float, theta_o: float, two_s: int = 1, omega: float = 1.0,
                         h: float = 0.0, step: float = 1e-6) -> float:
    """Per-site squared leakage on an L-site ring by direct projection.

    The exact -iH psi is projected by real least squares onto the span of the
    two sublattice angle derivatives, psi and i psi; the residual norm per
    site is the leakage. Site 0 carries theta_o.
    """
    from .basis import enumerate_basis
    from .ops import ModelParams, hamiltonian
    from .varmps import mps_dense

    if L % 2:
        raise ValueError("the two-site cell needs an even ring")
    basis = enumerate_basis(L, two_s)
    H = hamiltonian(basis, ModelParams(two_s, L, omega, h))

    def state(te, to):
        return mps_dense(basis, np.where(np.arange(L) % 2 == 0, to, te))

    psi = state(theta_e, theta_o)
    norm2 = np.vdot(psi, psi).real
    de = (state(theta_e + step, theta_o) - state(theta_e - step, theta_o)) / (2 * step)
    do = (state(theta_e, theta_o + step) - state(theta_e, theta_o - step)) / (2 * step)
    A = np.stack([de, do, psi, 1j * psi], axis=1)
    b = -1j * (H @ psi)
    Ar = np.vstack([A.real, A.imag])
    br = np.concatenate([b.real, b.imag])
    coef, *_ = np.linalg.lstsq(Ar, br, rcond=None)
    return float(np.sum((br - Ar @ coef) ** 2) / norm2 / L)


def extrapolated_gamma(sizes: Sequence[int], theta_e: float, theta_o: float, two_s: int = 1,
                       omega: float = 1.0, h: float = 0.0) -> float:
    """Leakage rate from a linear fit of finite-ring gamma^2 in 1/L."""
    sizes = np.asarray(sizes, float)
    g2 = [finite_gamma_squared(int(L), theta_e, theta_o, two_s, omega, h) for L in sizes]
    return math.sqrt(max(0.0, np.polyfit(1 / sizes, g2, 1)[1]))
