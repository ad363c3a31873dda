"""Hot loops over packed configuration codes.

Each kernel has a numba implementation and a vectorised numpy twin with the
same signature. Setting ``SCARFLOW_DISABLE_NUMBA=1`` before import selects the
numpy versions; both sets stay importable as ``NUMPY_KERNELS`` and
``NUMBA_KERNELS`` so they can be cross-checked and benchmarked.

Codes pack the level of site 0 into the most significant base-``d`` digit, so
sorting codes numerically sorts configurations lexicographically.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _powers(L: int, d: int) -> np.ndarray:
    return d ** np.arange(L - 1, -1, -1, dtype=np.int64)


def _digits(codes: np.ndarray, L: int, d: int) -> np.ndarray:
    return ((codes[:, None] // _powers(L, d)[None, :]) % d).astype(np.int64)


# numpy implementations


def np_enumerate(L, d, periodic):
    levels = np.arange(d, dtype=np.int64)
    codes = levels.copy()
    for _ in range(1, L):
        last = codes % d
        grown = codes[:, None] * d + levels[None, :]
        keep = (last[:, None] == 0) | (levels[None, :] == 0)
        codes = grown[keep]
    if periodic and L > 1:
        first = codes // d ** (L - 1)
        codes = codes[(first == 0) | (codes % d == 0)]
    return codes


def np_hamiltonian(codes, L, d, periodic, sx_up, deform):
    dig = _digits(codes, L, d)
    pw = _powers(L, d)
    s_half = (d - 1) / 2.0
    rows, cols, vals, wts = [], [], [], []
    idx = np.arange(len(codes), dtype=np.int64)
    for i in range(L):
        left = dig[:, i - 1] if (periodic or i > 0) else np.zeros(len(codes), np.int64)
        right = dig[:, (i + 1) % L] if (periodic or i < L - 1) else np.zeros(len(codes), np.int64)
        free = (left == 0) & (right == 0)
        n = dig[:, i]
        if deform:
            w = (s_half - dig[:, (i + 2) % L]) + (s_half - dig[:, (i - 2) % L])
        for step in (1, -1):
            ok = free & ((n < d - 1) if step == 1 else (n > 0))
            src = idx[ok]
            new = codes[ok] + step * pw[i]
            rows.append(np.searchsorted(codes, new))
            cols.append(src)
            vals.append(sx_up[n[ok] if step == 1 else n[ok] - 1])
            wts.append(w[ok] if deform else np.zeros(len(src)))
    if not rows:
        empty = np.zeros(0)
        return empty.astype(np.int64), empty.astype(np.int64), empty, empty
    return (np.concatenate(rows), np.concatenate(cols),
            np.concatenate(vals), np.concatenate(wts))


def np_matvec(codes, L, d, periodic, sx_up, omega, h, x):
    r, c, v, w = np_hamiltonian(codes, L, d, periodic, sx_up, h != 0.0)
    y = np.zeros(len(codes), dtype=np.result_type(x.dtype, np.float64))
    np.add.at(y, r, v * (omega + h * w) * x[c])
    return y


def np_mps_amplitudes(codes, L, d, tensors):
    dig = _digits(codes, L, d)
    M = np.broadcast_to(np.eye(2, dtype=np.complex128), (len(codes), 2, 2)).copy()
    for i in range(L):
        M = M @ tensors[i][dig[:, i]]
    return M[:, 0, 0] + M[:, 1, 1]


def np_rotate(codes, L, d, shift):
    shift %= L
    if shift == 0:
        return codes.copy()
    p = d ** shift
    return codes // p + (codes % p) * d ** (L - shift)


def np_reflect(codes, L, d):
    return _digits(codes, L, d) @ _powers(L, d)[::-1]


def np_canonical(codes, L, d, reflect):
    best = codes.copy()
    images = [codes, np_reflect(codes, L, d)] if reflect else [codes]
    for base in images:
        for k in range(L):
            best = np.minimum(best, np_rotate(base, L, d, k))
    return best


NUMPY_KERNELS = SimpleNamespace(
    enumerate=np_enumerate,
    hamiltonian=np_hamiltonian,
    matvec=np_matvec,
    mps_amplitudes=np_mps_amplitudes,
    rotate=np_rotate,
    reflect=np_reflect,
    canonical=np_canonical,
    backend="numpy",
)


# numba implementations

if numba is not None:
    njit = numba.njit(cache=True)

    @njit
    def _nb_enumerate(L, d, periodic):
        codes = np.arange(d).astype(np.int64)
        for _ in range(1, L):
            out = np.empty(codes.size * d, dtype=np.int64)
            m = 0
            for c in codes:
                for n in range(d):
                    if n == 0 or c % d == 0:
                        out[m] = c * d + n
                        m += 1
            codes = out[:m]
        if periodic and L > 1:
            top = d ** (L - 1)
            out = np.empty(codes.size, dtype=np.int64)
            m = 0
            for c in codes:
                if c // top == 0 or c % d == 0:
                    out[m] = c
                    m += 1
            codes = out[:m]
        return codes

    @njit
    def _nb_search(codes, key):
        lo, hi = 0, codes.size
        while lo < hi:
            mid = (lo + hi) >> 1
            if codes[mid] < key:
                lo = mid + 1
            else:
                hi = mid
        return lo

    @njit
    def _nb_decode(c, L, d, buf):
        for i in range(L - 1, -1, -1):
            buf[i] = c % d
            c //= d

    @njit
    def _nb_hamiltonian(codes, L, d, periodic, sx_up, deform):
        cap = codes.size * L * 2
        rows = np.empty(cap, np.int64)
        cols = np.empty(cap, np.int64)
        vals = np.empty(cap, np.float64)
        wts = np.zeros(cap, np.float64)
        dig = np.empty(L, np.int64)
        pw = np.empty(L, np.int64)
        p = 1
        for i in range(L - 1, -1, -1):
            pw[i] = p
            p *= d
        s_half = (d - 1) / 2.0
        m = 0
        for a in range(codes.size):
            c = codes[a]
            _nb_decode(c, L, d, dig)
            for i in range(L):
                left = dig[(i - 1) % L] if (periodic or i > 0) else 0
                right = dig[(i + 1) % L] if (periodic or i < L - 1) else 0
                if left != 0 or right != 0:
                    continue
                n = dig[i]
                w = 0.0
                if deform:
                    w = (s_half - dig[(i + 2) % L]) + (s_half - dig[(i - 2) % L])
                if n < d - 1:
                    rows[m] = _nb_search(codes, c + pw[i])
                    cols[m] = a
                    vals[m] = sx_up[n]
                    wts[m] = w
                    m += 1
                if n > 0:
                    rows[m] = _nb_search(codes, c - pw[i])
                    cols[m] = a
                    vals[m] = sx_up[n - 1]
                    wts[m] = w
                    m += 1
        return rows[:m], cols[:m], vals[:m], wts[:m]

    @njit
    def _nb_matvec_real(codes, L, d, periodic, sx_up, omega, h, x, y):
        dig = np.empty(L, np.int64)
        pw = np.empty(L, np.int64)
        p = 1
        for i in range(L - 1, -1, -1):
            pw[i] = p
            p *= d
        s_half = (d - 1) / 2.0
        for a in range(codes.size):
            c = codes[a]
            _nb_decode(c, L, d, dig)
            xa = x[a]
            for i in range(L):
                left = dig[(i - 1) % L] if (periodic or i > 0) else 0
                right = dig[(i + 1) % L] if (periodic or i < L - 1) else 0
                if left != 0 or right != 0:
                    continue
                n = dig[i]
                amp = omega
                if h != 0.0:
                    amp += h * ((s_half - dig[(i + 2) % L]) + (s_half - dig[(i - 2) % L]))
                if n < d - 1:
                    y[_nb_search(codes, c + pw[i])] += sx_up[n] * amp * xa
                if n > 0:
                    y[_nb_search(codes, c - pw[i])] += sx_up[n - 1] * amp * xa

    def _nb_matvec(codes, L, d, periodic, sx_up, omega, h, x):
        y = np.zeros(codes.size, dtype=np.result_type(x.dtype, np.float64))
        _nb_matvec_real(codes, L, d, periodic, sx_up, float(omega), float(h),
                        x.astype(y.dtype, copy=False), y)
        return y

    @njit
    def _nb_mps_amplitudes(codes, L, d, tensors):
        out = np.empty(codes.size, np.complex128)
        dig = np.empty(L, np.int64)
        for a in range(codes.size):
            _nb_decode(codes[a], L, d, dig)
            m00, m01, m10, m11 = 1.0 + 0j, 0j, 0j, 1.0 + 0j
            for i in range(L):
                t = tensors[i, dig[i]]
                n00 = m00 * t[0, 0] + m01 * t[1, 0]
                n01 = m00 * t[0, 1] + m01 * t[1, 1]
                n10 = m10 * t[0, 0] + m11 * t[1, 0]
                n11 = m10 * t[0, 1] + m11 * t[1, 1]
                m00, m01, m10, m11 = n00, n01, n10, n11
            out[a] = m00 + m11
        return out

    @njit
    def _nb_rotate(codes, L, d, shift):
        shift %= L
        p = d ** shift
        q = d ** (L - shift)
        out = np.empty_like(codes)
        for a in range(codes.size):
            out[a] = codes[a] // p + (codes[a] % p) * q
        return out

    @njit
    def _nb_reflect(codes, L, d):
        out = np.empty_like(codes)
        for a in range(codes.size):
            c = codes[a]
            r = 0
            for _ in range(L):
                r = r * d + c % d
                c //= d
            out[a] = r
        return out

    @njit
    def _nb_canonical(codes, L, d, reflect):
        out = np.empty_like(codes)
        top = d ** (L - 1)
        for a in range(codes.size):
            best = codes[a]
            c = codes[a]
            for _ in range(L):
                c = c // d + (c % d) * top
                if c < best:
                    best = c
            if reflect:
                r = 0
                c = codes[a]
                for _ in range(L):
                    r = r * d + c % d
                    c //= d
                for _ in range(L):
                    r = r // d + (r % d) * top
                    if r < best:
                        best = r
            out[a] = best
        return out

    NUMBA_KERNELS = SimpleNamespace(
        enumerate=_nb_enumerate,
        hamiltonian=_nb_hamiltonian,
        matvec=_nb_matvec,
        mps_amplitudes=_nb_mps_amplitudes,
        rotate=_nb_rotate,
        reflect=_nb_reflect,
        canonical=_nb_canonical,
        backend="numba",
    )
else:  # pragma: no cover
    NUMBA_KERNELS = None


def _select():
    flag = os.environ.get("SCARFLOW_DISABLE_NUMBA", "").strip().lower()
    if flag in ("1", "true", "yes", "on") or NUMBA_KERNELS is None:
        return NUMPY_KERNELS
    return NUMBA_KERNELS


K = _select()
BACKEND = K.backend
