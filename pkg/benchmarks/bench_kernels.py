"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--L 24] [--repeat 5]

Each kernel is run once untimed so that numba compilation is excluded, then
the best of ``--repeat`` runs is reported together with the max deviation
between the two backends.
"""

from __future__ import annotations

import argparse
import time

import numpy as np
import scipy.sparse as sp

from scarflow._kernels import NUMBA_KERNELS, NUMPY_KERNELS
from scarflow.ops import ladder_elements
from scarflow.varmps import site_tensor


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def deviation(a, b) -> float:
    if isinstance(a, tuple):
        return max(deviation(x, y) for x, y in zip(a, b))
    if sp.issparse(a):
        diff = abs(a - b)
        return float(diff.max()) if diff.nnz else 0.0
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        return float("inf")
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def triplets_to_matrix(out, n):
    # triplet order differs between backends; compare the assembled operators
    r, c, v, w = out
    return sp.csr_matrix((v, (r, c)), shape=(n, n)), sp.csr_matrix((v * w, (r, c)), shape=(n, n))


def cases(L: int, two_s: int):
    d = two_s + 1
    codes = np.asarray(NUMPY_KERNELS.enumerate(L, d, True), dtype=np.int64)
    sx_up = ladder_elements(two_s)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(len(codes))
    tensors = np.array([site_tensor(t, 0.0, two_s) for t in rng.uniform(-3, 3, L)])
    return codes, {
        "enumerate": lambda k: k.enumerate(L, d, True),
        "hamiltonian": lambda k: k.hamiltonian(codes, L, d, True, sx_up, True),
        "matvec": lambda k: k.matvec(codes, L, d, True, sx_up, 1.0, 0.1, x),
        "mps_amplitudes": lambda k: k.mps_amplitudes(codes, L, d, tensors),
        "rotate": lambda k: k.rotate(codes, L, d, 1),
        "canonical": lambda k: k.canonical(codes, L, d, True),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--L", type=int, default=24)
    ap.add_argument("--two-s", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if NUMBA_KERNELS is None:
        print("numba is not importable; nothing to compare")
        return 1
    codes, table = cases(args.L, args.two_s)
    print(f"L={args.L} two_s={args.two_s} dim={len(codes)}")
    print(f"{'kernel':<16}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}{'max dev':>12}")
    for name, call in table.items():
        t_np, out_np = best_of(lambda: call(NUMPY_KERNELS), args.repeat)
        t_nb, out_nb = best_of(lambda: call(NUMBA_KERNELS), args.repeat)
        if name == "hamiltonian":
            out_np, out_nb = (triplets_to_matrix(o, len(codes)) for o in (out_np, out_nb))
        print(f"{name:<16}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.1f}{deviation(out_np, out_nb):>12.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
