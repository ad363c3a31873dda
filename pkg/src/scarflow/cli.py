"""Command-line driver.

Every command writes CSV or JSON to ``--out`` (stdout when omitted).
Usage errors exit with status 2, numerical failures with status 1.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from typing import Sequence

import numpy as np

SPINS = {"1/2": 1, "1": 2, "3/2": 3, "2": 4, "5/2": 5, "3": 6}


def parse_spin(text: str) -> int:
    try:
        return SPINS[text.strip()]
    except KeyError:
        raise argparse.ArgumentTypeError(f"spin must be one of {', '.join(SPINS)}") from None


def _sizes(text: str) -> list[int]:
    try:
        out = [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError("sizes are comma-separated integers") from None
    if not out:
        raise argparse.ArgumentTypeError("at least one size required")
    return out


def default_workers() -> int:
    return max(1, int(os.environ.get("SCARFLOW_THREADS", "1")))


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.16e}"


def _emit(args, payload) -> None:
    """Write rows (header first) as CSV or a dict as JSON."""
    if isinstance(payload, dict):
        text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header, *rows = payload
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o).__name__)


# commands


def cmd_basis(args):
    from .basis import enumerate_basis

    b = enumerate_basis(args.L, args.s, args.boundary)
    if args.format == "json":
        _emit(args, {"L": b.L, "two_s": b.two_s, "boundary": b.boundary, "dim": b.dim})
    else:
        _emit(args, [["ordinal", "config"], *([i, c] for i, c in enumerate(b.dump()))])


def cmd_quench(args):
    from .basis import enumerate_basis
    from .dynamics import product_state, quench_series
    from .ops import ModelParams, hamiltonian

    b = enumerate_basis(args.L, args.s, args.boundary)
    H = hamiltonian(b, ModelParams(args.s, args.L, args.omega, args.h, args.boundary))
    q = quench_series(H, product_state(b, args.state), b, args.t_max, args.dt, method=args.method)
    q.to_csv(args.out or sys.stdout)


def cmd_spectrum(args):
    from .basis import build_sector, enumerate_basis
    from .ops import ModelParams, build_deformed, build_pxp
    from .spectral import diagonalize_sector

    b = enumerate_basis(args.L, args.s)
    p = ModelParams(args.s, args.L, args.omega, args.h)
    H = build_deformed(b, p) if args.h else build_pxp(b, p)
    sec = build_sector(b, args.k, args.parity)
    data = diagonalize_sector(b, sec, H, cap=args.cap)
    _emit(args, {"label": data.label, "dim": sec.dim, "r": data.r, "eigenvalues": data.eigenvalues})


def cmd_rstat(args):
    from .basis import build_sector, enumerate_basis
    from .ops import build_pxp
    from .spectral import diagonalize_sector

    rows = []
    for L in args.sizes:
        b = enumerate_basis(L, args.s)
        sec = build_sector(b, 0, 1)
        data = diagonalize_sector(b, sec, build_pxp(b), cap=args.cap)
        rows.append({"L": L, "dim": sec.dim, "r": data.r})
    _emit(args, {"two_s": args.s, "sector": "k=0,I=+", "results": rows})


def cmd_flow(args):
    from .flow import flow_grid

    g = flow_grid(args.s, args.omega, args.h, args.n)
    _emit(args, [["theta_e", "theta_o", "dtheta_e", "dtheta_o", "gamma", "singular"], *g.rows()])


def cmd_orbit(args):
    from .orbit import find_orbit

    r = find_orbit(args.s, args.omega, args.h, args.delta_c, args.rtol)
    out = r.summary()
    if args.samples:
        out["samples"] = r.samples(args.samples).tolist()
    _emit(args, out)


def cmd_scan_h(args):
    from .orbit import scan_h

    grid = np.linspace(args.h_min, args.h_max, args.n)
    res = scan_h(grid, args.omega, args.delta_c, args.rtol, args.workers)
    if args.format == "json":
        _emit(args, {"h": res.h, "period": res.period, "epsilon": res.epsilon, "F": res.fidelity_loss,
                     "argmin_F": res.argmin_F, "argmin_epsilon": res.argmin_epsilon})
    else:
        _emit(args, [["h", "period", "epsilon", "F"],
                     *zip(res.h, res.period, res.epsilon, res.fidelity_loss)])


def cmd_thermal(args):
    from .thermal import reference

    ref = reference(args.s)
    _emit(args, {"s": ref.s, "r": ref.r, "sz_inf": ref.sz_inf, "S1": ref.S1})


def cmd_verify(args):
    from .verify import run_suite

    report = run_suite(quick=args.quick, seed=args.seed)
    _emit(args, report)
    return 0 if report["passed"] else 1


# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scarflow", description=__doc__,
                                formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        sp.set_defaults(func=func)
        sp.add_argument("--out", default=None, help="output path (stdout if omitted)")
        return sp

    def spin(sp, default="1/2"):
        sp.add_argument("--s", type=parse_spin, default=parse_spin(default), metavar="SPIN",
                        help="spin as 1/2, 1, 2 ...")

    sp = add("basis", cmd_basis, "enumerate the constrained basis")
    spin(sp)
    sp.add_argument("--L", type=int, required=True)
    sp.add_argument("--boundary", choices=["periodic", "open"], default="periodic")
    sp.add_argument("--format", choices=["csv", "json"], default="csv")

    sp = add("quench", cmd_quench, "exact quench from a product state")
    spin(sp)
    sp.add_argument("--L", type=int, required=True)
    sp.add_argument("--boundary", choices=["periodic", "open"], default="periodic")
    sp.add_argument("--state", default="z2", help="z2, z2_prime, all_zero or a level string")
    sp.add_argument("--t-max", type=float, default=20.0)
    sp.add_argument("--dt", type=float, default=0.05)
    sp.add_argument("--omega", type=float, default=1.0)
    sp.add_argument("--h", type=float, default=0.0)
    sp.add_argument("--method", choices=["auto", "dense", "krylov"], default="auto")

    sp = add("spectrum", cmd_spectrum, "eigenvalues of one symmetry sector")
    spin(sp)
    sp.add_argument("--L", type=int, required=True)
    sp.add_argument("--k", type=int, default=0)
    sp.add_argument("--parity", type=int, choices=[1, -1], default=1)
    sp.add_argument("--omega", type=float, default=1.0)
    sp.add_argument("--h", type=float, default=0.0)
    sp.add_argument("--cap", type=int, default=20000, help="largest sector diagonalised densely")

    sp = add("rstat", cmd_rstat, "level-spacing ratio in the k=0, I=+ sector")
    spin(sp)
    sp.add_argument("--sizes", type=_sizes, default=_sizes("23,25,27"))
    sp.add_argument("--cap", type=int, default=20000)

    sp = add("flow", cmd_flow, "velocity field and leakage rate on a grid")
    spin(sp)
    sp.add_argument("--n", type=int, default=64)
    sp.add_argument("--omega", type=float, default=1.0)
    sp.add_argument("--h", type=float, default=0.0)

    sp = add("orbit", cmd_orbit, "periodic orbit through the |Z2> corner")
    spin(sp)
    sp.add_argument("--omega", type=float, default=1.0)
    sp.add_argument("--h", type=float, default=0.0)
    sp.add_argument("--delta-c", type=float, default=1e-5)
    sp.add_argument("--rtol", type=float, default=1e-12)
    sp.add_argument("--samples", type=int, default=0, help="quarter-orbit samples to include")

    sp = add("scan-h", cmd_scan_h, "orbit quantities of the deformed model over h")
    sp.add_argument("--h-min", type=float, default=0.0)
    sp.add_argument("--h-max", type=float, default=0.1)
    sp.add_argument("--n", type=int, default=40)
    sp.add_argument("--omega", type=float, default=1.0)
    sp.add_argument("--delta-c", type=float, default=1e-5)
    sp.add_argument("--rtol", type=float, default=1e-11)
    sp.add_argument("--workers", type=int, default=default_workers(), help="defaults to $SCARFLOW_THREADS")
    sp.add_argument("--format", choices=["csv", "json"], default="csv")

    sp = add("thermal", cmd_thermal, "infinite-temperature references")
    spin(sp)

    sp = add("verify", cmd_verify, "run the oracle suites")
    sp.add_argument("--quick", action="store_true", help="smaller sizes and fewer draws")
    sp.add_argument("--seed", type=int, default=12345)
    return p


def _validate(p: argparse.ArgumentParser, args) -> None:
    L = getattr(args, "L", None)
    if L is not None and L < 2:
        p.error("--L must be at least 2")
    if hasattr(args, "omega") and not args.omega > 0:
        p.error("--omega must be positive")
    if getattr(args, "h", 0.0) and getattr(args, "s", 1) != 1:
        p.error("--h requires spin 1/2")
    if hasattr(args, "dt") and not args.dt > 0:
        p.error("--dt must be positive")
    if hasattr(args, "n") and args.n < 2:
        p.error("--n must be at least 2")
    if hasattr(args, "delta_c") and not 0 < args.delta_c < 0.1:
        p.error("--delta-c must lie in (0, 0.1)")


def main(argv: Sequence[str] | None = None) -> int:
    from .basis import CapacityError, ConfigNotFoundError, UnsupportedError
    from .dynamics import KrylovError
    from .flow import DegenerateMetricError
    from .orbit import OrbitError
    from .spectral import CapacityExceeded

    p = build_parser()
    args = p.parse_args(argv)
    _validate(p, args)
    try:
        code = args.func(args)
    except (CapacityError, CapacityExceeded, KrylovError, OrbitError, DegenerateMetricError,
            np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except (UnsupportedError, ConfigNotFoundError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    return int(code or 0)


if __name__ == "__main__":
    sys.exit(main())
