#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Times each characteristic-function kernel across frequency-grid sizes and
reports per-call timings, speedups and a cross-path agreement check as
JSON.  Small grids dominate in practice (adaptive quadrature refines in
batches of a few hundred nodes), which is where the compiled loops pay off;
the same comparison can be forced package-wide with SVCAL_PURE_NUMPY=1.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from svcal import _kernels

WARMUP_RUNS = 3
BENCH_RUNS = 30
DEFAULT_SIZES = (64, 256, 1024, 4096)

HESTON = dict(v0=0.04, theta=0.05, kappa=1.5, sigma=0.6, rho=-0.55, T=1.0)
SZ = dict(v0=0.2, theta=0.22, kappa=1.5, sigma=0.4, rho=-0.55, T=1.0)
PW_SEGS = dict(
    taus=np.array([0.25, 0.25, 0.5, 1.0]),
    thetas=np.array([0.04, 0.05, 0.05, 0.06]),
    kappas=np.array([2.0, 1.5, 1.0, 0.8]),
    sigmas=np.array([0.6, 0.5, 0.4, 0.3]),
    rhos=np.array([-0.6, -0.5, -0.4, -0.3]),
)


def bench(fn, args, runs=BENCH_RUNS):
    for _ in range(WARMUP_RUNS):
        out = fn(*args)
    times = []
    for _ in range(runs):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), sum(times) / len(times), out


def run_size(n: int) -> dict:
    u = (np.linspace(1e-3, 200.0, n) - 0.5j).astype(np.complex128)
    cases = [
        ("heston_cf", _kernels.heston_cf_np, getattr(_kernels, "heston_cf_nb", None),
         (u, HESTON["v0"], HESTON["theta"], HESTON["kappa"], HESTON["sigma"], HESTON["rho"], HESTON["T"])),
        ("schobel_zhu_cf", _kernels.schobel_zhu_cf_np, getattr(_kernels, "schobel_zhu_cf_nb", None),
         (u, SZ["v0"], SZ["theta"], SZ["kappa"], SZ["sigma"], SZ["rho"], SZ["T"])),
        ("piecewise_heston_cf", _kernels.piecewise_heston_cf_np,
         getattr(_kernels, "piecewise_heston_cf_nb", None),
         (u, 0.04, PW_SEGS["taus"], PW_SEGS["thetas"], PW_SEGS["kappas"],
          PW_SEGS["sigmas"], PW_SEGS["rhos"])),
    ]
    out = {}
    for name, np_fn, nb_fn, call_args in cases:
        np_min, np_mean, np_out = bench(np_fn, call_args)
        entry = {
            "numpy_min_s": np_min,
            "numpy_mean_s": np_mean,
            "checksum": float(np.abs(np_out).sum()),
        }
        if _kernels.HAVE_NUMBA and nb_fn is not None:
            nb_min, nb_mean, nb_out = bench(nb_fn, call_args)
            entry.update(
                numba_min_s=nb_min,
                numba_mean_s=nb_mean,
                speedup=np_min / nb_min,
                max_abs_diff=float(np.max(np.abs(nb_out - np_out))),
            )
        out[name] = entry
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--grid-size", type=int, action="append", default=None,
                        help="frequency nodes per call (repeatable; default sweep "
                             + ",".join(map(str, DEFAULT_SIZES)) + ")")
    parser.add_argument("--output", "-o", default=None, help="write JSON here instead of stdout")
    args = parser.parse_args(argv)

    sizes = tuple(args.grid_size) if args.grid_size else DEFAULT_SIZES
    results = {
        "numba_available": _kernels.HAVE_NUMBA,
        "active_path": "numba" if _kernels.USE_NUMBA else "numpy",
        "by_grid_size": {str(n): run_size(n) for n in sizes},
    }

    payload = json.dumps(results, indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(payload + "\n")
        print(f"wrote {args.output}", file=sys.stderr)
    else:
        print(payload)
    return 0


if __name__ == "__main__":
    sys.exit(main())
