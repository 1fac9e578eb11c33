"""Time the HJB and Fokker-Planck sweeps on both back-ends.

Usage: python benchmarks/bench_kernels.py [--Nx 200] [--Nt 400] [--repeat 5]
"""

import argparse
import time

import numpy as np

from bertrand_mfg import kernels
from bertrand_mfg._accel import HAVE_NUMBA
from bertrand_mfg.core import Grid, ModelParams, sample_profiles


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--Nx", type=int, default=200)
    ap.add_argument("--Nt", type=int, default=400)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    p = ModelParams()
    g = Grid(p.L, p.T, args.Nx, args.Nt)
    m0, uT = sample_profiles(p, g)
    s2h = 0.5 * p.sigma**2
    f = np.full(g.Nt + 1, 0.95)
    src = np.zeros((1, g.Nx + 1))
    rng = np.random.default_rng(0)
    G = np.ascontiguousarray(rng.uniform(0.0, 0.5, g.shape))

    backends = {"numpy": (kernels.hjb_sweep_np, kernels.fp_sweep_np)}
    if HAVE_NUMBA:
        backends["numba"] = (kernels.hjb_sweep_nb, kernels.fp_sweep_nb)
        # compile before timing
        kernels.hjb_sweep_nb(uT, f, src, False, g.dt, g.dx, s2h, p.r, 1.0, 1e-11, 50)
        kernels.fp_sweep_nb(m0, G, g.dt, g.dx, s2h)

    results = {}
    for name, (hjb, fp) in backends.items():
        t_hjb, U = best_of(lambda: hjb(uT, f, src, False, g.dt, g.dx, s2h, p.r, 1.0, 1e-11, 50),
                           args.repeat)
        t_fp, M = best_of(lambda: fp(m0, G, g.dt, g.dx, s2h), args.repeat)
        results[name] = (U[0], M[0])
        print(f"{name:6s} hjb sweep {t_hjb * 1e3:9.2f} ms   fp sweep {t_fp * 1e3:9.2f} ms")
    if len(results) == 2:
        (u_a, m_a), (u_b, m_b) = results.values()
        print(f"max |u diff| {np.max(np.abs(u_a - u_b)):.2e}   max |m diff| {np.max(np.abs(m_a - m_b)):.2e}")


if __name__ == "__main__":
    main()
