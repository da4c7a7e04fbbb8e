"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py --n-spins 2000000 --repeat 3

Both implementations are called directly (the NVNMR_DISABLE_NUMBA switch is
not needed) and their outputs are compared before timing.
"""

import argparse
import math
import time

import numpy as np

from nvdepth import _kernels
from nvdepth.core import NuclearSample, NvCenter
from nvdepth.oracle import dipolar_couplings, sample_bath


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-spins", type=int, default=1_000_000)
    ap.add_argument("--n-tau", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    nv = NvCenter.from_nm(10.0)
    r_max = 10.0 * nv.depth
    # density chosen to give roughly the requested spin count
    rho = args.n_spins / (2.0 * math.pi / 3.0 * r_max**3)
    bath = sample_bath(NuclearSample(rho=rho), nv, r_max, args.seed)
    pts = np.ascontiguousarray(bath.positions)
    ax, ay, az = nv.axis()
    avec = dipolar_couplings(bath, nv).a_z_vec
    wl = 2.68e8 * 0.0197
    taus = math.pi / wl * (1.0 + np.linspace(-0.02, 0.02, args.n_tau))

    geo_nb, geo_np = _kernels.KERNELS["accumulate_geometry"]
    ps_nb, ps_np = _kernels.KERNELS["pseudospin_log"]
    geo_args = (pts, nv.depth, math.inf, r_max**2, 0.0, ax, ay, az)
    ps_args = (avec, wl, taus, 64, False)

    # compile outside the timed region
    geo_nb(*geo_args)
    ps_nb(avec[:10], wl, taus[:1], 64, False)

    print(f"spins={bath.n_spins} tau points={args.n_tau} repeat={args.repeat}")
    print(f"{'kernel':<22}{'numba (s)':>12}{'numpy (s)':>12}{'speedup':>10}{'max rel diff':>15}")
    for name, f_nb, f_np, a in (("accumulate_geometry", geo_nb, geo_np, geo_args),
                                ("pseudospin_log", ps_nb, ps_np, ps_args)):
        t_nb, o_nb = best_of(lambda: f_nb(*a), args.repeat)
        t_np, o_np = best_of(lambda: f_np(*a), args.repeat)
        x = np.concatenate([np.ravel(np.asarray(v, dtype=float)) for v in o_nb])
        y = np.concatenate([np.ravel(np.asarray(v, dtype=float)) for v in o_np])
        diff = float(np.max(np.abs(x - y) / np.maximum(np.abs(y), 1e-300)))
        print(f"{name:<22}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>10.1f}{diff:>15.2e}")


if __name__ == "__main__":
    main()
