"""Time the numba and numpy backends of the two hot kernels.

Usage: python benchmarks/bench_kernels.py [--lanes N] [--realizations N] [--repeat R]
"""

import argparse
import time

import numpy as np

from riseval import kernels
from riseval.config import SystemParams
from riseval.montecarlo import MCConfig, _chunk_rng, _consts, _draw_chunk, _load_cdf


def best_of(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lanes", type=int, default=20_000)
    ap.add_argument("--realizations", type=int, default=10_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    a = 10 ** rng.uniform(0, 12, args.lanes)
    d = rng.uniform(0, 300, args.lanes)
    p = SystemParams()
    draw = _draw_chunk(_chunk_rng(0, 0), args.realizations, p, MCConfig().radius(p), True, _load_cdf(p))
    sys_args = (draw["counts"], draw["bs_x"], draw["bs_y"], draw["los"], draw["active"], draw["h_dir"],
                draw["h_ris"], draw["ris_x"], draw["ris_y"], _consts(p), kernels.SCHEME_RIS, False, True)

    jobs = {
        f"laplace_exponent ({args.lanes} lanes)":
            lambda b: kernels.laplace_exponent(a, d, 2.0, 4, p.beta_blockage, True, backend=b),
        f"system_kernel ({args.realizations} realizations)":
            lambda b: kernels.system_kernel(*sys_args, backend=b),
    }
    print(f"{'kernel':<40} {'numba [s]':>10} {'numpy [s]':>10} {'speed-up':>9}")
    for name, job in jobs.items():
        t_nb = best_of(lambda: job("numba"), args.repeat)
        t_np = best_of(lambda: job("numpy"), args.repeat)
        print(f"{name:<40} {t_nb:>10.4f} {t_np:>10.4f} {t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
