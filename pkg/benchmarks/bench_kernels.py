"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import sys
import timeit

import numpy as np

from backhaul_mg import _backend, _kernels_py
from backhaul_mg.allocation import allocate, counts_for_total
from backhaul_mg.harness.config import build_scenario, preset


def _cases(rng):
    G = 150
    p = rng.random(G)
    u_c = np.concatenate([np.linspace(1.0, 0.0, 60), -np.linspace(0.1, 5.0, G - 60)])
    sc = build_scenario(preset("case1"), 0)
    s = counts_for_total(sc.demands, 60)
    alloc_args = _alloc_args(sc, s)

    def learn(k):
        B, W = 256, 50
        pp, uh = np.full(G, 0.5), np.zeros((G, 2))
        hist = np.zeros((W + 1, G))
        hist[0] = pp
        t = np.arange(1, B + 1, dtype=float)
        dummy_a, dummy_f = np.zeros((1, 1), dtype=np.uint8), np.zeros((1, 1))
        k.learning_block(pp, uh, u_c, rng.random((B, G)), rng.standard_normal((B, G)), 0.01,
                         t ** -0.55, t ** -0.8, np.full(G, 1.0), False, 0, hist, 1e-12, W,
                         False, dummy_a, dummy_f, dummy_f)

    return {
        "poisson_binomial_pmf (n=150)": lambda k: k.poisson_binomial_pmf(p),
        "loo_expected_c (G=150)": lambda k: k.loo_expected_c(p, u_c),
        "learning_block (256 x 150)": learn,
        "greedy_assign (case1 scenario)": lambda k: k.greedy_assign(*alloc_args),
    }


def _alloc_args(sc, s):
    from backhaul_mg.allocation import _RATE_RTOL, required_rates
    from backhaul_mg.netmodel import wired_shares

    R, D = required_rates(sc.demands, s)
    rbs = sc.rbs
    wired = (sc.wired.per_mbs_capacity[:, None] * wired_shares(sc.demands, s)[None, :]).sum(axis=0)
    mmw = np.ascontiguousarray(rbs.mmw_bandwidths[None, :, None] * np.log2(1 + sc.mmw_gamma))
    rx6 = np.ascontiguousarray(np.transpose(rbs.sub6_power * sc.sub6.channel_gains, (1, 0, 2)))
    return (R + D, wired, mmw, rx6, np.ascontiguousarray(rbs.sub6_bandwidths),
            float(sc.sub6.noise_n2), rbs.num_blocks // sc.num_sbs, _RATE_RTOL)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _backend.compiled is None:
        print("compiled kernels not available; build with 'pip install -e . --no-build-isolation'")
        return 1
    cases = _cases(np.random.default_rng(0))
    print(f"{'kernel':<32} {'python (us)':>12} {'compiled (us)':>14} {'speedup':>8}")
    for name, fn in cases.items():
        times = {}
        for label, k in (("python", _kernels_py), ("compiled", _backend.compiled)):
            timer = timeit.Timer(lambda: fn(k))
            n, _ = timer.autorange()
            times[label] = min(timer.repeat(args.repeat, n)) / n * 1e6
        print(f"{name:<32} {times['python']:>12.1f} {times['compiled']:>14.1f} "
              f"{times['python'] / times['compiled']:>7.1f}x")
    sc = build_scenario(preset("case1"), 0)
    s = counts_for_total(sc.demands, 60)
    t = timeit.timeit(lambda: allocate(sc, s), number=200) / 200 * 1e6
    print(f"\nallocate() on case1 with the active backend ({_backend.BACKEND}): {t:.0f} us")
    return 0


if __name__ == "__main__":
    sys.exit(main())
