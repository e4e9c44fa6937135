"""Compare the compiled and numpy backends of the hot kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints per-call timings for both backends, the speedup, and the largest
absolute difference between their outputs.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from scalefree import _kernels_py

try:
    from scalefree import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def bank_case(M: int, G: int, K: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    logw = rng.normal(size=(M, G))
    logw -= np.log(np.exp(logw).sum(axis=1, keepdims=True))
    radii = np.exp2(np.arange(M, dtype=float) - M / 2)
    z = rng.normal(size=(G, K))
    return logw, radii, z


def spectral_case(n: int, L: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    mu = np.abs(rng.normal(size=n)) * 10.0
    return mu, rng.normal(size=n), rng.normal(size=n), np.exp2(np.arange(-L // 2, L // 2 + 1, dtype=float))


def run_bank(mod, logw, radii, z, y=0):
    lw = logw.copy()
    out = np.empty((lw.shape[0], lw.shape[1], z.shape[1]))
    probs = mod.bank_log_softmax_mix(lw, radii, z, out)
    norm = mod.bank_update(lw, out, y)
    return np.asarray(probs), np.asarray(norm), lw


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    cases = [
        ("bank M=65 G=201 K=2", lambda m: run_bank(m, *bank_case(65, 201, 2))),
        ("bank M=1093 G=201 K=2", lambda m: run_bank(m, *bank_case(1093, 201, 2))),
        ("bank M=129 G=1681 K=2", lambda m: run_bank(m, *bank_case(129, 1681, 2))),
        ("spectral n=3 L=81", lambda m: m.spectral_ridge_predict(*spectral_case(3, 80))),
        ("spectral n=500 L=81", lambda m: m.spectral_ridge_predict(*spectral_case(500, 80))),
    ]
    print(f"{'case':<24}{'numpy [ms]':>12}{'cython [ms]':>13}{'speedup':>10}{'max |diff|':>13}")
    for name, fn in cases:
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        if _compiled is None:
            print(f"{name:<24}{t_py:>12.3f}{'n/a':>13}{'':>10}{'':>13}")
            continue
        t_cy = min(timeit.repeat(lambda: fn(_compiled), number=1, repeat=args.repeat)) * 1e3
        a, b = fn(_kernels_py), fn(_compiled)
        a = a if isinstance(a, tuple) else (a,)
        b = b if isinstance(b, tuple) else (b,)
        diff = max(float(np.max(np.abs(np.asarray(u) - np.asarray(v)))) for u, v in zip(a, b))
        print(f"{name:<24}{t_py:>12.3f}{t_cy:>13.3f}{t_py / t_cy:>9.1f}x{diff:>13.2e}")


if __name__ == "__main__":
    main()
