"""Compare the compiled and pure-Python principal-minor kernels.

    python3 benchmarks/bench_kernels.py [--n 20000] [--p 8] [--repeat 3]
"""

import argparse
import timeit

import numpy as np

from lmwishart import kernels


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=20_000)
    ap.add_argument("--p", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    rng = np.random.default_rng(0)
    F = rng.standard_normal((a.n, a.p, a.p))
    S = np.einsum("npi,npj->nij", F, F)
    # clique/separator-like index sets of a path of triangles
    sets = [set(range(i, min(i + 3, a.p) + 1)) for i in range(1, a.p - 1)]
    sets += [set(range(i + 1, min(i + 3, a.p) + 1)) for i in range(1, a.p - 2)]
    idx, ptr = kernels.pack_index_sets(sets)
    print(f"backend at import: {kernels.BACKEND}; n={a.n}, p={a.p}, {len(sets)} minors per matrix")
    backends = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    for name, fn, arg in (("logdet_minors", kernels.logdet_minors, S), ("logdet_gram_minors", kernels.logdet_gram_minors, F)):
        times = {}
        for b in backends:
            times[b] = min(timeit.repeat(lambda: fn(arg, idx, ptr, backend=b), number=1, repeat=a.repeat))
            print(f"  {name:20s} {b:7s} {times[b] * 1e3:9.2f} ms")
        if len(times) == 2:
            gap = np.nanmax(np.abs(fn(arg, idx, ptr, backend="python") - fn(arg, idx, ptr, backend="cython")))
            print(f"  {name:20s} speedup {times['python'] / times['cython']:.1f}x, max abs difference {gap:.2e}")


if __name__ == "__main__":
    main()
