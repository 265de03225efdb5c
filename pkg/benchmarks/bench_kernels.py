"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py [--repeat 5]

Times the SMO dual solver on an RBF kernel matrix and the grid scan for the
minimum sample count, and checks that both backends return the same answer.
"""

import argparse
import time

import numpy as np

from mbharvest import _kernels_py

try:
    from mbharvest import _kernels
except ImportError:
    _kernels = None


def _smo_case(n, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    y = np.where(X[:, 0] + 0.3 * rng.normal(size=n) > 0, 1.0, -1.0)
    sq = ((X[:, None] - X[None]) ** 2).sum(-1)
    return np.ascontiguousarray(np.exp(-sq / 2.0)), y


def _best(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = {"python": _kernels_py}
    if _kernels is not None:
        backends["cython"] = _kernels
    else:
        print("compiled extension not built; timing the Python backend only")

    cases = [("smo n=60", lambda k, K=K, y=y: k.smo_solve(K, y, 10.0, 1e-3, 10_000_000))
             for K, y in [_smo_case(60)]]
    cases += [("smo n=300", lambda k, K=K, y=y: k.smo_solve(K, y, 10.0, 1e-3, 10_000_000))
              for K, y in [_smo_case(300)]]
    cases += [(f"grid snr={g}", lambda k, g=g: k.grid_min_samples(g, 0.1, 0.9, 100, 200_000, 1e-4, -1.0))
              for g in (1.0, 0.1)]

    print(f"{'case':<16}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for label, fn in cases:
        res = {name: _best(lambda m=mod: fn(m), args.repeat) for name, mod in backends.items()}
        row = f"{label:<16}" + "".join(f"{res[n][0] * 1e3:>10.2f}ms" for n in backends)
        if "cython" in res:
            row += f"{res['python'][0] / res['cython'][0]:>9.1f}x"
            a, b = res["python"][1], res["cython"][1]
            same = np.allclose(a[0], b[0], atol=1e-9) and np.allclose(a[1], b[1], atol=1e-9, equal_nan=True)
            row += "" if same else "  MISMATCH"
        print(row)


if __name__ == "__main__":
    main()
