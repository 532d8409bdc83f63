"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py --n 64 128 256 --repeat 5
"""
import argparse
import timeit

import numpy as np

from crossdiff import grid as G
from crossdiff import kernels


def _field(n, m=2, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((m, n, n))


def bench(n: int, repeat: int, radius_cells: int):
    g = G.Grid((n, n))
    vals = _field(n)
    offs = G.ball_offsets(g, radius_cells * g.h[0])
    backends = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    rows = []
    for name, call in (
        ("laplacian", lambda b: kernels.laplacian(vals, False, g.h, backend=b)),
        ("mean_oscillation", lambda b: kernels.mean_oscillation(vals, offs, 4, backend=b)),
    ):
        times = {}
        for b in backends:
            call(b)  # warm up
            number = max(1, int(0.2 / max(timeit.timeit(lambda: call(b), number=1), 1e-6)))
            times[b] = min(timeit.repeat(lambda: call(b), number=number, repeat=repeat)) / number
        if len(backends) == 2:
            a, c = call("python"), call("cython")
            if isinstance(a, tuple):  # (sup, ix, iy)
                agree = abs(a[0] - c[0]) <= 1e-12 and tuple(a[1:]) == tuple(c[1:])
            else:
                agree = bool(np.allclose(a, c, atol=1e-12))
        else:
            agree = None
        rows.append((name, n, times, agree))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--radius-cells", type=int, default=4)
    args = ap.parse_args(argv)
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'kernel':<18}{'n':>6}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}  agree")
    for n in args.n:
        for name, size, t, agree in bench(n, args.repeat, args.radius_cells):
            py = t["python"] * 1e3
            cy = t.get("cython")
            cy_s = f"{cy * 1e3:14.3f}" if cy else f"{'n/a':>14}"
            sp = f"{t['python'] / cy:10.1f}" if cy else f"{'n/a':>10}"
            print(f"{name:<18}{size:>6}{py:14.3f}{cy_s}{sp}  {agree}")


if __name__ == "__main__":
    main()
