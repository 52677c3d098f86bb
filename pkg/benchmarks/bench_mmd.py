"""Compare the compiled MMD kernel against the numpy fallback.

Run as a script:

    python benchmarks/bench_mmd.py [--sizes 100,200,500,1000] [--dim 4] [--repeats 5]
"""

import argparse
import time

import numpy as np

from invflow import _mmdnp
from invflow._mmdnp import KIND_IMQ, KIND_MQ

try:
    from invflow import _mmdext
except ImportError:
    _mmdext = None


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(sizes, dim, repeats):
    rng = np.random.default_rng(0)
    kinds = [("imq", KIND_IMQ, 0.2), ("mq", KIND_MQ, 1.2)]
    header = f"{'n':>6} {'kind':>4} {'numpy (ms)':>12}"
    if _mmdext is not None:
        header += f" {'ext (ms)':>12} {'speedup':>8} {'max |diff|':>12}"
    print(header)
    for n in sizes:
        x = rng.standard_normal((n, dim))
        y = rng.standard_normal((n, dim)) + 0.5
        for name, kind, h in kinds:
            t_np = _time(lambda: _mmdnp.mmd2_grads(x, y, h, kind), repeats)
            line = f"{n:>6} {name:>4} {t_np * 1e3:>12.3f}"
            if _mmdext is not None:
                t_ext = _time(lambda: _mmdext.mmd2_grads(x, y, h, kind), repeats)
                v1, gx1, gy1 = _mmdnp.mmd2_grads(x, y, h, kind)
                v2, gx2, gy2 = _mmdext.mmd2_grads(x, y, h, kind)
                diff = max(
                    abs(v1 - v2),
                    float(np.abs(gx1 - gx2).max()),
                    float(np.abs(gy1 - gy2).max()),
                )
                line += f" {t_ext * 1e3:>12.3f} {t_np / t_ext:>8.2f} {diff:>12.3e}"
            print(line)
    if _mmdext is None:
        print("compiled extension not available; showing numpy backend only")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="100,200,500,1000")
    parser.add_argument("--dim", type=int, default=4)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    run(sizes, args.dim, args.repeats)


if __name__ == "__main__":
    main()
