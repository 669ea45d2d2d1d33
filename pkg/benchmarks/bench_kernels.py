"""Benchmark the convolution kernels across backends.

Times forward, backward-input, and backward-weight for a few training-
representative shapes, per backend, and prints a table with GFLOP/s and
the numpy/numba speed ratio. Run:

    python3 benchmarks/bench_kernels.py [--repeats 5] [--dtype float32]

Measured on the single-CPU container this package was developed in, the
numpy im2col path (which lowers to BLAS sgemm) beats the jitted loop
backend by roughly an order of magnitude at these shapes, so numpy is
the sensible choice there; the jitted path avoids im2col's memory blowup
for very large feature maps. The import-time default stays numba when it
is available, and DEJAVU_BACKEND=numpy selects the BLAS path.
"""

import argparse
import time

import numpy as np

from dejavu import kernels

# (B, Cin, H, W, Cout, k, stride, pad)
SHAPES = [
    ("stem 64x64", (8, 3, 64, 64, 16, 3, 1, 1)),
    ("mid 32x32", (8, 16, 32, 32, 32, 3, 2, 1)),
    ("deep 16x16", (8, 32, 16, 16, 64, 3, 1, 1)),
]


def _flops(b, cin, h, w, cout, k, stride, pad):
    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1
    return 2.0 * b * cout * ho * wo * cin * k * k


def _time(fn, repeats):
    fn()  # warm up (and trigger jit compilation)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(repeats, dtype):
    rng = np.random.default_rng(0)
    rows = []
    for label, (b, cin, h, w, cout, k, stride, pad) in SHAPES:
        x = rng.standard_normal((b, cin, h, w)).astype(dtype)
        wt = rng.standard_normal((cout, cin, k, k)).astype(dtype)
        y = kernels.conv2d_forward(x, wt, stride, pad)
        gy = np.ones_like(y)
        flops = _flops(b, cin, h, w, cout, k, stride, pad)
        for backend in kernels.available_backends():
            kernels.set_backend(backend)
            t_f = _time(lambda: kernels.conv2d_forward(x, wt, stride, pad), repeats)
            t_bi = _time(
                lambda: kernels.conv2d_backward_input(gy, wt, stride, pad, h, w), repeats
            )
            t_bw = _time(
                lambda: kernels.conv2d_backward_weight(x, gy, stride, pad, k, k), repeats
            )
            rows.append((label, backend, t_f, t_bi, t_bw, flops / t_f / 1e9))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--dtype", choices=("float32", "float64"), default="float32")
    args = ap.parse_args()
    rows = bench(args.repeats, np.dtype(args.dtype))
    print(f"{'shape':<14} {'backend':<8} {'fwd ms':>9} {'bwd_in ms':>10} "
          f"{'bwd_w ms':>9} {'fwd GFLOP/s':>12}")
    for label, backend, t_f, t_bi, t_bw, gflops in rows:
        print(f"{label:<14} {backend:<8} {t_f * 1e3:>9.2f} {t_bi * 1e3:>10.2f} "
              f"{t_bw * 1e3:>9.2f} {gflops:>12.2f}")
    by_shape = {}
    for label, backend, t_f, *_ in rows:
        by_shape.setdefault(label, {})[backend] = t_f
    if all(len(v) == 2 for v in by_shape.values()):
        print()
        for label, t in by_shape.items():
            print(f"{label:<14} numba/numpy forward time ratio: "
                  f"{t['numba'] / t['numpy']:.1f}x")


if __name__ == "__main__":
    main()
