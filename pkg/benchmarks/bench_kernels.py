"""Times the compiled and numpy kernel backends on the same inputs.

    python benchmarks/bench_kernels.py [--repeat N] [--dtype float32|float64]

Prints one row per (kernel, shape, backend) with the median wall time and
the max abs difference from the numpy result.
"""
import argparse
import statistics
import time

import numpy as np

from vidinpaint.kernels import SELECTED, available_backends

ATTENTION_SHAPES = [(16, 8, 16), (8, 64, 32), (2, 192, 64)]   # batch, length, dim
RESIZE_SHAPES = [(64, 16, 12, 4, 3), (256, 32, 24, 8, 6)]      # batch, w, h, w', h'


def _time(fn, repeat):
    fn()
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples), out


def _cases(rng, dtype):
    for b, n, d in ATTENTION_SHAPES:
        q, k, v, g = (rng.standard_normal((b, n, d)).astype(dtype) for _ in range(4))
        scale = d ** -0.5
        label = f"b={b} L={n} d={d}"

        def fwd(mod, q=q, k=k, v=v, scale=scale):
            return mod.attention_forward(q, k, v, scale)[0]

        def bwd(mod, q=q, k=k, v=v, g=g, scale=scale):
            probs = np.ascontiguousarray(mod.attention_forward(q, k, v, scale)[1])
            return np.concatenate([a.ravel() for a in mod.attention_backward(q, k, v, probs, g, scale)])

        yield "attention_fwd", label, fwd
        yield "attention_fwd+bwd", label, bwd
    for b, w, h, tw, th in RESIZE_SHAPES:
        x = rng.standard_normal((b, w, h)).astype(dtype)
        g = rng.standard_normal((b, tw, th)).astype(dtype)
        label = f"b={b} {w}x{h}->{tw}x{th}"
        yield "resize_fwd", label, lambda mod, x=x, tw=tw, th=th: mod.resize_forward(x, tw, th, "bilinear")
        yield "resize_bwd", label, lambda mod, g=g, w=w, h=h: mod.resize_backward(g, w, h, "bilinear")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--dtype", choices=("float32", "float64"), default="float32")
    args = ap.parse_args(argv)
    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not built; timing the numpy backend only")
    print("auto selection:", ", ".join(f"{k}={v}" for k, v in SELECTED.items()))
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18} {'shape':<24} {'backend':<7} {'median ms':>10} {'speedup':>8} {'max |diff|':>11}")
    for kernel, label, fn in _cases(rng, np.dtype(args.dtype)):
        base_t, base_out = _time(lambda: fn(backends["numpy"]), args.repeat)
        for name, mod in backends.items():
            t, out = (base_t, base_out) if name == "numpy" else _time(lambda: fn(mod), args.repeat)
            diff = float(np.max(np.abs(np.asarray(out, np.float64) - base_out)))
            print(f"{kernel:<18} {label:<24} {name:<7} {t * 1e3:>10.3f} {base_t / t:>7.2f}x {diff:>11.2e}")


if __name__ == "__main__":
    main()
