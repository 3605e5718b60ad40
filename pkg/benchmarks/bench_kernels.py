"""Compare the compiled and numpy layer kernels.

    python benchmarks/bench_kernels.py [--repeat 50]

Shapes cover a single small network (the synthetic tasks), one network per
class (classification) and one network per pixel (density modelling).
"""

import argparse
import time

import numpy as np

from gln import kernels

CASES = {
    "single 1x3x2x2": (1, 3, 2, 2),
    "one-vs-all 10x128x16x785": (10, 128, 16, 785),
    "per-pixel 784x16x32x17": (784, 16, 32, 17),
}


def make_case(shape, seed=0):
    B, K, C, F = shape
    rng = np.random.default_rng(seed)
    return {
        "W": rng.uniform(-1, 1, (B, K, C, F)),
        "ctx": rng.integers(0, C, (B, K)).astype(np.int64),
        "xin": rng.uniform(-3, 3, (B, F)),
        "target": rng.integers(0, 2, B).astype(np.float64),
        "lr": np.full((B, K), 0.01),
    }


def time_backend(mod, case, repeat):
    W = case["W"].copy()
    B, K = case["ctx"].shape
    s, out, loss = np.empty((B, K)), np.empty((B, K + 1)), np.empty((B, K))
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        mod.forward_layer(W, case["ctx"], case["xin"], -4.6, 4.6, 1.0, s, out)
        mod.update_layer(W, case["ctx"], case["xin"], s, case["target"], case["lr"], 200.0, loss)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args()
    backends = [("numpy", kernels.python)]
    if kernels.compiled is not None:
        backends.insert(0, ("cython", kernels.compiled))
    else:
        print("compiled kernels not built; timing numpy only")
    print(f"{'case':<28}" + "".join(f"{name:>14}" for name, _ in backends) + "   speedup")
    for label, shape in CASES.items():
        case = make_case(shape)
        times = [time_backend(mod, case, args.repeat) for _, mod in backends]
        speed = f"{times[-1] / times[0]:8.1f}x" if len(times) > 1 else ""
        print(f"{label:<28}" + "".join(f"{t * 1e6:>12.1f}us" for t in times) + "   " + speed)


if __name__ == "__main__":
    main()
