"""Time local_entropy_map against image size and window."""

import argparse
import time

import numpy as np

from housefeat.entropy import local_entropy_map


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 512, 1024, 2048])
    ap.add_argument("--windows", type=int, nargs="+", default=[9, 15, 31])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    local_entropy_map(rng.integers(0, 256, (16, 16)).astype(np.uint8))  # JIT warm-up
    print("size  window  best_s")
    for size in args.sizes:
        img = rng.integers(0, 256, (size, size)).astype(np.uint8)
        for w in args.windows:
            times = []
            for _ in range(args.repeat):
                t = time.perf_counter()
                local_entropy_map(img, w)
                times.append(time.perf_counter() - t)
            print(f"{size:5d}  {w:6d}  {min(times):.3f}")


if __name__ == "__main__":
    main()
