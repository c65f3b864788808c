"""Time the compiled kernels against the NumPy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Both backends are imported directly, so no environment variable is needed.
Each timing is the best of ``--repeat`` runs.
"""
import argparse
import json
import timeit

import numpy as np

from ccafuse import _kernels_py

try:
    from ccafuse import _kernels
except ImportError:
    _kernels = None


def _cases(rng):
    img = rng.uniform(size=(256, 256))
    a = rng.uniform(0, 100, size=(300, 2))
    a = np.hstack([a, a + rng.uniform(1, 30, size=(300, 2))])
    b = rng.uniform(0, 100, size=(200, 2))
    b = np.hstack([b, b + rng.uniform(1, 30, size=(200, 2))])
    iou = _kernels_py.iou_matrix(a, b)
    order = np.arange(len(a), dtype=np.int64)
    return {
        "box_mean 256x256 win=7": lambda m: m.box_mean(img, 7),
        "iou_matrix 300x200": lambda m: m.iou_matrix(a, b),
        "greedy_match 300x200": lambda m: m.greedy_match(iou, order, 0.5),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--repeat", type=int, default=5, help="timing repeats (best is kept)")
    p.add_argument("--json", default=None, help="also write results here")
    args = p.parse_args(argv)
    rng = np.random.default_rng(0)
    rows = []
    for name, fn in _cases(rng).items():
        row = {"kernel": name}
        for label, mod in (("python", _kernels_py), ("cython", _kernels)):
            if mod is None:
                row[label] = None
                continue
            number = max(1, int(0.2 / max(timeit.timeit(lambda: fn(mod), number=1), 1e-6)))
            best = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number
            row[label] = best
        rows.append(row)
    print(f"{'kernel':<26} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for r in rows:
        cy = r["cython"]
        speed = f"{r['python'] / cy:8.1f}" if cy else "     n/a"
        cy_ms = f"{1e3 * cy:10.3f}" if cy else "       n/a"
        print(f"{r['kernel']:<26} {1e3 * r['python']:10.3f} {cy_ms} {speed}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
