"""Time the compiled SE-kernel core against the numpy fallback.

    python benchmarks/bench_kernels.py [--sizes 100 400 1600] [--repeat 5]

Also times one DL-GP likelihood-plus-gradient evaluation under each
backend by re-importing the package with ``DLGP_PURE_PYTHON`` set.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from dlgp import _kernels_py

try:
    from dlgp import _kernels_ext
except ImportError:
    _kernels_ext = None

MODEL_SNIPPET = """
import timeit, numpy as np, warnings
warnings.simplefilter("ignore")
from dlgp import kernels, model as dl
from dlgp.data_io import load_motorcycle
data = load_motorcycle()
m = dl.init_model(data, [(1, 16, "tanh"), (16, 2, "identity")], seed=0)
t = min(timeit.repeat(lambda: dl.dlgp_gradients(m, data), number=5, repeat={repeat})) / 5
print(kernels.BACKEND, t)
"""


def time_kernels(sizes, repeat):
    rng = np.random.default_rng(0)
    rows = []
    for n in sizes:
        x = rng.normal(size=n)
        w = rng.normal(size=(n, n))
        w = w + w.T
        for name, fn in (("se_gram_sym", lambda impl: impl.se_gram_sym(x, 0.7)),
                         ("se_grad_contract", lambda impl: impl.se_grad_contract(x, w, 0.7))):
            py = min(timeit.repeat(lambda: fn(_kernels_py), number=3, repeat=repeat)) / 3
            ext = None
            if _kernels_ext is not None:
                ext = min(timeit.repeat(lambda: fn(_kernels_ext), number=3, repeat=repeat)) / 3
            rows.append((name, n, py, ext))
    return rows


def time_model(repeat):
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, DLGP_PURE_PYTHON=flag)
        res = subprocess.run([sys.executable, "-c", MODEL_SNIPPET.format(repeat=repeat)], env=env,
                             capture_output=True, text=True, check=True)
        backend, t = res.stdout.split()
        out[backend] = float(t)
    return out


def main():
    ap = argparse.ArgumentParser(description="compiled vs numpy SE kernels")
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 400, 1600])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write results to this file")
    args = ap.parse_args()
    if _kernels_ext is None:
        print("compiled extension not built; timing the numpy fallback only")
    print(f"{'kernel':<18}{'n':>6}{'numpy (ms)':>14}{'cython (ms)':>14}{'speedup':>10}")
    rows = time_kernels(args.sizes, args.repeat)
    for name, n, py, ext in rows:
        ext_s = f"{1e3 * ext:14.3f}{py / ext:10.1f}" if ext else f"{'-':>14}{'-':>10}"
        print(f"{name:<18}{n:>6}{1e3 * py:14.3f}{ext_s}")
    model = time_model(args.repeat)
    print("\nlikelihood + gradients, motorcycle data (N=133, q=2):")
    for backend, t in model.items():
        print(f"  {backend:<8}{1e3 * t:9.2f} ms")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"kernels": rows, "model": model}, fh, indent=1)


if __name__ == "__main__":
    main()
