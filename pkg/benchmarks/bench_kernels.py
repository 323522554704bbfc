"""Compare the numba and numpy backends on a synthetic rating matrix.

    python3 benchmarks/bench_kernels.py [--rows 2000] [--cols 1500] [--density 0.02] [--repeats 5]

Each timing excludes one warm-up call (numba compiles on first use) and
reports mean and standard deviation over the repeats. The training run
also checks that both backends end close to the same model.
"""

import argparse
import statistics
import time

import numpy as np

from dnlfa import kernels
from dnlfa.model import Hyperparameters, init_model
from dnlfa.synthetic import random_sparse
from dnlfa.trainer import train


def timed(fn, repeats):
    fn()
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.fmean(samples), statistics.stdev(samples) if repeats > 1 else 0.0


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--cols", type=int, default=1500)
    ap.add_argument("--density", type=float, default=0.02)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--iters", type=int, default=20)
    args = ap.parse_args(argv)

    ds = random_sparse(args.rows, args.cols, args.density, seed=0)
    hp = Hyperparameters(d1=20, d2=5, e=0.01, max_iters=args.iters, tol=0.0)
    model = init_model(hp, ds.num_rows, ds.num_cols)
    names = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])
    print(f"{ds.num_rows}x{ds.num_cols}, {ds.nnz} entries, d1={hp.d1} d2={hp.d2}, {args.repeats} repeats")
    print(f"{'operation':<22}" + "".join(f"{n:>22}" for n in names))

    rows = {}
    for name in names:
        be = kernels.get_backend(name)
        G, H, I, J = model.bias_arrays()
        rhat = be.predict_entries(ds.rows, ds.cols, model.X, model.Y, G, H, I, J)
        ops = {
            "predict": lambda: be.predict_entries(ds.rows, ds.cols, model.X, model.Y, G, H, I, J),
            "factor terms (X)": lambda: be.factor_terms(
                ds.row_ptr, ds.row_perm, ds.cols, ds.vals, rhat, model.X, model.Y, hp.lam),
            "bias terms (G)": lambda: be.bias_terms(ds.row_ptr, ds.row_perm, ds.vals, rhat, G, I, hp.lam),
            f"train {args.iters} iters": lambda: train(hp, ds, model=model, backend=name),
        }
        for op, fn in ops.items():
            rows.setdefault(op, []).append(timed(fn, args.repeats))

    for op, cells in rows.items():
        print(f"{op:<22}" + "".join(f"{m * 1e3:>12.2f} ± {s * 1e3:6.2f}ms" for m, s in cells))

    if len(names) == 2:
        a, _ = train(hp, ds, model=model, backend="numpy")
        b, _ = train(hp, ds, model=model, backend="numba")
        print(f"max |X_numpy - X_numba| after training: {np.max(np.abs(a.X - b.X)):.2e}")


if __name__ == "__main__":
    main()
