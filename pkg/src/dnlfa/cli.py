"""Command-line front end: ``dnlfa {stats,train,cv,predict}``.

Every long flag can also be set through the environment as
``DNLFA_<FLAG>`` (upper case, dashes as underscores), e.g. ``DNLFA_LAMBDA``.
Command-line values win over the environment.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import model as mdl
from .data import DataError, SparseDataset, density, load_triples, make_folds
from .evaluation import compare_variants, runs_csv, table_csv, table_markdown
from .metrics import rmse
from .model import ConfigError, Hyperparameters, ModelFormatError, Variant, load_model, save_model
from .trainer import train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3
ENV_PREFIX = "DNLFA_"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _hp_flags(p: argparse.ArgumentParser, multi_variant: bool = False) -> None:
    g = p.add_argument_group("model")
    if multi_variant:
        g.add_argument("--variants", default="nlfa,bnlfa,ebnl,dnlfa",
                       help="comma-separated variants to compare (default: %(default)s)")
    else:
        g.add_argument("--model", default="dnlfa", choices=[v.value.lower() for v in Variant],
                       help="model variant (default: %(default)s)")
    g.add_argument("--d1", type=int, default=mdl.DEFAULT_D1, help="latent dimension (default: %(default)s)")
    g.add_argument("--d2", type=int, default=None,
                   help="bias dimension (default: 5 for ebnl/dnlfa; forced to 0 for nlfa, 1 for bnlfa)")
    g.add_argument("--lambda", dest="lam", type=float, default=mdl.DEFAULT_LAMBDA,
                   help="L2 regularization coefficient (default: %(default)s, package default, not a published value)")
    g.add_argument("--threshold-e", dest="e", type=float, default=mdl.DEFAULT_THRESHOLD,
                   help="bias mask threshold e (default: %(default)s, package default, not a published value)")
    g.add_argument("--max-iters", type=int, default=mdl.DEFAULT_MAX_ITERS,
                   help="iteration budget (default: %(default)s)")
    g.add_argument("--tol", type=float, default=mdl.DEFAULT_TOL,
                   help="stop when consecutive RMSEs differ by less than this (default: %(default)s)")
    g.add_argument("--seed", type=int, default=0, help="random seed (default: %(default)s)")
    g.add_argument("--init-scale", type=float, default=mdl.DEFAULT_INIT_SCALE,
                   help="initial values drawn from (0, init-scale] (default: %(default)s, package default)")
    g.add_argument("--threads", type=int, default=1, help="worker threads for the kernels (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dnlfa", description="Nonnegative latent factor analysis with dynamic linear biases.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("stats", help="summarize a triple file")
    p.add_argument("--data", required=True, help="triple file")

    p = sub.add_parser("train", help="train one model")
    p.add_argument("--train", required=True, help="training triple file")
    p.add_argument("--valid", help="validation triple file (drives early stopping)")
    p.add_argument("--test", help="test triple file (scored after training)")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--report", help="iteration report CSV (default: <out>.report.csv)")
    _hp_flags(p)

    p = sub.add_parser("cv", help="tenfold cross-validation over model variants")
    p.add_argument("--data", required=True, help="triple file")
    p.add_argument("--repetitions", type=int, default=10, help="fold rotations, 1..10 (default: %(default)s)")
    p.add_argument("--out", required=True, help="output prefix: writes <out>.csv, <out>.md, <out>.runs.csv")
    p.add_argument("--timing", choices=["sequential", "concurrent"], default="sequential",
                   help="run repetitions one at a time (accurate timings) or concurrently")
    p.add_argument("--no-timing", action="store_true", help="omit timing columns from the tables")
    p.add_argument("--save-folds", help="write the fold plan to this file")
    _hp_flags(p, multi_variant=True)

    p = sub.add_parser("predict", help="predict entries with a trained model")
    p.add_argument("model_file", help="model written by `dnlfa train`")
    p.add_argument("--pairs", help="file with one `row col` pair per line")
    p.add_argument("--pair", nargs=2, action="append", metavar=("ROW", "COL"), help="inline pair (repeatable)")
    p.add_argument("--out", help="write predictions here instead of stdout")

    _apply_env(parser)
    return parser


def _apply_env(parser: argparse.ArgumentParser, env=None) -> None:
    env = os.environ if env is None else env
    subs = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
    for sp in subs[0].choices.values() if subs else ():
        for action in sp._actions:
            longs = [o for o in action.option_strings if o.startswith("--")]
            if not longs or action.dest == "help":
                continue
            key = ENV_PREFIX + longs[0][2:].upper().replace("-", "_")
            if key not in env:
                continue
            raw = env[key]
            if isinstance(action, argparse._StoreTrueAction):
                action.default = raw.strip().lower() not in ("", "0", "false", "no")
            elif action.nargs is None:
                action.default = action.type(raw) if action.type else raw
                action.required = False


def _hyperparameters(args, variant, strict_d2: bool = True) -> Hyperparameters:
    variant = Variant.parse(variant)
    d2 = args.d2
    if not strict_d2 and variant in (Variant.NLFA, Variant.BNLFA):
        d2 = None
    if variant is Variant.NLFA:
        if d2 not in (None, 0):
            raise UsageError(f"--model nlfa has no biases; --d2 {d2} conflicts")
        d2 = 0
    elif variant is Variant.BNLFA:
        if d2 not in (None, 1):
            raise UsageError(f"--model bnlfa uses bias vectors; --d2 {d2} conflicts (must be 1)")
        d2 = 1
    elif d2 is None:
        d2 = mdl.DEFAULT_D2
    try:
        return Hyperparameters(
            d1=args.d1, d2=d2, lam=args.lam, e=args.e, max_iters=args.max_iters, tol=args.tol,
            seed=args.seed, variant=variant, init_scale=args.init_scale,
        )
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def _load(path):
    try:
        return load_triples(path)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def _align(ds, ref):
    """Re-express ``ds`` in ``ref``'s dense index space; rows/cols unknown to ``ref`` are dropped."""
    keep = np.isin(ds.row_ids[ds.rows], ref.row_ids) & np.isin(ds.col_ids[ds.cols], ref.col_ids)
    rows = np.searchsorted(ref.row_ids, ds.row_ids[ds.rows[keep]])
    cols = np.searchsorted(ref.col_ids, ds.col_ids[ds.cols[keep]])
    return SparseDataset(ref.num_rows, ref.num_cols, rows, cols, ds.vals[keep], ref.row_ids, ref.col_ids), int((~keep).sum())


def cmd_stats(args, out) -> int:
    ds = _load(args.data)
    out.write(f"entries {ds.nnz}\nrows {ds.num_rows}\ncols {ds.num_cols}\n")
    if ds.num_rows and ds.num_cols:
        out.write(f"density {100 * density(ds):.2f}%\n")
    else:
        out.write("density n/a\n")
    if ds.nnz:
        out.write(f"value_min {ds.vals.min():.6g}\nvalue_max {ds.vals.max():.6g}\nvalue_mean {ds.vals.mean():.6g}\n")
    else:
        out.write("value_min 0\nvalue_max 0\nvalue_mean 0\n")
    return EXIT_OK


def _union_index(*datasets):
    """Dense index spaces covering every id seen in any of ``datasets``."""
    rows = np.unique(np.concatenate([d.row_ids for d in datasets]))
    cols = np.unique(np.concatenate([d.col_ids for d in datasets]))
    z = np.zeros(0, dtype=np.int64)
    return SparseDataset(rows.size, cols.size, z, z, np.zeros(0), rows, cols)


def cmd_train(args, out) -> int:
    hp = _hyperparameters(args, args.model)
    tr = _load(args.train)
    if tr.nnz == 0:
        raise DataError(f"{args.train}: training set is empty")
    extra = [_load(p) for p in (args.valid, args.test) if p]
    space = _union_index(tr, *extra)
    tr, _ = _align(tr, space)
    va = _align(_load(args.valid), space)[0] if args.valid else None
    te = _align(_load(args.test), space)[0] if args.test else None
    model, report = train(hp, tr, va, threads=args.threads)
    save_model(model, args.out)
    report_path = args.report or f"{args.out}.report.csv"
    Path(report_path).write_text(report.to_csv(), encoding="utf-8")
    out.write(f"stopped after {report.iterations} iterations: {report.reason} (monitor: {report.monitor})\n")
    out.write(f"train_rmse {rmse(model, tr):.6f}\n")
    if va is not None and va.nnz:
        out.write(f"valid_rmse {rmse(model, va):.6f}\n")
    if te is not None and te.nnz:
        out.write(f"test_rmse {rmse(model, te):.6f}\n")
    out.write(f"model written to {args.out}\nreport written to {report_path}\n")
    return EXIT_OK


def cmd_cv(args, out) -> int:
    if not 1 <= args.repetitions <= 10:
        raise UsageError(f"--repetitions must be in 1..10, got {args.repetitions}")
    variants = [v for v in args.variants.split(",") if v.strip()]
    try:
        variants = [Variant.parse(v) for v in variants]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not variants:
        raise UsageError("--variants is empty")
    base = None
    for v in variants:
        hp = _hyperparameters(args, v, strict_d2=False)  # validates every requested variant up front
        if base is None or v in (Variant.EBNL, Variant.DNLFA):
            base = hp
    ds = _load(args.data)
    summaries, runs = compare_variants(
        base, ds, variants, seed=args.seed, repetitions=args.repetitions,
        threads=args.threads, concurrent=args.timing == "concurrent",
    )
    timing = not args.no_timing
    Path(f"{args.out}.csv").write_text(table_csv(summaries, timing), encoding="utf-8")
    Path(f"{args.out}.md").write_text(table_markdown(summaries, timing), encoding="utf-8")
    Path(f"{args.out}.runs.csv").write_text(runs_csv(runs, timing), encoding="utf-8")
    if args.save_folds:
        Path(args.save_folds).write_text(make_folds(ds, args.seed).dumps(), encoding="utf-8")
    out.write(table_markdown(summaries, timing))
    return EXIT_OK


def _read_pairs(args):
    pairs = []
    if args.pairs:
        with open(args.pairs, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.replace(",", " ").split()
                if not parts or parts[0].startswith("#"):
                    continue
                if len(parts) < 2:
                    raise DataError(f"{args.pairs}: line {lineno}: expected `row col`")
                pairs.append((parts[0], parts[1]))
    pairs.extend(tuple(p) for p in args.pair or ())
    return pairs


def cmd_predict(args, out) -> int:
    try:
        model = load_model(args.model_file)
    except (OSError, ModelFormatError) as exc:
        raise RuntimeError(f"cannot load model {args.model_file}: {exc}") from None
    rows = {int(v): i for i, v in enumerate(model.row_ids)}
    cols = {int(v): i for i, v in enumerate(model.col_ids)}
    pairs = _read_pairs(args)
    lines, failures = [], 0
    for r, c in pairs:
        try:
            m = rows.get(int(r))
            n = cols.get(int(c))
        except ValueError:
            lines.append(f"{r} {c} ERR:bad-id")
            failures += 1
            continue
        if m is None:
            lines.append(f"{r} {c} ERR:unknown-row")
        elif n is None:
            lines.append(f"{r} {c} ERR:unknown-col")
        else:
            lines.append(f"{r} {c} {model.predict(m, n)!r}")
            continue
        failures += 1
    text = "".join(line + "\n" for line in lines)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    return EXIT_DATA if pairs and failures == len(pairs) else EXIT_OK


COMMANDS = {"stats": cmd_stats, "train": cmd_train, "cv": cmd_cv, "predict": cmd_predict}


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"dnlfa {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"dnlfa {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - top-level guard maps to the runtime exit code
        print(f"dnlfa {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
