"""Tenfold cross-validation harness and variant comparison tables."""

from __future__ import annotations

import csv
import io
import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

from .data import FOLD_COUNT, DataError, FoldPlan, SparseDataset, make_folds, rotate_folds, subset
from .metrics import rmse, rmse_from_predictions  # noqa: F401  (re-exported)
from .model import Hyperparameters, Variant
from .trainer import train


@dataclass(frozen=True)
class EvalResult:
    variant: Variant
    repetition: int
    rmse: float
    entry_count: int
    wall_time_s: float
    iterations: int
    reason: str
    plan_digest: str


@dataclass(frozen=True)
class Summary:
    variant: Variant
    repetitions: int
    rmse_mean: float
    rmse_std: float | None
    time_mean: float
    time_std: float | None

    @classmethod
    def of(cls, variant: Variant, results: Sequence[EvalResult]) -> "Summary":
        errs = [r.rmse for r in results]
        times = [r.wall_time_s for r in results]
        many = len(results) >= 2
        return cls(
            variant,
            len(results),
            statistics.fmean(errs),
            statistics.stdev(errs) if many else None,
            statistics.fmean(times),
            statistics.stdev(times) if many else None,
        )


def _one_repetition(hp, ds, plan, rep, threads):
    p = rotate_folds(plan, rep)
    tr, va, te = (subset(ds, p, role) for role in ("train", "validation", "test"))
    t0 = time.perf_counter()
    model, report = train(hp.replace(seed=hp.seed + rep), tr, va, threads=threads)
    elapsed = time.perf_counter() - t0
    return EvalResult(
        hp.variant, rep, rmse(model, te), te.nnz, elapsed, report.iterations, report.reason, plan.digest()
    )


def run_cv(
    hp: Hyperparameters,
    ds: SparseDataset,
    repetitions: int = FOLD_COUNT,
    seed: int = 0,
    *,
    plan: FoldPlan | None = None,
    threads: int | None = None,
    concurrent: bool = False,
) -> tuple[list[EvalResult], Summary]:
    """Train on 7 folds, stop on 1, score on 2; rotate the roles ``repetitions`` times.

    Repetition r initialises with seed ``hp.seed + r``. ``concurrent`` runs
    repetitions in a thread pool; wall times are then perturbed by sharing
    the CPU, so keep it off when timings matter.
    """
    if not 1 <= repetitions <= FOLD_COUNT:
        raise ValueError(f"repetitions must be in 1..{FOLD_COUNT}, got {repetitions}")
    if ds.nnz < FOLD_COUNT:
        raise DataError(f"need at least {FOLD_COUNT} entries, got {ds.nnz}")
    if plan is None:
        plan = make_folds(ds, seed)
    reps = range(repetitions)
    if concurrent:
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(lambda r: _one_repetition(hp, ds, plan, r, threads), reps))
    else:
        results = [_one_repetition(hp, ds, plan, r, threads) for r in reps]
    return results, Summary.of(hp.variant, results)


def compare_variants(
    hp_base: Hyperparameters,
    ds: SparseDataset,
    variants: Iterable,
    seed: int = 0,
    repetitions: int = FOLD_COUNT,
    **kw,
) -> tuple[list[Summary], list[EvalResult]]:
    """Cross-validate each variant on one shared fold plan (paired comparison)."""
    plan = make_folds(ds, seed)
    summaries, runs = [], []
    for v in variants:
        v = Variant.parse(v)
        d2 = hp_base.d2 if v in (Variant.EBNL, Variant.DNLFA) else None
        fields = {f: getattr(hp_base, f) for f in ("d1", "lam", "e", "max_iters", "tol", "seed", "init_scale")}
        if d2 is not None:
            fields["d2"] = d2
        hp = Hyperparameters.for_variant(v, **fields)
        results, summary = run_cv(hp, ds, repetitions, seed, plan=plan, **kw)
        summaries.append(summary)
        runs.extend(results)
    return summaries, runs


# --------------------------------------------------------------------------- tables

TABLE_FIELDS = ("variant", "repetitions", "rmse_mean", "rmse_std", "time_mean_s", "time_std_s")
TIMING_FIELDS = ("time_mean_s", "time_std_s")


def _num(x: float | None, fmt: str) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else format(x, fmt)


def table_csv(summaries: Sequence[Summary], include_timing: bool = True) -> str:
    buf = io.StringIO()
    fields = [f for f in TABLE_FIELDS if include_timing or f not in TIMING_FIELDS]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for s in summaries:
        row = {
            "variant": s.variant.value,
            "repetitions": s.repetitions,
            "rmse_mean": _num(s.rmse_mean, ".10f"),
            "rmse_std": _num(s.rmse_std, ".10f"),
            "time_mean_s": _num(s.time_mean, ".3f"),
            "time_std_s": _num(s.time_std, ".3f"),
        }
        w.writerow([row[f] for f in fields])
    return buf.getvalue()


def table_markdown(summaries: Sequence[Summary], include_timing: bool = True) -> str:
    header = ["Model", "RMSE"] + (["Time (s)"] if include_timing else [])
    rows = []
    for s in summaries:
        cell = f"{s.rmse_mean:.4f}" + (f" ± {s.rmse_std:.1E}" if s.rmse_std is not None else "")
        line = [s.variant.value, cell]
        if include_timing:
            line.append(f"{s.time_mean:.2f}" + (f" ± {s.time_std:.2f}" if s.time_std is not None else ""))
        rows.append(line)
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    fmt = lambda cells: "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"
    out = [fmt(header), "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
    out.extend(fmt(r) for r in rows)
    return "\n".join(out) + "\n"


def runs_csv(results: Sequence[EvalResult], include_timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    fields = ["variant", "repetition", "rmse", "entry_count", "iterations", "reason", "plan"]
    if include_timing:
        fields.append("wall_time_s")
    w.writerow(fields)
    for r in results:
        row = [r.variant.value, r.repetition, repr(r.rmse), r.entry_count, r.iterations, r.reason, r.plan_digest]
        if include_timing:
            row.append(f"{r.wall_time_s:.6f}")
        w.writerow(row)
    return buf.getvalue()
