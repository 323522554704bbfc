"""Single-latent-factor nonnegative multiplicative updates with dynamic bias masks.

One iteration runs the phases X -> Y -> G -> H -> masks. Every phase reads
a prediction snapshot taken just before it starts, so all rows (or columns)
of a phase update independently of each other.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import kernels
from .data import DataError, SparseDataset
from .metrics import rmse
from .model import Hyperparameters, Model, init_model, objective

log = logging.getLogger(__name__)

DELTA = 1e-12
FAMILIES = ("X", "Y", "G", "H")
REPORT_FIELDS = ("iter", "objective", "train_rmse", "valid_rmse", "active_i", "active_j", "elapsed_s")


def _snapshot(model: Model, ds: SparseDataset, be) -> np.ndarray:
    return be.predict_entries(ds.rows, ds.cols, model.X, model.Y, *model.bias_arrays())


def phase_terms(model: Model, ds: SparseDataset, family: str, backend=None):
    """Numerator and denominator sums of one update family at the current state.

    For ``X``: ``num[m,k] = sum_n r*y[n,k]`` and
    ``den[m,k] = sum_n (rhat*y[n,k] + lam*x[m,k])`` over the observed
    entries of row m. ``G``/``H`` use the mask entry in place of ``y``.
    """
    be = kernels.get_backend(backend)
    rhat = _snapshot(model, ds, be)
    lam = model.hp.lam
    if family == "X":
        return be.factor_terms(ds.row_ptr, ds.row_perm, ds.cols, ds.vals, rhat, model.X, model.Y, lam)
    if family == "Y":
        return be.factor_terms(ds.col_ptr, ds.col_perm, ds.rows, ds.vals, rhat, model.Y, model.X, lam)
    if model.biases is None:
        raise ValueError(f"model has no biases; cannot compute {family} terms")
    b = model.biases
    if family == "G":
        return be.bias_terms(ds.row_ptr, ds.row_perm, ds.vals, rhat, b.G, b.I, lam)
    if family == "H":
        return be.bias_terms(ds.col_ptr, ds.col_perm, ds.vals, rhat, b.H, b.J, lam)
    raise ValueError(f"unknown family {family!r}")


def gradient(model: Model, ds: SparseDataset, family: str, backend=None) -> np.ndarray:
    """Partial derivatives of the objective w.r.t. one parameter block (``den - num``).

    Bias entries behind an inactive mask get ``|entries| * lam * g`` here,
    the additive-update bracket, although the objective does not depend
    on them.
    """
    num, den = phase_terms(model, ds, family, backend)
    return den - num


def _nonempty(ptr: np.ndarray) -> np.ndarray:
    return np.diff(ptr) > 0


def _factor_step(F, num, den, live, delta):
    new = F.copy()
    new[live] = F[live] * num[live] / (den[live] + delta)
    return new


def _bias_step(B, mask, num, den, live, delta):
    new = B.copy()
    new[live] = B[live] * num[live] / (den[live] + delta)
    new[mask == 0] = 0.0
    return new


def update_X_phase(model: Model, ds: SparseDataset, delta: float = DELTA, backend=None) -> np.ndarray:
    num, den = phase_terms(model, ds, "X", backend)
    model.X = _factor_step(model.X, num, den, _nonempty(ds.row_ptr), delta)
    return model.X


def update_Y_phase(model: Model, ds: SparseDataset, delta: float = DELTA, backend=None) -> np.ndarray:
    num, den = phase_terms(model, ds, "Y", backend)
    model.Y = _factor_step(model.Y, num, den, _nonempty(ds.col_ptr), delta)
    return model.Y


def update_G_phase(model: Model, ds: SparseDataset, delta: float = DELTA, backend=None) -> np.ndarray:
    """Multiplicative row-bias update; biases behind an inactive mask are zeroed."""
    num, den = phase_terms(model, ds, "G", backend)
    b = model.biases
    b.G = _bias_step(b.G, b.I, num, den, _nonempty(ds.row_ptr), delta)
    return b.G


def update_H_phase(model: Model, ds: SparseDataset, delta: float = DELTA, backend=None) -> np.ndarray:
    num, den = phase_terms(model, ds, "H", backend)
    b = model.biases
    b.H = _bias_step(b.H, b.J, num, den, _nonempty(ds.col_ptr), delta)
    return b.H


def update_masks(model: Model, e: float):
    """Deactivate every mask entry whose bias is strictly below ``e``; never reactivates."""
    b = model.biases
    b.I[b.G < e] = 0
    b.J[b.H < e] = 0
    return b.I, b.J


def run_iteration(model: Model, ds: SparseDataset, delta: float = DELTA, backend=None) -> None:
    update_X_phase(model, ds, delta, backend)
    update_Y_phase(model, ds, delta, backend)
    if model.biases is not None:
        update_G_phase(model, ds, delta, backend)
        update_H_phase(model, ds, delta, backend)
        if model.hp.dynamic_masks:
            update_masks(model, model.hp.e)


class IterationRecord(NamedTuple):
    iteration: int
    objective: float
    train_rmse: float
    valid_rmse: float
    active_i: int
    active_j: int
    elapsed_s: float


@dataclass
class TrainReport:
    records: list[IterationRecord] = field(default_factory=list)
    reason: str = "max-iters"
    monitor: str = "validation"

    @property
    def iterations(self) -> int:
        return len(self.records)

    def monitored(self) -> np.ndarray:
        col = "valid_rmse" if self.monitor == "validation" else "train_rmse"
        return np.array([getattr(r, col) for r in self.records])

    def to_csv(self, include_timing: bool = True) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        fields = REPORT_FIELDS if include_timing else REPORT_FIELDS[:-1]
        writer.writerow(fields)
        for r in self.records:
            row = [r.iteration, repr(r.objective), repr(r.train_rmse), repr(r.valid_rmse), r.active_i, r.active_j]
            if include_timing:
                row.append(f"{r.elapsed_s:.6f}")
            writer.writerow(row)
        return buf.getvalue()


def train(
    hp: Hyperparameters,
    train_ds: SparseDataset,
    valid_ds: SparseDataset | None = None,
    seed: int | None = None,
    *,
    model: Model | None = None,
    threads: int | None = None,
    backend: str | None = None,
    callback: Callable[[int, Model], None] | None = None,
) -> tuple[Model, TrainReport]:
    """Fit ``hp`` to ``train_ds``.

    Stops after ``hp.max_iters`` iterations or as soon as the monitored
    RMSE (validation if ``valid_ds`` has entries, otherwise training)
    changes by less than ``hp.tol`` between consecutive iterations; the
    initial model provides the iteration-0 value. ``model`` overrides the
    random initialisation (it is copied, not mutated). ``callback`` sees
    the live model after every iteration.
    """
    if train_ds.nnz == 0:
        raise DataError("training set is empty")
    be = kernels.get_backend(backend)
    if threads is not None:
        be.set_threads(threads)
    if model is None:
        model = init_model(
            hp, train_ds.num_rows, train_ds.num_cols, seed, train_ds.row_ids, train_ds.col_ids
        )
    else:
        model = model.copy()
        model.hp = hp
    use_valid = valid_ds is not None and valid_ds.nnz > 0
    report = TrainReport(monitor="validation" if use_valid else "train")
    if hp.max_iters == 0:
        return model, report

    prev = rmse(model, valid_ds if use_valid else train_ds, be.name)
    t0 = time.perf_counter()
    for it in range(1, hp.max_iters + 1):
        run_iteration(model, train_ds, DELTA, be.name)
        train_rmse = rmse(model, train_ds, be.name)
        valid_rmse = rmse(model, valid_ds, be.name) if use_valid else math.nan
        ai, aj = model.biases.active_counts() if model.biases is not None else (0, 0)
        report.records.append(
            IterationRecord(
                it,
                objective(model, train_ds, be.name),
                train_rmse,
                valid_rmse,
                ai,
                aj,
                time.perf_counter() - t0,
            )
        )
        if callback is not None:
            callback(it, model)
        cur = valid_rmse if use_valid else train_rmse
        if abs(cur - prev) < hp.tol:
            report.reason = "tol-reached"
            break
        prev = cur
    log.debug("stopped after %d iterations (%s)", report.iterations, report.reason)
    return model, report
