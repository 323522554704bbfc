from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import kernels
from .data import SparseDataset


def rmse(model, ds: SparseDataset, backend=None) -> float:
    """Root mean squared error of ``model`` over the entries of ``ds``."""
    if ds.nnz == 0:
        raise ValueError("cannot score an empty entry set")
    if ds.num_rows != model.num_rows or ds.num_cols != model.num_cols:
        raise ValueError("scored dataset does not match the model dimensions")
    be = kernels.get_backend(backend)
    rhat = be.predict_entries(ds.rows, ds.cols, model.X, model.Y, *model.bias_arrays())
    return math.sqrt(be.squared_error(ds.vals, rhat) / ds.nnz)


def rmse_from_predictions(
    ds: SparseDataset, predict: Callable[[np.ndarray, np.ndarray], np.ndarray]
) -> float:
    """Model-free scoring: ``predict(rows, cols)`` returns one estimate per entry."""
    if ds.nnz == 0:
        raise ValueError("cannot score an empty entry set")
    res = ds.vals - np.asarray(predict(ds.rows, ds.cols), dtype=np.float64)
    return math.sqrt(float(np.dot(res, res)) / ds.nnz)
