"""Planted-structure generators for experiments and benchmarks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SparseDataset


@dataclass(frozen=True)
class Planted:
    data: SparseDataset
    X: np.ndarray
    Y: np.ndarray
    row_bias: np.ndarray
    col_bias: np.ndarray
    sigma: float

    def truth(self, rows, cols) -> np.ndarray:
        """Noise-free planted value at each (row, col)."""
        return (self.X[rows] * self.Y[cols]).sum(axis=1) + self.row_bias[rows] + self.col_bias[cols]


def planted_biased(
    num_rows: int = 100,
    num_cols: int = 80,
    rank: int = 3,
    density: float = 0.15,
    sigma: float = 0.01,
    seed: int = 0,
    with_bias: bool = True,
) -> Planted:
    """Sample ``X Y^T + g 1^T + 1 h^T + noise`` on a random ``density`` fraction of cells.

    Factors and biases are uniform on [0, 1); noise is Gaussian with
    standard deviation ``sigma`` and observed values are clipped at zero.
    """
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, (num_rows, rank))
    Y = rng.uniform(0.0, 1.0, (num_cols, rank))
    g = rng.uniform(0.0, 1.0, num_rows) if with_bias else np.zeros(num_rows)
    h = rng.uniform(0.0, 1.0, num_cols) if with_bias else np.zeros(num_cols)
    observed = rng.random((num_rows, num_cols)) < density
    rows, cols = np.nonzero(observed)
    clean = (X[rows] * Y[cols]).sum(axis=1) + g[rows] + h[cols]
    vals = np.clip(clean + rng.normal(0.0, sigma, rows.size), 0.0, None)
    ds = SparseDataset(
        num_rows, num_cols, rows, cols, vals, np.arange(num_rows), np.arange(num_cols)
    )
    return Planted(ds, X, Y, g, h, sigma)


def random_sparse(num_rows: int, num_cols: int, density: float, seed: int = 0, high: float = 5.0) -> SparseDataset:
    """Uniform nonnegative values on a random subset of cells."""
    rng = np.random.default_rng(seed)
    observed = rng.random((num_rows, num_cols)) < density
    rows, cols = np.nonzero(observed)
    vals = rng.uniform(0.0, high, rows.size)
    return SparseDataset(num_rows, num_cols, rows, cols, vals, np.arange(num_rows), np.arange(num_cols))
