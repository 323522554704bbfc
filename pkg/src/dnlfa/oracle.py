"""Dense brute-force reference implementations, for tests only.

Everything here loops over the full ``M x N`` grid in plain Python and
shares no code with the sparse kernels, so it can check them.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Mapping

import numpy as np

DEFAULT_CAP = 10_000
FAMILIES = ("X", "Y", "G", "H")


class OracleError(ValueError):
    pass


@dataclass
class DenseState:
    X: np.ndarray
    Y: np.ndarray
    G: np.ndarray
    H: np.ndarray
    I: np.ndarray
    J: np.ndarray
    R: np.ndarray  # full grid, zero where unobserved
    W: np.ndarray  # observed mask
    lam: float

    @classmethod
    def from_model(cls, model, ds, cap: int = DEFAULT_CAP) -> "DenseState":
        M, N = ds.num_rows, ds.num_cols
        if M * N > cap:
            raise OracleError(f"{M}x{N} grid exceeds the dense cap of {cap} cells")
        R = np.zeros((M, N))
        W = np.zeros((M, N), dtype=bool)
        for r, c, v in zip(ds.rows, ds.cols, ds.vals):
            R[r, c] = v
            W[r, c] = True
        G, H, I, J = model.bias_arrays()
        return cls(
            model.X.copy(), model.Y.copy(), G.astype(float), H.astype(float),
            I.astype(float), J.astype(float), R, W, model.hp.lam,
        )

    def copy(self) -> "DenseState":
        return replace(self, **{f: getattr(self, f).copy() for f in FAMILIES + ("I", "J")})

    def block(self, family: str) -> np.ndarray:
        if family not in FAMILIES:
            raise OracleError(f"unknown parameter family {family!r}")
        return getattr(self, family)


def _rhat(s: DenseState, m: int, n: int) -> float:
    acc = 0.0
    for k in range(s.X.shape[1]):
        acc += s.X[m, k] * s.Y[n, k]
    for k in range(s.G.shape[1]):
        acc += s.I[m, k] * s.G[m, k] + s.J[n, k] * s.H[n, k]
    return acc


def dense_objective(s: DenseState) -> float:
    """Objective summed over every observed cell of the dense grid."""
    bias_m = s.I * s.G
    bias_n = s.J * s.H
    rhat = s.X @ s.Y.T + bias_m.sum(axis=1)[:, None] + bias_n.sum(axis=1)[None, :]
    reg = ((s.X ** 2).sum(axis=1) + (bias_m ** 2).sum(axis=1))[:, None] + (
        (s.Y ** 2).sum(axis=1) + (bias_n ** 2).sum(axis=1)
    )[None, :]
    cell = 0.5 * ((s.R - rhat) ** 2 + s.lam * reg)
    return float(cell[s.W].sum())


def fd_gradient(s: DenseState, family: str, index: int, k: int, h: float = 1e-6) -> float:
    """Central difference of :func:`dense_objective` along one scalar coordinate."""
    if not h > 0:
        raise OracleError("step must be positive")
    blk = s.block(family)
    if not (0 <= index < blk.shape[0] and 0 <= k < blk.shape[1]):
        raise OracleError(f"coordinate {family}[{index},{k}] out of range")
    orig = blk[index, k]
    blk[index, k] = orig + h
    up = dense_objective(s)
    blk[index, k] = orig - h
    down = dense_objective(s)
    blk[index, k] = orig
    return (up - down) / (2 * h)


def lift_from_zero(s: DenseState, h: float, value: float = 0.1) -> DenseState:
    """Copy of ``s`` with parameters closer than ``10*h`` to zero moved to ``value``."""
    out = s.copy()
    for f in FAMILIES:
        blk = out.block(f)
        blk[blk < 10 * h] = value
    return out


def _owner_entries(s: DenseState, family: str, i: int):
    """(rhat, r, partner-row) triples of the observed entries touching row/column i."""
    M, N = s.R.shape
    if family in ("X", "G"):
        return [(_rhat(s, i, n), s.R[i, n], n) for n in range(N) if s.W[i, n]]
    return [(_rhat(s, m, i), s.R[m, i], m) for m in range(M) if s.W[m, i]]


def descent_bracket(s: DenseState, family: str) -> np.ndarray:
    """The additive-gradient bracket, e.g. ``sum_n (y*(r - rhat) - lam*x)`` for X.

    For the bias families the multiplier is the mask entry and the
    penalty term is ``lam*g`` (not gated by the mask).
    """
    blk = s.block(family)
    out = np.zeros_like(blk)
    partner = {"X": s.Y, "Y": s.X}.get(family)
    mask = {"G": s.I, "H": s.J}.get(family)
    for i in range(blk.shape[0]):
        for rh, r, p in _owner_entries(s, family, i):
            for k in range(blk.shape[1]):
                mult = partner[p, k] if partner is not None else mask[i, k]
                out[i, k] += mult * (r - rh) - s.lam * blk[i, k]
    return out


def canceling_rates(s: DenseState, family: str) -> np.ndarray:
    """Per-coordinate step sizes ``param / sum(rhat*mult + lam*param)`` (0 for empty rows)."""
    blk = s.block(family)
    out = np.zeros_like(blk)
    partner = {"X": s.Y, "Y": s.X}.get(family)
    mask = {"G": s.I, "H": s.J}.get(family)
    for i in range(blk.shape[0]):
        ents = _owner_entries(s, family, i)
        if not ents:
            continue
        for k in range(blk.shape[1]):
            den = 0.0
            for rh, _, p in ents:
                mult = partner[p, k] if partner is not None else mask[i, k]
                den += rh * mult + s.lam * blk[i, k]
            out[i, k] = blk[i, k] / den
    return out


Rates = Mapping[str, np.ndarray] | Callable[[DenseState, str], np.ndarray]


def agd_phase(s: DenseState, family: str, eta: np.ndarray) -> DenseState:
    """One additive step for one family; all coordinates read the same snapshot."""
    out = s.copy()
    bracket = descent_bracket(s, family)
    setattr(out, family, s.block(family) + eta * bracket)
    return out


def agd_step(s: DenseState, learning_rates: Rates) -> DenseState:
    """Additive steps for X, Y, then G, H (when present), re-predicting between phases."""
    families = FAMILIES if s.G.shape[1] else FAMILIES[:2]
    for f in families:
        eta = learning_rates(s, f) if callable(learning_rates) else learning_rates[f]
        s = agd_phase(s, f, np.asarray(eta, dtype=float))
    return s
