"""Model state: latent factors, gated bias banks, predictions and the objective."""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .data import SparseDataset

DEFAULT_D1 = 20
DEFAULT_D2 = 5
DEFAULT_MAX_ITERS = 1000
DEFAULT_TOL = 1e-5
# not published values; chosen for this package
DEFAULT_LAMBDA = 0.05
DEFAULT_THRESHOLD = 0.01
DEFAULT_INIT_SCALE = 0.05

MODEL_MAGIC = "dnlfa-model"
MODEL_VERSION = "v1"


class Variant(str, enum.Enum):
    NLFA = "NLFA"  # no biases
    BNLFA = "BNLFA"  # one bias column per side, always active
    EBNL = "EBNL"  # bias matrices, always active
    DNLFA = "DNLFA"  # bias matrices with deactivating masks

    @classmethod
    def parse(cls, text: str | "Variant") -> "Variant":
        if isinstance(text, cls):
            return text
        try:
            return cls(text.strip().upper())
        except ValueError:
            names = ", ".join(v.value.lower() for v in cls)
            raise ValueError(f"unknown variant {text!r}; expected one of {names}") from None


class ConfigError(ValueError):
    """Invalid hyperparameter combination."""


@dataclass(frozen=True)
class Hyperparameters:
    d1: int = DEFAULT_D1
    d2: int = DEFAULT_D2
    lam: float = DEFAULT_LAMBDA
    e: float = DEFAULT_THRESHOLD
    max_iters: int = DEFAULT_MAX_ITERS
    tol: float = DEFAULT_TOL
    seed: int = 0
    variant: Variant = Variant.DNLFA
    init_scale: float = DEFAULT_INIT_SCALE

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.d1 < 1:
            raise ConfigError(f"d1 must be positive, got {self.d1}")
        if self.d2 < 0:
            raise ConfigError(f"d2 must be nonnegative, got {self.d2}")
        if not self.lam > 0:
            raise ConfigError(f"lambda must be positive, got {self.lam}")
        if self.e < 0:
            raise ConfigError(f"threshold e must be nonnegative, got {self.e}")
        if self.max_iters < 0:
            raise ConfigError(f"max_iters must be nonnegative, got {self.max_iters}")
        if self.tol < 0:
            raise ConfigError(f"tol must be nonnegative, got {self.tol}")
        if not self.init_scale > 0:
            raise ConfigError(f"init_scale must be positive, got {self.init_scale}")
        v = self.variant
        if v is Variant.NLFA and self.d2 != 0:
            raise ConfigError(f"NLFA has no biases: d2 must be 0, got {self.d2}")
        if v is Variant.BNLFA and self.d2 != 1:
            raise ConfigError(f"BNLFA uses bias vectors: d2 must be 1, got {self.d2}")
        if v in (Variant.EBNL, Variant.DNLFA) and self.d2 < 1:
            raise ConfigError(f"{v.value} needs d2 >= 1, got {self.d2}")
        if v is Variant.DNLFA and not self.e > 0:
            raise ConfigError(f"DNLFA needs a positive threshold e, got {self.e}")

    @classmethod
    def for_variant(cls, variant, **kw) -> "Hyperparameters":
        """Build hyperparameters, forcing d2 where the variant fixes it."""
        variant = Variant.parse(variant)
        if variant is Variant.NLFA:
            kw["d2"] = 0
        elif variant is Variant.BNLFA:
            kw["d2"] = 1
        return cls(variant=variant, **kw)

    @property
    def dynamic_masks(self) -> bool:
        return self.variant is Variant.DNLFA

    def replace(self, **kw) -> "Hyperparameters":
        return replace(self, **kw)


@dataclass
class BiasBank:
    G: np.ndarray
    H: np.ndarray
    I: np.ndarray
    J: np.ndarray

    def active_counts(self) -> tuple[int, int]:
        return int(self.I.sum()), int(self.J.sum())


@dataclass
class Model:
    hp: Hyperparameters
    X: np.ndarray
    Y: np.ndarray
    biases: BiasBank | None
    row_ids: np.ndarray = field(repr=False)
    col_ids: np.ndarray = field(repr=False)

    @property
    def num_rows(self) -> int:
        return self.X.shape[0]

    @property
    def num_cols(self) -> int:
        return self.Y.shape[0]

    def bias_arrays(self):
        """(G, H, I, J), with zero-width stand-ins when the model has no biases."""
        if self.biases is None:
            z = np.zeros((self.num_rows, 0))
            w = np.zeros((self.num_cols, 0))
            return z, w, z.astype(np.uint8), w.astype(np.uint8)
        b = self.biases
        return b.G, b.H, b.I, b.J

    def copy(self) -> "Model":
        b = self.biases
        return Model(
            self.hp,
            self.X.copy(),
            self.Y.copy(),
            None if b is None else BiasBank(b.G.copy(), b.H.copy(), b.I.copy(), b.J.copy()),
            self.row_ids,
            self.col_ids,
        )

    def transpose(self) -> "Model":
        """Swap the roles of rows and columns (X<->Y, G<->H, I<->J)."""
        b = self.biases
        return Model(
            self.hp,
            self.Y.copy(),
            self.X.copy(),
            None if b is None else BiasBank(b.H.copy(), b.G.copy(), b.J.copy(), b.I.copy()),
            self.col_ids,
            self.row_ids,
        )

    def state_equal(self, other: "Model") -> bool:
        """Bit-exact comparison of every matrix and mask."""
        if not (np.array_equal(self.X, other.X) and np.array_equal(self.Y, other.Y)):
            return False
        if (self.biases is None) != (other.biases is None):
            return False
        if self.biases is None:
            return True
        a, b = self.biases, other.biases
        return all(np.array_equal(p, q) for p, q in zip((a.G, a.H, a.I, a.J), (b.G, b.H, b.I, b.J)))

    def predict(self, m: int, n: int) -> float:
        if not (0 <= m < self.num_rows and 0 <= n < self.num_cols):
            raise IndexError(f"({m}, {n}) outside a {self.num_rows}x{self.num_cols} model")
        acc = 0.0
        for k in range(self.X.shape[1]):
            acc += float(self.X[m, k]) * float(self.Y[n, k])
        if self.biases is not None:
            b = self.biases
            for k in range(b.G.shape[1]):
                acc += float(b.I[m, k]) * float(b.G[m, k]) + float(b.J[n, k]) * float(b.H[n, k])
        return acc

    def predict_entries(self, rows, cols, backend=None) -> np.ndarray:
        rows = np.ascontiguousarray(rows, dtype=np.int64)
        cols = np.ascontiguousarray(cols, dtype=np.int64)
        be = kernels.get_backend(backend)
        return be.predict_entries(rows, cols, self.X, self.Y, *self.bias_arrays())


def init_model(
    hp: Hyperparameters,
    num_rows: int,
    num_cols: int,
    seed: int | None = None,
    row_ids=None,
    col_ids=None,
) -> Model:
    """Draw X, Y, G, H i.i.d. uniform on (0, init_scale]; all masks active.

    Draw order is X, Y, G, H from one generator, so variants sharing a seed
    start from identical latent factors.
    """
    if num_rows <= 0 or num_cols <= 0:
        raise ValueError(f"model dimensions must be positive, got {num_rows}x{num_cols}")
    rng = np.random.default_rng(hp.seed if seed is None else seed)

    def draw(shape):
        return hp.init_scale * (1.0 - rng.random(shape))

    X = draw((num_rows, hp.d1))
    Y = draw((num_cols, hp.d1))
    biases = None
    if hp.d2 > 0:
        G = draw((num_rows, hp.d2))
        H = draw((num_cols, hp.d2))
        biases = BiasBank(
            G, H, np.ones((num_rows, hp.d2), np.uint8), np.ones((num_cols, hp.d2), np.uint8)
        )
    row_ids = np.arange(num_rows, dtype=np.int64) if row_ids is None else np.asarray(row_ids, np.int64)
    col_ids = np.arange(num_cols, dtype=np.int64) if col_ids is None else np.asarray(col_ids, np.int64)
    return Model(hp, X, Y, biases, row_ids, col_ids)


def _check_compatible(model: Model, ds: SparseDataset):
    if ds.num_rows != model.num_rows or ds.num_cols != model.num_cols:
        raise ValueError(
            f"dataset is {ds.num_rows}x{ds.num_cols}, model is {model.num_rows}x{model.num_cols}"
        )


def objective(model: Model, ds: SparseDataset, backend=None) -> float:
    """Half the sum over observed entries of squared residual plus per-entry L2 penalty.

    The penalty for entry (m, n) covers row m's and column n's factors and
    gated biases, so a row is penalised once per observed entry.
    """
    _check_compatible(model, ds)
    be = kernels.get_backend(backend)
    rhat = be.predict_entries(ds.rows, ds.cols, model.X, model.Y, *model.bias_arrays())
    total = be.loss_sums(
        ds.rows, ds.cols, ds.vals, rhat, model.X, model.Y, *model.bias_arrays(), model.hp.lam
    )
    return 0.5 * total


# --------------------------------------------------------------------------- model files


class ModelFormatError(ValueError):
    pass


class ModelVersionError(ModelFormatError):
    pass


class ModelDimensionError(ModelFormatError):
    pass


class ModelCorruptError(ModelFormatError):
    pass


def _fmt_row(row) -> str:
    return " ".join(repr(float(v)) for v in row)


def dumps_model(model: Model) -> str:
    hp = model.hp
    out = io.StringIO()
    w = out.write
    w(f"{MODEL_MAGIC} {MODEL_VERSION}\n")
    w(f"variant {hp.variant.value}\n")
    w(f"dims {model.num_rows} {model.num_cols} {hp.d1} {hp.d2}\n")
    w(f"lambda {hp.lam!r}\n")
    w(f"e {hp.e!r}\n")
    w(f"max_iters {hp.max_iters}\ntol {hp.tol!r}\nseed {hp.seed}\ninit_scale {hp.init_scale!r}\n")
    blocks = [("X", model.X), ("Y", model.Y)]
    if model.biases is not None:
        b = model.biases
        blocks += [("G", b.G), ("H", b.H)]
    for name, mat in blocks:
        w(f"{name} {mat.shape[0]} {mat.shape[1]}\n")
        for row in mat:
            w(_fmt_row(row) + "\n")
    if model.biases is not None:
        for name, mask in (("I", model.biases.I), ("J", model.biases.J)):
            w(f"{name} {mask.shape[0]} {mask.shape[1]}\n")
            for row in mask:
                w(" ".join(str(int(v)) for v in row) + "\n")
    for name, ids in (("row_map", model.row_ids), ("col_map", model.col_ids)):
        w(f"{name} {ids.size}\n")
        w(" ".join(str(int(v)) for v in ids) + "\n")
    w("end\n")
    return out.getvalue()


class _Reader:
    def __init__(self, text: str):
        self.lines = text.split("\n")
        self.pos = 0

    def next(self) -> str:
        if self.pos >= len(self.lines) or (self.pos == len(self.lines) - 1 and not self.lines[-1]):
            raise ModelCorruptError(f"unexpected end of model data after line {self.pos}")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def keyed(self, key: str) -> list[str]:
        parts = self.next().split()
        if not parts or parts[0] != key:
            raise ModelCorruptError(f"line {self.pos}: expected {key!r}")
        return parts[1:]


def loads_model(text: str) -> Model:
    """Parse a model file; raises a ``ModelFormatError`` subclass and never returns a partial model."""
    try:
        return _parse_model(text)
    except ModelFormatError:
        raise
    except (ValueError, IndexError) as exc:
        raise ModelCorruptError(f"malformed model data: {exc}") from None


def _parse_model(text: str) -> Model:
    rd = _Reader(text)
    head = rd.next().split()
    if len(head) != 2 or head[0] != MODEL_MAGIC:
        raise ModelCorruptError("not a model file")
    if head[1] != MODEL_VERSION:
        raise ModelVersionError(f"unsupported model version {head[1]!r}, expected {MODEL_VERSION}")
    variant = Variant.parse(rd.keyed("variant")[0])
    M, N, d1, d2 = (int(v) for v in rd.keyed("dims"))
    lam = float(rd.keyed("lambda")[0])
    e = float(rd.keyed("e")[0])
    max_iters = int(rd.keyed("max_iters")[0])
    tol = float(rd.keyed("tol")[0])
    seed = int(rd.keyed("seed")[0])
    init_scale = float(rd.keyed("init_scale")[0])
    hp = Hyperparameters(d1, d2, lam, e, max_iters, tol, seed, variant, init_scale)

    def block(name, shape, dtype):
        dims = tuple(int(v) for v in rd.keyed(name))
        if dims != shape:
            raise ModelDimensionError(f"block {name} has shape {dims}, expected {shape}")
        mat = np.empty(shape, dtype=dtype)
        for i in range(shape[0]):
            parts = rd.next().split()
            if len(parts) != shape[1]:
                raise ModelCorruptError(f"block {name} row {i}: expected {shape[1]} values")
            try:
                mat[i] = [float(v) if dtype is np.float64 else int(v) for v in parts]
            except ValueError:
                raise ModelCorruptError(f"block {name} row {i}: unparsable value") from None
        return mat

    X = block("X", (M, d1), np.float64)
    Y = block("Y", (N, d1), np.float64)
    biases = None
    if d2 > 0:
        G = block("G", (M, d2), np.float64)
        H = block("H", (N, d2), np.float64)
        I = block("I", (M, d2), np.uint8)
        J = block("J", (N, d2), np.uint8)
        if I.max(initial=0) > 1 or J.max(initial=0) > 1:
            raise ModelCorruptError("masks must be 0/1")
        biases = BiasBank(G, H, I, J)

    def ids(name, size):
        (count,) = (int(v) for v in rd.keyed(name))
        if count != size:
            raise ModelDimensionError(f"{name} has {count} ids, expected {size}")
        parts = rd.next().split()
        if len(parts) != size:
            raise ModelCorruptError(f"{name}: expected {size} ids")
        return np.array([int(v) for v in parts], dtype=np.int64)

    row_ids = ids("row_map", M)
    col_ids = ids("col_map", N)
    if rd.next().strip() != "end":
        raise ModelCorruptError("missing end marker")
    return Model(hp, X, Y, biases, row_ids, col_ids)


def save_model(model: Model, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_model(model))


def load_model(path) -> Model:
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
