"""Nonnegative latent factor analysis of sparse matrices with dynamic linear biases."""

from .data import (
    DataError,
    FoldPlan,
    SparseDataset,
    density,
    dump_triples,
    from_triples,
    load_triples,
    make_folds,
    rotate_folds,
    subset,
)
from .evaluation import EvalResult, Summary, compare_variants, run_cv
from .metrics import rmse
from .model import Hyperparameters, Model, Variant, init_model, load_model, objective, save_model
from .trainer import TrainReport, train

__version__ = "0.1.0"
