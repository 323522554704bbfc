import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnlfa.data import SparseDataset
from dnlfa.evaluation import compare_variants, rmse, rmse_from_predictions, run_cv, runs_csv, table_csv, table_markdown
from dnlfa.model import BiasBank, Hyperparameters, Model, Variant
from dnlfa.synthetic import planted_biased

HP = Hyperparameters(d1=3, d2=2, lam=0.01, e=0.01, max_iters=40, tol=1e-4)


def _constant_model(M, N, value):
    hp = Hyperparameters.for_variant("nlfa", d1=1)
    return Model(hp, np.full((M, 1), math.sqrt(value)), np.full((N, 1), math.sqrt(value)), None, np.arange(M), np.arange(N))


def test_rmse_examples():
    one = SparseDataset(1, 1, [0], [0], [1.0], [0], [0])
    assert rmse(_constant_model(1, 1, 0.0), one) == 1.0
    two = SparseDataset(1, 2, [0, 0], [0, 1], [3.0, 4.0], [0], [0, 1])
    assert rmse(_constant_model(1, 2, 0.0), two) == pytest.approx(5 / math.sqrt(2), rel=1e-15)
    exact = SparseDataset(2, 2, [0, 1], [1, 0], [4.0, 4.0], [0, 1], [0, 1])
    assert rmse(_constant_model(2, 2, 4.0), exact) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        rmse(_constant_model(1, 1, 0.0), SparseDataset(1, 1, [], [], [], [0], [0]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 1000), st.floats(0.0, 50.0))
def test_rmse_scale_consistency(seed, alpha):
    rng = np.random.default_rng(seed)
    ds = planted_biased(6, 5, density=0.6, seed=seed).data
    preds = rng.uniform(0, 3, ds.nnz)
    lookup = {(int(r), int(c)): p for r, c, p in zip(ds.rows, ds.cols, preds)}
    predict = lambda rows, cols, s=1.0: np.array([s * lookup[(int(r), int(c))] for r, c in zip(rows, cols)])
    scaled = SparseDataset(ds.num_rows, ds.num_cols, ds.rows, ds.cols, alpha * ds.vals, ds.row_ids, ds.col_ids)
    base = rmse_from_predictions(ds, predict)
    assert rmse_from_predictions(scaled, lambda r, c: predict(r, c, alpha)) == pytest.approx(alpha * base, rel=1e-12, abs=1e-12)


def test_rmse_zero_iff_exact():
    ds = planted_biased(6, 5, density=0.6).data
    assert rmse_from_predictions(ds, lambda r, c: ds.vals) == 0.0
    assert rmse_from_predictions(ds, lambda r, c: ds.vals + 1e-9) > 0.0


@pytest.fixture(scope="module")
def small():
    return planted_biased(30, 25, density=0.25, seed=3).data


def test_run_cv_single_repetition(small):
    results, summary = run_cv(HP, small, repetitions=1, seed=1)
    assert len(results) == 1 and summary.rmse_std is None and summary.time_std is None
    assert results[0].entry_count > 0 and results[0].rmse >= 0


def test_run_cv_deterministic(small):
    a, _ = run_cv(HP, small, repetitions=3, seed=4)
    b, _ = run_cv(HP, small, repetitions=3, seed=4)
    assert [r.rmse for r in a] == [r.rmse for r in b]


def test_run_cv_concurrent_same_numbers(small):
    a, _ = run_cv(HP, small, repetitions=3, seed=4)
    b, _ = run_cv(HP, small, repetitions=3, seed=4, concurrent=True)
    assert [r.rmse for r in a] == [r.rmse for r in b]


def test_run_cv_test_sets_cover_every_fold_twice(small):
    results, _ = run_cv(HP.replace(max_iters=2), small, repetitions=10, seed=0)
    from dnlfa.data import make_folds, rotate_folds

    plan = make_folds(small, 0)
    counts = np.zeros(small.nnz, int)
    for r in results:
        counts[np.isin(plan.assignment, rotate_folds(plan, r.repetition).test_folds)] += 1
    assert np.all(counts == 2)
    assert sum(r.entry_count for r in results) == 2 * small.nnz


def test_run_cv_errors(small):
    with pytest.raises(ValueError):
        run_cv(HP, small, repetitions=11)
    with pytest.raises(ValueError):
        run_cv(HP, small, repetitions=0)
    tiny = SparseDataset(3, 3, [0, 1, 2], [0, 1, 2], [1.0, 1.0, 1.0], np.arange(3), np.arange(3))
    with pytest.raises(ValueError):
        run_cv(HP, tiny, repetitions=1)


def test_compare_single_variant(small):
    summaries, _ = compare_variants(HP, small, ["nlfa"], repetitions=2)
    assert [s.variant for s in summaries] == [Variant.NLFA]
    assert len(table_csv(summaries).splitlines()) == 2


def test_compare_is_paired(small):
    summaries, runs = compare_variants(HP, small, ["nlfa", "bnlfa", "ebnl", "dnlfa"], repetitions=2)
    assert len({r.plan_digest for r in runs}) == 1
    assert [s.variant.value for s in summaries] == ["NLFA", "BNLFA", "EBNL", "DNLFA"]


def test_dnlfa_without_deactivation_equals_ebnl(small):
    hp = HP.replace(e=1e-300)
    summaries, runs = compare_variants(hp, small, ["ebnl", "dnlfa"], repetitions=3)
    assert [r.rmse for r in runs if r.variant is Variant.EBNL] == [r.rmse for r in runs if r.variant is Variant.DNLFA]
    assert summaries[0].rmse_mean == summaries[1].rmse_mean


def test_tables(small):
    summaries, runs = compare_variants(HP, small, ["nlfa", "dnlfa"], repetitions=2)
    csv_text = table_csv(summaries)
    assert csv_text.splitlines()[0] == "variant,repetitions,rmse_mean,rmse_std,time_mean_s,time_std_s"
    assert "time" not in table_csv(summaries, include_timing=False)
    md = table_markdown(summaries).splitlines()
    assert md[0].startswith("| Model") and len(md) == 4 and "±" in md[2]
    assert len(runs_csv(runs).splitlines()) == 5
