import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnlfa.data import (
    DataError,
    FoldPlan,
    SparseDataset,
    density,
    dumps_triples,
    from_triples,
    loads_triples,
    make_folds,
    rotate_folds,
    subset,
)
from dnlfa.synthetic import random_sparse


def test_load_three_lines():
    ds = loads_triples("1 7 5.0\n1 9 3.0\n2 7 1.0\n")
    assert (ds.num_rows, ds.num_cols, ds.nnz) == (2, 2, 3)
    assert len(ds.row_entries(ds.row_index(1))) == 2
    assert ds.row_entries(ds.row_index(1)) == [(0, 5.0), (1, 3.0)]
    assert ds.col_entries(ds.col_index(7)) == [(0, 5.0), (1, 1.0)]


def test_load_empty_stream():
    ds = loads_triples("")
    assert (ds.num_rows, ds.num_cols, ds.nnz) == (0, 0, 0)


@pytest.mark.parametrize(
    "text",
    ["1,7,5.0\n2,9,1\n", "1\t7\t5.0\n2\t9\t1\n", "# header\n1 7 5.0\n\n2  9 1\n"],
)
def test_delimiters_and_comments(text):
    ds = loads_triples(text)
    assert ds.nnz == 2
    assert list(ds.row_ids) == [1, 2]
    assert list(ds.col_ids) == [7, 9]


def test_negative_value_names_line():
    with pytest.raises(DataError) as exc:
        loads_triples("1 7 -2.0\n")
    assert exc.value.line == 1
    assert "line 1" in str(exc.value)


def test_duplicate_names_both_lines():
    with pytest.raises(DataError) as exc:
        loads_triples("1 7 2.0\n3 3 1\n1 7 4.0\n")
    assert exc.value.line == 3
    assert "line 1" in str(exc.value)


@pytest.mark.parametrize("bad", ["1 7\n", "a 7 1.0\n", "1 7 nan\n", "1 7 1.0 9\n", "1 7 inf\n"])
def test_malformed_lines(bad):
    with pytest.raises(DataError) as exc:
        loads_triples("2 2 1.0\n" + bad)
    assert exc.value.line == 2


def test_index_views_sorted_and_consistent():
    ds = random_sparse(30, 20, 0.3, seed=3)
    from_rows, from_cols = [], []
    for m in range(ds.num_rows):
        ent = ds.row_entries(m)
        cols = [c for c, _ in ent]
        assert cols == sorted(set(cols))
        from_rows += [(m, c, v) for c, v in ent]
    for n in range(ds.num_cols):
        ent = ds.col_entries(n)
        rows = [r for r, _ in ent]
        assert rows == sorted(set(rows))
        from_cols += [(r, n, v) for r, v in ent]
    direct = sorted(zip(ds.rows.tolist(), ds.cols.tolist(), ds.vals.tolist()))
    assert sorted(from_rows) == direct
    assert sorted(from_cols) == direct


triple_sets = st.dictionaries(
    st.tuples(st.integers(-50, 10_000), st.integers(-50, 10_000)),
    st.floats(0, 1e6, allow_nan=False, allow_infinity=False),
    max_size=60,
)


@settings(max_examples=60, deadline=None)
@given(triple_sets)
def test_round_trip(entries):
    ds = from_triples((r, c, v) for (r, c), v in entries.items())
    again = loads_triples(dumps_triples(ds))
    assert again.same_as(ds)


def test_density_table_row():
    assert density((2_811_718, 61_265, 1_623)) == pytest.approx(0.0283, abs=1e-4)


def test_density_edges():
    empty = SparseDataset(5, 5, [], [], [], np.arange(5), np.arange(5))
    assert density(empty) == 0.0
    r, c = np.divmod(np.arange(25), 5)
    full = SparseDataset(5, 5, r, c, np.ones(25), np.arange(5), np.arange(5))
    assert density(full) == 1.0
    with pytest.raises(DataError):
        density(loads_triples(""))


def _ds(n):
    return SparseDataset(n, 1, np.arange(n), np.zeros(n, int), np.ones(n), np.arange(n), [0])


def test_folds_divisible():
    plan = make_folds(_ds(100), seed=11)
    assert list(plan.fold_sizes()) == [10] * 10


def test_folds_balanced():
    sizes = sorted(make_folds(_ds(103), seed=2).fold_sizes())
    assert sizes == [10] * 7 + [11] * 3


def test_folds_deterministic():
    ds = _ds(57)
    assert np.array_equal(make_folds(ds, 5).assignment, make_folds(ds, 5).assignment)
    assert not np.array_equal(make_folds(ds, 5).assignment, make_folds(ds, 6).assignment)


def test_folds_too_small():
    with pytest.raises(DataError):
        make_folds(_ds(9), 0)


def test_rotation_roles():
    plan = make_folds(_ds(40), 0)
    assert plan.validation_fold == 7 and set(plan.test_folds) == {8, 9}
    p3 = rotate_folds(plan, 3)
    assert p3.validation_fold == 0 and set(p3.test_folds) == {1, 2}
    for rep in range(10):
        p = rotate_folds(plan, rep)
        roles = set(p.train_folds) | {p.validation_fold} | set(p.test_folds)
        assert roles == set(range(10)) and len(p.train_folds) == 7
    with pytest.raises(ValueError):
        rotate_folds(plan, 10)
    with pytest.raises(ValueError):
        rotate_folds(plan, -1)


def test_each_fold_tested_twice():
    # enumerate all ten rotations and count test appearances
    plan = make_folds(_ds(20), 0)
    counts = np.zeros(10, int)
    for rep in range(10):
        for f in rotate_folds(plan, rep).test_folds:
            counts[f] += 1
    assert list(counts) == [2] * 10


def test_subset_partition():
    ds = random_sparse(25, 25, 0.4, seed=1)
    plan = rotate_folds(make_folds(ds, 9), 4)
    parts = {role: subset(ds, plan, role) for role in ("train", "validation", "test")}
    keys = {role: {(int(r), int(c)) for r, c in zip(p.rows, p.cols)} for role, p in parts.items()}
    assert sum(len(k) for k in keys.values()) == ds.nnz
    assert set().union(*keys.values()) == {(int(r), int(c)) for r, c in zip(ds.rows, ds.cols)}
    for p in parts.values():
        assert (p.num_rows, p.num_cols) == (ds.num_rows, ds.num_cols)
        assert p.nnz > 0
    assert abs(parts["train"].nnz - 0.7 * ds.nnz) <= 7


def test_fold_plan_text_round_trip():
    plan = make_folds(_ds(23), seed=4)
    text = plan.dumps()
    assert text.splitlines()[0] == "folds=10 seed=4"
    back = FoldPlan.loads(text)
    assert np.array_equal(back.assignment, plan.assignment) and back.seed == 4
    with pytest.raises(DataError):
        FoldPlan.loads("folds=9 seed=1\n0\n")
    with pytest.raises(DataError):
        FoldPlan.loads("folds=10 seed=1\n12\n")


def test_transpose_swaps_views():
    ds = random_sparse(6, 4, 0.5, seed=0)
    t = ds.transpose()
    assert (t.num_rows, t.num_cols) == (4, 6)
    for n in range(4):
        assert t.row_entries(n) == ds.col_entries(n)


def test_dataset_is_read_only():
    ds = random_sparse(5, 5, 0.5)
    with pytest.raises(ValueError):
        ds.vals[0] = 1.0
    with pytest.raises(dataclasses.FrozenInstanceError):
        ds.num_rows = 3
