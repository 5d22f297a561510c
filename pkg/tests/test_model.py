import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kmeanslab.model import (
    Dataset,
    DatasetParseError,
    GmmSpec,
    Partition,
    ValidationError,
    balanced_size_mask,
    count_unbalanced,
    enumerate_bipartitions,
    is_correct_partition,
    is_q_balanced,
    load_dataset_csv,
    purity_view,
    sample_gmm,
    save_dataset_csv,
)


# -- GmmSpec / sample_gmm ----------------------------------------------------

def test_sample_shape_and_labels():
    ds = sample_gmm(GmmSpec(2, 3, 1.0, 1.0, (2, 2), seed=7))
    assert ds.data.shape == (4, 3)
    assert ds.labels.tolist() == [0, 0, 1, 1]


def test_zero_variances_give_zero_rows():
    ds = sample_gmm(GmmSpec(2, 5, 0.0, 0.0, (3, 2), seed=1))
    assert not np.any(ds.data)


def test_sample_is_bit_reproducible():
    spec = GmmSpec(3, 20, 1.0, 2.0, (4, 5, 6), seed=123)
    assert sample_gmm(spec).data.tobytes() == sample_gmm(spec).data.tobytes()


def test_sample_composition_with_kept_centers():
    spec = GmmSpec(2, 4, 1.0, 0.0, (2, 3), seed=3)
    ds = sample_gmm(spec, keep_centers=True)
    assert np.array_equal(ds.data, ds.centers[ds.labels])


def test_within_class_difference_variance():
    # Var(x_i - x_j) per coordinate is 2 sigma^2 within a class
    sigma_sq, d, seeds = 1.7, 200, 2000
    diffs = np.array([
        sample_gmm(GmmSpec(2, d, 1.0, sigma_sq, (2, 2), seed=s)).data[0]
        - sample_gmm(GmmSpec(2, d, 1.0, sigma_sq, (2, 2), seed=s)).data[1]
        for s in range(seeds)
    ])
    v = diffs.var(axis=0, ddof=1).mean()
    # variance of a mean over d independent sample-variances
    se = 2 * sigma_sq * math.sqrt(2 / (seeds - 1)) / math.sqrt(d)
    assert abs(v - 2 * sigma_sq) < 3 * se


def test_iid_labels_nonempty():
    ds = sample_gmm(GmmSpec(3, 2, 1.0, 1.0, (2, 2, 2), seed=5), label_mode="iid")
    assert set(ds.labels.tolist()) == {0, 1, 2}


@pytest.mark.parametrize("kwargs", [
    dict(K=1, d=2, tau_sq=1, sigma_sq=1, class_sizes=(3,)),
    dict(K=2, d=0, tau_sq=1, sigma_sq=1, class_sizes=(3, 3)),
    dict(K=2, d=2, tau_sq=-1, sigma_sq=1, class_sizes=(3, 3)),
    dict(K=2, d=2, tau_sq=1, sigma_sq=1, class_sizes=(3, 0)),
    dict(K=2, d=2, tau_sq=1, sigma_sq=1, class_sizes=(3,)),
])
def test_invalid_spec(kwargs):
    with pytest.raises(ValidationError):
        GmmSpec(**kwargs)


def test_spec_json_round_trip():
    spec = GmmSpec(2, 5, 1.0, 0.5, (3, 4), seed=99)
    text = spec.to_json()
    assert set(json.loads(text)) == {"K", "d", "tau_sq", "sigma_sq", "class_sizes", "seed"}
    assert GmmSpec.from_json(text) == spec
    with pytest.raises(ValidationError):
        GmmSpec.from_json(json.dumps({**json.loads(text), "extra": 1}))


def test_dataset_is_immutable():
    ds = Dataset(np.zeros((2, 2)), np.array([0, 1]))
    with pytest.raises(ValueError):
        ds.data[0, 0] = 1.0


# -- purity / correctness / balance ------------------------------------------

def test_purity_correct_partition():
    pv = purity_view(Partition([0, 0, 1, 1], 2), [0, 0, 1, 1])
    assert np.array_equal(pv.purity, np.eye(2))
    assert pv.r_star == 0.5


def test_purity_maximally_mixed():
    pv = purity_view(Partition([0, 1, 0, 1], 2), [0, 0, 1, 1])
    assert np.all(pv.purity == 0.5)


def test_purity_direct_count():
    pv = purity_view(Partition([0, 0, 0, 1], 2), [0, 0, 1, 1])
    assert pv.purity[0, 0] == pytest.approx(2 / 3)
    assert pv.purity[1, 1] == 1.0


def test_purity_empty_cluster_flagged():
    pv = purity_view(Partition([0, 0, 0], 2), [0, 1, 1])
    assert pv.empty == (1,)
    assert not np.any(np.isnan(pv.purity))


@given(st.lists(st.integers(0, 1), min_size=2, max_size=30), st.data())
def test_purity_algebra(assign, data):
    labels = data.draw(st.lists(st.integers(0, 1), min_size=len(assign), max_size=len(assign)))
    if len(set(labels)) < 2:
        labels[0], labels[-1] = 0, 1
    pv = purity_view(Partition(assign, 2), labels)
    assert pv.proportions.sum() == pytest.approx(1.0)
    for j in range(2):
        if j not in pv.empty:
            assert pv.purity[j].sum() == pytest.approx(1.0)
    assert np.all((pv.purity >= 0) & (pv.purity <= 1))
    assert pv.r_star == pv.proportions.min()


@pytest.mark.parametrize("assign,expected", [
    ([1, 1, 0, 0], True),
    ([0, 0, 1, 1], True),
    ([0, 1, 1, 1], False),
])
def test_is_correct_partition(assign, expected):
    assert is_correct_partition(Partition(assign, 2), [0, 0, 1, 1]) is expected


def test_is_correct_partition_three_classes():
    labels = [0, 0, 1, 1, 2, 2]
    assert is_correct_partition(Partition([2, 2, 0, 0, 1, 1], 3), labels)
    assert not is_correct_partition(Partition([2, 2, 0, 0, 0, 1], 3), labels)
    assert not is_correct_partition(Partition([0, 0, 0, 0, 1, 1], 3), labels)


def _bip(n, s):
    return Partition([0] * s + [1] * (n - s), 2)


def test_q_balanced_examples():
    assert is_q_balanced(_bip(16, 8), 1)
    assert not is_q_balanced(_bip(16, 2), 1)
    assert is_q_balanced(_bip(16, 6), 1.1)
    assert not is_q_balanced(_bip(16, 6), 1.0)  # |6 - 8| = 2 is not < 2


@given(st.integers(3, 20), st.floats(0.1, 6))
def test_balance_mask_matches_definition(n, q):
    mask = balanced_size_mask(n, q)
    for s in range(n + 1):
        direct = all(t > 2 and abs(t - n / 2) < q * math.sqrt(n / 4) for t in (s, n - s))
        assert mask[s] == direct


@given(st.integers(1, 20), st.floats(0.1, 6))
def test_unbalanced_count_matches_binomial(n, q):
    mask = balanced_size_mask(n, q)
    brute = sum(math.comb(n, s) for s in range(n + 1) if not mask[s])
    assert count_unbalanced(n, q) == brute


def test_unbalanced_fraction_hoeffding_n12():
    n, q = 12, 2
    far = sum(math.comb(n, s) for s in range(n + 1) if abs(s - 6) >= q * math.sqrt(3))
    assert far / 2**n <= 2 * math.exp(-2)


# -- enumeration -------------------------------------------------------------

def test_enumerate_n2():
    got = [p.assign.tolist() for p in enumerate_bipartitions(2)]
    assert got == [[0, 1], [1, 0]]


def test_enumerate_n3_all():
    assert len(list(enumerate_bipartitions(3, nonempty_only=False))) == 8


@pytest.mark.parametrize("n", [1, 4, 7, 10])
def test_enumeration_complete_and_distinct(n):
    seen = {tuple(p.assign) for p in enumerate_bipartitions(n, nonempty_only=False)}
    assert len(seen) == 2**n


def test_enumeration_shards_concatenate():
    full = [p.assign.tolist() for p in enumerate_bipartitions(6)]
    parts = []
    for lo, hi in [(0, 10), (10, 40), (40, 64)]:
        parts += [p.assign.tolist() for p in enumerate_bipartitions(6, start=lo, stop=hi)]
    assert parts == full


def test_enumeration_guard():
    with pytest.raises(ValidationError):
        next(enumerate_bipartitions(31))


# -- CSV ---------------------------------------------------------------------

def test_load_plain(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("0,1\n2,3\n")
    ds = load_dataset_csv(f)
    assert ds.data.shape == (2, 2) and ds.labels is None


def test_load_labels(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("0,1,1\n2,3,2\n")
    ds = load_dataset_csv(f, has_labels=True)
    assert ds.data.tolist() == [[0, 1], [2, 3]]
    assert ds.labels.tolist() == [1, 2]


def test_load_ragged(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("0,1\n2\n")
    with pytest.raises(DatasetParseError) as e:
        load_dataset_csv(f)
    assert e.value.row == 2


def test_load_non_numeric_and_empty(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("0,1\n2,x\n")
    with pytest.raises(DatasetParseError) as e:
        load_dataset_csv(f)
    assert (e.value.row, e.value.column) == (2, 2)
    f.write_text("")
    with pytest.raises(DatasetParseError):
        load_dataset_csv(f)


def test_csv_round_trip(tmp_path):
    ds = sample_gmm(GmmSpec(2, 3, 1.0, 1.0, (2, 3), seed=4))
    f = tmp_path / "d.csv"
    save_dataset_csv(ds, f)
    back = load_dataset_csv(f, has_labels=True)
    assert np.array_equal(back.data, ds.data)
    assert np.array_equal(back.labels, ds.labels)
