import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from kmeanslab import experiments as ex
from kmeanslab.clustering import is_hartigan_fixed_point, is_lloyd_fixed_point
from kmeanslab.model import (
    GmmSpec,
    ValidationError,
    enumerate_bipartitions,
    is_correct_partition,
    is_q_balanced,
    purity_view,
    sample_gmm,
)

GOLDEN = Path(__file__).parent / "golden" / "mini_grid.csv"
MINI = ex.GridSpec(dims=(5, 40), noise_vars=(0.5, 4.0), trials=4,
                   algorithms=("lloyd", "hartigan", "pca_lloyd", "pca_split"),
                   inits=("random_partition", "kmeanspp"), samples_per_class=6, master_seed=2024)


def _csv(results, tmp_path, kind=None, name="r.csv"):
    path = tmp_path / name
    ex.write_report(results, path, "csv", kind)
    return path.read_text()


# -- grid --------------------------------------------------------------------

def test_grid_separated_clusters_recovered():
    gs = ex.GridSpec(dims=(10,), noise_vars=(0.01,), trials=10, algorithms=ex.ALGORITHMS, inits=ex.INITS)
    for cell in ex.run_grid(gs):
        assert cell.nmi_mean > 0.99, cell


def test_grid_deterministic_across_threads(tmp_path):
    a = _csv(ex.run_grid(MINI, threads=1), tmp_path, name="a.csv")
    b = _csv(ex.run_grid(MINI, threads=4), tmp_path, name="b.csv")
    assert a == b


def test_grid_trial_isolation():
    full = ex.run_grid(MINI)
    sub = ex.run_grid(ex.GridSpec(dims=(40,), noise_vars=(4.0,), trials=4, algorithms=("hartigan",),
                                  inits=("kmeanspp",), samples_per_class=6, master_seed=2024))
    match = [c for c in full if (c.d, c.sigma_sq, c.algorithm, c.init) == (40, 4.0, "hartigan", "kmeanspp")]
    assert match == sub


def test_grid_golden_snapshot(tmp_path):
    got = _csv(ex.run_grid(MINI), tmp_path)
    assert got == GOLDEN.read_text()


def test_grid_cells_and_validation():
    assert ("pca_split", "none") in MINI.cells()
    with pytest.raises(ValidationError):
        ex.GridSpec(dims=(), noise_vars=(1.0,))
    with pytest.raises(ValidationError):
        ex.GridSpec(dims=(2,), noise_vars=(1.0,), trials=0)
    with pytest.raises(ValidationError):
        ex.GridSpec(dims=(2,), noise_vars=(1.0,), algorithms=("sdp",))


# -- divergent ---------------------------------------------------------------

def test_mixed_partition_purities():
    p, labels = ex.mixed_partition(40)
    pv = purity_view(p, labels)
    assert p.sizes.tolist() == [20, 20]
    assert labels[0] == 0 and p.assign[0] == 0
    assert pv.purity[0, 0] == 0.25 and pv.purity[1, 0] == 0.75


def test_divergent_rejects_bad_n():
    with pytest.raises(ValidationError):
        ex.run_divergent(n=20, trials=1)


def test_divergent_noise_convention():
    assert ex.divergent_sigma_sq(1.0, 40, 1.0) == pytest.approx(18.05)
    assert ex.divergent_sigma_sq(2.0, 40, 1.0) == pytest.approx(36.1)


def test_divergent_summary_fields():
    res = ex.run_divergent(n=16, beta_list=(2.0,), d_list=(20,), trials=200, master_seed=3)
    assert [r.algo for r in res] == ["lloyd", "hartigan"]
    for r in res:
        assert r.wilson_low <= r.stay_ratio <= r.wilson_high
        assert r.n_stay == round(r.stay_ratio * r.trials)
        assert 0 < r.theory_bound < 1


# -- census ------------------------------------------------------------------

@pytest.mark.parametrize("d,sigma_sq", [(3, 1.0), (50, 8.0), (400, 3.0)])
def test_census_matches_direct_predicates(d, sigma_sq):
    n, q = 8, 2.0
    ds = sample_gmm(GmmSpec(2, d, 1.0, sigma_sq, (4, 4), seed=d))
    got = ex.census_counts(ds.data, ds.labels, q, 0, 1 << n, block=37)
    want = dict.fromkeys(got, 0)
    for p in enumerate_bipartitions(n):
        lloyd = is_lloyd_fixed_point(ds, p)
        hart = is_hartigan_fixed_point(ds, p)
        bal = is_q_balanced(p, q)
        correct = is_correct_partition(p, ds.labels)
        want["n_balanced"] += bal
        want["n_lloyd_fixed_balanced"] += bal and lloyd
        want["n_incorrect"] += not correct
        want["n_hartigan_fixed_incorrect"] += hart and not correct
        want["n_lloyd_fixed"] += lloyd
        want["n_hartigan_fixed"] += hart
        want["n_hartigan_fixed_not_lloyd"] += hart and not lloyd
    assert got == want


def test_census_shards_merge_exactly():
    a = ex.run_fixed_point_census(n=10, d=64, datasets=2, threads=1, master_seed=5)
    b = ex.run_fixed_point_census(n=10, d=64, datasets=2, threads=3, master_seed=5)
    assert a == b


def test_census_guard_and_bounds():
    with pytest.raises(ValidationError):
        ex.run_fixed_point_census(n=17, datasets=1)
    (rec,) = ex.run_fixed_point_census(n=8, d=16, datasets=1)
    assert rec.n_incorrect == 2**8 - 2 - 2
    assert rec.lloyd_union_bound_log > rec.hartigan_union_bound_log - 10


# -- scale check -------------------------------------------------------------

def test_scale_check_pure_cluster():
    res = ex.run_scale_check(10, 10, 1.0, 1.0, 1.0, 2.0, 64, replicates=400, master_seed=1)
    cur = res[0]
    assert cur.expected_scale == pytest.approx((1 - 1 / 10) * 2.0)
    assert abs(cur.z) < 4


def test_scale_check_mixed_and_other():
    res = ex.run_scale_check(8, 12, 0.5, 0.25, 1.0, 3.0, 64, replicates=1000, master_seed=2)
    for r in res:
        assert abs(r.z) < 4, r


def test_scale_check_rejects_fractional_purity():
    with pytest.raises(ValidationError):
        ex.run_scale_check(5, 5, 0.3, 0.5, 1.0, 1.0, 8, replicates=2)


# -- reports -----------------------------------------------------------------

def test_empty_report_is_header_only(tmp_path):
    text = _csv([], tmp_path, kind="divergent")
    assert text == "beta,d,algo,stay_ratio,wilson_low,wilson_high,theory_bound\n"


def test_report_schemas(tmp_path):
    grid = _csv(ex.run_grid(ex.GridSpec((3,), (1.0,), trials=2)), tmp_path)
    assert grid.splitlines()[0].split(",") == list(ex.SCHEMAS["grid"])
    census = _csv(ex.run_fixed_point_census(n=6, d=8, datasets=1), tmp_path)
    assert census.splitlines()[0].split(",") == list(ex.SCHEMAS["census"])


def test_float_cells_round_trip(tmp_path):
    res = ex.run_grid(ex.GridSpec((3,), (1.0 / 3,), trials=3))
    rows = list(csv.DictReader(_csv(res, tmp_path).splitlines()))
    assert float(rows[0]["sigma_sq"]) == 1.0 / 3
    assert float(rows[0]["nmi_mean"]) == res[0].nmi_mean


def test_json_round_trip(tmp_path):
    res = ex.run_divergent(n=8, beta_list=(1.5,), d_list=(10,), trials=20)
    path = tmp_path / "r.json"
    ex.write_report(res, path, "json")
    back = json.loads(path.read_text())
    assert back == ex.as_dicts(res)


def test_report_io_error_mentions_path(tmp_path):
    bad = tmp_path / "missing" / "r.csv"
    with pytest.raises(OSError, match="missing"):
        ex.write_report([], bad, "csv", "grid")
