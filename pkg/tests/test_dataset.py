import numpy as np
import pytest
from hypothesis import given, strategies as st

from catekit.dataset import (
    CsvSchema,
    DGPConfig,
    ObservedDataset,
    SyntheticDataset,
    generate_synthetic,
    kfold_partition,
    load_csv,
    randomize_assignment,
    train_test_indices,
)
from catekit.errors import (
    ConfigurationError,
    CsvParseError,
    DataError,
    EmptyDatasetError,
    MissingColumnError,
    MissingFileError,
    NonBinaryTreatmentError,
    NonNumericCellError,
)


@pytest.mark.parametrize("kind", ["constant_effect", "linear_effect", "nonlinear_effect"])
def test_tau_is_exact_difference(kind):
    ds = generate_synthetic(DGPConfig(n=300, d=4, dgp_kind=kind, seed=1))
    assert np.array_equal(ds.tau, ds.mu1 - ds.mu0)
    assert np.array_equal(ds.y, np.where(ds.w == 1, ds.y1, ds.y0))


def test_constant_effect_is_constant():
    ds = generate_synthetic(DGPConfig(n=200, dgp_kind="constant_effect", effect=2.5, seed=3))
    assert np.allclose(ds.tau, 2.5, atol=1e-12)


def test_generation_is_deterministic():
    a = generate_synthetic(DGPConfig(n=100, seed=42))
    b = generate_synthetic(DGPConfig(n=100, seed=42))
    c = generate_synthetic(DGPConfig(n=100, seed=43))
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    assert not np.array_equal(a.x, c.x)


def test_arrays_are_read_only():
    ds = generate_synthetic(DGPConfig(n=20, seed=0))
    with pytest.raises(ValueError):
        ds.x[0, 0] = 1.0
    with pytest.raises(ValueError):
        ds.tau[0] = 1.0


def test_treated_fraction_within_binomial_bounds():
    # sd of the mean at n=1e4, p=0.5 is 0.005; the band is 4 sd wide on each side
    for seed in range(5):
        ds = generate_synthetic(DGPConfig(n=10_000, seed=seed, treat_prob=0.5))
        assert 0.48 <= ds.w.mean() <= 0.52


def test_randomized_fraction_over_redraws():
    ds = generate_synthetic(DGPConfig(n=2, d=2, seed=5))
    ws = [randomize_assignment(ds, s).w[0] for s in range(1000)]
    frac = np.mean(ws)
    assert 0.45 <= frac <= 0.55


def test_assignment_independent_of_covariates():
    ds = generate_synthetic(DGPConfig(n=10_000, d=3, seed=9))
    for j in range(3):
        r = np.corrcoef(ds.w.astype(float), ds.x[:, j])[0, 1]
        assert abs(r) < 0.05


def test_randomize_assignment_keeps_ground_truth():
    ds = generate_synthetic(DGPConfig(n=500, seed=2))
    dr = randomize_assignment(ds, 99)
    assert np.array_equal(dr.x, ds.x)
    assert np.array_equal(dr.tau, ds.tau)
    assert np.array_equal(dr.y, np.where(dr.w == 1, ds.y1, ds.y0))
    assert not np.array_equal(dr.w, ds.w)


def test_synthetic_rejects_inconsistent_tau():
    ds = generate_synthetic(DGPConfig(n=10, seed=0))
    with pytest.raises(DataError):
        SyntheticDataset(ds.base, ds.mu0, ds.mu1, ds.tau + 1e-9, ds.y0, ds.y1, 0.5)


@pytest.mark.parametrize("bad", [dict(n=1), dict(d=0), dict(treat_prob=1.0),
                                 dict(noise_sd=-1.0), dict(dgp_kind="quadratic")])
def test_dgp_config_validation(bad):
    with pytest.raises(ConfigurationError):
        generate_synthetic(DGPConfig(**{"n": 50, **bad}))


def test_observed_dataset_validation():
    with pytest.raises(DataError):
        ObservedDataset(np.zeros((3, 2)), np.array([0, 1, 2]), np.zeros(3))
    with pytest.raises(DataError):
        ObservedDataset(np.zeros((3, 2)), np.array([0, 1]), np.zeros(3))
    with pytest.raises(DataError):
        ObservedDataset(np.full((2, 1), np.nan), np.array([0, 1]), np.zeros(2))


# --- folds --------------------------------------------------------------------


def test_fold_sizes_for_4802_rows():
    sizes = sorted(kfold_partition(4802, 10, seed=0).sizes().tolist())
    assert sizes == [480] * 8 + [481] * 2


@given(n=st.integers(2, 300), k=st.integers(2, 12), seed=st.integers(0, 2**32))
def test_fold_partition_invariants(n, k, seed):
    if k > n:
        with pytest.raises(ConfigurationError):
            kfold_partition(n, k, seed)
        return
    folds = kfold_partition(n, k, seed)
    sizes = folds.sizes()
    assert sizes.sum() == n
    assert sizes.max() - sizes.min() <= 1
    members = np.concatenate([folds.members(j) for j in range(k)])
    assert np.array_equal(np.sort(members), np.arange(n))
    for j in range(k):
        assert np.intersect1d(folds.members(j), folds.complement(j)).size == 0


def test_stratified_folds_balance_each_stratum():
    w = np.array([1] * 37 + [0] * 63)
    folds = kfold_partition(100, 5, seed=4, strata=w)
    sizes = folds.sizes()
    assert sizes.max() - sizes.min() <= 1
    treated = np.bincount(folds.fold_of[w == 1], minlength=5)
    assert treated.max() - treated.min() <= 1


def test_fold_partition_is_seeded():
    a = kfold_partition(50, 5, seed=1).fold_of
    b = kfold_partition(50, 5, seed=1).fold_of
    c = kfold_partition(50, 5, seed=2).fold_of
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_train_test_split_disjoint():
    tr, te = train_test_indices(101, 0.3, seed=0)
    assert np.intersect1d(tr, te).size == 0
    assert np.array_equal(np.sort(np.concatenate([tr, te])), np.arange(101))
    with pytest.raises(ConfigurationError):
        train_test_indices(10, 1.0, 0)


# --- CSV ------------------------------------------------------------------------


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_csv_roundtrip(tmp_path):
    p = _write(tmp_path, "a,b,w,y\n1.5,2,0,0.25\n-1,3e-1,1,1\n")
    data = load_csv(p)
    assert data.x.tolist() == [[1.5, 2.0], [-1.0, 0.3]]
    assert data.w.tolist() == [0, 1]
    assert data.y.tolist() == [0.25, 1.0]


def test_load_csv_custom_schema(tmp_path):
    p = _write(tmp_path, "treat,out,f1,f2,junk\n1,2,3,4,x\n0,1,2,3,y\n")
    data = load_csv(p, CsvSchema(treatment="treat", outcome="out", features=["f2", "f1"]))
    assert data.x.tolist() == [[4.0, 3.0], [3.0, 2.0]]


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(MissingFileError):
        load_csv(tmp_path / "nope.csv")
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "nope.csv")


def test_load_csv_missing_column(tmp_path):
    p = _write(tmp_path, "a,w\n1,0\n")
    with pytest.raises(MissingColumnError) as exc:
        load_csv(p)
    assert exc.value.column == "y"


def test_load_csv_non_binary_treatment(tmp_path):
    p = _write(tmp_path, "a,w,y\n1,0,1\n2,2,1\n")
    with pytest.raises(NonBinaryTreatmentError) as exc:
        load_csv(p)
    assert exc.value.row == 2 and exc.value.column == "w"


@pytest.mark.parametrize("cell", ["abc", "", "nan", "inf"])
def test_load_csv_bad_cell_reports_position(tmp_path, cell):
    p = _write(tmp_path, f"a,w,y\n1,0,1\n{cell},1,1\n")
    with pytest.raises(NonNumericCellError) as exc:
        load_csv(p)
    assert exc.value.row == 2 and exc.value.column == "a"
    assert isinstance(exc.value, CsvParseError)


def test_load_csv_empty(tmp_path):
    with pytest.raises(EmptyDatasetError, match="empty dataset"):
        load_csv(_write(tmp_path, "a,w,y\n"))
    with pytest.raises(EmptyDatasetError):
        load_csv(_write(tmp_path, "", "e.csv"))
