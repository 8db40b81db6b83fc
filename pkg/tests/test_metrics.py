import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from catekit.base_learners import BaseLearnerConfig
from catekit.dataset import DGPConfig, generate_synthetic
from catekit.errors import ConfigurationError, DataError, DiagnosticError
from catekit.meta_learners import fit_cate
from catekit.metrics import (
    betainc_regularized,
    discrepancy_from_predictions,
    discrepancy_ratio,
    pehe,
    student_t_two_sided_p,
    uplift_auuc,
    welch_t_test,
    write_discrepancy_csv,
    write_uplift_csv,
)
from oracles import auuc_brute_force, auuc_exact, t_two_sided_mpmath, welch_p_mpmath

floats = st.floats(-1e3, 1e3, allow_nan=False)


# --- PEHE ---------------------------------------------------------------------------


def test_pehe_examples():
    assert pehe([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert pehe([0.0, 0.0], [1.0, 1.0]) == 1.0
    assert pehe([0.0, 0.0, 0.0], [1.0, 2.0, 3.0]) == pytest.approx(14.0 / 3.0)
    with pytest.raises(DataError):
        pehe([1.0], [1.0, 2.0])


@given(st.lists(floats, min_size=1, max_size=30), st.data())
def test_pehe_properties(tau, data):
    tau = np.array(tau)
    hat = np.array(data.draw(st.lists(floats, min_size=len(tau), max_size=len(tau))))
    assert pehe(tau, tau) == 0.0
    v = pehe(hat, tau)
    assert v >= 0.0
    assert v == pehe(tau, hat)
    c = data.draw(floats)
    assert math.isclose(pehe(hat + c, tau + c), v, rel_tol=1e-9, abs_tol=1e-6)


# --- uplift / AUUC --------------------------------------------------------------------


def test_auuc_hand_example():
    # order by score: rows 0 (T, 1), 1 (C, 0), 2 (T, 0), 3 (C, 1)
    curve = uplift_auuc([0.9, 0.8, 0.7, 0.1], [1, 0, 1, 0], [1.0, 0.0, 0.0, 1.0])
    expect = [0.0, (1.0 - 0.0) * 0.5, (0.5 - 0.0) * 0.75, (0.5 - 0.5) * 1.0]
    np.testing.assert_allclose(curve.gains, expect)
    assert curve.auuc == pytest.approx(np.mean(expect))
    assert curve.points[0] == (0.25, 0.0)


def test_auuc_matches_brute_force_on_small_datasets():
    r = np.random.default_rng(2024)
    checked = 0
    while checked < 1000:
        n = int(r.integers(2, 9))
        w = r.integers(0, 2, size=n)
        if w.min() == w.max():
            continue
        scores = np.round(r.normal(size=n), 1)  # ties exercise the index rule
        y = r.normal(size=n)
        gains, auuc = auuc_brute_force(scores.tolist(), w.tolist(), y.tolist())
        curve = uplift_auuc(scores, w, y)
        assert curve.gains.tolist() == gains
        assert curve.auuc == auuc
        assert abs(curve.auuc - float(auuc_exact(scores.tolist(), w.tolist(), y.tolist()))) < 1e-12
        checked += 1


def test_auuc_ties_broken_by_index():
    a = uplift_auuc([1.0, 1.0, 0.0, 0.0], [1, 0, 1, 0], [1.0, 0.0, 5.0, 0.0])
    b = uplift_auuc([1.0, 1.0, 0.0, 0.0], [0, 1, 1, 0], [0.0, 1.0, 5.0, 0.0])
    assert a.gains[1] == b.gains[1]
    assert a.gains[0] == 0.0 and b.gains[0] == 0.0


def test_true_effect_ranking_beats_random():
    ds = generate_synthetic(DGPConfig(n=4000, dgp_kind="linear_effect", seed=0, noise_sd=0.5))
    oracle = uplift_auuc(ds.tau, ds.w, ds.y).auuc
    r = np.random.default_rng(1)
    random = [uplift_auuc(r.normal(size=ds.n), ds.w, ds.y).auuc for _ in range(20)]
    assert oracle > max(random)


def test_auuc_input_errors():
    with pytest.raises(DataError):
        uplift_auuc([1.0, 2.0], [1, 1], [0.0, 1.0])
    with pytest.raises(DataError):
        uplift_auuc([1.0, 2.0], [1, 2], [0.0, 1.0])
    with pytest.raises(DataError):
        uplift_auuc([1.0], [1], [0.0])


# --- Student t / Welch ------------------------------------------------------------------


@pytest.mark.parametrize("a,b,x", [(0.5, 0.5, 0.3), (2.0, 3.0, 0.1), (15.0, 0.5, 0.97),
                                   (100.0, 0.5, 0.5), (0.7, 40.0, 0.01)])
def test_betainc_against_mpmath(a, b, x):
    import mpmath
    assert betainc_regularized(a, b, x) == pytest.approx(
        float(mpmath.betainc(a, b, 0, x, regularized=True)), rel=1e-12, abs=1e-15)


def test_welch_worked_example():
    res = welch_t_test([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
    assert res.t_stat == pytest.approx(-1.0)
    assert res.df == pytest.approx(8.0)
    assert res.p_value == pytest.approx(t_two_sided_mpmath(-1.0, 8.0), abs=1e-12)


def test_welch_against_mpmath_on_random_pairs():
    r = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        na, nb = r.integers(2, 30, size=2)
        a = r.normal(r.normal(), r.uniform(0.1, 3), size=na)
        b = r.normal(r.normal(), r.uniform(0.1, 3), size=nb)
        t, df, p = welch_p_mpmath(a.tolist(), b.tolist())
        res = welch_t_test(a, b)
        assert res.t_stat == pytest.approx(t, rel=1e-9)
        assert res.df == pytest.approx(df, rel=1e-9)
        worst = max(worst, abs(res.p_value - p))
    assert worst < 1e-6


def test_welch_large_shift_is_significant():
    a = np.arange(10.0)
    assert welch_t_test(a, a + 100.0).p_value < 1e-4


@given(st.lists(floats, min_size=2, max_size=15), st.lists(floats, min_size=2, max_size=15),
       st.floats(-100, 100))
def test_welch_symmetries(a, b, c):
    a, b = np.array(a), np.array(b)
    assume(np.var(a) + np.var(b) > 1e-6)
    ab = welch_t_test(a, b)
    ba = welch_t_test(b, a)
    assert ab.p_value == pytest.approx(ba.p_value, abs=1e-12)
    assert ab.t_stat == pytest.approx(-ba.t_stat, rel=1e-12, abs=1e-12)
    shifted = welch_t_test(a + c, b + c)
    assert shifted.p_value == pytest.approx(ab.p_value, abs=1e-6)
    assert 0.0 <= ab.p_value <= 1.0


def test_welch_degenerate_cases():
    same = welch_t_test([1.0, 1.0], [1.0, 1.0, 1.0])
    assert same.degenerate and same.p_value == 1.0
    diff = welch_t_test([1.0, 1.0], [2.0, 2.0])
    assert diff.degenerate and diff.p_value == 0.0 and diff.t_stat == -math.inf
    with pytest.raises(DataError):
        welch_t_test([1.0], [1.0, 2.0])


def test_t_tail_limits():
    assert student_t_two_sided_p(0.0, 5.0) == 1.0
    assert student_t_two_sided_p(math.inf, 5.0) == 0.0
    assert student_t_two_sided_p(1.96, 1e6) == pytest.approx(0.05, abs=1e-3)


# --- discrepancy ratio ---------------------------------------------------------------


class NoiseModel:
    """Predictions depend only on the fitting seed, never on the data."""

    def __init__(self, seed, n):
        self.values = np.random.default_rng(seed).normal(size=n)

    def predict_cate(self, x):
        return self.values[: len(x)]


class FixedModel:
    def predict_cate(self, x):
        return np.asarray(x)[:, 0] * 0.5


@pytest.fixture(scope="module")
def null_ds():
    return generate_synthetic(DGPConfig(n=500, seed=3))


def test_data_independent_model_has_nominal_ratio(null_ds):
    rep = discrepancy_ratio(null_ds, lambda data, seed: NoiseModel(seed, data.n), runs=30, alpha=0.05, seed=1)
    assert rep.ratio <= 0.10
    rep_fixed = discrepancy_ratio(null_ds, lambda data, seed: FixedModel(), runs=30, seed=1)
    assert rep_fixed.ratio == 0.0


def test_alpha_zero_gives_zero(null_ds):
    cfg = BaseLearnerConfig(n_estimators=10, num_leaves=4)
    rep = discrepancy_ratio(null_ds, lambda d, s: fit_cate("two", d, cfg.with_seed(s), 0.5),
                            runs=6, alpha=0.0, seed=0)
    assert rep.ratio == 0.0


def test_alpha_validation(null_ds):
    for alpha in (-0.1, 1.0):
        with pytest.raises(ConfigurationError):
            discrepancy_ratio(null_ds, lambda d, s: FixedModel(), runs=4, alpha=alpha)
    with pytest.raises(ConfigurationError):
        discrepancy_ratio(null_ds, lambda d, s: FixedModel(), runs=1)


def test_exclusions_and_all_excluded():
    w = np.array([[1, 1, 0], [1, 0, 0], [0, 1, 0], [0, 0, 0]])
    preds = np.arange(12.0).reshape(4, 3) ** 2
    rep = discrepancy_from_predictions(w, preds, 0.05)
    assert rep.n_excluded == 1 and rep.n_tested == 2
    assert isinstance(dict(rep.per_instance)[2], str)
    with pytest.raises(DiagnosticError):
        discrepancy_from_predictions(np.ones((3, 4)), np.zeros((3, 4)))


def test_two_model_shows_discrepancy(null_ds):
    cfg = BaseLearnerConfig(n_estimators=50, num_leaves=16, min_samples_leaf=5)
    rep = discrepancy_ratio(null_ds, lambda d, s: fit_cate("two", d, cfg.with_seed(s), 0.5),
                            runs=20, seed=0)
    assert rep.ratio > 0.10


def test_discrepancy_deterministic_across_threads(null_ds):
    cfg = BaseLearnerConfig(n_estimators=10, num_leaves=4)
    fit = lambda d, s: fit_cate("two", d, cfg.with_seed(s), 0.5)  # noqa: E731
    a = discrepancy_ratio(null_ds, fit, runs=8, seed=5, threads=1)
    b = discrepancy_ratio(null_ds, fit, runs=8, seed=5, threads=4)
    assert a == b


def test_csv_writers(tmp_path, null_ds):
    rep = discrepancy_from_predictions(np.array([[1, 0], [1, 0], [0, 1], [0, 1]]),
                                       np.array([[1.0, 2.0], [1.1, 2.2], [3.0, 4.0], [3.1, 4.4]]))
    write_discrepancy_csv(rep, tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "index,status,p_value,significant" and len(lines) == 3
    write_uplift_csv(uplift_auuc([1.0, 0.0], [1, 0], [1.0, 0.0]), tmp_path / "u.csv")
    assert (tmp_path / "u.csv").read_text().splitlines()[0] == "population_fraction,gain"
