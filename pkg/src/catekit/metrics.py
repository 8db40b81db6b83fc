"""Evaluation metrics: PEHE, uplift curve / AUUC, Welch's t-test and the
discrepancy ratio.

The Student-t tail probability is computed from the regularized incomplete
beta function via its continued fraction, so no statistics package is needed.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from catekit._seeding import derive_seed
from catekit.dataset import ObservedDataset, SyntheticDataset, randomize_assignment
from catekit.errors import ConfigurationError, DataError, DiagnosticError

DEFAULT_RUNS = 30
DEFAULT_ALPHA = 0.05
MIN_PER_GROUP = 2


def pehe(tau_hat, tau) -> float:
    tau_hat = np.asarray(tau_hat, dtype=np.float64).ravel()
    tau = np.asarray(tau, dtype=np.float64).ravel()
    if tau_hat.size != tau.size or tau.size < 1:
        raise DataError(f"length mismatch: {tau_hat.size} predictions vs {tau.size} effects")
    diff = tau_hat - tau
    return float(np.mean(diff * diff))


# --- uplift -----------------------------------------------------------------


@dataclass(frozen=True)
class UpliftCurve:
    fractions: np.ndarray
    gains: np.ndarray
    auuc: float

    @property
    def points(self) -> List[Tuple[float, float]]:
        return list(zip(self.fractions.tolist(), self.gains.tolist()))


def uplift_auuc(scores, w, y) -> UpliftCurve:
    """Cumulative-gain uplift curve and its area.

    Rows are ranked by descending score, ties by ascending original index. For
    each prefix of size k the gain is ``(mean_T(k) - mean_C(k)) * k / n``, or 0
    while either group is still empty; AUUC is the mean gain over all k.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    w = np.asarray(w).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    n = scores.size
    if w.size != n or y.size != n:
        raise DataError(f"length mismatch: {n} scores, {w.size} assignments, {y.size} outcomes")
    if n < 2:
        raise DataError("uplift curve needs at least 2 rows")
    if not np.all((w == 0) | (w == 1)):
        raise DataError("treatment must be binary")
    if w.min() == w.max():
        raise DataError("uplift curve needs both treatment groups")

    order = np.lexsort((np.arange(n), -scores))
    wt = (w[order] == 1).astype(np.float64)
    ys = y[order]
    n_t = np.cumsum(wt)
    n_c = np.cumsum(1.0 - wt)
    s_t = np.cumsum(ys * wt)
    s_c = np.cumsum(ys * (1.0 - wt))
    k = np.arange(1, n + 1, dtype=np.float64)
    both = (n_t > 0) & (n_c > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        lift = np.where(both, s_t / n_t - s_c / n_c, 0.0)
    gains = lift * (k / n)
    # correctly rounded sum, so the area does not depend on summation order
    return UpliftCurve(fractions=k / n, gains=gains, auuc=math.fsum(gains.tolist()) / n)


# --- Student t ----------------------------------------------------------------


def _betacf(a, b, x, max_iter=500, eps=1e-16):
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_regularized(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta ``I_x(a, b)`` for ``a, b > 0``."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # the continued fraction converges fast for x < (a+1)/(a+b+2)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: float) -> float:
    if math.isnan(t):
        return float("nan")
    if math.isinf(t):
        return 0.0
    p = betainc_regularized(df / 2.0, 0.5, df / (df + t * t))
    return min(1.0, max(0.0, p))


@dataclass(frozen=True)
class TTestResult:
    t_stat: float
    df: float
    p_value: float
    degenerate: bool = False


def _mean_and_sq_se(a):
    # a constant sample must have exactly zero variance; float means of repeated
    # values can round away from the value itself
    if a.min() == a.max():
        return float(a[0]), 0.0
    return float(a.mean()), float(np.var(a, ddof=1)) / a.size


def welch_t_test(sample_a, sample_b) -> TTestResult:
    """Two-sided Welch (unequal variance) t-test.

    When both samples have zero variance the result is flagged degenerate:
    equal means give ``t = 0, p = 1``; different means give ``t = +-inf, p = 0``.
    """
    a = np.asarray(sample_a, dtype=np.float64).ravel()
    b = np.asarray(sample_b, dtype=np.float64).ravel()
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise DataError(f"each sample needs at least 2 values, got {na} and {nb}")
    ma, qa = _mean_and_sq_se(a)
    mb, qb = _mean_and_sq_se(b)
    se2 = qa + qb
    if se2 == 0.0:
        df = float(na + nb - 2)
        if ma == mb:
            return TTestResult(0.0, df, 1.0, True)
        return TTestResult(math.copysign(math.inf, ma - mb), df, 0.0, True)
    t = (ma - mb) / math.sqrt(se2)
    df = se2 * se2 / (qa * qa / (na - 1) + qb * qb / (nb - 1))
    return TTestResult(t, df, student_t_two_sided_p(t, df))


# --- discrepancy ratio ----------------------------------------------------------


@dataclass(frozen=True)
class DiscrepancyReport:
    ratio: float
    n_tested: int
    n_significant: int
    n_excluded: int
    alpha: float
    # (index, p-value) for tested rows, (index, reason) for excluded ones
    per_instance: Tuple[Tuple[int, Union[float, str]], ...]


FitFn = Callable[[ObservedDataset, int], object]


def collect_assignment_predictions(ds: SyntheticDataset, fit_fn: FitFn, runs: int, seed: int,
                                   threads: int = 1):
    """Retrain ``runs`` times on fresh assignments.

    Returns ``(w, preds)``, each of shape ``(runs, n)``: the drawn assignment
    and the in-sample CATE prediction of every row in every run.
    """

    def one(r):
        run_seed = derive_seed(seed, "run", r)
        dr = randomize_assignment(ds, derive_seed(run_seed, "assignment"))
        model = fit_fn(dr.base, derive_seed(run_seed, "fit"))
        return dr.w.copy(), np.asarray(model.predict_cate(ds.x), dtype=np.float64)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(runs)))
    else:
        results = [one(r) for r in range(runs)]
    w = np.stack([r[0] for r in results])
    preds = np.stack([r[1] for r in results])
    return w, preds


def discrepancy_from_predictions(w, preds, alpha=DEFAULT_ALPHA) -> DiscrepancyReport:
    """Per-row Welch test of predictions from treated-assigned runs against
    control-assigned runs."""
    if not 0.0 <= alpha < 1.0:
        raise ConfigurationError(f"alpha must lie in [0, 1), got {alpha}")
    w = np.asarray(w)
    preds = np.asarray(preds, dtype=np.float64)
    per = []
    n_sig = n_tested = 0
    for i in range(preds.shape[1]):
        treated = w[:, i] == 1
        a = preds[treated, i]
        b = preds[~treated, i]
        if a.size < MIN_PER_GROUP or b.size < MIN_PER_GROUP:
            per.append((i, f"fewer than {MIN_PER_GROUP} runs in a group ({a.size} treated, {b.size} control)"))
            continue
        res = welch_t_test(a, b)
        n_tested += 1
        if res.p_value < alpha:
            n_sig += 1
        per.append((i, res.p_value))
    n_excl = preds.shape[1] - n_tested
    if n_tested == 0:
        raise DiagnosticError("every instance was excluded from the discrepancy test")
    return DiscrepancyReport(
        ratio=n_sig / n_tested,
        n_tested=n_tested,
        n_significant=n_sig,
        n_excluded=n_excl,
        alpha=float(alpha),
        per_instance=tuple(per),
    )


def discrepancy_ratio(ds: SyntheticDataset, fit_fn: FitFn, runs: int = DEFAULT_RUNS,
                      alpha: float = DEFAULT_ALPHA, seed: int = 0, threads: int = 1) -> DiscrepancyReport:
    """Fraction of training rows whose predicted effect differs significantly
    between runs where the row was treated and runs where it was control.

    ``fit_fn(data, seed)`` must return a fitted model with ``predict_cate``.
    Rows with fewer than two runs in either group are excluded.
    """
    if int(runs) != runs or runs < 2:
        raise ConfigurationError(f"runs must be an integer >= 2, got {runs}")
    if not 0.0 <= alpha < 1.0:
        raise ConfigurationError(f"alpha must lie in [0, 1), got {alpha}")
    w, preds = collect_assignment_predictions(ds, fit_fn, int(runs), seed, threads)
    return discrepancy_from_predictions(w, preds, alpha)


# --- CSV serialization ----------------------------------------------------------


def write_discrepancy_csv(report: DiscrepancyReport, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["index", "status", "p_value", "significant"])
        for i, v in report.per_instance:
            if isinstance(v, str):
                out.writerow([i, "excluded", "", ""])
            else:
                out.writerow([i, "tested", repr(float(v)), int(v < report.alpha)])


def write_uplift_csv(curve: UpliftCurve, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["population_fraction", "gain"])
        for f, g in curve.points:
            out.writerow([repr(f), repr(g)])
