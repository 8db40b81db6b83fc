"""Data containers, synthetic generators with known ground truth, CSV ingestion
and fold partitioning.

All containers are frozen dataclasses over read-only numpy arrays, so they can
be shared freely between threads.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from catekit._seeding import make_rng
from catekit.errors import (
    ConfigurationError,
    DataError,
    EmptyDatasetError,
    MissingColumnError,
    MissingFileError,
    NonBinaryTreatmentError,
    NonNumericCellError,
)

DGP_KINDS = ("constant_effect", "linear_effect", "nonlinear_effect")


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def as_covariates(x) -> np.ndarray:
    """Validate a covariate matrix and return it as a read-only float array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2:
        raise DataError(f"covariates must be a 2-d matrix, got shape {x.shape}")
    if x.shape[0] < 1 or x.shape[1] < 1:
        raise DataError(f"covariates need n >= 1 and d >= 1, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("covariates contain non-finite values")
    return x


@dataclass(frozen=True)
class ObservedDataset:
    """The training triple: covariates ``x``, binary assignment ``w``, outcome ``y``."""

    x: np.ndarray
    w: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _frozen(as_covariates(self.x))
        w = np.asarray(self.w)
        y = np.asarray(self.y, dtype=np.float64).ravel()
        if w.ndim != 1 or len(w) != x.shape[0] or len(y) != x.shape[0]:
            raise DataError(
                f"length mismatch: x has {x.shape[0]} rows, w {w.size}, y {y.size}"
            )
        if not np.all((w == 0) | (w == 1)):
            raise DataError("treatment w must be strictly binary (0/1)")
        if not np.all(np.isfinite(y)):
            raise DataError("outcome y contains non-finite values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "w", _frozen(w, np.int8))
        object.__setattr__(self, "y", _frozen(y))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def n_treated(self) -> int:
        return int(self.w.sum())

    @property
    def n_control(self) -> int:
        return self.n - self.n_treated

    def require_both_groups(self, what="fitting"):
        if self.n_treated == 0 or self.n_control == 0:
            raise DataError(
                f"{what} requires both treatment groups; got "
                f"{self.n_treated} treated and {self.n_control} control rows"
            )

    def subset(self, idx) -> "ObservedDataset":
        idx = np.asarray(idx)
        return ObservedDataset(self.x[idx], self.w[idx], self.y[idx])

    def with_assignment(self, w, y) -> "ObservedDataset":
        return ObservedDataset(self.x, w, y)


@dataclass(frozen=True)
class SyntheticDataset:
    """Observed data plus the ground truth it was generated from."""

    base: ObservedDataset
    mu0: np.ndarray
    mu1: np.ndarray
    tau: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    treat_prob: float

    def __post_init__(self):
        n = self.base.n
        for name in ("mu0", "mu1", "tau", "y0", "y1"):
            arr = _frozen(np.asarray(getattr(self, name), dtype=np.float64).ravel())
            if arr.size != n:
                raise DataError(f"{name} has length {arr.size}, expected {n}")
            object.__setattr__(self, name, arr)
        if not 0.0 < self.treat_prob < 1.0:
            raise DataError(f"treat_prob must lie in (0, 1), got {self.treat_prob}")
        if not np.array_equal(self.tau, self.mu1 - self.mu0):
            raise DataError("tau must equal mu1 - mu0 exactly")
        expected_y = np.where(self.base.w == 1, self.y1, self.y0)
        if not np.array_equal(self.base.y, expected_y):
            raise DataError("observed y must equal y1 where w=1 and y0 where w=0")

    # convenience passthroughs
    @property
    def x(self):
        return self.base.x

    @property
    def w(self):
        return self.base.w

    @property
    def y(self):
        return self.base.y

    @property
    def n(self) -> int:
        return self.base.n

    def subset(self, idx) -> "SyntheticDataset":
        idx = np.asarray(idx)
        return SyntheticDataset(
            base=self.base.subset(idx),
            mu0=self.mu0[idx],
            mu1=self.mu1[idx],
            tau=self.tau[idx],
            y0=self.y0[idx],
            y1=self.y1[idx],
            treat_prob=self.treat_prob,
        )


@dataclass(frozen=True)
class DGPConfig:
    n: int
    d: int = 5
    dgp_kind: str = "nonlinear_effect"
    treat_prob: float = 0.5
    noise_sd: float = 1.0
    seed: int = 0
    effect: float = 1.0

    def validate(self):
        if int(self.n) != self.n or self.n < 2:
            raise ConfigurationError(f"n must be an integer >= 2, got {self.n}")
        if int(self.d) != self.d or self.d < 1:
            raise ConfigurationError(f"d must be an integer >= 1, got {self.d}")
        if self.dgp_kind not in DGP_KINDS:
            raise ConfigurationError(
                f"unknown dgp_kind {self.dgp_kind!r}; expected one of {DGP_KINDS}"
            )
        if not 0.0 < self.treat_prob < 1.0:
            raise ConfigurationError(f"treat_prob must lie in (0, 1), got {self.treat_prob}")
        if not (self.noise_sd >= 0.0 and math.isfinite(self.noise_sd)):
            raise ConfigurationError(f"noise_sd must be >= 0, got {self.noise_sd}")
        if not math.isfinite(self.effect):
            raise ConfigurationError("effect must be finite")
        return self


def _col(x, j):
    return x[:, j % x.shape[1]]


def _linear_coefs(d):
    j = np.arange(d)
    return np.where(j % 2 == 0, 1.0, -1.0) / (j + 1.0)


def outcome_surfaces(x: np.ndarray, kind: str, effect: float = 1.0):
    """Return ``(mu0, tau)`` for covariates ``x`` under the named DGP."""
    x = np.asarray(x, dtype=np.float64)
    if kind == "constant_effect":
        mu0 = x @ _linear_coefs(x.shape[1])
        tau = np.full(x.shape[0], float(effect))
    elif kind == "linear_effect":
        mu0 = x @ _linear_coefs(x.shape[1])
        tau = effect + x @ (0.5 * np.abs(_linear_coefs(x.shape[1])))
    elif kind == "nonlinear_effect":
        x0, x1, x2 = _col(x, 0), _col(x, 1), _col(x, 2)
        mu0 = 1.5 * np.sin(x0) + 0.5 * x1 ** 2 + 0.5 * x2
        tau = effect + x0 * x1 + 1.5 * (x2 > 0.0) - 0.75
    else:
        raise ConfigurationError(f"unknown dgp_kind {kind!r}")
    return mu0, tau


def generate_synthetic(config: DGPConfig) -> SyntheticDataset:
    """Draw a randomized-design dataset with known potential outcomes.

    Covariates are i.i.d. standard normal. Assignment is Bernoulli(treat_prob)
    independent of everything else, so unconfoundedness holds by design.
    """
    config.validate()
    rng = make_rng(config.seed)
    n, d = int(config.n), int(config.d)
    x = rng.standard_normal((n, d))
    eps0 = rng.standard_normal(n) * config.noise_sd
    eps1 = rng.standard_normal(n) * config.noise_sd
    w = (rng.random(n) < config.treat_prob).astype(np.int8)

    mu0, tau = outcome_surfaces(x, config.dgp_kind, config.effect)
    mu1 = mu0 + tau
    # recompute tau from the stored means so the identity is exact in floats
    tau = mu1 - mu0
    y0 = mu0 + eps0
    y1 = mu1 + eps1
    y = np.where(w == 1, y1, y0)
    return SyntheticDataset(
        base=ObservedDataset(x, w, y),
        mu0=mu0,
        mu1=mu1,
        tau=tau,
        y0=y0,
        y1=y1,
        treat_prob=float(config.treat_prob),
    )


def randomize_assignment(ds: SyntheticDataset, seed: int) -> SyntheticDataset:
    """Redraw ``w`` and re-derive ``y``; everything else is carried over."""
    rng = make_rng(seed)
    w = (rng.random(ds.n) < ds.treat_prob).astype(np.int8)
    y = np.where(w == 1, ds.y1, ds.y0)
    return SyntheticDataset(
        base=ObservedDataset(ds.x, w, y),
        mu0=ds.mu0,
        mu1=ds.mu1,
        tau=ds.tau,
        y0=ds.y0,
        y1=ds.y1,
        treat_prob=ds.treat_prob,
    )


@dataclass(frozen=True)
class CsvSchema:
    """Column names for a CSV source. ``features=None`` means every other column."""

    treatment: str = "w"
    outcome: str = "y"
    features: Optional[Sequence[str]] = None


def load_csv(path, schema: CsvSchema = CsvSchema()) -> ObservedDataset:
    """Parse a headed, UTF-8, '.'-decimal CSV into an ObservedDataset.

    Missing values are rejected rather than imputed.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDatasetError("empty dataset: file has no header row") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]

    features = list(schema.features) if schema.features is not None else [
        h for h in header if h not in (schema.treatment, schema.outcome)
    ]
    if not features:
        raise MissingColumnError("no feature columns selected")
    wanted = [*features, schema.treatment, schema.outcome]
    for name in wanted:
        if name not in header:
            raise MissingColumnError("missing column", column=name)
    if not rows:
        raise EmptyDatasetError("empty dataset")

    pos = {name: header.index(name) for name in wanted}
    values = np.empty((len(rows), len(wanted)), dtype=np.float64)
    for r, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise NonNumericCellError(
                f"expected {len(header)} cells, found {len(row)}", row=r
            )
        for c, name in enumerate(wanted):
            cell = row[pos[name]].strip()
            try:
                v = float(cell)
            except ValueError:
                raise NonNumericCellError(
                    f"non-numeric value {cell!r}", row=r, column=name
                ) from None
            if not math.isfinite(v):
                raise NonNumericCellError(
                    f"non-finite value {cell!r}", row=r, column=name
                )
            values[r - 1, c] = v

    w = values[:, len(features)]
    bad = np.flatnonzero((w != 0.0) & (w != 1.0))
    if bad.size:
        r = int(bad[0]) + 1
        raise NonBinaryTreatmentError(
            f"treatment must be 0 or 1, found {w[bad[0]]:g}",
            row=r,
            column=schema.treatment,
        )
    return ObservedDataset(
        values[:, : len(features)], w.astype(np.int8), values[:, len(features) + 1]
    )


@dataclass(frozen=True)
class FoldAssignment:
    fold_of: np.ndarray
    k: int

    def __post_init__(self):
        object.__setattr__(self, "fold_of", _frozen(self.fold_of, np.int64))

    def members(self, j) -> np.ndarray:
        return np.flatnonzero(self.fold_of == j)

    def complement(self, j) -> np.ndarray:
        return np.flatnonzero(self.fold_of != j)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.fold_of, minlength=self.k)


def kfold_partition(n: int, k: int, seed: int, strata=None) -> FoldAssignment:
    """Uniformly random balanced partition of ``range(n)`` into ``k`` folds.

    With ``strata`` (e.g. the treatment vector) each stratum is dealt round-robin
    across folds in turn, so every fold receives a near-equal share of every
    stratum while total fold sizes still differ by at most one.
    """
    if int(k) != k or int(n) != n:
        raise ConfigurationError("n and k must be integers")
    if k < 2 or k > n:
        raise ConfigurationError(f"fold count must satisfy 2 <= k <= n, got k={k}, n={n}")
    rng = make_rng(seed)
    perm = rng.permutation(n)
    if strata is not None:
        strata = np.asarray(strata)
        if strata.shape != (n,):
            raise DataError("strata must have length n")
        # stable grouping keeps the within-stratum order random
        perm = perm[np.argsort(strata[perm], kind="stable")]
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[perm] = np.arange(n) % k
    return FoldAssignment(fold_of=fold_of, k=int(k))


def train_test_indices(n: int, test_fraction: float, seed: int):
    """Disjoint (train, test) index arrays, both sorted."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigurationError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n_test = int(round(n * test_fraction))
    if n_test < 1 or n_test >= n:
        raise ConfigurationError(f"test_fraction {test_fraction} leaves an empty split for n={n}")
    perm = make_rng(seed).permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])
