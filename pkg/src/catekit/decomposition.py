"""Five-term decomposition of the squared CATE error at a fixed instance.

For a target ``tt`` that depends on the assignment ``W`` and a prediction ``th``::

    E[(th - tau)^2] = E[(th - tt)^2]                       model error
                      - 2 E[(tau - tt)(th - tt)]            model-target covariance
                      + (1 - pi) Var[tt0] + pi Var[tt1]     WVG
                      + pi (1 - pi) (E[tt0] - E[tt1])^2     SDMG
                      + (E[tau - tt])^2                     squared target bias

Empirical plug-ins use *population* (ddof=0) variances. With ``pi`` set to the
empirical treated fraction of the same records, the five terms sum to the
measured total exactly (up to rounding); with the design's known ``pi`` the
gap is a sampling error of order ``runs ** -0.5``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from catekit.errors import ConfigurationError, DataError

PI_MODES = ("empirical", "known")


@dataclass(frozen=True)
class RunRecordSet:
    """Run records for ``n`` instances over ``R`` runs.

    ``w``, ``tilde_tau`` and ``hat_tau`` have shape ``(R, n)``; ``tau`` has shape
    ``(n,)``. ``pi`` is the design's assignment probability, if known.
    """

    w: np.ndarray
    tilde_tau: np.ndarray
    hat_tau: np.ndarray
    tau: np.ndarray
    pi: Optional[float] = None

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.w))
        tt = np.atleast_2d(np.asarray(self.tilde_tau, dtype=np.float64))
        th = np.atleast_2d(np.asarray(self.hat_tau, dtype=np.float64))
        tau = np.atleast_1d(np.asarray(self.tau, dtype=np.float64))
        if not (w.shape == tt.shape == th.shape) or w.shape[1] != tau.shape[0]:
            raise DataError(
                f"record shapes disagree: w {w.shape}, tilde_tau {tt.shape}, "
                f"hat_tau {th.shape}, tau {tau.shape}"
            )
        if not np.all((w == 0) | (w == 1)):
            raise DataError("recorded assignments must be binary")
        if self.pi is not None and not 0.0 < self.pi < 1.0:
            raise DataError(f"pi must lie in (0, 1), got {self.pi}")
        for name, arr in (("w", w.astype(np.int8)), ("tilde_tau", tt), ("hat_tau", th), ("tau", tau)):
            arr = np.array(arr, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_runs(self) -> int:
        return self.w.shape[0]

    @property
    def n_instances(self) -> int:
        return self.w.shape[1]

    def instance(self, i):
        return self.w[:, i], self.tilde_tau[:, i], self.hat_tau[:, i], float(self.tau[i])


@dataclass(frozen=True)
class DecompositionReport:
    model_error: float
    model_target_cov: float
    wvg: float
    sdmg: float
    target_bias_sq: float
    total: float
    identity_residual: float
    pi_used: float = float("nan")
    # E[(tau - tt)^2]; equals wvg + sdmg + target_bias_sq in empirical mode
    target_mse: float = float("nan")

    @property
    def terms_sum(self) -> float:
        return self.model_error + self.model_target_cov + self.wvg + self.sdmg + self.target_bias_sq


def mixture_variance(pi: float, m0: float, v0: float, m1: float, v1: float) -> float:
    """Variance of a two-component mixture with weight ``pi`` on component 1."""
    if not 0.0 <= pi <= 1.0:
        raise ConfigurationError(f"pi must lie in [0, 1], got {pi}")
    if v0 < 0 or v1 < 0:
        raise ConfigurationError("variances must be nonnegative")
    return (1.0 - pi) * v0 + pi * v1 + pi * (1.0 - pi) * (m0 - m1) ** 2


def _report(model_error, cov, m0, v0, m1, v1, pi, bias_mean, total, target_mse):
    wvg = (1.0 - pi) * v0 + pi * v1
    sdmg = pi * (1.0 - pi) * (m0 - m1) ** 2
    bias_sq = bias_mean * bias_mean
    s = model_error + cov + wvg + sdmg + bias_sq
    return DecompositionReport(
        model_error=float(model_error),
        model_target_cov=float(cov),
        wvg=float(wvg),
        sdmg=float(sdmg),
        target_bias_sq=float(bias_sq),
        total=float(total),
        identity_residual=float(abs(s - total)),
        pi_used=float(pi),
        target_mse=float(target_mse),
    )


def _resolve_pi(records, w, pi_mode):
    if pi_mode == "empirical":
        return float(np.mean(w))
    if pi_mode == "known":
        if records.pi is None:
            raise ConfigurationError("pi_mode='known' needs records.pi")
        return float(records.pi)
    raise ConfigurationError(f"pi_mode must be one of {PI_MODES}, got {pi_mode!r}")


def decompose(records: RunRecordSet, instance: int, pi_mode: str = "empirical") -> DecompositionReport:
    """Plug-in estimate of every term at one instance from its run records."""
    w, tt, th, tau = records.instance(instance)
    g1 = w == 1
    n1 = int(g1.sum())
    n0 = w.size - n1
    if n0 < 2 or n1 < 2:
        raise DataError(
            f"instance {instance}: insufficient records ({n0} control, {n1} treated; need 2 each)"
        )
    pi = _resolve_pi(records, w, pi_mode)
    t0, t1 = tt[~g1], tt[g1]
    m0, m1 = float(t0.mean()), float(t1.mean())
    v0 = float(np.mean((t0 - m0) ** 2))
    v1 = float(np.mean((t1 - m1) ** 2))
    bias = tau - tt
    err = th - tt
    return _report(
        model_error=np.mean(err * err),
        cov=-2.0 * np.mean(bias * err),
        m0=m0, v0=v0, m1=m1, v1=v1, pi=pi,
        bias_mean=np.mean(bias),
        total=np.mean((th - tau) ** 2),
        target_mse=np.mean(bias * bias),
    )


def decompose_all(records: RunRecordSet, pi_mode: str = "empirical"):
    return [decompose(records, i, pi_mode) for i in range(records.n_instances)]


def covariance_bound(records: RunRecordSet, instance: int) -> Tuple[float, float]:
    """``(|model-target covariance|, 2 sqrt(E[(tau-tt)^2]) sqrt(E[(th-tt)^2]))``."""
    _, tt, th, tau = records.instance(instance)
    bias = tau - tt
    err = th - tt
    lhs = abs(-2.0 * float(np.mean(bias * err)))
    rhs = 2.0 * math.sqrt(float(np.mean(bias * bias))) * math.sqrt(float(np.mean(err * err)))
    return lhs, rhs


# --- exact enumeration --------------------------------------------------------

Dist = Sequence[Tuple[float, float]]
ModelMap = Callable[[float], Union[float, Dist]]


def _normalize(dist, name):
    pairs = [(float(v), float(p)) for v, p in dist]
    if not pairs:
        raise DataError(f"{name} has empty support")
    if any(p < 0 for _, p in pairs):
        raise DataError(f"{name} has negative probabilities")
    total = sum(p for _, p in pairs)
    if total <= 0:
        raise DataError(f"{name} has zero total mass")
    return [(v, p / total) for v, p in pairs]


def _model_outcomes(model, v):
    out = model(v)
    if isinstance(out, (int, float, np.floating, np.integer)):
        return [(float(out), 1.0)]
    return _normalize(out, "model output distribution")


def exact_decomposition(dist0: Dist, dist1: Dist, pi: float, tau: float, model: ModelMap) -> DecompositionReport:
    """Evaluate both sides of the decomposition by enumeration over the joint
    support of ``(W, target, prediction)``.

    ``model`` maps a target value to a prediction, or to a finite distribution
    of predictions (training randomness).
    """
    if not 0.0 <= pi <= 1.0:
        raise ConfigurationError(f"pi must lie in [0, 1], got {pi}")
    groups = ((1.0 - pi, _normalize(dist0, "dist0")), (pi, _normalize(dist1, "dist1")))
    total = model_error = cross = bias_mean = target_mse = 0.0
    moments = []
    for pw, dist in groups:
        m = sum(p * v for v, p in dist)
        var = sum(p * (v - m) ** 2 for v, p in dist)
        moments.append((m, var))
        bias_mean += pw * (tau - m)
        for v, p in dist:
            target_mse += pw * p * (tau - v) ** 2
            for h, q in _model_outcomes(model, v):
                mass = pw * p * q
                total += mass * (h - tau) ** 2
                model_error += mass * (h - v) ** 2
                cross += mass * (tau - v) * (h - v)
    (m0, v0), (m1, v1) = moments
    return _report(model_error, -2.0 * cross, m0, v0, m1, v1, pi, bias_mean, total, target_mse)


def verify_identity(dist0: Dist, dist1: Dist, pi: float, tau: float, model: ModelMap) -> float:
    """Absolute gap between the exact squared error and the sum of the five
    exact terms."""
    return exact_decomposition(dist0, dist1, pi, tau, model).identity_residual


# --- serialization ------------------------------------------------------------

REPORT_COLUMNS = [f.name for f in fields(DecompositionReport)]


def aggregate_reports(reports: Sequence[DecompositionReport]) -> dict:
    """Instance-averaged terms; the max identity residual is kept as well."""
    if not reports:
        raise DataError("no reports to aggregate")
    out = {c: float(np.mean([getattr(r, c) for r in reports])) for c in REPORT_COLUMNS}
    out["max_identity_residual"] = float(max(r.identity_residual for r in reports))
    return out


def write_decomposition_csv(reports: Sequence[DecompositionReport], path):
    """One row per instance, then an ``aggregate`` row of instance means."""
    agg = aggregate_reports(reports)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["instance", *REPORT_COLUMNS])
        for i, r in enumerate(reports):
            d = asdict(r)
            out.writerow([i, *(repr(d[c]) for c in REPORT_COLUMNS)])
        out.writerow(["aggregate", *(repr(agg[c]) for c in REPORT_COLUMNS)])
