"""Experiment orchestration.

Each experiment expands into independent tasks (one per cell, algorithm and
seed). Every task derives its seeds from the configured seed and its own
identifiers, so the output never depends on scheduling or thread count.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, List, Optional

import numpy as np

from catekit._seeding import derive_seed
from catekit.claga import claga_fit
from catekit.dataset import (
    ObservedDataset,
    SyntheticDataset,
    generate_synthetic,
    load_csv,
    train_test_indices,
)
from catekit.decomposition import decompose, write_decomposition_csv
from catekit.errors import CateKitError, ConfigurationError, DataError
from catekit.experiments.config import Cell, ExperimentConfig
from catekit.experiments.records import TARGET_KINDS, claga_records, learner_records
from catekit.experiments.results import ResultRow, ResultTable, SummaryRow
from catekit.meta_learners import fit_cate
from catekit.metrics import (
    discrepancy_ratio,
    pehe,
    uplift_auuc,
    write_discrepancy_csv,
    write_uplift_csv,
)

log = logging.getLogger(__name__)

# PEHE ratios with a smaller vanilla PEHE than this are flagged unstable
UNSTABLE_DENOMINATOR = 1e-8


@dataclass(frozen=True)
class Task:
    cell: Cell
    algorithm: object
    seed: int
    variant: Optional[str] = None

    @property
    def ident(self):
        return f"cell={self.cell.label} algorithm={self.algorithm.value} seed={self.seed}" + (
            f" variant={self.variant}" if self.variant else ""
        )


class ExperimentFailed(CateKitError):
    def __init__(self, table, errors):
        self.table = table
        self.errors = errors
        super().__init__(f"{len(errors)} task(s) failed: " + "; ".join(errors))


def _num_leaves(cell: Cell, cfg: ExperimentConfig) -> int:
    return int(cell.base_cfg(cfg.base_learner).num_leaves)


def _row(cfg, task, metric, value, variant=None, flag=""):
    return ResultRow(
        experiment=cfg.label,
        cell=task.cell.label,
        algorithm=task.algorithm.value,
        variant=variant or task.variant or "",
        n=task.cell.n,
        num_leaves=_num_leaves(task.cell, cfg),
        seed=task.seed,
        metric=metric,
        value=float(value),
        flag=flag,
    )


def synthetic_for(cfg: ExperimentConfig, cell: Cell, seed: int) -> SyntheticDataset:
    n = cell.n if cell.n is not None else cfg.dgp.n
    return generate_synthetic(replace(cfg.dgp, n=int(n), seed=derive_seed(seed, "data", n)))


def _split(n, cfg, seed):
    train, test = train_test_indices(n, cfg.test_fraction, derive_seed(seed, "split"))
    if np.intersect1d(train, test).size:
        raise DataError("train and test indices overlap")
    return train, test


def _fit_variant(cfg, task, data: ObservedDataset, variant, treat_prob, fit_seed):
    cell_cfg = task.cell.base_cfg(cfg.base_learner)
    propensity = cfg.propensity_for(treat_prob)
    if variant == "vanilla":
        return fit_cate(task.algorithm, data, cell_cfg.with_seed(fit_seed), propensity)
    ccfg = replace(cfg.claga_for(task.algorithm, cell_cfg, fit_seed), propensity=propensity)
    return claga_fit(data, ccfg)


def _fit_seed(task):
    return derive_seed(task.seed, "fit", task.algorithm.value, task.cell.label)


# --- benchmark_pehe / sweep_complexity ------------------------------------------


def _pehe_task(cfg: ExperimentConfig, task: Task, out_dir=None):
    ds = synthetic_for(cfg, task.cell, task.seed)
    train, test = _split(ds.n, cfg, task.seed)
    tr, te = ds.subset(train), ds.subset(test)
    rows, values = [], {}
    for variant in cfg.variants:
        model = _fit_variant(cfg, task, tr.base, variant, ds.treat_prob, _fit_seed(task))
        values[variant] = pehe(model.predict_cate(te.x), te.tau)
        rows.append(_row(cfg, task, "pehe", values[variant], variant))
    if "vanilla" in values and "claga" in values:
        denom = values["vanilla"]
        flag = "unstable_denominator" if denom < UNSTABLE_DENOMINATOR else ""
        ratio = values["claga"] / denom if denom > 0 else float("nan")
        rows.append(_row(cfg, task, "pehe_ratio", ratio, "claga/vanilla", flag))
    return rows


# --- sweep_discrepancy -----------------------------------------------------------


def _discrepancy_task(cfg: ExperimentConfig, task: Task, out_dir=None):
    ds = synthetic_for(cfg, task.cell, task.seed)
    rows = []
    for variant in cfg.variants:
        def fit_fn(data, seed, variant=variant):
            return _fit_variant(cfg, task, data, variant, ds.treat_prob, seed)

        rep = discrepancy_ratio(
            ds, fit_fn, runs=cfg.runs, alpha=cfg.alpha,
            seed=derive_seed(task.seed, "discrepancy", task.algorithm.value, task.cell.label),
        )
        rows.append(_row(cfg, task, "discrepancy_ratio", rep.ratio, variant))
        rows.append(_row(cfg, task, "n_tested", rep.n_tested, variant))
        rows.append(_row(cfg, task, "n_excluded", rep.n_excluded, variant))
        if out_dir is not None and cfg.per_instance:
            write_discrepancy_csv(rep, out_dir / _fname("discrepancy", task, variant))
    return rows


# --- auuc_eval --------------------------------------------------------------------


def _observed_source(cfg: ExperimentConfig, cell: Cell, seed: int):
    if cfg.csv is not None:
        return load_csv(cfg.csv.path, cfg.csv.schema), None
    ds = synthetic_for(cfg, cell, seed)
    return ds.base, ds.treat_prob


def _auuc_task(cfg: ExperimentConfig, task: Task, out_dir=None):
    data, treat_prob = _observed_source(cfg, task.cell, task.seed)
    train, test = _split(data.n, cfg, task.seed)
    tr, te = data.subset(train), data.subset(test)
    if te.n_treated == 0 or te.n_control == 0:
        raise DataError("test split contains a single treatment group")
    rows = []
    for variant in cfg.variants:
        model = _fit_variant(cfg, task, tr, variant, treat_prob, _fit_seed(task))
        curve = uplift_auuc(model.predict_cate(te.x), te.w, te.y)
        rows.append(_row(cfg, task, "auuc", curve.auuc, variant))
        if out_dir is not None and cfg.per_instance:
            write_uplift_csv(curve, out_dir / _fname("uplift", task, variant))
    return rows


def _auuc_comparisons(cfg: ExperimentConfig, table: ResultTable):
    """Per (cell, algorithm): which variant has the higher mean AUUC."""
    out = []
    if set(cfg.variants) != {"vanilla", "claga"}:
        return out
    means = {}
    for s in table.aggregates():
        if s.metric == "auuc":
            means[(s.cell, s.algorithm, s.variant)] = s
    for (cell, algo, variant), s in sorted(means.items()):
        if variant != "vanilla" or (cell, algo, "claga") not in means:
            continue
        c = means[(cell, algo, "claga")]
        diff = c.mean - s.mean
        winner = "claga" if diff > 0 else "vanilla" if diff < 0 else "tie"
        out.append(SummaryRow(
            experiment=s.experiment, cell=cell, algorithm=algo, variant="claga-vanilla",
            n=s.n, num_leaves=s.num_leaves, metric="auuc_comparison",
            count=min(s.count, c.count), mean=diff, sd=float("nan"), median=float("nan"),
            note=f"winner={winner}",
        ))
    return out


# --- verify_decomposition ----------------------------------------------------------


def _decomposition_task(cfg: ExperimentConfig, task: Task, out_dir=None):
    ds = synthetic_for(cfg, task.cell, task.seed)
    cell_cfg = task.cell.base_cfg(cfg.base_learner)
    seed = derive_seed(task.seed, "decomposition", task.algorithm.value, task.cell.label)
    if task.variant == "vanilla":
        records = learner_records(
            ds, task.algorithm, cell_cfg, cfg.propensity_for(ds.treat_prob), cfg.runs, seed
        )
    else:
        ccfg = replace(
            cfg.claga_for(task.algorithm, cell_cfg, seed),
            propensity=cfg.propensity_for(ds.treat_prob),
        )
        records = claga_records(ds, ccfg, cfg.runs, seed)

    reports, excluded = [], 0
    for i in range(records.n_instances):
        try:
            reports.append(decompose(records, i, "empirical"))
        except DataError:
            excluded += 1
    if not reports:
        raise DataError("no instance had two records in each group")
    rows = []
    for term in ("model_error", "model_target_cov", "wvg", "sdmg", "target_bias_sq", "total", "target_mse"):
        rows.append(_row(cfg, task, f"mean_{term}", np.mean([getattr(r, term) for r in reports])))
    rows.append(_row(cfg, task, "max_identity_residual", max(r.identity_residual for r in reports)))
    rows.append(_row(cfg, task, "max_sdmg", max(r.sdmg for r in reports)))
    rows.append(_row(cfg, task, "min_sdmg", min(r.sdmg for r in reports)))
    rows.append(_row(cfg, task, "n_excluded", excluded))
    if out_dir is not None:
        write_decomposition_csv(reports, out_dir / _fname("decomposition", task, task.variant))
    return rows


def _fname(prefix, task, variant):
    cell = task.cell.label.replace(";", "_").replace("=", "")
    return f"{prefix}_{cell}_{task.algorithm.value}_{variant}_seed{task.seed}.csv"


# --- dispatch ------------------------------------------------------------------------

_TASK_FNS = {
    "benchmark_pehe": _pehe_task,
    "sweep_complexity": _pehe_task,
    "sweep_discrepancy": _discrepancy_task,
    "auuc_eval": _auuc_task,
    "verify_decomposition": _decomposition_task,
}


def build_tasks(cfg: ExperimentConfig) -> List[Task]:
    if cfg.experiment == "verify_decomposition" and "vanilla" in cfg.variants:
        bad = [a.value for a in cfg.algorithms if a not in TARGET_KINDS]
        if bad:
            valid = ", ".join(k.value for k in TARGET_KINDS)
            raise ConfigurationError(
                f"vanilla decomposition needs an effect-scale learning target; "
                f"{bad} have none (valid: {valid})"
            )
    tasks = []
    for cell in cfg.cells():
        for algo in cfg.algorithms:
            for seed in cfg.seeds:
                if cfg.experiment == "verify_decomposition":
                    tasks.extend(Task(cell, algo, seed, v) for v in cfg.variants)
                else:
                    tasks.append(Task(cell, algo, seed))
    return tasks


def run_experiment(cfg: ExperimentConfig, threads: int = 1, out_dir=None,
                   raise_on_error: bool = True) -> ResultTable:
    """Run every task and collect rows in task order.

    Task failures are gathered; with ``raise_on_error`` an
    :class:`ExperimentFailed` carrying the partial table is raised at the end.
    """
    fn = _TASK_FNS[cfg.experiment]
    tasks = build_tasks(cfg)

    def run(task):
        try:
            return task, fn(cfg, task, out_dir), None
        except CateKitError as exc:
            log.error("task %s failed: %s", task.ident, exc)
            return task, [], f"{task.ident}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run, tasks))
    else:
        outcomes = [run(t) for t in tasks]

    table = ResultTable()
    errors = []
    for task, rows, err in outcomes:
        table.extend(rows)
        if err:
            errors.append((task, err))
    table.check_unique()
    if cfg.experiment == "auuc_eval":
        table.extra_summary.extend(_auuc_comparisons(cfg, table))
    if cfg.experiment == "sweep_discrepancy":
        table.extra_summary.extend(trend_rows(cfg, table, "discrepancy_ratio"))
    if cfg.experiment == "sweep_complexity":
        table.extra_summary.extend(trend_rows(cfg, table, "pehe"))
    if errors and raise_on_error:
        raise ExperimentFailed(table, [e for _, e in errors])
    table.errors = [e for _, e in errors]
    return table


def run_benchmark_pehe(cfg, threads=1, out_dir=None):
    return run_experiment(_expect(cfg, "benchmark_pehe"), threads, out_dir)


def run_sweep_discrepancy(cfg, threads=1, out_dir=None):
    return run_experiment(_expect(cfg, "sweep_discrepancy"), threads, out_dir)


def run_sweep_complexity(cfg, threads=1, out_dir=None):
    return run_experiment(_expect(cfg, "sweep_complexity"), threads, out_dir)


def run_auuc_eval(cfg, threads=1, out_dir=None):
    return run_experiment(_expect(cfg, "auuc_eval"), threads, out_dir)


def run_verify_decomposition(cfg, threads=1, out_dir=None):
    return run_experiment(_expect(cfg, "verify_decomposition"), threads, out_dir)


def _expect(cfg, kind):
    if cfg.experiment != kind:
        raise ConfigurationError(f"config is for {cfg.experiment!r}, not {kind!r}")
    return cfg


# --- trends ----------------------------------------------------------------------------


def rankdata(a):
    """Average ranks (1-based), ties share their mean rank."""
    a = np.asarray(a, dtype=np.float64)
    order = np.argsort(a, kind="stable")
    ranks = np.empty(a.size)
    sorted_a = a[order]
    i = 0
    while i < a.size:
        j = i
        while j + 1 < a.size and sorted_a[j + 1] == sorted_a[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    rx, ry = rankdata(x), rankdata(y)
    rx, ry = rx - rx.mean(), ry - ry.mean()
    denom = math.sqrt(float(np.sum(rx * rx) * np.sum(ry * ry)))
    if denom == 0.0:
        return 0.0
    return float(np.sum(rx * ry) / denom)


def trend_rows(cfg: ExperimentConfig, table: ResultTable, metric: str):
    """Spearman correlation of cell means against a single varying grid axis."""
    varying = [(k, vals) for k, vals in cfg.grid if len(vals) > 1]
    if len(varying) != 1 or len(varying[0][1]) < 2:
        log.warning("trend statistic needs exactly one grid axis with >= 2 points; skipped")
        return []
    axis, _ = varying[0]
    by_key = {}
    for s in table.aggregates():
        if s.metric != metric:
            continue
        cell = next(c for c in cfg.cells() if c.label == s.cell)
        x = dict(cell.overrides)[axis]
        by_key.setdefault((s.algorithm, s.variant), []).append((x, s.mean))
    out = []
    for (algo, variant), pts in sorted(by_key.items()):
        pts.sort()
        xs, ys = zip(*pts)
        rho = spearman(xs, ys) if len(pts) >= 2 else float("nan")
        out.append(SummaryRow(
            experiment=cfg.label, cell=f"trend:{axis}", algorithm=algo, variant=variant,
            n=None, num_leaves=None, metric=f"spearman_{metric}_vs_{axis}",
            count=len(pts), mean=rho, sd=float("nan"), median=float("nan"),
            note="cell means " + " ".join(f"{x}:{y!r}" for x, y in pts),
        ))
    return out
