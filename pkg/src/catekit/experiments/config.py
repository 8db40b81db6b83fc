"""JSON experiment configuration.

One experiment per file. Example::

    {
      "experiment": "sweep_discrepancy",
      "source": {"dgp": {"n": 2000, "dgp_kind": "nonlinear_effect"}},
      "algorithms": ["two"],
      "variants": ["vanilla", "claga"],
      "base_learner": {"n_estimators": 100, "num_leaves": 16},
      "claga": {"k": 2},
      "grid": {"n": [500, 2000, 8000]},
      "runs": 30,
      "seeds": [0]
    }

``grid`` keys are ``n`` (synthetic size) or any base-learner field; cells are
the Cartesian product of the listed values, applied to the primary and the
secondary learner alike unless ``claga.secondary`` pins its own values.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, List, Optional, Tuple, Union

from catekit.base_learners import BaseLearnerConfig
from catekit.claga import ClagaConfig
from catekit.dataset import DGPConfig, CsvSchema
from catekit.errors import ConfigurationError
from catekit.meta_learners import AlgorithmKind

EXPERIMENT_KINDS = (
    "benchmark_pehe",
    "sweep_discrepancy",
    "sweep_complexity",
    "auuc_eval",
    "verify_decomposition",
)
VARIANTS = ("vanilla", "claga")
_BASE_FIELDS = {f.name for f in fields(BaseLearnerConfig)} - {"seed"}
_DGP_FIELDS = {f.name for f in fields(DGPConfig)} - {"seed"}


@dataclass(frozen=True)
class CsvSource:
    path: str
    schema: CsvSchema


@dataclass(frozen=True)
class Cell:
    """One grid point: a label plus the overrides it applies."""

    label: str
    n: Optional[int]
    overrides: Tuple[Tuple[str, Any], ...]

    def base_cfg(self, base: BaseLearnerConfig) -> BaseLearnerConfig:
        kw = {k: v for k, v in self.overrides if k != "n"}
        return replace(base, **kw)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seeds: Tuple[int, ...]
    algorithms: Tuple[AlgorithmKind, ...]
    variants: Tuple[str, ...] = VARIANTS
    dgp: Optional[DGPConfig] = None
    csv: Optional[CsvSource] = None
    base_learner: BaseLearnerConfig = field(default_factory=BaseLearnerConfig)
    claga: ClagaConfig = field(default_factory=ClagaConfig)
    secondary_overrides: Tuple[Tuple[str, Any], ...] = ()
    propensity: Union[str, float] = "known"
    grid: Tuple[Tuple[str, Tuple[Any, ...]], ...] = ()
    runs: int = 30
    alpha: float = 0.05
    test_fraction: float = 0.3
    per_instance: bool = False
    output: Optional[str] = None
    name: Optional[str] = None

    @property
    def label(self) -> str:
        return self.name or self.experiment

    def cells(self) -> List[Cell]:
        if not self.grid:
            n = self.dgp.n if self.dgp is not None else None
            return [Cell(label="default", n=n, overrides=())]
        keys = [k for k, _ in self.grid]
        out = []
        for combo in itertools.product(*(vals for _, vals in self.grid)):
            ov = tuple(zip(keys, combo))
            label = ";".join(f"{k}={v}" for k, v in ov)
            n = dict(ov).get("n", self.dgp.n if self.dgp is not None else None)
            out.append(Cell(label=label, n=n, overrides=ov))
        return out

    def propensity_for(self, treat_prob: Optional[float]):
        """Resolve the propensity setting for a given design probability."""
        if self.propensity == "known":
            if treat_prob is None:
                raise ConfigurationError("propensity 'known' needs a synthetic source")
            return float(treat_prob)
        return self.propensity

    def claga_for(self, primary_kind, cell_cfg: BaseLearnerConfig, seed: int) -> ClagaConfig:
        secondary = replace(cell_cfg, **dict(self.secondary_overrides))
        return replace(
            self.claga,
            primary_kind=primary_kind,
            primary_cfg=cell_cfg,
            secondary_cfg=secondary,
            seed=int(seed),
        )


def _base_from(d, where) -> BaseLearnerConfig:
    unknown = set(d) - _BASE_FIELDS
    if unknown:
        raise ConfigurationError(f"{where}: unknown base-learner keys {sorted(unknown)}")
    return BaseLearnerConfig(**d).validate()


def parse_config(raw: Dict[str, Any]) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a JSON object")
    raw = dict(raw)
    kind = raw.pop("experiment", raw.pop("kind", None))
    if kind not in EXPERIMENT_KINDS:
        raise ConfigurationError(f"experiment must be one of {EXPERIMENT_KINDS}, got {kind!r}")

    seeds = raw.pop("seeds", [0])
    if isinstance(seeds, int):
        seeds = [seeds]
    if not seeds:
        raise ConfigurationError("at least one seed is required")
    seeds = tuple(int(s) for s in seeds)
    if len(set(seeds)) != len(seeds):
        raise ConfigurationError("seeds must be distinct")

    algos = raw.pop("algorithms", ["two"])
    if isinstance(algos, str):
        algos = [algos]
    if not algos:
        raise ConfigurationError("algorithm list is empty")
    algos = tuple(AlgorithmKind.parse(a) for a in algos)

    variants = raw.pop("variants", list(VARIANTS))
    if isinstance(variants, str):
        variants = list(VARIANTS) if variants == "both" else [variants]
    for v in variants:
        if v not in VARIANTS:
            raise ConfigurationError(f"unknown variant {v!r}; expected {VARIANTS}")
    if not variants:
        raise ConfigurationError("variant list is empty")
    variants = tuple(v for v in VARIANTS if v in variants)

    source = raw.pop("source", {})
    dgp = csv_src = None
    if "dgp" in source:
        d = dict(source["dgp"])
        unknown = set(d) - _DGP_FIELDS
        if unknown:
            raise ConfigurationError(f"source.dgp: unknown keys {sorted(unknown)}")
        dgp = DGPConfig(**d).validate()
    if "csv" in source:
        c = dict(source["csv"])
        if "path" not in c:
            raise ConfigurationError("source.csv.path is required")
        csv_src = CsvSource(
            path=c["path"],
            schema=CsvSchema(
                treatment=c.get("treatment", "w"),
                outcome=c.get("outcome", "y"),
                features=c.get("features"),
            ),
        )
    if (dgp is None) == (csv_src is None):
        raise ConfigurationError("exactly one of source.dgp or source.csv is required")

    base = _base_from(raw.pop("base_learner", {}), "base_learner")

    cl = dict(raw.pop("claga", {}))
    secondary = dict(cl.pop("secondary", {}))
    unknown = set(secondary) - _BASE_FIELDS
    if unknown:
        raise ConfigurationError(f"claga.secondary: unknown keys {sorted(unknown)}")
    allowed = {"k", "primary_replicates", "stratified"}
    if set(cl) - allowed:
        raise ConfigurationError(f"claga: unknown keys {sorted(set(cl) - allowed)}")
    claga = ClagaConfig(
        k=int(cl.get("k", 2)),
        primary_replicates=int(cl.get("primary_replicates", 1)),
        stratified=bool(cl.get("stratified", False)),
    )

    propensity = raw.pop("propensity", "known" if dgp is not None else "estimate")
    if isinstance(propensity, str):
        if propensity not in ("known", "estimate"):
            raise ConfigurationError("propensity must be 'known', 'estimate' or a probability")
        if propensity == "known" and dgp is None:
            raise ConfigurationError("propensity 'known' is only available for synthetic sources")
    else:
        propensity = float(propensity)
        if not 0.0 < propensity < 1.0:
            raise ConfigurationError("propensity must lie in (0, 1)")

    grid_raw = raw.pop("grid", {})
    grid = []
    for k, vals in grid_raw.items():
        if k != "n" and k not in _BASE_FIELDS:
            raise ConfigurationError(f"grid: unknown axis {k!r}")
        if k == "n" and dgp is None:
            raise ConfigurationError("grid axis 'n' requires a synthetic source")
        vals = list(vals) if isinstance(vals, (list, tuple)) else [vals]
        if not vals:
            raise ConfigurationError(f"grid axis {k!r} is empty")
        grid.append((k, tuple(vals)))
    for k, vals in grid:
        for v in vals:
            if k == "n":
                replace(dgp, n=v).validate()
            else:
                replace(base, **{k: v}).validate()

    cfg = ExperimentConfig(
        experiment=kind,
        seeds=seeds,
        algorithms=algos,
        variants=variants,
        dgp=dgp,
        csv=csv_src,
        base_learner=base,
        claga=claga,
        secondary_overrides=tuple(secondary.items()),
        propensity=propensity,
        grid=tuple(grid),
        runs=int(raw.pop("runs", 30)),
        alpha=float(raw.pop("alpha", 0.05)),
        test_fraction=float(raw.pop("test_fraction", 0.3)),
        per_instance=bool(raw.pop("per_instance", False)),
        output=raw.pop("output", None),
        name=raw.pop("name", None),
    )
    if raw:
        raise ConfigurationError(f"unknown config keys {sorted(raw)}")

    if kind in ("benchmark_pehe", "sweep_complexity", "sweep_discrepancy", "verify_decomposition") and dgp is None:
        msg = "PEHE requires known tau" if "pehe" in kind or "complexity" in kind else "this experiment needs a synthetic source"
        raise ConfigurationError(f"{kind}: {msg}; use source.dgp")
    if cfg.runs < 2:
        raise ConfigurationError("runs must be >= 2")
    if not 0.0 <= cfg.alpha < 1.0:
        raise ConfigurationError("alpha must lie in [0, 1)")
    if not 0.0 < cfg.test_fraction < 1.0:
        raise ConfigurationError("test_fraction must lie in (0, 1)")
    if cfg.claga.k < 2:
        raise ConfigurationError("claga.k must be >= 2")
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(raw)
