"""Build run records by retraining under re-randomized assignments."""

from __future__ import annotations

import numpy as np

from catekit._seeding import derive_seed
from catekit.base_learners import fit_regressor
from catekit.claga import ClagaConfig, fit_primaries, relabel
from catekit.dataset import SyntheticDataset, kfold_partition, randomize_assignment
from catekit.decomposition import RunRecordSet
from catekit.errors import ConfigurationError, DataError
from catekit.meta_learners import AlgorithmKind, fit_cate

TARGET_KINDS = (AlgorithmKind.X, AlgorithmKind.R, AlgorithmKind.DR)


def _flip(ds: SyntheticDataset, data):
    w = 1 - data.w
    return data.with_assignment(w, np.where(w == 1, ds.y1, ds.y0))


def learner_records(ds: SyntheticDataset, kind, cfg, propensity, runs: int, seed: int) -> RunRecordSet:
    """Records of ``(w, learning target, in-sample prediction)`` per run."""
    kind = AlgorithmKind.parse(kind)
    if kind not in TARGET_KINDS:
        valid = ", ".join(k.value for k in TARGET_KINDS)
        raise ConfigurationError(
            f"algorithm {kind.value!r} has no effect-scale learning target; "
            f"valid algorithms for vanilla decomposition: {valid}"
        )
    ws, tts, ths = [], [], []
    for r in range(runs):
        run_seed = derive_seed(seed, "run", r)
        dr = randomize_assignment(ds, derive_seed(run_seed, "assignment"))
        model = fit_cate(kind, dr.base, cfg.with_seed(derive_seed(run_seed, "fit")), propensity)
        ws.append(dr.w)
        tts.append(model.learning_target(dr.base))
        ths.append(model.predict_cate(ds.x))
    return RunRecordSet(np.stack(ws), np.stack(tts), np.stack(ths), ds.tau, ds.treat_prob)


def claga_records(ds: SyntheticDataset, cfg: ClagaConfig, runs: int, seed: int) -> RunRecordSet:
    """Records for CLAGA relabels under both assignments of every row.

    In each run the primaries are fit once. The relabels are then recomputed on
    a copy of the data with every assignment flipped; with the primaries held
    fixed they must be bitwise identical, and so is the secondary model trained
    on them. Each run therefore contributes the drawn record and its
    counterfactual mirror, which carry the same target and prediction.
    """
    cfg.validate()
    ws, tts, ths = [], [], []
    for r in range(runs):
        run_seed = derive_seed(seed, "run", r)
        dr = randomize_assignment(ds, derive_seed(run_seed, "assignment"))
        rcfg = cfg.with_seed(derive_seed(run_seed, "fit"))
        strata = dr.w if rcfg.stratified else None
        folds = kfold_partition(dr.n, rcfg.k, derive_seed(rcfg.seed, "folds"), strata=strata)
        primaries = fit_primaries(dr.base, folds, rcfg)
        labels = relabel(dr.base, folds, primaries).labels
        flipped = relabel(_flip(ds, dr.base), folds, primaries).labels
        if labels.tobytes() != flipped.tobytes():
            raise DataError("relabels changed when assignments were mutated")
        secondary = fit_regressor(
            dr.x, labels, None, rcfg.secondary_cfg.with_seed(derive_seed(rcfg.seed, "secondary"))
        )
        pred = secondary.predict(ds.x)
        ws.extend([dr.w, 1 - dr.w])
        tts.extend([labels, flipped])
        ths.extend([pred, pred])
    return RunRecordSet(np.stack(ws), np.stack(tts), np.stack(ths), ds.tau, ds.treat_prob)
