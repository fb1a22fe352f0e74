"""End-to-end orchestration: ingest, normalize, screen, VIF-filter,
cross-validated training of all learners, the metric suite, importance
ranking, median stratification, Kaplan-Meier comparison and artifact
emission.

Evaluation protocol: K-fold cross-validation with event-stratified folds.
Normalization, univariate screening and VIF filtering are refit inside
every fold, so the held-out fold never influences feature selection; all
reported metrics and the risk stratification use pooled out-of-fold
predictions. Everything is deterministic given the config seed.
"""

from __future__ import annotations

import csv
import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .boosting import BoostedModel, BoostParams, fit_boosted
from .cohort import (
    Cohort,
    ColumnSchema,
    ConstantFeatureWarning,
    apply_normalization,
    load_cohort,
    zscore_normalize,
)
from .coxph import (
    CoxModel,
    breslow_baseline,
    fit_cox,
    retained_features,
    univariate_screen,
    vif_filter,
)
from .errors import (
    DegenerateStratificationError,
    InvalidParameterError,
    PipelineError,
    RecurriskError,
    UndefinedMetricError,
)
from .explain import MAX_EXACT_FEATURES, mean_abs_shapley, median_background, permutation_importance
from .metrics import (
    auc_summary,
    brier,
    c_index,
    calibration_table,
    dca_inputs,
    net_benefit,
)
from .nonparametric import kaplan_meier, log_rank, median_survival_time
from .radiomics import extract_all, load_region_mask, load_voxel_grid
from .rsf import Forest, ForestParams, fit_rsf, forest_to_json, predict_risk_matrix
from .stepfun import StepFunction
from .svgplot import PALETTE, Series, render_plot
from .temporal import load_longitudinal, train_temporal, temporal_risk

SCHEMA_VERSION = "1"
MODEL_ORDER = ("xgboost", "rsf", "coxboost", "gbm", "cox")
DCA_THRESHOLDS = tuple(round(0.05 * k, 2) for k in range(1, 20))


@dataclass(frozen=True)
class PipelineConfig:
    cohort_csv: str
    out_dir: str = "out"
    longitudinal_csv: str | None = None
    voxel_grid_dir: str | None = None
    id_column: str = "id"
    time_column: str = "time"
    event_column: str = "event"
    alpha: float = 0.05
    vif_threshold: float = 5.0
    cv_folds: int = 5
    horizons: tuple[float, ...] = (12.0, 24.0)
    seed: int = 0
    enabled_models: tuple[str, ...] = MODEL_ORDER
    model_params: dict = field(default_factory=dict)
    radiomics_levels: int = 32
    temporal_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.cv_folds < 2:
            raise InvalidParameterError("cv_folds must be >= 2")
        horizons = tuple(float(h) for h in self.horizons)
        if not horizons or any(h <= 0 for h in horizons) or list(horizons) != sorted(horizons):
            raise InvalidParameterError("horizons must be positive and ascending")
        object.__setattr__(self, "horizons", horizons)
        unknown = set(self.enabled_models) - set(MODEL_ORDER)
        if unknown:
            raise InvalidParameterError(f"unknown models: {sorted(unknown)}")
        object.__setattr__(self, "enabled_models", tuple(self.enabled_models))

    @staticmethod
    def from_json_file(path) -> "PipelineConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        base = path.parent

        def resolve(p):
            return None if p is None else str((base / p) if not Path(p).is_absolute() else Path(p))

        return PipelineConfig(
            cohort_csv=resolve(doc["cohort_csv"]),
            out_dir=resolve(doc.get("out_dir", "out")),
            longitudinal_csv=resolve(doc.get("longitudinal_csv")),
            voxel_grid_dir=resolve(doc.get("voxel_grid_dir")),
            id_column=doc.get("id_column", "id"),
            time_column=doc.get("time_column", "time"),
            event_column=doc.get("event_column", "event"),
            alpha=float(doc.get("alpha", 0.05)),
            vif_threshold=float(doc.get("vif_threshold", 5.0)),
            cv_folds=int(doc.get("cv_folds", 5)),
            horizons=tuple(doc.get("horizons", (12.0, 24.0))),
            seed=int(doc.get("seed", 0)),
            enabled_models=tuple(doc.get("enabled_models", MODEL_ORDER)),
            model_params=dict(doc.get("model_params", {})),
            radiomics_levels=int(doc.get("radiomics_levels", 32)),
            temporal_params=dict(doc.get("temporal_params", {})),
        )

    def canonical_json(self) -> str:
        # out_dir is where artifacts land, not analysis content; leaving it
        # out keeps the provenance hash identical across scratch directories
        doc = {
            "cohort_csv": self.cohort_csv,
            "longitudinal_csv": self.longitudinal_csv,
            "voxel_grid_dir": self.voxel_grid_dir,
            "id_column": self.id_column,
            "time_column": self.time_column,
            "event_column": self.event_column,
            "alpha": self.alpha,
            "vif_threshold": self.vif_threshold,
            "cv_folds": self.cv_folds,
            "horizons": list(self.horizons),
            "seed": self.seed,
            "enabled_models": list(self.enabled_models),
            "model_params": self.model_params,
            "radiomics_levels": self.radiomics_levels,
            "temporal_params": self.temporal_params,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def assign_folds(events, k: int, seed: int) -> np.ndarray:
    """Event-stratified fold index per subject.

    Events and censored subjects are shuffled separately (seeded) and dealt
    round-robin, so every fold sees roughly the same event fraction. Depends
    only on (events, k, seed), never on the outcome times or features.
    """
    events = np.asarray(events, dtype=int)
    rng = np.random.default_rng(seed)
    folds = np.empty(events.size, dtype=int)
    for flag in (1, 0):
        idx = np.nonzero(events == flag)[0]
        idx = rng.permutation(idx)
        folds[idx] = np.arange(idx.size) % k
    return folds


@dataclass(frozen=True)
class FoldModels:
    """Everything fitted on one training fold."""

    normalization: dict
    selected: tuple[str, ...]
    vif_removed: tuple[str, ...]
    models: dict                       # name -> fitted model or None (failed)
    baselines: dict                    # name -> Breslow StepFunction on train scores
    errors: dict                       # name -> message for failed models


def _boost_params(config: PipelineConfig, mode: str, fold: int) -> BoostParams:
    params = dict(config.model_params.get(
        {"componentwise": "coxboost", "gbm": "gbm", "xgboost": "xgboost"}[mode], {}))
    params.setdefault("rounds", 150)
    params.setdefault("learning_rate", 0.1)
    if mode != "componentwise":
        params.setdefault("tree_depth", 3)
        params.setdefault("min_leaf", 5)
    params["mode"] = mode
    params["seed"] = config.seed + fold
    return BoostParams(**params)


def _forest_params(config: PipelineConfig, fold: int) -> ForestParams:
    params = dict(config.model_params.get("rsf", {}))
    params.setdefault("n_trees", 100)
    params.setdefault("min_node_events", 5)
    params.setdefault("max_depth", 6)
    params["seed"] = config.seed + 7919 * (fold + 1)
    return ForestParams(**params)


def fit_fold_models(train: Cohort, config: PipelineConfig, fold: int) -> FoldModels:
    """Normalize, screen, VIF-filter and train every enabled learner on one
    training fold. Depends only on the training rows."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConstantFeatureWarning)
        train_norm = zscore_normalize(train)

    screen_rows = univariate_screen(train_norm, alpha=config.alpha)
    retained = retained_features(screen_rows, config.alpha)
    if not retained:
        raise PipelineError("screening", "zero features survived the p-value screen")
    retained = [n for n in train_norm.feature_names if n in set(retained)]

    vif_removed: tuple[str, ...] = ()
    if len(retained) >= 2:
        vif = vif_filter(train_norm, retained, threshold=config.vif_threshold)
        selected = vif.kept
        vif_removed = tuple(name for name, _ in vif.removed)
    else:
        selected = tuple(retained)

    train_sel = train_norm.subset_features(selected)
    times, events = train_sel.times(), train_sel.events()
    X = train_sel.matrix()

    models, baselines, errors = {}, {}, {}
    for name in config.enabled_models:
        try:
            if name == "cox":
                cox_params = dict(config.model_params.get("cox", {}))
                model = fit_cox(train_sel, **cox_params)
                scores = model.predict_risk(X)
            elif name == "rsf":
                model = fit_rsf(train_sel, _forest_params(config, fold))
                scores = predict_risk_matrix(model, X)
            else:
                mode = {"coxboost": "componentwise", "gbm": "gbm", "xgboost": "xgboost"}[name]
                model = fit_boosted(train_sel, _boost_params(config, mode, fold))
                scores = model.predict_risk(X)
            models[name] = model
            baselines[name] = breslow_baseline(times, events, scores)
        except RecurriskError as exc:
            models[name] = None
            errors[name] = str(exc)

    return FoldModels(
        normalization=train_norm.normalization,
        selected=selected,
        vif_removed=vif_removed,
        models=models,
        baselines=baselines,
        errors=errors,
    )


def _predict_fold(fold_models: FoldModels, name: str, test: Cohort, horizons):
    """(risk scores, survival probs per horizon) on held-out rows."""
    test_sel = apply_normalization(test, fold_models.normalization) \
        .subset_features(fold_models.selected)
    X = test_sel.matrix()
    model = fold_models.models[name]
    if isinstance(model, Forest):
        scores = predict_risk_matrix(model, X)
        from .rsf import predict_survival
        surv = np.array([[predict_survival(model, x)(h) for h in horizons] for x in X])
    else:
        scores = np.asarray(model.predict_risk(X), dtype=float)
        base = fold_models.baselines[name]
        h0 = np.array([base(h) for h in horizons])
        surv = np.exp(-h0[None, :] * np.exp(scores)[:, None])
    return scores, surv


def fold_models_hash(fold_models: FoldModels) -> str:
    """Canonical digest of everything fitted on one fold (leakage probe)."""
    parts = {
        "normalization": {k: list(v) for k, v in sorted(fold_models.normalization.items())},
        "selected": list(fold_models.selected),
        "models": {},
    }
    for name, model in sorted(fold_models.models.items()):
        if model is None:
            parts["models"][name] = None
        elif isinstance(model, CoxModel):
            parts["models"][name] = {"coefficients": model.coefficients.tolist(),
                                     "baseline_knots": model.baseline_chf.knots.tolist(),
                                     "baseline_values": model.baseline_chf.values.tolist()}
        elif isinstance(model, BoostedModel):
            parts["models"][name] = model.to_json()
        elif isinstance(model, Forest):
            parts["models"][name] = forest_to_json(model)
        else:
            parts["models"][name] = repr(model)
    return hashlib.sha256(json.dumps(parts, sort_keys=True).encode("utf-8")).hexdigest()


def stratify_by_median(scores, ids):
    """Median-cutoff risk groups: score > median is high risk.

    Returns (high ids, low ids, cutoff). With distinct scores the group
    sizes differ by at most one; identical scores raise
    DegenerateStratificationError.
    """
    scores = np.asarray(scores, dtype=float)
    ids = list(ids)
    if scores.size < 2:
        raise InvalidParameterError("need at least two subjects to stratify")
    if np.all(scores == scores[0]):
        raise DegenerateStratificationError("all risk scores identical")
    cutoff = float(np.median(scores))
    high = tuple(i for i, s in zip(ids, scores) if s > cutoff)
    low = tuple(i for i, s in zip(ids, scores) if s <= cutoff)
    return high, low, cutoff


def _median_or_none(sf: StepFunction):
    value = median_survival_time(sf)
    return None if value is None else float(value)


def run_pipeline(config: PipelineConfig):
    """Execute the full protocol and write report.json, curve CSVs and SVGs.

    Returns the report as a plain dict (exactly what lands in report.json).
    """
    cohort = load_cohort(config.cohort_csv, ColumnSchema(
        time_column=config.time_column, event_column=config.event_column,
        id_column=config.id_column))

    if config.voxel_grid_dir is not None:
        cohort = _attach_radiomics(cohort, config)

    n = len(cohort)
    times, events = cohort.times(), cohort.events()
    folds = assign_folds(events, config.cv_folds, config.seed)

    oof_scores = {name: np.full(n, np.nan) for name in config.enabled_models}
    oof_surv = {name: np.full((n, len(config.horizons)), np.nan)
                for name in config.enabled_models}
    failed: dict[str, str] = {}
    fold_hashes = []
    vif_removed_by_fold = []

    for f in range(config.cv_folds):
        test_idx = np.nonzero(folds == f)[0]
        train_idx = np.nonzero(folds != f)[0]
        if test_idx.size == 0:
            continue
        fold_models = fit_fold_models(cohort.subset_rows(train_idx), config, f)
        fold_hashes.append(fold_models_hash(fold_models))
        vif_removed_by_fold.append(list(fold_models.vif_removed))
        failed.update(fold_models.errors)
        test = cohort.subset_rows(test_idx)
        for name in config.enabled_models:
            if fold_models.models.get(name) is None:
                continue
            scores, surv = _predict_fold(fold_models, name, test, config.horizons)
            oof_scores[name][test_idx] = scores
            oof_surv[name][test_idx] = surv

    model_reports = {}
    for name in config.enabled_models:
        if name in failed or np.any(np.isnan(oof_scores[name])):
            model_reports[name] = {"status": "failed",
                                   "error": failed.get(name, "incomplete predictions")}
            continue
        model_reports[name] = _evaluate_model(
            times, events, oof_scores[name], oof_surv[name], config.horizons)

    chosen = _choose_model(model_reports)
    if chosen is None:
        raise PipelineError("evaluation", "every model failed")

    stratification = _stratify_and_compare(cohort, oof_scores[chosen])

    features_section = _feature_tables(cohort, config, chosen, vif_removed_by_fold)

    temporal_section = None
    if config.longitudinal_csv is not None:
        temporal_section = _temporal_lane(cohort, folds, config)

    report = {
        "schema_version": SCHEMA_VERSION,
        "provenance": {
            "config_hash": config.config_hash(),
            "seed": config.seed,
            "version": __version__,
            "n_subjects": n,
            "fold_model_hashes": fold_hashes,
        },
        "models": model_reports,
        "chosen_model": chosen,
        "stratification": stratification,
        "features": features_section,
        "temporal": temporal_section,
    }

    _write_artifacts(report, cohort, oof_scores, config)
    return report


def _attach_radiomics(cohort: Cohort, config: PipelineConfig) -> Cohort:
    """Extract features for every subject's grid/mask pair and append them."""
    from .cohort import SurvivalRecord

    grid_dir = Path(config.voxel_grid_dir)
    feature_rows = []
    names = None
    for rec in cohort.records:
        grid_path = grid_dir / f"{rec.id}_grid.txt"
        mask_path = grid_dir / f"{rec.id}_mask.txt"
        if not grid_path.exists() or not mask_path.exists():
            raise PipelineError("radiomics", f"missing grid/mask for subject {rec.id!r}")
        grid = load_voxel_grid(grid_path)
        mask = load_region_mask(mask_path)
        feats = extract_all(grid, mask, config.radiomics_levels)
        if names is None:
            names = sorted(feats)
        feature_rows.append([feats[k] for k in names])

    new_names = cohort.feature_names + tuple(f"radiomics_{k}" for k in names)
    records = tuple(
        SurvivalRecord(r.id, r.time, r.event, r.features + tuple(row))
        for r, row in zip(cohort.records, feature_rows))
    return Cohort(new_names, records)


def _evaluate_model(times, events, scores, surv, horizons):
    out = {"status": "ok"}
    out["c_index"] = c_index(times, events, scores).c_index
    out["auc"] = {}
    out["brier"] = {}
    for hi, h in enumerate(horizons):
        try:
            value, _, _ = auc_summary(times, events, scores, h)
            out["auc"][_hkey(h)] = value
        except UndefinedMetricError:
            out["auc"][_hkey(h)] = None
        try:
            out["brier"][_hkey(h)] = brier(h, surv[:, hi], times, events)
        except UndefinedMetricError:
            out["brier"][_hkey(h)] = None

    t_star = horizons[-1]
    risk_at_t = 1.0 - surv[:, -1]
    out["calibration"] = [
        {"mean_predicted": b.mean_predicted, "observed_risk": b.observed_risk,
         "count": b.count}
        for b in calibration_table(risk_at_t, times, events, t_star)]
    event_by_t, probs = dca_inputs(times, events, surv[:, -1], t_star)
    dca = []
    for p in DCA_THRESHOLDS:
        point = net_benefit(event_by_t, probs, p)
        dca.append({"threshold": point.threshold, "net_benefit": point.net_benefit,
                    "treat_all": point.treat_all_benefit, "treat_none": 0.0})
    out["dca"] = dca
    out["dca_horizon"] = t_star
    return out


def _hkey(h: float) -> str:
    return f"{h:g}"


def _choose_model(model_reports) -> str | None:
    best_name, best_c = None, -np.inf
    for name in MODEL_ORDER:
        rep = model_reports.get(name)
        if rep is None or rep.get("status") != "ok":
            continue
        if rep["c_index"] > best_c:
            best_name, best_c = name, rep["c_index"]
    return best_name


def _stratify_and_compare(cohort: Cohort, scores):
    times, events = cohort.times(), cohort.events()
    high_ids, low_ids, cutoff = stratify_by_median(scores, cohort.ids())
    high_set = set(high_ids)
    is_high = np.array([rid in high_set for rid in cohort.ids()])

    km_high = kaplan_meier(times[is_high], events[is_high])
    km_low = kaplan_meier(times[~is_high], events[~is_high])
    lr = log_rank((times[is_high], events[is_high]), (times[~is_high], events[~is_high]))

    return {
        "cutoff": cutoff,
        "n_high": int(np.sum(is_high)),
        "n_low": int(np.sum(~is_high)),
        "median_rfs_high": _median_or_none(km_high),
        "median_rfs_low": _median_or_none(km_low),
        "log_rank_chi_square": lr.chi_square,
        "log_rank_p": lr.p_value,
        "km_high": km_high.to_rows(),
        "km_low": km_low.to_rows(),
    }


def _feature_tables(cohort: Cohort, config: PipelineConfig, chosen: str,
                    vif_removed_by_fold):
    """Whole-cohort screen table plus importance for the chosen model kind.

    These tables are descriptive (fit on all rows); model metrics above come
    exclusively from out-of-fold predictions.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConstantFeatureWarning)
        full_norm = zscore_normalize(cohort)
    screen_rows = univariate_screen(full_norm, alpha=config.alpha)
    retained = retained_features(screen_rows, config.alpha)
    retained = [n for n in full_norm.feature_names if n in set(retained)]

    screen_section = [
        {"feature": r.feature, "hazard_ratio": _nan_to_none(r.hazard_ratio),
         "ci_low": _nan_to_none(r.ci_low), "ci_high": _nan_to_none(r.ci_high),
         "p_value": _nan_to_none(r.p_value), "converged": r.converged,
         "retained": r.converged and not np.isnan(r.p_value) and r.p_value < config.alpha}
        for r in screen_rows]

    importance_section = {"method": None, "rows": []}
    if retained:
        if len(retained) >= 2:
            vif = vif_filter(full_norm, retained, threshold=config.vif_threshold)
            selected = vif.kept
        else:
            selected = tuple(retained)
        selected_cohort = full_norm.subset_features(selected)
        model = _refit_for_importance(selected_cohort, config, chosen)
        if model is not None:
            if len(selected) <= MAX_EXACT_FEATURES:
                background = median_background(selected_cohort)
                rows = mean_abs_shapley(model, selected_cohort.matrix(), background,
                                        selected_cohort.feature_names)
                importance_section = {
                    "method": "mean_abs_shapley",
                    "rows": [{"feature": n, "value": v} for n, v in rows],
                }
            else:
                report = permutation_importance(model, selected_cohort,
                                                repeats=10, seed=config.seed)
                importance_section = {
                    "method": "permutation_importance",
                    "rows": [{"feature": r.feature, "value": r.mean_drop,
                              "std": r.std_drop} for r in report.rows],
                }

    return {
        "screen": screen_section,
        "vif_removed_by_fold": vif_removed_by_fold,
        "importance": importance_section,
    }


def _nan_to_none(v: float):
    return None if v is None or (isinstance(v, float) and np.isnan(v)) else float(v)


def _refit_for_importance(cohort: Cohort, config: PipelineConfig, chosen: str):
    try:
        if chosen == "cox":
            return fit_cox(cohort, **dict(config.model_params.get("cox", {})))
        if chosen == "rsf":
            forest = fit_rsf(cohort, _forest_params(config, fold=-1))
            return lambda X: predict_risk_matrix(forest, X)
        mode = {"coxboost": "componentwise", "gbm": "gbm", "xgboost": "xgboost"}[chosen]
        return fit_boosted(cohort, _boost_params(config, mode, fold=-1))
    except RecurriskError:
        return None


def _temporal_lane(cohort: Cohort, folds, config: PipelineConfig):
    """Out-of-fold evaluation of the temporal attention learner."""
    sequences = load_longitudinal(config.longitudinal_csv)
    by_id = {s.subject_id: s for s in sequences}
    missing = [rid for rid in cohort.ids() if rid not in by_id]
    if missing:
        raise PipelineError("temporal",
                            f"longitudinal data missing for {len(missing)} subjects "
                            f"(first: {missing[0]!r})")
    params = dict(config.temporal_params)
    pe_dim = int(params.get("pe_dim", 8))
    hidden = int(params.get("hidden", 8))
    lr = float(params.get("learning_rate", 0.02))
    epochs = int(params.get("epochs", 60))

    times, events = cohort.times(), cohort.events()
    ids = cohort.ids()
    n = len(cohort)
    oof = np.full(n, np.nan)
    try:
        for f in range(config.cv_folds):
            test_idx = np.nonzero(folds == f)[0]
            train_idx = np.nonzero(folds != f)[0]
            train_seqs = [by_id[ids[i]] for i in train_idx]
            model = train_temporal(train_seqs, pe_dim=pe_dim, hidden=hidden,
                                   learning_rate=lr, epochs=epochs,
                                   seed=config.seed + f)
            for i in test_idx:
                oof[i] = temporal_risk(by_id[ids[i]], model)
    except RecurriskError as exc:
        return {"status": "failed", "error": str(exc)}

    result = {"status": "ok", "c_index": c_index(times, events, oof).c_index, "auc": {}}
    for h in config.horizons:
        try:
            value, _, _ = auc_summary(times, events, oof, h)
            result["auc"][_hkey(h)] = value
        except UndefinedMetricError:
            result["auc"][_hkey(h)] = None
    return result


# --- artifact emission -------------------------------------------------------


def report_json_bytes(report: dict) -> bytes:
    return (json.dumps(report, sort_keys=True, indent=2) + "\n").encode("utf-8")


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _write_artifacts(report: dict, cohort: Cohort, oof_scores, config: PipelineConfig):
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "wb") as fh:
        fh.write(report_json_bytes(report))

    _write_csv(out / "oof_scores.csv", ["id", "time", "event", *oof_scores.keys()],
               [[rid, repr(rec.time), rec.event,
                 *(repr(float(oof_scores[m][i])) for m in oof_scores)]
                for i, (rid, rec) in enumerate(zip(cohort.ids(), cohort.records))])

    strat = report["stratification"]
    _write_csv(out / "km_high.csv", ["time", "survival"],
               [[repr(t), repr(v)] for t, v in strat["km_high"]])
    _write_csv(out / "km_low.csv", ["time", "survival"],
               [[repr(t), repr(v)] for t, v in strat["km_low"]])

    for name, rep in report["models"].items():
        if rep.get("status") != "ok":
            continue
        _write_csv(out / f"calibration_{name}.csv",
                   ["mean_predicted", "observed_risk", "count"],
                   [[repr(b["mean_predicted"]), repr(b["observed_risk"]), b["count"]]
                    for b in rep["calibration"]])
        _write_csv(out / f"dca_{name}.csv",
                   ["threshold", "net_benefit", "treat_all", "treat_none"],
                   [[repr(p["threshold"]), repr(p["net_benefit"]),
                     repr(p["treat_all"]), repr(p["treat_none"])] for p in rep["dca"]])

    emit_plots(report, out)


def emit_plots(report: dict, outdir) -> list[str]:
    """Write the KM, AUC-by-horizon, calibration and DCA SVGs; returns paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    chosen = report["chosen_model"]
    strat = report["stratification"]

    km_series = [
        Series("high risk", [0.0] + [t for t, _ in strat["km_high"]],
               [1.0] + [v for _, v in strat["km_high"]], PALETTE[1], step=True),
        Series("low risk", [0.0] + [t for t, _ in strat["km_low"]],
               [1.0] + [v for _, v in strat["km_low"]], PALETTE[0], step=True),
    ]
    km_svg = render_plot(
        km_series, "Recurrence-free survival by risk group", "months",
        "survival probability",
        annotations=[f"log-rank p = {strat['log_rank_p']:.4g}"],
        y_range=(0.0, 1.05))
    written.append(_write_text(outdir / "km_groups.svg", km_svg))

    ok_models = [(n, r) for n, r in report["models"].items() if r.get("status") == "ok"]
    if ok_models:
        horizons = sorted(ok_models[0][1]["auc"], key=float)
        series = []
        for k, (name, rep) in enumerate(sorted(ok_models)):
            ys = [rep["auc"][h] for h in horizons]
            if any(y is None for y in ys):
                continue
            series.append(Series(name, [float(h) for h in horizons], ys,
                                 PALETTE[k % len(PALETTE)]))
        if series:
            svg = render_plot(series, "Time-dependent AUC", "horizon (months)",
                              "AUC", y_range=(0.4, 1.0))
            written.append(_write_text(outdir / "auc_horizons.svg", svg))

    rep = report["models"].get(chosen)
    if rep and rep.get("status") == "ok":
        cal = rep["calibration"]
        cal_series = [
            Series("ideal", [0.0, 1.0], [0.0, 1.0], "#999999", dashed=True),
            Series(chosen, [b["mean_predicted"] for b in cal],
                   [b["observed_risk"] for b in cal], PALETTE[0]),
        ]
        svg = render_plot(cal_series, f"Calibration at {rep['dca_horizon']:g} months",
                          "predicted risk", "observed risk",
                          x_range=(0.0, 1.0), y_range=(0.0, 1.05))
        written.append(_write_text(outdir / "calibration.svg", svg))

        dca = rep["dca"]
        xs = [p["threshold"] for p in dca]
        dca_series = [
            Series(chosen, xs, [p["net_benefit"] for p in dca], PALETTE[0]),
            Series("treat all", xs, [p["treat_all"] for p in dca], "#999999", dashed=True),
            Series("treat none", xs, [0.0 for _ in dca], "#333333", dashed=True),
        ]
        svg = render_plot(dca_series, f"Decision curve at {rep['dca_horizon']:g} months",
                          "threshold probability", "net benefit")
        written.append(_write_text(outdir / "dca.svg", svg))
    return written


def _write_text(path: Path, text: str) -> str:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return str(path)
