"""Random survival forest: bootstrap trees with log-rank split selection and
Nelson-Aalen terminal estimates; the ensemble averages cumulative hazards.

Determinism contract: tree b draws its bootstrap sample and per-node
feature subsets from ``default_rng(seed + b)``, so the fitted forest is
byte-identical across runs and independent of any parallel schedule.
Split search is exhaustive over midpoints of consecutive distinct feature
values; ties in the log-rank statistic break toward the lowest feature
index, then the lowest threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .cohort import Cohort
from .errors import InvalidParameterError, ShapeError, TrainingError
from .nonparametric import nelson_aalen
from .stepfun import StepFunction, average_step_functions


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    mtry: int | None = None          # None -> ceil(sqrt(d))
    min_node_events: int = 3
    max_depth: int | None = None     # None -> unlimited
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise InvalidParameterError("n_trees must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise InvalidParameterError("mtry must be >= 1")
        if self.min_node_events < 1:
            raise InvalidParameterError("min_node_events must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise InvalidParameterError("max_depth must be >= 0")


@dataclass(frozen=True)
class TreeSplit:
    feature: int
    threshold: float
    left: "TreeSplit | TreeLeaf"
    right: "TreeSplit | TreeLeaf"


@dataclass(frozen=True)
class TreeLeaf:
    chf: StepFunction
    count: int


@dataclass(frozen=True)
class SurvivalTree:
    root: TreeSplit | TreeLeaf
    bootstrap_indices: np.ndarray
    oob_indices: np.ndarray

    def chf_for(self, x: np.ndarray) -> StepFunction:
        node = self.root
        while isinstance(node, TreeSplit):
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.chf


@dataclass(frozen=True)
class Forest:
    feature_names: tuple[str, ...]
    trees: tuple[SurvivalTree, ...]
    max_event_time: float
    params: ForestParams


def _node_event_table(times, events):
    """Distinct event times with total death counts and risk-set sizes."""
    order = np.argsort(times, kind="stable")
    t_s, e_s = times[order], events[order]
    ets = np.unique(t_s[e_s == 1])
    n_tot = times.size - np.searchsorted(t_s, ets, side="left")
    d_tot = np.array([np.sum((t_s == t) & (e_s == 1)) for t in ets], dtype=float)
    return ets, d_tot, n_tot.astype(float)


def _best_split(X, times, events, feat_indices, min_node_events):
    """Exhaustive log-rank split search over the given features.

    Returns (feature, threshold) or None. The statistic is (O-E)^2 / V with
    the hypergeometric variance, evaluated for every midpoint threshold via
    cumulative risk-set counts, all thresholds of one feature at once.
    """
    ets, d_tot, n_tot = _node_event_table(times, events)
    if ets.size == 0:
        return None
    total_events = float(np.sum(events))
    with np.errstate(divide="ignore", invalid="ignore"):
        var_coef = np.where(n_tot > 1, d_tot * (n_tot - d_tot) / (n_tot - 1), 0.0)
    e_coef = d_tot / n_tot                 # E contribution per unit of n_A
    v1 = var_coef / n_tot                  # V = v1 . n_A - v2 . n_A^2
    v2 = var_coef / n_tot ** 2

    best_stat, best = 0.0, None
    for j in sorted(int(f) for f in feat_indices):
        col = X[:, j]
        order = np.argsort(col, kind="stable")
        cs = col[order]
        boundaries = np.nonzero(cs[:-1] < cs[1:])[0]
        if boundaries.size == 0:
            continue
        t_f, e_f = times[order], events[order]
        at_risk = (t_f[:, None] >= ets[None, :]).astype(float)
        n_a = np.cumsum(at_risk, axis=0)
        events_a = np.cumsum(e_f)
        observed = events_a.astype(float)
        expected = n_a @ e_coef
        variance = n_a @ v1 - (n_a ** 2) @ v2

        k = boundaries
        ev_left = observed[k]
        ev_right = total_events - ev_left
        valid = (ev_left >= min_node_events) & (ev_right >= min_node_events) & \
                (variance[k] > 1e-12)
        if not np.any(valid):
            continue
        kv = k[valid]
        stats = (ev_left[valid] - expected[kv]) ** 2 / variance[kv]
        i = int(np.argmax(stats))          # first max -> lowest threshold on ties
        if stats[i] > best_stat:
            best_stat = float(stats[i])
            pos = kv[i]
            best = (j, float((cs[pos] + cs[pos + 1]) / 2.0))
    return best


def fit_rsf(cohort: Cohort, params: ForestParams) -> Forest:
    """Grow the forest; see the module docstring for the split rule."""
    X = cohort.matrix()
    times, events = cohort.times(), cohort.events()
    n, d = X.shape
    if int(np.sum(events)) < 1:
        raise TrainingError("cannot grow a survival forest on an all-censored cohort")
    mtry = params.mtry if params.mtry is not None else int(np.ceil(np.sqrt(d)))
    mtry = min(mtry, d)

    trees = []
    for b in range(params.n_trees):
        rng = np.random.default_rng(params.seed + b)
        boot = rng.integers(0, n, size=n)
        oob = np.setdiff1d(np.arange(n), boot)

        def grow(idx, depth):
            t_node, e_node = times[idx], events[idx]
            can_split = (params.max_depth is None or depth < params.max_depth) and \
                int(np.sum(e_node)) >= 2 * params.min_node_events
            split = None
            if can_split:
                feats = rng.choice(d, size=mtry, replace=False)
                split = _best_split(X[idx], t_node, e_node, feats,
                                    params.min_node_events)
            if split is None:
                return TreeLeaf(chf=nelson_aalen(t_node, e_node), count=idx.size)
            j, thr = split
            go_left = X[idx, j] <= thr
            return TreeSplit(j, thr,
                             grow(idx[go_left], depth + 1),
                             grow(idx[~go_left], depth + 1))

        trees.append(SurvivalTree(root=grow(boot, 0), bootstrap_indices=boot,
                                  oob_indices=oob))

    event_times = times[events == 1]
    return Forest(
        feature_names=cohort.feature_names,
        trees=tuple(trees),
        max_event_time=float(np.max(event_times)),
        params=params,
    )


def _check_x(forest: Forest, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != len(forest.feature_names):
        raise ShapeError(f"expected {len(forest.feature_names)} features, got {x.size}")
    return x


def predict_chf(forest: Forest, x) -> StepFunction:
    """Ensemble cumulative hazard: mean of terminal CHFs over all trees."""
    x = _check_x(forest, x)
    return average_step_functions([tree.chf_for(x) for tree in forest.trees])


def predict_survival(forest: Forest, x) -> StepFunction:
    """S(t | x) = exp(-H(t | x))."""
    return predict_chf(forest, x).exp_neg()


def risk_score(forest: Forest, x) -> float:
    """Scalar risk: the ensemble CHF at the training cohort's last event time.

    Evaluates each tree's terminal CHF at that single time point, which
    equals predict_chf(forest, x)(max_event_time) without building the
    union-knot average.
    """
    x = _check_x(forest, x)
    t = forest.max_event_time
    total = 0.0
    for tree in forest.trees:
        total += tree.chf_for(x)(t)
    return total / len(forest.trees)


def predict_risk_matrix(forest: Forest, X) -> np.ndarray:
    """risk_score for each row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.array([risk_score(forest, row) for row in X])


def oob_risk_scores(forest: Forest, cohort: Cohort) -> np.ndarray:
    """Out-of-bag risk score per subject (NaN where never out of bag)."""
    X = cohort.matrix()
    n = X.shape[0]
    totals = np.zeros(n)
    counts = np.zeros(n, dtype=int)
    for tree in forest.trees:
        for i in tree.oob_indices:
            totals[i] += tree.chf_for(X[i])(forest.max_event_time)
            counts[i] += 1
    with np.errstate(invalid="ignore"):
        return np.where(counts > 0, totals / np.maximum(counts, 1), np.nan)


# --- serialization ----------------------------------------------------------


def _node_to_dict(node):
    if isinstance(node, TreeLeaf):
        return {"kind": "leaf", "count": node.count,
                "knots": node.chf.knots.tolist(),
                "values": node.chf.values.tolist()}
    return {"kind": "split", "feature": node.feature, "threshold": node.threshold,
            "left": _node_to_dict(node.left), "right": _node_to_dict(node.right)}


def _node_from_dict(doc):
    if doc["kind"] == "leaf":
        return TreeLeaf(chf=StepFunction(np.array(doc["knots"], dtype=float),
                                         np.array(doc["values"], dtype=float), 0.0),
                        count=int(doc["count"]))
    return TreeSplit(int(doc["feature"]), float(doc["threshold"]),
                     _node_from_dict(doc["left"]), _node_from_dict(doc["right"]))


def forest_to_json(forest: Forest) -> str:
    doc = {
        "model": "random_survival_forest",
        "feature_names": list(forest.feature_names),
        "max_event_time": forest.max_event_time,
        "params": {
            "n_trees": forest.params.n_trees,
            "mtry": forest.params.mtry,
            "min_node_events": forest.params.min_node_events,
            "max_depth": forest.params.max_depth,
            "seed": forest.params.seed,
        },
        "trees": [{
            "root": _node_to_dict(t.root),
            "bootstrap_indices": t.bootstrap_indices.tolist(),
            "oob_indices": t.oob_indices.tolist(),
        } for t in forest.trees],
    }
    return json.dumps(doc, sort_keys=True)


def forest_from_json(text: str) -> Forest:
    doc = json.loads(text)
    p = doc["params"]
    trees = tuple(
        SurvivalTree(root=_node_from_dict(t["root"]),
                     bootstrap_indices=np.array(t["bootstrap_indices"], dtype=int),
                     oob_indices=np.array(t["oob_indices"], dtype=int))
        for t in doc["trees"])
    return Forest(
        feature_names=tuple(doc["feature_names"]),
        trees=trees,
        max_event_time=float(doc["max_event_time"]),
        params=ForestParams(n_trees=int(p["n_trees"]), mtry=p["mtry"],
                            min_node_events=int(p["min_node_events"]),
                            max_depth=p["max_depth"], seed=int(p["seed"])),
    )
