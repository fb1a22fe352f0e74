"""Boosted survival learners minimizing the negative Cox partial likelihood.

Three modes share one training loop:

* ``componentwise`` - per round, a one-feature least-squares stump fit to
  the negative gradient; the feature with the smallest squared residual
  wins (CoxBoost-style componentwise linear boosting).
* ``gbm`` - a depth-limited regression tree fit to the negative gradient
  with mean leaf values (first-order gradient boosting).
* ``xgboost`` - Newton boosting: trees grown by the second-order gain
  formula with leaf weights -sum(g) / (sum(h) + lambda).

The per-subject first and second derivatives of the loss come from
``cox_gradients`` and use a diagonal Hessian approximation, standard for
survival boosting. Subjects are re-sorted into a canonical order at the
start of training, which makes the fitted model exactly invariant to input
permutations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cohort import Cohort
from .errors import (
    InvalidParameterError,
    NumericInputError,
    ShapeError,
    TrainingError,
)

_MODES = ("componentwise", "gbm", "xgboost")


@dataclass(frozen=True)
class BoostParams:
    rounds: int = 100
    learning_rate: float = 0.1
    tree_depth: int = 3
    min_leaf: int = 5
    l2_lambda: float = 1.0
    mode: str = "componentwise"
    row_subsample: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 0:
            raise InvalidParameterError("rounds must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise InvalidParameterError("learning_rate must be in (0, 1]")
        if self.tree_depth < 1:
            raise InvalidParameterError("tree_depth must be >= 1")
        if self.mode not in _MODES:
            raise InvalidParameterError(f"mode must be one of {_MODES}")
        if not 0.0 < self.row_subsample <= 1.0:
            raise InvalidParameterError("row_subsample must be in (0, 1]")
        if self.l2_lambda < 0:
            raise InvalidParameterError("l2_lambda must be >= 0")


def cox_negloglik(times, events, scores) -> float:
    """Negative Cox partial log-likelihood of per-subject scores (Breslow ties)."""
    times = np.asarray(times, float)
    events = np.asarray(events, int)
    scores = np.asarray(scores, float)
    shift = float(np.max(scores))
    w = np.exp(np.maximum(scores - shift, -700.0))
    order = np.argsort(times, kind="stable")
    t_s, e_s, w_s, f_s = times[order], events[order], w[order], scores[order]
    s0 = np.cumsum(w_s[::-1])[::-1]
    first = np.searchsorted(t_s, t_s, side="left")  # first index of each tied block
    ev = e_s == 1
    return float(np.sum(np.log(s0[first[ev]]) + shift - f_s[ev]))


def cox_gradients(scores, times, events):
    """Per-subject gradient g and diagonal Hessian h of the negative partial
    log-likelihood with respect to the scores.

    g_i = -delta_i + exp(f_i) * sum over events k with t_k <= t_i of 1/Phi_k,
    h_i = exp(f_i) * A_i - exp(2 f_i) * B_i with B the sum of 1/Phi_k^2;
    computed in O(n log n) via sorted cumulative sums.
    """
    scores = np.asarray(scores, dtype=float)
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=int)
    if not np.all(np.isfinite(scores)):
        raise NumericInputError("scores must be finite")

    shift = float(np.max(scores))
    w = np.exp(np.maximum(scores - shift, -700.0))
    order = np.argsort(times, kind="stable")
    t_s, e_s, w_s = times[order], events[order], w[order]
    s0 = np.cumsum(w_s[::-1])[::-1]

    # per distinct event time: risk-set sum Phi and event multiplicity
    first = np.searchsorted(t_s, t_s, side="left")
    ev_idx = np.nonzero(e_s == 1)[0]
    phi = s0[first[ev_idx]]                      # one term per event subject
    inv1 = np.cumsum(1.0 / phi)
    inv2 = np.cumsum(1.0 / phi ** 2)
    event_times = t_s[ev_idx]

    # number of event terms with t_k <= t_i
    k = np.searchsorted(event_times, times, side="right")
    a = np.where(k > 0, inv1[np.maximum(k - 1, 0)], 0.0)
    b = np.where(k > 0, inv2[np.maximum(k - 1, 0)], 0.0)
    g = -events + w * a
    h = w * a - w ** 2 * b
    return g, np.maximum(h, 0.0)


# --- base learners ----------------------------------------------------------


@dataclass(frozen=True)
class Stump:
    """One-feature linear learner: slope * x[feature] + intercept."""

    feature: int
    slope: float
    intercept: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.slope * X[:, self.feature] + self.intercept

    def scaled(self, factor: float) -> "Stump":
        return Stump(self.feature, self.slope * factor, self.intercept * factor)

    def to_dict(self):
        return {"kind": "stump", "feature": self.feature,
                "slope": self.slope, "intercept": self.intercept}


@dataclass(frozen=True)
class TreeNode:
    feature: int = -1            # -1 marks a leaf
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        stack = [(self, np.arange(X.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if node.is_leaf:
                out[idx] = node.value
                continue
            go_left = X[idx, node.feature] <= node.threshold
            stack.append((node.left, idx[go_left]))
            stack.append((node.right, idx[~go_left]))
        return out

    def scaled(self, factor: float) -> "TreeNode":
        if self.is_leaf:
            return TreeNode(value=self.value * factor)
        return TreeNode(self.feature, self.threshold,
                        self.left.scaled(factor), self.right.scaled(factor))

    def to_dict(self):
        if self.is_leaf:
            return {"kind": "leaf", "value": self.value}
        return {"kind": "split", "feature": self.feature, "threshold": self.threshold,
                "left": self.left.to_dict(), "right": self.right.to_dict()}


def _tree_from_dict(doc) -> TreeNode:
    if doc["kind"] == "leaf":
        return TreeNode(value=float(doc["value"]))
    return TreeNode(int(doc["feature"]), float(doc["threshold"]),
                    _tree_from_dict(doc["left"]), _tree_from_dict(doc["right"]))


def _fit_stump(X, residual):
    """Least-squares one-feature stump; lowest-SSE feature wins, ties to the
    lowest index."""
    n, d = X.shape
    r_mean = float(np.mean(residual))
    best = None
    for j in range(d):
        col = X[:, j]
        cm = float(np.mean(col))
        var = float(np.sum((col - cm) ** 2))
        if var == 0.0:
            continue
        slope = float(np.sum((col - cm) * (residual - r_mean))) / var
        intercept = r_mean - slope * cm
        sse = float(np.sum((residual - slope * col - intercept) ** 2))
        if best is None or sse < best[0] - 1e-15:
            best = (sse, Stump(j, slope, intercept))
    if best is None:
        return None
    return best[1]


def _fit_tree_gbm(X, residual, depth, min_leaf):
    """Least-squares regression tree on the residual; mean leaf values."""
    idx = np.arange(X.shape[0])

    def build(node_idx, remaining_depth):
        y = residual[node_idx]
        if remaining_depth == 0 or node_idx.size < 2 * min_leaf:
            return TreeNode(value=float(np.mean(y)))
        split = _best_split_sse(X, node_idx, y, min_leaf)
        if split is None:
            return TreeNode(value=float(np.mean(y)))
        j, thr = split
        go_left = X[node_idx, j] <= thr
        return TreeNode(j, thr,
                        build(node_idx[go_left], remaining_depth - 1),
                        build(node_idx[~go_left], remaining_depth - 1))

    return build(idx, depth)


def _best_split_sse(X, node_idx, y, min_leaf):
    total = float(np.sum(y))
    n = node_idx.size
    base = float(np.sum(y ** 2)) - total ** 2 / n
    best = None
    for j in range(X.shape[1]):
        col = X[node_idx, j]
        order = np.argsort(col, kind="stable")
        cs, ys = col[order], y[order]
        prefix = np.cumsum(ys)
        counts = np.arange(1, n + 1)
        valid = np.nonzero(cs[:-1] < cs[1:])[0]
        valid = valid[(counts[valid] >= min_leaf) & (n - counts[valid] >= min_leaf)]
        if valid.size == 0:
            continue
        left_sum = prefix[valid]
        nl = counts[valid]
        gain = left_sum ** 2 / nl + (total - left_sum) ** 2 / (n - nl) - total ** 2 / n
        k = int(np.argmax(gain))
        if gain[k] > 1e-12 and (best is None or gain[k] > best[0] + 1e-15):
            best = (float(gain[k]), j, float((cs[valid[k]] + cs[valid[k] + 1]) / 2.0))
    if best is None:
        return None
    return best[1], best[2]


def _fit_tree_newton(X, g, h, depth, min_leaf, lam):
    """Second-order tree: gain-based splits and leaf weight -G/(H + lambda)."""
    idx = np.arange(X.shape[0])

    def leaf_value(node_idx):
        return float(-np.sum(g[node_idx]) / (np.sum(h[node_idx]) + lam))

    def build(node_idx, remaining_depth):
        if remaining_depth == 0 or node_idx.size < 2 * min_leaf:
            return TreeNode(value=leaf_value(node_idx))
        split = _best_split_gain(X, node_idx, g, h, min_leaf, lam)
        if split is None:
            return TreeNode(value=leaf_value(node_idx))
        j, thr = split
        go_left = X[node_idx, j] <= thr
        return TreeNode(j, thr,
                        build(node_idx[go_left], remaining_depth - 1),
                        build(node_idx[~go_left], remaining_depth - 1))

    return build(idx, depth)


def _best_split_gain(X, node_idx, g, h, min_leaf, lam):
    gt = float(np.sum(g[node_idx]))
    ht = float(np.sum(h[node_idx]))
    n = node_idx.size
    best = None
    for j in range(X.shape[1]):
        col = X[node_idx, j]
        order = np.argsort(col, kind="stable")
        cs = col[order]
        gp = np.cumsum(g[node_idx][order])
        hp = np.cumsum(h[node_idx][order])
        counts = np.arange(1, n + 1)
        valid = np.nonzero(cs[:-1] < cs[1:])[0]
        valid = valid[(counts[valid] >= min_leaf) & (n - counts[valid] >= min_leaf)]
        if valid.size == 0:
            continue
        gl, hl = gp[valid], hp[valid]
        gain = 0.5 * (gl ** 2 / (hl + lam) + (gt - gl) ** 2 / (ht - hl + lam)
                      - gt ** 2 / (ht + lam))
        k = int(np.argmax(gain))
        if gain[k] > 1e-12 and (best is None or gain[k] > best[0] + 1e-15):
            best = (float(gain[k]), j, float((cs[valid[k]] + cs[valid[k] + 1]) / 2.0))
    if best is None:
        return None
    return best[1], best[2]


# --- the boosted model ------------------------------------------------------


@dataclass(frozen=True)
class BoostedModel:
    mode: str
    learning_rate: float
    feature_names: tuple[str, ...]
    base_learners: tuple
    training_loss_trace: tuple[float, ...]
    early_stop_round: int | None = None

    def predict_risk(self, X) -> np.ndarray:
        """Sum of scaled learner outputs per row."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.feature_names):
            raise ShapeError(f"expected {len(self.feature_names)} features, got {X.shape[1]}")
        out = np.zeros(X.shape[0])
        for learner in self.base_learners:
            out += self.learning_rate * learner.predict(X)
        return out

    def componentwise_slopes(self) -> np.ndarray:
        """Cumulative per-feature slope (componentwise mode only)."""
        if self.mode != "componentwise":
            raise InvalidParameterError("slopes are defined for componentwise mode")
        slopes = np.zeros(len(self.feature_names))
        for s in self.base_learners:
            slopes[s.feature] += self.learning_rate * s.slope
        return slopes

    def to_json(self) -> str:
        doc = {
            "model": "boosted_cox",
            "mode": self.mode,
            "learning_rate": self.learning_rate,
            "feature_names": list(self.feature_names),
            "learners": [l.to_dict() for l in self.base_learners],
            "training_loss_trace": list(self.training_loss_trace),
            "early_stop_round": self.early_stop_round,
        }
        return json.dumps(doc, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "BoostedModel":
        doc = json.loads(text)
        learners = []
        for entry in doc["learners"]:
            if entry["kind"] == "stump":
                learners.append(Stump(int(entry["feature"]), float(entry["slope"]),
                                      float(entry["intercept"])))
            else:
                learners.append(_tree_from_dict(entry))
        return BoostedModel(
            mode=doc["mode"],
            learning_rate=float(doc["learning_rate"]),
            feature_names=tuple(doc["feature_names"]),
            base_learners=tuple(learners),
            training_loss_trace=tuple(doc["training_loss_trace"]),
            early_stop_round=doc.get("early_stop_round"),
        )


def predict_risk(model: BoostedModel, x) -> float:
    """Risk score of a single feature vector."""
    return float(model.predict_risk(np.atleast_2d(x))[0])


def fit_boosted(cohort: Cohort, params: BoostParams) -> BoostedModel:
    """Gradient/Newton boosting on the Cox partial likelihood.

    Each round fits a base learner to the negative gradient of the loss and
    adds it scaled by the learning rate; if the training loss would rise,
    the new learner is halved (folded into its values) until the trace is
    nonincreasing, and the round is abandoned once halving stops helping.
    """
    times, events = cohort.times(), cohort.events()
    if int(np.sum(events)) < 1:
        raise TrainingError("cannot boost with zero events")

    # canonical subject order: fitted model independent of input permutation
    order = sorted(range(len(cohort)),
                   key=lambda i: (times[i], events[i], cohort.records[i].id))
    canon = cohort.subset_rows(order)
    X, t, e = canon.matrix(), canon.times(), canon.events()
    n = X.shape[0]
    rng = np.random.default_rng(params.seed)

    f = np.zeros(n)
    learners: list = []
    trace = [cox_negloglik(t, e, f)]
    early_stop = None

    for rnd in range(params.rounds):
        g, h = cox_gradients(f, t, e)
        if params.row_subsample < 1.0:
            m = max(1, int(round(params.row_subsample * n)))
            chosen = np.sort(rng.choice(n, size=m, replace=False))
            Xr, gr, hr = X[chosen], g[chosen], h[chosen]
        else:
            Xr, gr, hr = X, g, h

        if params.mode == "componentwise":
            learner = _fit_stump(Xr, -gr)
        elif params.mode == "gbm":
            learner = _fit_tree_gbm(Xr, -gr, params.tree_depth, params.min_leaf)
        else:
            learner = _fit_tree_newton(Xr, gr, hr, params.tree_depth,
                                       params.min_leaf, params.l2_lambda)
        if learner is None:
            early_stop = rnd
            break

        accepted = False
        scale = 1.0
        for _ in range(31):
            cand = learner.scaled(scale) if scale != 1.0 else learner
            f_new = f + params.learning_rate * cand.predict(X)
            loss = cox_negloglik(t, e, f_new)
            if loss <= trace[-1] + 1e-9:
                learners.append(cand)
                f = f_new
                trace.append(loss)
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            early_stop = rnd
            break

    return BoostedModel(
        mode=params.mode,
        learning_rate=params.learning_rate,
        feature_names=canon.feature_names,
        base_learners=tuple(learners),
        training_loss_trace=tuple(trace),
        early_stop_round=early_stop,
    )
