"""Cox proportional-hazards machinery.

Partial log-likelihood with analytic gradient and Hessian (Breslow and
Efron tie handling), Newton-Raphson fitting with step halving, Wald-based
univariate screening, and iterative VIF collinearity filtering.

Numerical guard: risk weights are computed relative to the largest linear
predictor (log-sum-exp max shift) and floored at exp(-700), which keeps
every output finite for linear predictors up to +-700; contributions below
that floor are numerically irrelevant anyway.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .cohort import Cohort
from .errors import (
    ConditioningError,
    InvalidParameterError,
    NonconvergenceError,
    NumericInputError,
    TrainingError,
)
from .stepfun import StepFunction


@dataclass(frozen=True)
class CoxModel:
    feature_names: tuple[str, ...]
    coefficients: np.ndarray
    covariance: np.ndarray
    baseline_chf: StepFunction
    converged: bool
    iterations: int
    final_loglik: float

    def predict_risk(self, X) -> np.ndarray:
        """Linear predictor beta' x per row."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.coefficients.size:
            raise InvalidParameterError(
                f"expected {self.coefficients.size} features, got {X.shape[1]}")
        return X @ self.coefficients

    def predict_survival(self, x) -> StepFunction:
        """S(t | x) = exp(-H0(t) * exp(beta' x)) from the Breslow baseline."""
        risk = float(np.exp(self.predict_risk(np.atleast_2d(x))[0]))
        chf = self.baseline_chf
        return StepFunction(chf.knots, np.exp(-chf.values * risk), 1.0)


def _prepare(beta, cohort: Cohort):
    beta = np.asarray(beta, dtype=float)
    X = cohort.matrix()
    if beta.shape != (X.shape[1],):
        raise InvalidParameterError(
            f"beta has length {beta.size}, cohort has {X.shape[1]} features")
    if not np.all(np.isfinite(beta)) or not np.all(np.isfinite(X)):
        raise NumericInputError("beta and features must be finite")
    return beta, X, cohort.times(), cohort.events()


def partial_loglik(beta, cohort: Cohort, ties: str = "efron"):
    """Cox partial log-likelihood, its gradient and Hessian at beta.

    Risk sets are {j : t_j >= t_i}. With tied event times the Efron
    correction adjusts each tied event's denominator; Breslow reuses the
    full risk-set sum. Returns (value, gradient, hessian).
    """
    if ties not in ("breslow", "efron"):
        raise InvalidParameterError(f"unknown tie method {ties!r}")
    beta, X, times, events = _prepare(beta, cohort)
    return _partial_loglik_arrays(beta, X, times, events, ties)


def _partial_loglik_arrays(beta, X, times, events, ties):
    n, d = X.shape
    eta = X @ beta
    shift = float(np.max(eta))
    w = np.exp(np.maximum(eta - shift, -700.0))

    order = np.argsort(times, kind="stable")
    t_s, e_s, x_s, w_s, eta_s = times[order], events[order], X[order], w[order], eta[order]

    wx = w_s[:, None] * x_s
    wxx = np.einsum("ni,nj->nij", wx, x_s)
    # suffix sums over the risk set {t_j >= t}
    s0 = np.cumsum(w_s[::-1])[::-1]
    s1 = np.cumsum(wx[::-1], axis=0)[::-1]
    s2 = np.cumsum(wxx[::-1], axis=0)[::-1]

    first = np.searchsorted(t_s, t_s, side="left")   # head of each tied block
    ev = np.nonzero(e_s == 1)[0]
    blocks, block_of_ev, deaths_per_block = np.unique(
        first[ev], return_inverse=True, return_counts=True)

    value = float(np.sum(eta_s[ev]))
    grad = x_s[ev].sum(axis=0)
    hess = np.zeros((d, d))

    if ties == "breslow":
        simple_ev = ev                     # every event uses the full risk set
        tied_blocks = np.empty(0, dtype=int)
    else:
        singleton = deaths_per_block[block_of_ev] == 1
        simple_ev = ev[singleton]
        tied_blocks = blocks[deaths_per_block > 1]

    if simple_ev.size:
        idx = first[simple_ev]
        den = s0[idx]
        means = s1[idx] / den[:, None]
        value -= float(np.sum(np.log(den) + shift))
        grad -= means.sum(axis=0)
        hess -= np.tensordot(1.0 / den, s2[idx], axes=1) - means.T @ means

    for i in tied_blocks:                  # Efron correction per tied block
        dead = ev[(ev >= i) & (t_s[ev] == t_s[i])]
        d_k = dead.size
        phi0, phi1, phi2 = s0[i], s1[i], s2[i]
        psi0 = float(np.sum(w_s[dead]))
        psi1 = wx[dead].sum(axis=0)
        psi2 = wxx[dead].sum(axis=0)
        for ell in range(d_k):
            c = ell / d_k
            den = phi0 - c * psi0
            xbar = (phi1 - c * psi1) / den
            value -= np.log(den) + shift
            grad -= xbar
            hess -= (phi2 - c * psi2) / den - np.outer(xbar, xbar)
    return float(value), grad, hess


def breslow_baseline(times, events, scores) -> StepFunction:
    """Breslow cumulative baseline hazard for any fitted risk score.

    H0(t) = sum over event times t_k <= t of d_k / sum_{j in R_k} exp(f_j).
    """
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=int)
    scores = np.asarray(scores, dtype=float)
    shift = float(np.max(scores))
    w = np.exp(np.maximum(scores - shift, -700.0))

    order = np.argsort(times, kind="stable")
    t_s, e_s, w_s = times[order], events[order], w[order]
    s0 = np.cumsum(w_s[::-1])[::-1]

    knots, increments = [], []
    i = 0
    n = times.size
    while i < n:
        j = i
        while j < n and t_s[j] == t_s[i]:
            j += 1
        d_k = int(np.sum(e_s[i:j]))
        if d_k > 0:
            knots.append(t_s[i])
            increments.append(d_k / (s0[i] * np.exp(shift)))
        i = j
    return StepFunction(np.array(knots), np.cumsum(increments), 0.0)


def fit_cox(cohort: Cohort, ties: str = "efron", max_iter: int = 100,
            tol: float = 1e-9, ridge: float = 0.0) -> CoxModel:
    """Newton-Raphson fit from beta = 0 with step halving.

    Convergence is max |delta beta| < tol. The covariance is the inverse of
    (-Hessian + ridge * I) at the optimum, and the Breslow baseline CHF is
    computed at the fitted coefficients.
    """
    times, events = cohort.times(), cohort.events()
    n_events = int(np.sum(events))
    if n_events < 1:
        raise TrainingError("cannot fit with zero events")
    d = cohort.n_features
    if d >= n_events and ridge <= 0.0:
        raise InvalidParameterError(
            f"{d} features but only {n_events} events; supply ridge > 0")

    beta = np.zeros(d)
    value, grad, hess = partial_loglik(beta, cohort, ties)
    value -= 0.5 * ridge * float(beta @ beta)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        grad_pen = grad - ridge * beta
        hess_pen = hess - ridge * np.eye(d)
        try:
            step = np.linalg.solve(-hess_pen, grad_pen)
        except np.linalg.LinAlgError:
            if iterations == 1:
                # singular at beta = 0: structural collinearity in X
                raise ConditioningError(
                    "singular Hessian; supply ridge > 0 to regularize") from None
            # curvature degenerated along the fit path: separation-type divergence
            raise NonconvergenceError(
                "likelihood curvature vanished before convergence; "
                "data may be separable", last_iterate=beta) from None

        if np.max(np.abs(step)) < tol:
            converged = True
            break

        scale = 1.0
        new_beta = beta + step
        new_value, new_grad, new_hess = _penalized(new_beta, cohort, ties, ridge)
        halvings = 0
        while new_value < value - 1e-12 and halvings < 30:
            scale *= 0.5
            halvings += 1
            new_beta = beta + scale * step
            new_value, new_grad, new_hess = _penalized(new_beta, cohort, ties, ridge)
        if new_value < value - 1e-12:
            break                      # no usable step in this direction

        beta, value, grad, hess = new_beta, new_value, new_grad, new_hess
        if np.max(np.abs(beta)) > 50.0:
            raise NonconvergenceError(
                "coefficients diverged (|beta| > 50); data may be separable",
                last_iterate=beta)

    final_value, _, final_hess = partial_loglik(beta, cohort, ties)
    info = -final_hess + ridge * np.eye(d)
    try:
        covariance = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        raise ConditioningError("information matrix singular at optimum") from None
    covariance = (covariance + covariance.T) / 2.0

    baseline = breslow_baseline(times, events, cohort.matrix() @ beta)
    return CoxModel(
        feature_names=cohort.feature_names,
        coefficients=beta,
        covariance=covariance,
        baseline_chf=baseline,
        converged=converged,
        iterations=iterations,
        final_loglik=float(final_value),
    )


def _penalized(beta, cohort, ties, ridge):
    value, grad, hess = partial_loglik(beta, cohort, ties)
    return value - 0.5 * ridge * float(beta @ beta), grad, hess


@dataclass(frozen=True)
class ScreenRow:
    feature: str
    hazard_ratio: float
    ci_low: float
    ci_high: float
    p_value: float
    converged: bool = True


_Z975 = float(stats.norm.ppf(0.975))


def univariate_screen(cohort: Cohort, alpha: float = 0.05,
                      ties: str = "efron") -> list[ScreenRow]:
    """One single-feature Cox fit per feature; Wald p-values, sorted ascending.

    Hazard ratios are reported per original feature unit: when the cohort
    carries normalization statistics, coefficients are rescaled by the
    stored stddev before exponentiation (the p-value is scale-invariant).
    Features whose fit fails to converge come back flagged and sort last.
    """
    rows = []
    for name in cohort.feature_names:
        sub = cohort.subset_features([name])
        try:
            model = fit_cox(sub, ties=ties)
            beta = float(model.coefficients[0])
            se = float(np.sqrt(model.covariance[0, 0]))
        except (NonconvergenceError, ConditioningError):
            rows.append(ScreenRow(name, float("nan"), float("nan"), float("nan"),
                                  float("nan"), converged=False))
            continue
        if cohort.normalization is not None and name in cohort.normalization:
            sd = cohort.normalization[name][1]
            beta_unit, se_unit = beta / sd, se / sd
        else:
            beta_unit, se_unit = beta, se
        p = 2.0 * float(stats.norm.sf(abs(beta) / se)) if se > 0 else 0.0
        rows.append(ScreenRow(
            feature=name,
            hazard_ratio=float(np.exp(beta_unit)),
            ci_low=float(np.exp(beta_unit - _Z975 * se_unit)),
            ci_high=float(np.exp(beta_unit + _Z975 * se_unit)),
            p_value=p,
        ))
    return sorted(rows, key=lambda r: (not r.converged, r.p_value if r.converged else 1.0))


def retained_features(rows: list[ScreenRow], alpha: float = 0.05) -> list[str]:
    """Features passing the screen (converged and p < alpha), in p order."""
    return [r.feature for r in rows if r.converged and r.p_value < alpha]


@dataclass(frozen=True)
class VifResult:
    kept: tuple[str, ...]
    removed: tuple[tuple[str, float], ...]  # (feature, VIF at removal)


def vif_filter(cohort: Cohort, retained, threshold: float = 5.0) -> VifResult:
    """Iteratively drop the highest-VIF feature until all VIF <= threshold.

    VIF_j = 1 / (1 - R^2_j) from regressing feature j on the other retained
    features (with intercept). Exact collinearity counts as infinite VIF and
    is removed first; ties break toward the earliest cohort column.
    """
    retained = [n for n in cohort.feature_names if n in set(retained)]
    if len(retained) < 2:
        raise InvalidParameterError("VIF filtering needs at least two features")
    X = cohort.subset_features(retained).matrix()
    current = list(range(len(retained)))
    removed = []

    while len(current) >= 2:
        vifs = np.array([_vif(X[:, current], pos) for pos in range(len(current))])
        worst = int(np.argmax(vifs))  # argmax takes the first (earliest column) on ties
        if vifs[worst] <= threshold:
            break
        removed.append((retained[current[worst]], float(vifs[worst])))
        current.pop(worst)

    return VifResult(
        kept=tuple(retained[c] for c in current),
        removed=tuple(removed),
    )


def _vif(X: np.ndarray, pos: int) -> float:
    y = X[:, pos]
    others = np.delete(X, pos, axis=1)
    design = np.column_stack([np.ones(X.shape[0]), others])
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        return float("inf")
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    ssr = float(np.sum((y - design @ coef) ** 2))
    r2 = 1.0 - ssr / sst
    if 1.0 - r2 < 1e-12:
        return float("inf")
    return 1.0 / (1.0 - r2)
