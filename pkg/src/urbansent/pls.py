"""SIMPLS partial least squares with CV component selection and jack-knife
coefficient significance.

All fitting happens in Z-scored space (single response column). Cross
validation restandardizes inside each training fold so held-out rows never
leak into the scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import t as student_t

from .rng import derive_seed

RANK_TOL = 1e-10
DEGENERATE_SD = 1e-12


@dataclass(frozen=True)
class PlsFit:
    n_components: int
    x_scores: np.ndarray  # T, orthonormal columns
    y_scores: np.ndarray  # U
    x_loadings: np.ndarray  # P
    y_loadings: np.ndarray  # Q, one scalar per component
    weights: np.ndarray  # R, with X @ R = T
    coefficients: np.ndarray  # standardized space, no intercept
    variance_explained_x: np.ndarray  # percent of X sum of squares per component


def _check_xy(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if x.ndim != 2:
        raise ValueError("x must be 2-D")
    if x.shape[0] != len(y):
        raise ValueError(f"{x.shape[0]} rows but {len(y)} responses")
    if np.isnan(x).any() or np.isnan(y).any():
        raise ValueError("NaN in input")
    return x, y


def fit_simpls(x, y, n_components: int) -> PlsFit:
    """SIMPLS for a single response: cross-product deflation per component.

    Expects Z-scored x and y. Each iteration extracts the weight vector from
    the current cross-product, normalizes the resulting score, and deflates
    the cross-product against the orthonormalized loading basis, so scores
    stay mutually orthogonal and the model is nested in n_components.
    """
    x, y = _check_xy(x, y)
    n, p = x.shape
    limit = min(n - 1, p)
    if not 1 <= n_components <= limit:
        raise ValueError(f"n_components must be in 1..{limit}, got {n_components}")
    a_max = n_components
    t_mat = np.empty((n, a_max))
    u_mat = np.empty((n, a_max))
    p_mat = np.empty((p, a_max))
    r_mat = np.empty((p, a_max))
    v_mat = np.empty((p, a_max))
    q_vec = np.empty(a_max)
    var_x = np.empty(a_max)
    total_ss_x = float((x * x).sum())
    s = x.T @ y
    for a in range(a_max):
        r = s.copy()
        t = x @ r
        norm_t = float(np.linalg.norm(t))
        if norm_t < RANK_TOL:
            raise ValueError(f"n_components={n_components} exceeds effective rank {a}")
        t /= norm_t
        r /= norm_t
        p_a = x.T @ t
        q_a = float(y @ t)
        u = y * q_a
        if a > 0:
            u -= t_mat[:, :a] @ (t_mat[:, :a].T @ u)
            v = p_a - v_mat[:, :a] @ (v_mat[:, :a].T @ p_a)
        else:
            v = p_a.copy()
        norm_v = float(np.linalg.norm(v))
        if norm_v < RANK_TOL:
            raise ValueError(f"n_components={n_components} exceeds effective rank {a}")
        v /= norm_v
        s = s - v * float(v @ s)
        t_mat[:, a] = t
        u_mat[:, a] = u
        p_mat[:, a] = p_a
        r_mat[:, a] = r
        v_mat[:, a] = v
        q_vec[a] = q_a
        var_x[a] = float(p_a @ p_a) / total_ss_x * 100.0
    coefficients = r_mat @ q_vec
    return PlsFit(
        n_components=a_max,
        x_scores=t_mat,
        y_scores=u_mat,
        x_loadings=p_mat,
        y_loadings=q_vec,
        weights=r_mat,
        coefficients=coefficients,
        variance_explained_x=var_x,
    )


def fit_standardized(x, y, n_components: int) -> PlsFit:
    """Z-score raw (x, y) with full-data statistics, then fit_simpls."""
    x, y = _check_xy(x, y)
    x_std, _, _ = _standardize(x)
    y_std, _, _ = _y_standardize(y)
    return fit_simpls(x_std, y_std, n_components)


def predict(fit: PlsFit, x_new) -> np.ndarray:
    """Standardized-space prediction: x_new @ coefficients (centered model)."""
    x_new = np.asarray(x_new, dtype=float)
    if x_new.ndim == 1:
        x_new = x_new.reshape(1, -1)
    if x_new.shape[1] != len(fit.coefficients):
        raise ValueError(f"expected {len(fit.coefficients)} predictors, got {x_new.shape[1]}")
    return x_new @ fit.coefficients


def _standardize(arr):
    """Column Z-score with sample sd; returns (standardized, mean, sd)."""
    arr = np.asarray(arr, dtype=float)
    mean = arr.mean(axis=0)
    sd = arr.std(axis=0, ddof=1)
    if np.any(sd == 0.0):
        j = int(np.flatnonzero(sd == 0.0)[0]) if arr.ndim == 2 else 0
        raise ValueError(f"constant column {j} cannot be standardized")
    return (arr - mean) / sd, mean, sd


def _y_standardize(y):
    y = np.asarray(y, dtype=float).ravel()
    mean = float(y.mean())
    sd = float(y.std(ddof=1))
    if sd == 0.0:
        raise ValueError("constant response cannot be standardized")
    return (y - mean) / sd, mean, sd


def _cv_folds(n: int, folds: int, seed: int) -> list[np.ndarray]:
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if n < folds:
        raise ValueError(f"{n} rows cannot be split into {folds} folds")
    rng = np.random.default_rng(derive_seed(seed, "pls-folds"))
    perm = rng.permutation(n)
    return [np.sort(fold) for fold in np.array_split(perm, folds)]


def _cv_predictions(x, y, max_ncomp: int, folds: int, seed: int) -> np.ndarray:
    """Held-out predictions (raw y units), one column per component count.

    Training folds are Z-scored with their own statistics, which are then
    applied to the held-out fold; predictions are mapped back to raw units.
    SIMPLS nesting makes column a equal to an independent a-component refit.
    """
    x, y = _check_xy(x, y)
    n = len(y)
    preds = np.empty((n, max_ncomp))
    for val_idx in _cv_folds(n, folds, seed):
        mask = np.ones(n, dtype=bool)
        mask[val_idx] = False
        x_tr, x_mean, x_sd = _standardize(x[mask])
        y_tr, y_mean, y_sd = _y_standardize(y[mask])
        fit = fit_simpls(x_tr, y_tr, max_ncomp)
        x_val = (x[val_idx] - x_mean) / x_sd
        for a in range(1, max_ncomp + 1):
            b_a = fit.weights[:, :a] @ fit.y_loadings[:a]
            preds[val_idx, a - 1] = (x_val @ b_a) * y_sd + y_mean
    return preds


@dataclass(frozen=True)
class SelectionResult:
    n_components: int
    rmsep: np.ndarray  # rmsep[a-1] for a components


def select_components(x, y, max_ncomp: int | None = None, folds: int = 10, seed: int = 0) -> SelectionResult:
    """Pick the component count minimizing cross-validated RMSEP.

    The curve covers 1..max_ncomp; the first minimum wins ties. RMSEP is in
    raw response units, pooled over every held-out row.
    """
    x, y = _check_xy(x, y)
    if max_ncomp is None:
        max_ncomp = min(10, x.shape[1])
    max_ncomp = min(max_ncomp, x.shape[1])
    if max_ncomp < 1:
        raise ValueError("max_ncomp must be >= 1")
    preds = _cv_predictions(x, y, max_ncomp, folds, seed)
    residuals = y.reshape(-1, 1) - preds
    rmsep = np.sqrt((residuals ** 2).mean(axis=0))
    best = int(np.argmin(rmsep)) + 1  # argmin takes the first minimum
    return SelectionResult(n_components=best, rmsep=rmsep)


@dataclass(frozen=True)
class FitStats:
    r2_full: float
    r2_cv: float
    rmse_full: float
    rmse_cv: float
    rmsep_per_ncomp: np.ndarray


def goodness_of_fit(fit: PlsFit, x, y, folds: int = 10, seed: int = 0) -> FitStats:
    """Full-data and cross-validated R2/RMSE for a fit trained on (x, y).

    x and y are accepted in raw units (Z-scoring is idempotent, so already
    standardized input is fine). RMSE values are in raw response units.
    """
    x, y = _check_xy(x, y)
    x_std, _, _ = _standardize(x)
    y_std, y_mean, y_sd = _y_standardize(y)
    resid_std = y_std - x_std @ fit.coefficients
    ss_tot = float(y_std @ y_std)
    r2_full = 1.0 - float(resid_std @ resid_std) / ss_tot
    rmse_full = math.sqrt(float(((resid_std * y_sd) ** 2).mean()))
    preds = _cv_predictions(x, y, fit.n_components, folds, seed)
    resid_cv = y - preds[:, fit.n_components - 1]
    ss_res_cv = float(resid_cv @ resid_cv)
    ss_tot_raw = float(((y - y.mean()) ** 2).sum())
    rmsep = np.sqrt(((y.reshape(-1, 1) - preds) ** 2).mean(axis=0))
    return FitStats(
        r2_full=r2_full,
        r2_cv=1.0 - ss_res_cv / ss_tot_raw,
        rmse_full=rmse_full,
        rmse_cv=math.sqrt(ss_res_cv / len(y)),
        rmsep_per_ncomp=rmsep,
    )


@dataclass(frozen=True)
class CoefficientRow:
    name: str
    coefficient: float
    std_err: float
    p_value: float
    ci_lower: float
    ci_upper: float
    degenerate: bool


@dataclass(frozen=True)
class CoefficientTable:
    rows: list[CoefficientRow]
    n_components: int
    folds: int

    def __iter__(self):
        return iter(self.rows)


def jackknife_pvalues(x, y, n_components: int, folds: int = 10, seed: int = 0, columns=None) -> CoefficientTable:
    """Jack-knife significance of standardized PLS coefficients.

    For each of G folds the model is refit on the complement (restandardized
    with its own statistics). The variance estimate per predictor is
    ((G-1)/G) * sum over folds of (perturbed - full)^2; t = coef/sd with G-1
    degrees of freedom gives the two-sided p-value, and the reported bounds
    are coef -/+ t(0.975, G-1) * sd. A jack-knife sd below 1e-12 is flagged
    degenerate: p = 0 for a nonzero coefficient, 1 for a zero one.
    """
    x, y = _check_xy(x, y)
    n, p = x.shape
    x_std, _, _ = _standardize(x)
    y_std, _, _ = _y_standardize(y)
    b_full = fit_simpls(x_std, y_std, n_components).coefficients
    fold_idx = _cv_folds(n, folds, seed)
    g = len(fold_idx)
    b_folds = np.empty((g, p))
    for gi, val_idx in enumerate(fold_idx):
        mask = np.ones(n, dtype=bool)
        mask[val_idx] = False
        x_tr, _, _ = _standardize(x[mask])
        y_tr, _, _ = _y_standardize(y[mask])
        b_folds[gi] = fit_simpls(x_tr, y_tr, n_components).coefficients
    s2 = (g - 1) / g * ((b_folds - b_full) ** 2).sum(axis=0)
    sd = np.sqrt(s2)
    t_crit = float(student_t.ppf(0.975, g - 1))
    names = list(columns) if columns is not None else [f"x{j}" for j in range(p)]
    if len(names) != p:
        raise ValueError(f"{len(names)} column names for {p} predictors")
    rows = []
    for j in range(p):
        b_j = float(b_full[j])
        s_j = float(sd[j])
        if s_j < DEGENERATE_SD:
            p_val = 0.0 if b_j != 0.0 else 1.0
            degenerate = True
        else:
            t_j = b_j / s_j
            p_val = 2.0 * float(student_t.sf(abs(t_j), g - 1))
            degenerate = False
        rows.append(
            CoefficientRow(
                name=names[j],
                coefficient=b_j,
                std_err=s_j,
                p_value=p_val,
                ci_lower=b_j - t_crit * s_j,
                ci_upper=b_j + t_crit * s_j,
                degenerate=degenerate,
            )
        )
    return CoefficientTable(rows=rows, n_components=n_components, folds=g)


def significance_stars(p: float) -> str:
    """Star codes on the usual thresholds (right-closed intervals)."""
    if p <= 0.001:
        return "***"
    if p <= 0.01:
        return "**"
    if p <= 0.05:
        return "*"
    if p <= 0.1:
        return "."
    return " "
