"""Per-review True/False density-attitude classification.

Five classical classifiers over TF-IDF features, stratified K-fold cross
validation, grid search with bundled default grids, evaluation metrics, and
ingestion of externally produced predictions. All training is deterministic
given the ClassifierSpec seed; per-cell and per-fold randomness is derived
from it so
serial and parallel runs agree.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import optimize

from .ingest import ValidationReport
from .rng import derive_seed
from .textprep import TfidfMatrix

KINDS = ("dt", "rf", "nb", "svm", "lr")

_HYPERPARAM_NAMES = {
    "dt": frozenset({"max_depth", "min_samples_leaf"}),
    "rf": frozenset({"n_estimators", "max_depth", "min_samples_leaf", "bootstrap", "max_features"}),
    "nb": frozenset({"alpha"}),
    "svm": frozenset({"kernel", "C", "max_iter"}),
    "lr": frozenset({"solver", "C", "max_iter"}),
}

KERNELS = ("linear", "rbf", "poly")
SOLVERS = ("sag", "saga", "lbfgs")

# Grids bundled as defaults for grid_search, keyed by classifier kind.
DEFAULT_GRIDS = {
    "dt": {"max_depth": [5, 10, 20, 40, 60], "min_samples_leaf": [1, 2, 4]},
    "rf": {
        "n_estimators": [100, 200, 300, 400],
        "max_depth": [10, 20, 40, 80, 100],
        "min_samples_leaf": [1, 2, 4],
    },
    "nb": {"alpha": [0.01, 0.05, 0.1, 0.2, 0.5, 1]},
    "svm": {"kernel": ["rbf", "poly", "linear"], "C": [0.1, 0.5, 1, 2, 10], "max_iter": [100, 200, 500, 1000, 1200]},
    "lr": {"solver": ["sag", "saga", "lbfgs"], "C": [0.1, 0.5, 1, 2, 5, 10], "max_iter": [10, 20, 50, 100, 200]},
}

GRADIENT_TOL = 1e-6


class UnsupportedKernelError(ValueError):
    """Raised for svm kernels accepted by the grid schema but not implemented."""


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _check_hyperparam(name: str, value) -> None:
    if name == "max_depth":
        if value is not None and not (_is_int(value) and value >= 1):
            raise ValueError(f"max_depth must be None or int >= 1, got {value!r}")
    elif name in ("min_samples_leaf", "n_estimators", "max_iter"):
        if not (_is_int(value) and value >= 1):
            raise ValueError(f"{name} must be int >= 1, got {value!r}")
    elif name in ("alpha", "C"):
        if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
            raise ValueError(f"{name} must be > 0, got {value!r}")
    elif name == "kernel":
        if value not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}, got {value!r}")
    elif name == "solver":
        if value not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}, got {value!r}")
    elif name == "bootstrap":
        if not isinstance(value, bool):
            raise ValueError(f"bootstrap must be bool, got {value!r}")
    elif name == "max_features":
        if value not in (None, "sqrt"):
            raise ValueError(f"max_features must be None or 'sqrt', got {value!r}")


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        allowed = _HYPERPARAM_NAMES[self.kind]
        for name, value in self.hyperparameters.items():
            if name not in allowed:
                raise ValueError(f"hyperparameter {name!r} not valid for kind {self.kind!r}")
            _check_hyperparam(name, value)

    def get(self, name, default=None):
        return self.hyperparameters.get(name, default)


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, TfidfMatrix):
        arr = x.dense()
    elif hasattr(x, "toarray"):
        arr = x.toarray()
    else:
        arr = np.asarray(x, dtype=float)
    arr = np.asarray(arr, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"feature matrix must be 2-D, got shape {arr.shape}")
    if np.isnan(arr).any():
        raise ValueError("feature matrix contains NaN")
    return arr


def _as_labels(y) -> np.ndarray:
    arr = np.asarray([bool(v) for v in y], dtype=bool)
    return arr


# ---------------------------------------------------------------------------
# Decision tree (greedy Gini). Deterministic tie-breaks: a split replaces the
# incumbent only when its gain is larger by more than 1e-12, and candidates
# are visited in ascending (feature, threshold) order, so the lowest feature
# index and lowest threshold win ties.


def _gini(n_true: float, n_total: float) -> float:
    if n_total <= 0:
        return 0.0
    p = n_true / n_total
    return 2.0 * p * (1.0 - p)


def _best_split(x, y, idx, feature_indices, min_samples_leaf):
    n = len(idx)
    y_node = y[idx]
    n_true = float(np.count_nonzero(y_node))
    parent = _gini(n_true, n)
    feats = np.asarray(feature_indices, dtype=int)
    sub = x[np.ix_(idx, feats)]
    order = np.argsort(sub, axis=0, kind="stable")
    sorted_vals = np.take_along_axis(sub, order, axis=0)
    left_true = np.cumsum(y_node[order].astype(float), axis=0)[:-1]
    n_left = np.arange(1, n, dtype=float).reshape(-1, 1)
    n_right = n - n_left
    p_l = left_true / n_left
    p_r = (n_true - left_true) / n_right
    gain = parent - (n_left / n) * (2.0 * p_l * (1.0 - p_l)) - (n_right / n) * (2.0 * p_r * (1.0 - p_r))
    valid = sorted_vals[:-1] != sorted_vals[1:]
    if min_samples_leaf > 1:
        valid &= (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
    best = None
    best_gain = 1e-12
    masked = np.where(valid, gain, -np.inf)
    g_max = float(masked.max(initial=-np.inf))
    if not g_max > best_gain + 1e-12:
        return None
    near = masked > g_max - 1e-12
    if np.all(masked[near] == g_max):
        # ties are exact: winner is the first maximum in column-major order
        flat = int(np.argmax((masked == g_max).T))
        col, i = divmod(flat, n - 1)
    else:
        # candidates within 1e-12 of the maximum but not equal to it: replay
        # the sequential scan, where a later candidate must beat the
        # incumbent by > 1e-12
        col = i = -1
        for c, k in np.argwhere(valid.T):
            g = gain[k, c]
            if g > best_gain + 1e-12:
                best_gain = g
                col, i = int(c), int(k)
    return (int(feats[col]), (sorted_vals[i, col] + sorted_vals[i + 1, col]) / 2.0)


def _grow_tree(x, y, idx, depth, max_depth, min_samples_leaf, max_features, rng):
    # x and y stay whole for the recursion; idx names this node's rows
    n = len(idx)
    n_true = int(np.count_nonzero(y[idx]))
    leaf = {"leaf": True, "n": n, "prob": n_true / n, "prediction": n_true * 2 > n}
    if n_true == 0 or n_true == n:
        return leaf
    if max_depth is not None and depth >= max_depth:
        return leaf
    if n < 2 * min_samples_leaf:
        return leaf
    p = x.shape[1]
    if max_features is None or max_features >= p:
        features = range(p)
    else:
        features = sorted(rng.choice(p, size=max_features, replace=False).tolist())
    split = _best_split(x, y, idx, features, min_samples_leaf)
    if split is None:
        return leaf
    j, threshold = split
    mask = x[idx, j] <= threshold
    return {
        "leaf": False,
        "feature": int(j),
        "threshold": float(threshold),
        "left": _grow_tree(x, y, idx[mask], depth + 1, max_depth, min_samples_leaf, max_features, rng),
        "right": _grow_tree(x, y, idx[~mask], depth + 1, max_depth, min_samples_leaf, max_features, rng),
    }


def _tree_prob(node, row) -> float:
    while not node["leaf"]:
        node = node["left"] if row[node["feature"]] <= node["threshold"] else node["right"]
    return node["prob"]


def _tree_predict(node, row) -> bool:
    while not node["leaf"]:
        node = node["left"] if row[node["feature"]] <= node["threshold"] else node["right"]
    return node["prediction"]


class DecisionTreeModel:
    kind = "dt"

    def __init__(self, root, n_features):
        self.root = root
        self.n_features = n_features

    def predict(self, x) -> np.ndarray:
        x = self._check(x)
        return np.array([_tree_predict(self.root, row) for row in x], dtype=bool)

    def scores(self, x) -> np.ndarray:
        """Leaf fraction of True training samples; uncalibrated."""
        x = self._check(x)
        return np.array([_tree_prob(self.root, row) for row in x], dtype=float)

    def _check(self, x) -> np.ndarray:
        x = _as_matrix(x)
        if x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[1]}")
        return x

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n_features": self.n_features, "root": self.root}

    @classmethod
    def from_dict(cls, d):
        return cls(d["root"], d["n_features"])


class RandomForestModel:
    kind = "rf"

    def __init__(self, trees, n_features):
        self.trees = trees
        self.n_features = n_features

    def scores(self, x) -> np.ndarray:
        """Fraction of trees voting True; uncalibrated."""
        x = self._check(x)
        votes = np.zeros(len(x))
        for root in self.trees:
            votes += [_tree_predict(root, row) for row in x]
        return votes / len(self.trees)

    def predict(self, x) -> np.ndarray:
        # majority vote; exact half-split resolves to False
        return self.scores(x) > 0.5

    def _check(self, x) -> np.ndarray:
        x = _as_matrix(x)
        if x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[1]}")
        return x

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n_features": self.n_features, "trees": self.trees}

    @classmethod
    def from_dict(cls, d):
        return cls(d["trees"], d["n_features"])


class NaiveBayesModel:
    kind = "nb"

    def __init__(self, log_prior, log_likelihood, n_features):
        self.log_prior = np.asarray(log_prior, dtype=float)  # [False, True]
        self.log_likelihood = np.asarray(log_likelihood, dtype=float)  # shape (2, p)
        self.n_features = n_features

    def _joint(self, x) -> np.ndarray:
        x = _as_matrix(x)
        if x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[1]}")
        return x @ self.log_likelihood.T + self.log_prior

    def predict(self, x) -> np.ndarray:
        joint = self._joint(x)
        # tie resolves to False (class order)
        return joint[:, 1] > joint[:, 0]

    def scores(self, x) -> np.ndarray:
        """Posterior probability of the True class."""
        joint = self._joint(x)
        shifted = joint - joint.max(axis=1, keepdims=True)
        expd = np.exp(shifted)
        return expd[:, 1] / expd.sum(axis=1)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_features": self.n_features,
            "log_prior": self.log_prior.tolist(),
            "log_likelihood": self.log_likelihood.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["log_prior"], d["log_likelihood"], d["n_features"])


class LinearSvmModel:
    kind = "svm"

    def __init__(self, w, b, n_features, objective_trajectory=None):
        self.w = np.asarray(w, dtype=float)
        self.b = float(b)
        self.n_features = n_features
        self.objective_trajectory = list(objective_trajectory or [])

    def scores(self, x) -> np.ndarray:
        """Signed margin; uncalibrated and unbounded."""
        x = _as_matrix(x)
        if x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[1]}")
        return x @ self.w + self.b

    def predict(self, x) -> np.ndarray:
        return self.scores(x) > 0.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n_features": self.n_features, "w": self.w.tolist(), "b": self.b}

    @classmethod
    def from_dict(cls, d):
        return cls(d["w"], d["b"], d["n_features"])


class LogisticModel:
    kind = "lr"

    def __init__(self, w, b, n_features, loss_trajectory=None, converged=False, n_iter=0):
        self.w = np.asarray(w, dtype=float)
        self.b = float(b)
        self.n_features = n_features
        self.loss_trajectory = list(loss_trajectory or [])
        self.converged = converged
        self.n_iter = n_iter

    def scores(self, x) -> np.ndarray:
        """Probability of the True class."""
        x = _as_matrix(x)
        if x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[1]}")
        z = x @ self.w + self.b
        return 1.0 / (1.0 + np.exp(-z))

    def predict(self, x) -> np.ndarray:
        return self.scores(x) > 0.5

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_features": self.n_features,
            "w": self.w.tolist(),
            "b": self.b,
            "converged": self.converged,
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["w"], d["b"], d["n_features"], converged=d.get("converged", False), n_iter=d.get("n_iter", 0))


_MODEL_CLASSES = {
    "dt": DecisionTreeModel,
    "rf": RandomForestModel,
    "nb": NaiveBayesModel,
    "svm": LinearSvmModel,
    "lr": LogisticModel,
}


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), sort_keys=True), encoding="utf-8")


def load_model(path):
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    return _MODEL_CLASSES[d["kind"]].from_dict(d)


# ---------------------------------------------------------------------------
# Training


def _train_dt(spec, x, y):
    root = _grow_tree(
        x,
        y,
        np.arange(len(y)),
        depth=0,
        max_depth=spec.get("max_depth"),
        min_samples_leaf=spec.get("min_samples_leaf", 1),
        max_features=None,
        rng=None,
    )
    return DecisionTreeModel(root, x.shape[1])


def _train_rf(spec, x, y):
    n, p = x.shape
    n_estimators = spec.get("n_estimators", 100)
    bootstrap = spec.get("bootstrap", True)
    max_features = spec.get("max_features", "sqrt")
    m = max(1, int(math.sqrt(p))) if max_features == "sqrt" else None
    trees = []
    for t in range(n_estimators):
        rng = np.random.default_rng(derive_seed(spec.seed, "tree", t))
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(
            _grow_tree(
                x,
                y,
                idx,
                depth=0,
                max_depth=spec.get("max_depth"),
                min_samples_leaf=spec.get("min_samples_leaf", 1),
                max_features=m,
                rng=rng,
            )
        )
    return RandomForestModel(trees, p)


def _train_nb(spec, x, y):
    alpha = float(spec.get("alpha", 1.0))
    p = x.shape[1]
    log_prior = np.empty(2)
    log_likelihood = np.empty((2, p))
    n = len(y)
    for c, mask in enumerate((~y, y)):
        n_c = int(np.count_nonzero(mask))
        log_prior[c] = math.log(n_c / n)
        counts = x[mask].sum(axis=0)
        total = counts.sum()
        log_likelihood[c] = np.log((counts + alpha) / (total + alpha * p))
    return NaiveBayesModel(log_prior, log_likelihood, p)


def _train_svm(spec, x, y):
    kernel = spec.get("kernel", "linear")
    if kernel != "linear":
        raise UnsupportedKernelError(f"unsupported kernel {kernel!r}: only 'linear' is implemented")
    C = float(spec.get("C", 1.0))
    max_iter = spec.get("max_iter", 1000)
    n, p = x.shape
    ys = np.where(y, 1.0, -1.0)
    lam = 1.0 / (C * n)
    w = np.zeros(p)
    b = 0.0

    def objective(w_, b_):
        margins = ys * (x @ w_ + b_)
        hinge = np.maximum(0.0, 1.0 - margins)
        return 0.5 * lam * float(w_ @ w_) + float(hinge.mean())

    best_w, best_b = w.copy(), b
    best_obj = objective(w, b)
    trajectory = [best_obj]
    for t in range(1, max_iter + 1):
        margins = ys * (x @ w + b)
        viol = margins < 1.0
        grad_w = lam * w - (x[viol].T @ ys[viol]) / n
        grad_b = -ys[viol].sum() / n
        eta = 1.0 / (lam * t)
        w = w - eta * grad_w
        b = b - eta * grad_b
        obj = objective(w, b)
        trajectory.append(obj)
        if obj < best_obj:
            best_obj = obj
            best_w, best_b = w.copy(), b
    return LinearSvmModel(best_w, best_b, p, objective_trajectory=trajectory)


def _lr_loss_grad(theta, x, ys, inv_c):
    w = theta[:-1]
    b = theta[-1]
    z = ys * (x @ w + b)
    loss = float(np.logaddexp(0.0, -z).sum()) + 0.5 * inv_c * float(w @ w)
    # d/dz log(1+exp(-z)) = -sigmoid(-z)
    s = -1.0 / (1.0 + np.exp(z))
    coef = ys * s
    grad_w = x.T @ coef + inv_c * w
    grad_b = coef.sum()
    return loss, np.append(grad_w, grad_b)


def _train_lr_lbfgs(x, ys, inv_c, max_iter):
    losses = []

    def callback(theta):
        losses.append(_lr_loss_grad(theta, x, ys, inv_c)[0])

    theta0 = np.zeros(x.shape[1] + 1)
    losses.append(_lr_loss_grad(theta0, x, ys, inv_c)[0])
    result = optimize.minimize(
        _lr_loss_grad,
        theta0,
        args=(x, ys, inv_c),
        method="L-BFGS-B",
        jac=True,
        callback=callback,
        options={"maxiter": max_iter, "gtol": GRADIENT_TOL, "ftol": 1e-16},
    )
    theta = result.x
    grad_norm = float(np.linalg.norm(_lr_loss_grad(theta, x, ys, inv_c)[1]))
    return theta, losses, grad_norm < GRADIENT_TOL, int(result.nit)


def _train_lr_sag(x, ys, inv_c, max_iter, seed, averaged):
    """SAG/SAGA epochs with a monotone safeguard.

    Cyclic sample order is fixed once from the seed. After each epoch the full
    loss is evaluated; a non-improving epoch is rolled back and retried with a
    halved step, so the recorded loss trajectory never increases.
    """
    n, p = x.shape
    rng = np.random.default_rng(derive_seed(seed, "sag"))
    order = rng.permutation(n)
    row_norms = (x * x).sum(axis=1) + 1.0
    step = 1.0 / (0.25 * float(row_norms.max()) + inv_c / n)

    theta = np.zeros(p + 1)
    stored = np.zeros(n)  # per-sample d loss / d z at last visit
    sum_w = np.zeros(p)  # running sum of stored[i] * x[i]
    sum_b = 0.0

    loss, grad = _lr_loss_grad(theta, x, ys, inv_c)
    losses = [loss]
    epoch = 0
    while epoch < max_iter:
        snapshot = (theta.copy(), stored.copy(), sum_w.copy(), sum_b)
        for i in order:
            z = ys[i] * (x[i] @ theta[:-1] + theta[-1])
            s_new = ys[i] * (-1.0 / (1.0 + np.exp(z)))
            delta = s_new - stored[i]
            if averaged:
                # SAGA: fresh gradient, bias-corrected by the stale table mean
                dir_w = delta * x[i] + sum_w / n
                dir_b = delta + sum_b / n
            stored[i] = s_new
            sum_w += delta * x[i]
            sum_b += delta
            if not averaged:
                dir_w = sum_w / n
                dir_b = sum_b / n
            dir_w = dir_w + (inv_c / n) * theta[:-1]
            theta[:-1] -= step * dir_w
            theta[-1] -= step * dir_b
        loss_new, grad = _lr_loss_grad(theta, x, ys, inv_c)
        if loss_new <= losses[-1]:
            losses.append(loss_new)
            epoch += 1
            if float(np.linalg.norm(grad)) < GRADIENT_TOL:
                return theta, losses, True, epoch
        else:
            theta, stored, sum_w, sum_b = snapshot
            step /= 2.0
            if step < 1e-14:
                break
    _, grad = _lr_loss_grad(theta, x, ys, inv_c)
    return theta, losses, float(np.linalg.norm(grad)) < GRADIENT_TOL, epoch


def _train_lr(spec, x, y):
    solver = spec.get("solver", "lbfgs")
    C = float(spec.get("C", 1.0))
    max_iter = spec.get("max_iter", 100)
    inv_c = 1.0 / C
    ys = np.where(y, 1.0, -1.0)
    if solver == "lbfgs":
        theta, losses, converged, n_iter = _train_lr_lbfgs(x, ys, inv_c, max_iter)
    else:
        theta, losses, converged, n_iter = _train_lr_sag(x, ys, inv_c, max_iter, spec.seed, averaged=(solver == "saga"))
    return LogisticModel(theta[:-1], theta[-1], x.shape[1], loss_trajectory=losses, converged=converged, n_iter=n_iter)


_TRAINERS = {"dt": _train_dt, "rf": _train_rf, "nb": _train_nb, "svm": _train_svm, "lr": _train_lr}


def train(spec: ClassifierSpec, x, y):
    """Fit the classifier described by ``spec`` on (x, y)."""
    x = _as_matrix(x)
    y = _as_labels(y)
    if x.shape[0] != len(y):
        raise ValueError(f"{x.shape[0]} rows but {len(y)} labels")
    if len(y) == 0:
        raise ValueError("empty training set")
    if y.all() or not y.any():
        raise ValueError("training labels contain a single class")
    return _TRAINERS[spec.kind](spec, x, y)


def predict(model, x):
    """Labels plus the kind's score (probability, vote fraction, or margin)."""
    return model.predict(x), model.scores(x)


# ---------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class EvalMetrics:
    tp: int
    fp: int
    fn: int
    tn: int
    accuracy: float
    precision_true: float
    recall_true: float
    f1_true: float
    precision_false: float
    recall_false: float
    f1_false: float


def _prf(tp, fp, fn):
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def evaluate(pred, truth) -> EvalMetrics:
    pred = _as_labels(pred)
    truth = _as_labels(truth)
    if len(pred) != len(truth):
        raise ValueError(f"{len(pred)} predictions but {len(truth)} truths")
    if len(pred) == 0:
        raise ValueError("nothing to evaluate")
    tp = int(np.count_nonzero(pred & truth))
    fp = int(np.count_nonzero(pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    tn = int(np.count_nonzero(~pred & ~truth))
    p_t, r_t, f1_t = _prf(tp, fp, fn)
    p_f, r_f, f1_f = _prf(tn, fn, fp)
    return EvalMetrics(
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
        accuracy=(tp + tn) / len(pred),
        precision_true=p_t,
        recall_true=r_t,
        f1_true=f1_t,
        precision_false=p_f,
        recall_false=r_f,
        f1_false=f1_f,
    )


# ---------------------------------------------------------------------------
# Cross validation and grid search


def stratified_folds(y, k: int, seed: int) -> list[np.ndarray]:
    """Partition indices into k folds, dealing each class round-robin."""
    y = _as_labels(y)
    if k < 2:
        raise ValueError("k must be >= 2")
    counts = (int(np.count_nonzero(~y)), int(np.count_nonzero(y)))
    if min(counts) < k:
        raise ValueError(f"class counts {counts} too small to stratify into {k} folds")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for mask in (y, ~y):
        idx = np.flatnonzero(mask)
        rng.shuffle(idx)
        for pos, i in enumerate(idx):
            folds[pos % k].append(int(i))
    return [np.array(sorted(f), dtype=int) for f in folds]


@dataclass
class CvResult:
    fold_metrics: list
    spec: ClassifierSpec

    @property
    def mean_accuracy(self) -> float:
        return sum(m.accuracy for m in self.fold_metrics) / len(self.fold_metrics)


def kfold_cv(spec: ClassifierSpec, x, y, k: int = 5, seed: int = 0) -> CvResult:
    """Stratified K-fold cross validation; folds depend only on (y, k, seed)."""
    x = _as_matrix(x)
    y = _as_labels(y)
    folds = stratified_folds(y, k, derive_seed(seed, "folds"))
    all_idx = np.arange(len(y))
    fold_metrics = []
    for i, val_idx in enumerate(folds):
        train_mask = np.ones(len(y), dtype=bool)
        train_mask[val_idx] = False
        train_idx = all_idx[train_mask]
        fold_spec = replace(spec, seed=derive_seed(spec.seed, "fold", i))
        model = train(fold_spec, x[train_idx], y[train_idx])
        labels = model.predict(x[val_idx])
        fold_metrics.append(evaluate(labels, y[val_idx]))
    return CvResult(fold_metrics=fold_metrics, spec=spec)


def enumerate_grid(grid: dict) -> list[dict]:
    """Cartesian product over keys in insertion order, values in listed order."""
    keys = list(grid.keys())
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


@dataclass
class GridCell:
    index: int
    params: dict
    seed: int
    result: CvResult | None
    error: str | None


@dataclass
class GridSearchResult:
    kind: str
    best_spec: ClassifierSpec | None
    best_mean_accuracy: float
    cells: list[GridCell]

    @property
    def errors(self) -> list[GridCell]:
        return [c for c in self.cells if c.error is not None]


def grid_search(kind: str, x, y, grid: dict | None = None, k: int = 5, seed: int = 0) -> GridSearchResult:
    """Exhaustive CV over the grid; best mean accuracy wins, first cell on ties.

    A cell whose training raises (for example an unsupported svm kernel) is
    recorded with its error and skipped; the search continues.
    """
    if grid is None:
        grid = DEFAULT_GRIDS[kind]
    cells_params = enumerate_grid(grid)
    if not cells_params:
        raise ValueError("empty grid")
    x = _as_matrix(x)
    y = _as_labels(y)
    cells = []
    best_spec = None
    best_acc = -1.0
    for idx, params in enumerate(cells_params):
        cell_seed = derive_seed(seed, "cell", idx)
        try:
            spec = ClassifierSpec(kind=kind, hyperparameters=params, seed=cell_seed)
            result = kfold_cv(spec, x, y, k=k, seed=seed)
        except ValueError as exc:
            cells.append(GridCell(index=idx, params=params, seed=cell_seed, result=None, error=str(exc)))
            continue
        cells.append(GridCell(index=idx, params=params, seed=cell_seed, result=result, error=None))
        if result.mean_accuracy > best_acc:
            best_acc = result.mean_accuracy
            best_spec = spec
    if best_spec is None:
        raise ValueError("every grid cell failed")
    return GridSearchResult(kind=kind, best_spec=best_spec, best_mean_accuracy=best_acc, cells=cells)


_METRIC_FIELDS = (
    "accuracy",
    "precision_true",
    "recall_true",
    "f1_true",
    "precision_false",
    "recall_false",
    "f1_false",
    "tp",
    "fp",
    "fn",
    "tn",
)


def write_cv_report(result: GridSearchResult, path) -> None:
    """One row per (grid cell, fold) with metrics; failed cells keep their error."""
    from .artifacts import schema_line

    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(schema_line("cv_report") + "\n")
        writer = csv.writer(fh)
        writer.writerow(["cell", "params", "seed", "fold", "error"] + list(_METRIC_FIELDS) + ["mean_accuracy"])
        for cell in result.cells:
            params = json.dumps(cell.params, sort_keys=True)
            if cell.error is not None:
                writer.writerow([cell.index, params, cell.seed, "", cell.error] + [""] * len(_METRIC_FIELDS) + [""])
                continue
            for fold, m in enumerate(cell.result.fold_metrics):
                row = [cell.index, params, cell.seed, fold, ""]
                row += [_format_metric(getattr(m, f)) for f in _METRIC_FIELDS]
                row.append(_format_metric(cell.result.mean_accuracy))
                writer.writerow(row)


def _format_metric(v) -> str:
    if isinstance(v, int):
        return str(v)
    return f"{v:.6f}"


# ---------------------------------------------------------------------------
# External artifacts


def load_labels(path) -> tuple[dict[str, bool], ValidationReport]:
    """Training labels CSV ``review_id,label`` with label in {true, false}."""
    path = Path(path)
    report = ValidationReport()
    labels: dict[str, bool] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file, no header row")
        missing = [c for c in ("review_id", "label") if c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        for rownum, row in enumerate(reader, start=2):
            rid = (row["review_id"] or "").strip()
            raw = (row["label"] or "").strip().lower()
            if raw not in ("true", "false"):
                report.add(path, rownum, "label", f"label {row['label']!r} not in {{true, false}}")
                continue
            if rid in labels:
                report.add(path, rownum, "review_id", f"duplicate review_id {rid!r}; row rejected")
                continue
            labels[rid] = raw == "true"
    return labels, report


def load_external_predictions(path, known_ids=None) -> tuple[dict[str, float], ValidationReport]:
    """Per-review True probabilities from CSV ``review_id,prob_true``."""
    path = Path(path)
    report = ValidationReport()
    probs: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file, no header row")
        missing = [c for c in ("review_id", "prob_true") if c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        for rownum, row in enumerate(reader, start=2):
            rid = (row["review_id"] or "").strip()
            try:
                prob = float(row["prob_true"])
            except (TypeError, ValueError):
                report.add(path, rownum, "prob_true", f"non-numeric probability {row['prob_true']!r}")
                continue
            if not 0.0 <= prob <= 1.0:
                report.add(path, rownum, "prob_true", f"probability {prob} outside [0, 1]")
                continue
            if known_ids is not None and rid not in known_ids:
                report.skipped_reviews.append({"file": str(path), "review_id": rid, "reason": "unknown review_id"})
                continue
            if rid in probs:
                report.add(path, rownum, "review_id", f"duplicate review_id {rid!r}; row rejected")
                continue
            probs[rid] = prob
    return probs, report


def labels_from_probs(probs: dict[str, float]) -> dict[str, bool]:
    # boundary rule: exactly 0.5 counts as True
    return {rid: p >= 0.5 for rid, p in probs.items()}


# ---------------------------------------------------------------------------
# Grid files


_GRID_LINE_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*\[(.*)\]\s*$")


def _parse_grid_value(raw: str):
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "'\"":
        return raw[1:-1]
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    if raw.lower() == "none":
        return None
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def parse_grid_file(path) -> dict[str, list]:
    """Parse ``key = [v1, v2, ...]`` lines; '#' starts a comment."""
    grid: dict[str, list] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        m = _GRID_LINE_RE.match(stripped)
        if m is None:
            raise ValueError(f"{path}:{lineno}: expected 'key = [v1, v2, ...]', got {line!r}")
        key, body = m.group(1), m.group(2)
        if key in grid:
            raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
        values = [_parse_grid_value(v) for v in body.split(",") if v.strip()]
        if not values:
            raise ValueError(f"{path}:{lineno}: empty value list for {key!r}")
        grid[key] = values
    if not grid:
        raise ValueError(f"{path}: no grid entries found")
    return grid
