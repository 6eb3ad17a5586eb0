"""Task-outcome classifiers: decision tree, random forest, logistic GLM.

All three are trained on the dataset schema from :mod:`mrsim.features` and
share one prediction contract: probability that the task attempt FAILS, with
FAIL predicted iff that probability strictly exceeds the decision threshold.
Training uses inverse-frequency example weights since failing attempts are
normally the minority class.

Three further model kinds (NEURAL_NET, BOOST, CTREE) are reserved names and
deliberately not implemented.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .features import Dataset, FeatureVector, schema_fingerprint

MODEL_FORMAT_VERSION = 1

IMPLEMENTED_KINDS = ("TREE", "FOREST", "GLM")
UNIMPLEMENTED_KINDS = ("NEURAL_NET", "BOOST", "CTREE")

FAIL_PRED = "FAIL_PRED"
SUCCEED_PRED = "SUCCEED_PRED"

DEFAULT_HYPERPARAMS = {
    "TREE": {"max_depth": 12, "min_leaf": 5},
    "FOREST": {"n_trees": 50, "max_depth": 12, "min_leaf": 5,
               "bootstrap": True, "max_features": "sqrt"},
    "GLM": {"max_iter": 10_000, "tol": 1e-6, "lr": 1.0},
}


class SingleClassDataset(ValueError):
    """Training data contains only one outcome class."""


class SchemaMismatch(ValueError):
    """Input columns do not match the columns the model was trained on."""


class UnsupportedModelKind(ValueError):
    """Requested a reserved but unimplemented model kind."""


@dataclass
class EvalMetrics:
    """Confusion counts and the four derived ratios (positive class = FAILED)."""

    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0

    @property
    def precision(self) -> float:
        den = self.tp + self.fp
        return self.tp / den if den else 0.0

    @property
    def recall(self) -> float:
        den = self.tp + self.fn
        return self.tp / den if den else 0.0

    @property
    def error(self) -> float:
        return (self.fp + self.fn) / self.total if self.total else 0.0

    def as_dict(self) -> dict:
        return {
            "tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn,
            "accuracy": self.accuracy, "precision": self.precision,
            "recall": self.recall, "error": self.error,
        }


def confusion(pred: np.ndarray, truth: np.ndarray) -> EvalMetrics:
    """Count a 0/1 prediction vector against a 0/1 truth vector."""
    pred = np.asarray(pred).astype(bool)
    truth = np.asarray(truth).astype(bool)
    return EvalMetrics(
        tp=int(np.sum(pred & truth)),
        tn=int(np.sum(~pred & ~truth)),
        fp=int(np.sum(pred & ~truth)),
        fn=int(np.sum(~pred & truth)),
    )


def class_weights(y: np.ndarray) -> np.ndarray:
    """Inverse-frequency example weights; both classes sum to n/2."""
    n = len(y)
    n1 = float(np.sum(y))
    n0 = n - n1
    if n0 == 0 or n1 == 0:
        raise SingleClassDataset("both outcome classes are required for training")
    w = np.where(y > 0.5, n / (2.0 * n1), n / (2.0 * n0))
    return w


# ---------------------------------------------------------------------------
# Decision tree (CART, Gini impurity, weighted)
# ---------------------------------------------------------------------------

def _leaf(y: np.ndarray, w: np.ndarray) -> dict:
    wsum = float(np.sum(w))
    p_fail = float(np.sum(w * y) / wsum) if wsum > 0 else 0.0
    return {"leaf": True, "p": p_fail, "n": int(len(y))}


def _best_split(X: np.ndarray, y: np.ndarray, w: np.ndarray,
                feature_idx: np.ndarray, min_leaf: int):
    """Exhaustive weighted-Gini split search over the given features.

    Returns (cost, feature, threshold) or None when no split leaves both
    children with at least min_leaf samples.
    """
    n = len(y)
    best_cost = np.inf
    best_feature = None
    best_threshold = None
    for f in feature_idx:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        ws = w[order]
        cum1 = np.cumsum(ws * ys)
        cum_all = np.cumsum(ws)
        tot1 = cum1[-1]
        tot_all = cum_all[-1]
        # split after position i only where the feature value changes
        cut = np.nonzero(xs[1:] != xs[:-1])[0]
        cut = cut[(cut + 1 >= min_leaf) & (n - cut - 1 >= min_leaf)]
        if len(cut) == 0:
            continue
        lw = cum_all[cut]
        l1 = cum1[cut]
        rw = tot_all - lw
        r1 = tot1 - l1
        gini_l = 1.0 - (l1 / lw) ** 2 - ((lw - l1) / lw) ** 2
        gini_r = 1.0 - (r1 / rw) ** 2 - ((rw - r1) / rw) ** 2
        cost = (lw * gini_l + rw * gini_r) / tot_all
        k = int(np.argmin(cost))
        if cost[k] < best_cost - 1e-15:
            best_cost = float(cost[k])
            best_feature = int(f)
            best_threshold = float((xs[cut[k]] + xs[cut[k] + 1]) / 2.0)
    if best_feature is None:
        return None
    return best_cost, best_feature, best_threshold


def _grow_tree(X: np.ndarray, y: np.ndarray, w: np.ndarray, depth: int,
               max_depth: int, min_leaf: int,
               max_features: Optional[int], rng: np.random.Generator) -> dict:
    if depth >= max_depth or len(y) < 2 * min_leaf or len(np.unique(y)) == 1:
        return _leaf(y, w)
    d = X.shape[1]
    if max_features is not None and max_features < d:
        feature_idx = np.sort(rng.choice(d, size=max_features, replace=False))
    else:
        feature_idx = np.arange(d)
    split = _best_split(X, y, w, feature_idx, min_leaf)
    if split is None:
        return _leaf(y, w)
    _, f, thr = split
    go_left = X[:, f] <= thr
    return {
        "leaf": False,
        "n": int(len(y)),
        "feature": f,
        "threshold": thr,
        "left": _grow_tree(X[go_left], y[go_left], w[go_left], depth + 1,
                           max_depth, min_leaf, max_features, rng),
        "right": _grow_tree(X[~go_left], y[~go_left], w[~go_left], depth + 1,
                            max_depth, min_leaf, max_features, rng),
    }


def _tree_proba_one(node: dict, x: np.ndarray) -> float:
    while not node["leaf"]:
        node = node["left"] if x[node["feature"]] <= node["threshold"] else node["right"]
    return node["p"]


def tree_depth(node: dict) -> int:
    if node["leaf"]:
        return 0
    return 1 + max(tree_depth(node["left"]), tree_depth(node["right"]))


def tree_min_leaf_size(node: dict) -> int:
    if node["leaf"]:
        return node["n"]
    return min(tree_min_leaf_size(node["left"]), tree_min_leaf_size(node["right"]))


# ---------------------------------------------------------------------------
# Logistic GLM
# ---------------------------------------------------------------------------

def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def glm_log_loss(theta: np.ndarray, X1: np.ndarray, y: np.ndarray,
                 w: np.ndarray) -> float:
    """Weighted mean logistic loss; X1 carries the bias column."""
    z = X1 @ theta
    losses = np.logaddexp(0.0, z) - y * z
    return float(np.sum(w * losses) / np.sum(w))


def glm_gradient(theta: np.ndarray, X1: np.ndarray, y: np.ndarray,
                 w: np.ndarray) -> np.ndarray:
    z = X1 @ theta
    return X1.T @ (w * (_sigmoid(z) - y)) / np.sum(w)


def _fit_glm(X: np.ndarray, y: np.ndarray, w: np.ndarray, hp: dict) -> dict:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    Xs = (X - mean) / std
    X1 = np.hstack([np.ones((len(Xs), 1)), Xs])
    theta = np.zeros(X1.shape[1])
    lr = float(hp["lr"])
    loss = glm_log_loss(theta, X1, y, w)
    iters = 0
    for iters in range(1, int(hp["max_iter"]) + 1):
        grad = glm_gradient(theta, X1, y, w)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < float(hp["tol"]):
            break
        # monotone line halving keeps plain gradient descent stable
        while lr > 1e-12:
            cand = theta - lr * grad
            cand_loss = glm_log_loss(cand, X1, y, w)
            if cand_loss <= loss:
                theta = cand
                loss = cand_loss
                lr = min(lr * 1.1, 16.0)
                break
            lr *= 0.5
    return {
        "theta": theta.tolist(),
        "mean": mean.tolist(),
        "std": std.tolist(),
        "iterations": iters,
    }


def _glm_proba(params: dict, X: np.ndarray) -> np.ndarray:
    mean = np.asarray(params["mean"])
    std = np.asarray(params["std"])
    theta = np.asarray(params["theta"])
    Xs = (X - mean) / std
    return _sigmoid(theta[0] + Xs @ theta[1:])


# ---------------------------------------------------------------------------
# Model wrapper
# ---------------------------------------------------------------------------

@dataclass
class PredictiveModel:
    """A trained classifier plus the schema it expects."""

    kind: str
    columns: tuple
    fingerprint: str
    hyperparams: dict
    params: dict
    threshold: float = 0.5
    train_meta: dict = field(default_factory=dict)

    def _check(self, columns) -> None:
        if tuple(columns) != tuple(self.columns):
            raise SchemaMismatch(
                f"model expects columns {self.columns}, got {tuple(columns)}")

    def proba_matrix(self, X: np.ndarray) -> np.ndarray:
        """P(FAILED) for each row of an already-encoded feature matrix."""
        X = np.asarray(X, dtype=float)
        if self.kind == "TREE":
            return np.array([_tree_proba_one(self.params["tree"], x) for x in X])
        if self.kind == "FOREST":
            probs = np.array([[_tree_proba_one(t, x) for x in X]
                              for t in self.params["trees"]])
            return probs.mean(axis=0)
        if self.kind == "GLM":
            return _glm_proba(self.params, X)
        if self.kind == "CONSTANT":
            return np.full(len(X), float(self.params["p_fail"]))
        raise UnsupportedModelKind(self.kind)

    def _encode(self, fv: FeatureVector) -> np.ndarray:
        vals = []
        for col in self.columns:
            if col.endswith("_missing") and not hasattr(fv, col):
                vals.append(0.0)
            else:
                vals.append(fv.numeric(col))
        return np.array(vals, dtype=float)

    def predict(self, fv: FeatureVector) -> tuple[str, float]:
        """Classify one attribute snapshot: (FAIL_PRED|SUCCEED_PRED, P(FAILED)).

        FAIL_PRED requires the probability to strictly exceed the threshold.
        """
        p = float(self.proba_matrix(self._encode(fv)[None, :])[0])
        return (FAIL_PRED if p > self.threshold else SUCCEED_PRED), p

    def predict_matrix(self, X: np.ndarray, columns) -> np.ndarray:
        self._check(columns)
        return (self.proba_matrix(X) > self.threshold).astype(int)

    def to_json_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": self.kind,
            "columns": list(self.columns),
            "schema_fingerprint": self.fingerprint,
            "hyperparams": self.hyperparams,
            "threshold": self.threshold,
            "params": self.params,
            "train_meta": self.train_meta,
        }

    @staticmethod
    def from_json_dict(obj: dict) -> "PredictiveModel":
        if obj.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format {obj.get('format_version')}")
        return PredictiveModel(
            kind=obj["kind"],
            columns=tuple(obj["columns"]),
            fingerprint=obj["schema_fingerprint"],
            hyperparams=obj["hyperparams"],
            params=obj["params"],
            threshold=float(obj["threshold"]),
            train_meta=obj.get("train_meta", {}),
        )


def constant_model(p_fail: float = 0.0, threshold: float = 0.5) -> PredictiveModel:
    """A degenerate model with a fixed failure probability. Handy as the
    always-succeed predictor (p_fail=0)."""
    from .features import FEATURE_COLUMNS

    return PredictiveModel(
        kind="CONSTANT",
        columns=FEATURE_COLUMNS,
        fingerprint=schema_fingerprint(FEATURE_COLUMNS),
        hyperparams={},
        params={"p_fail": float(p_fail)},
        threshold=threshold,
    )


def _resolve_hyperparams(kind: str, hyperparams: Optional[dict]) -> dict:
    hp = dict(DEFAULT_HYPERPARAMS[kind])
    for key, val in (hyperparams or {}).items():
        if key == "threshold":
            continue
        if key not in hp:
            raise ValueError(f"{kind}: unknown hyperparameter {key!r}")
        hp[key] = val
    return hp


def train(dataset: Dataset, kind: str, hyperparams: Optional[dict] = None,
          rng: Optional[np.random.Generator] = None) -> PredictiveModel:
    """Fit one classifier on a labeled dataset."""
    kind = kind.upper()
    if kind in UNIMPLEMENTED_KINDS:
        raise UnsupportedModelKind(f"model kind {kind} is reserved but not implemented")
    if kind not in IMPLEMENTED_KINDS:
        raise UnsupportedModelKind(f"unknown model kind {kind!r}")
    if len(dataset) == 0:
        raise SingleClassDataset("empty dataset")
    rng = rng or np.random.default_rng(0)
    threshold = float((hyperparams or {}).get("threshold", 0.5))
    hp = _resolve_hyperparams(kind, hyperparams)
    X, y = dataset.matrix()
    w = class_weights(y)
    columns = dataset.feature_columns

    if kind == "TREE":
        params = {"tree": _grow_tree(X, y, w, 0, int(hp["max_depth"]),
                                     int(hp["min_leaf"]), None, rng)}
    elif kind == "FOREST":
        d = X.shape[1]
        if hp["max_features"] in (None, "all"):
            max_features = None
        elif hp["max_features"] == "sqrt":
            max_features = max(1, int(np.sqrt(d)))
        else:
            max_features = int(hp["max_features"])
        trees = []
        for _ in range(int(hp["n_trees"])):
            if hp["bootstrap"]:
                idx = rng.integers(0, len(y), size=len(y))
            else:
                idx = np.arange(len(y))
            trees.append(_grow_tree(X[idx], y[idx], w[idx], 0, int(hp["max_depth"]),
                                    int(hp["min_leaf"]), max_features, rng))
        params = {"trees": trees}
    else:
        params = _fit_glm(X, y, w, hp)

    return PredictiveModel(
        kind=kind,
        columns=tuple(columns),
        fingerprint=schema_fingerprint(columns),
        hyperparams=hp,
        params=params,
        threshold=threshold,
        train_meta={"rows": len(dataset), "labels": dataset.label_counts()},
    )


def make_folds(n: int, n_folds: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Random partition into n_folds near-equal folds (sizes differ by <= 1)."""
    if n < n_folds:
        raise ValueError(f"insufficient rows for {n_folds}-fold cross validation: {n}")
    perm = rng.permutation(n)
    return [f for f in np.array_split(perm, n_folds)]


@dataclass
class CVResult:
    kind: str
    folds: list[EvalMetrics]
    hyperparams: dict

    def mean(self) -> dict:
        keys = ("accuracy", "precision", "recall", "error")
        return {k: float(np.mean([getattr(m, k) for m in self.folds])) for k in keys}

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "hyperparams": self.hyperparams,
            "folds": [m.as_dict() for m in self.folds],
            "mean": self.mean(),
        }


def cross_validate(dataset: Dataset, kind: str, hyperparams: Optional[dict] = None,
                   rng: Optional[np.random.Generator] = None,
                   n_folds: int = 10) -> CVResult:
    """k-fold cross validation: random split, train on k-1 folds, score the
    held-out fold, report per-fold and mean metrics."""
    rng = rng or np.random.default_rng(0)
    X, y = dataset.matrix()
    columns = dataset.feature_columns
    folds = make_folds(len(dataset), n_folds, rng)
    results = []
    for fold in folds:
        mask = np.ones(len(y), dtype=bool)
        mask[fold] = False
        sub = Dataset([dataset.rows[i] for i in np.nonzero(mask)[0]],
                      dataset.columns, dataset.provenance,
                      dataset.missing_indicators[mask] if dataset.missing_indicators is not None else None,
                      dataset.indicator_columns)
        model = train(sub, kind, hyperparams, rng)
        pred = model.predict_matrix(X[fold], columns)
        results.append(confusion(pred, y[fold]))
    return CVResult(kind.upper(), results, _resolve_hyperparams(kind.upper(), hyperparams))


def save_model(model: PredictiveModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json_dict(), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path: str) -> PredictiveModel:
    with open(path, "r", encoding="utf-8") as fh:
        return PredictiveModel.from_json_dict(json.load(fh))
