"""Gradient boosted decision trees for binary contact detection.

Plain numpy implementation of boosted regression trees on the logistic
loss. Splits maximize variance reduction of the current residuals y - p;
leaf values take a damped Newton step. Models serialize to JSON with
shortest round-trip floats, so save -> load is bit-exact.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_TAG = "gbdt-json-v1"
_PROBA_CLAMP = 1e-7


@dataclass
class GbdtParams:
    n_trees: int = 300
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 5
    subsample: float = 1.0
    l2_damping: float = 1.0
    # None, "balanced", or an explicit {label: weight} mapping.
    class_weight: dict[int, float] | str | None = None

    def __post_init__(self) -> None:
        if self.n_trees < 0:
            raise ValueError(f"n_trees must be >= 0, got {self.n_trees}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError(f"subsample must be in (0, 1], got {self.subsample}")
        if self.min_samples_leaf < 1:
            raise ValueError(
                f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}"
            )
        if self.l2_damping < 0:
            raise ValueError(f"l2_damping must be >= 0, got {self.l2_damping}")


@dataclass
class TreeNode:
    """Internal node (feature >= 0, x <= threshold goes left) or leaf."""

    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass
class GbdtModel:
    base_score: float
    trees: list[TreeNode]
    params: GbdtParams
    n_features: int
    loss_curve: list[float] = field(default_factory=list)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def log_loss(y: np.ndarray, p: np.ndarray) -> float:
    """Mean binary cross entropy; probabilities are clamped before the log."""
    y = np.asarray(y, dtype=float)
    p = np.clip(np.asarray(p, dtype=float), _PROBA_CLAMP, 1.0 - _PROBA_CLAMP)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def _sample_weights(y: np.ndarray, spec: dict[int, float] | str | None) -> np.ndarray:
    if spec is None:
        return np.ones_like(y, dtype=float)
    if spec == "balanced":
        n = len(y)
        counts = {c: int(np.sum(y == c)) for c in (0, 1)}
        return np.array([n / (2.0 * counts[int(v)]) for v in y])
    if isinstance(spec, dict):
        return np.array([float(spec[int(v)]) for v in y])
    raise ValueError(f"unsupported class_weight: {spec!r}")


def _best_split(
    X: np.ndarray,
    g: np.ndarray,
    w: np.ndarray | None,
    sr: np.ndarray,
    min_leaf: int,
) -> tuple[float, int, float]:
    """Scan all features for the max variance-reduction split over a node.

    sr lists the node's row ids, column f ascending in feature f.  Candidates
    are midpoints between consecutive distinct values; ties keep the first
    (lowest feature index, then lowest threshold).
    """
    n = len(sr)
    vals = X[sr, np.arange(sr.shape[1])]
    cg = np.cumsum(g[sr], axis=0)
    gl, gt = cg[:-1], cg[-1]
    n_left = np.arange(1, n)
    if w is None:
        # unit weights: cumsum of ones is exactly the running count
        wl = n_left.astype(float)[:, None]
        wt = float(n)
    else:
        cw = np.cumsum(w[sr], axis=0)
        wl, wt = cw[:-1], cw[-1]
    valid = (vals[:-1] < vals[1:]) & (
        (n_left >= min_leaf) & (n - n_left >= min_leaf)
    )[:, None]
    if not valid.any():
        return 0.0, -1, 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        gain = gl**2 / wl + (gt - gl) ** 2 / (wt - wl) - gt**2 / wt
    gain = np.where(valid, gain, -np.inf)
    flat = int(np.argmax(gain.T))
    f, i = divmod(flat, n - 1)
    if not gain[i, f] > 0.0:
        return 0.0, -1, 0.0
    return float(gain[i, f]), f, float((vals[i, f] + vals[i + 1, f]) / 2.0)


def _partition_sorted(
    sr: np.ndarray, member: np.ndarray, n_keep: int
) -> np.ndarray:
    """Keep the n_keep rows of sr flagged in member, per-column order intact."""
    keep = member[sr]
    return sr.T[keep.T].reshape(sr.shape[1], n_keep).T


def _grow_tree(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    w: np.ndarray | None,
    rows: np.ndarray,
    sr: np.ndarray,
    depth: int,
    params: GbdtParams,
) -> TreeNode:
    def leaf() -> TreeNode:
        value = g[rows].sum() / (h[rows].sum() + params.l2_damping)
        return TreeNode(value=float(value))

    if depth >= params.max_depth or len(rows) < 2 * params.min_samples_leaf:
        return leaf()
    gain, feature, thr = _best_split(X, g, w, sr, params.min_samples_leaf)
    if feature < 0 or gain <= 0.0:
        return leaf()
    go_left = X[rows, feature] <= thr
    n_left = int(go_left.sum())
    in_left = np.zeros(len(X), dtype=bool)
    in_left[rows[go_left]] = True
    return TreeNode(
        feature=feature,
        threshold=thr,
        left=_grow_tree(
            X, g, h, w, rows[go_left],
            _partition_sorted(sr, in_left, n_left),
            depth + 1, params,
        ),
        right=_grow_tree(
            X, g, h, w, rows[~go_left],
            _partition_sorted(sr, ~in_left, len(rows) - n_left),
            depth + 1, params,
        ),
    )


def _tree_predict(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X))
    stack = [(node, np.arange(len(X)))]
    while stack:
        nd, rows = stack.pop()
        if nd.is_leaf:
            out[rows] = nd.value
        else:
            m = X[rows, nd.feature] <= nd.threshold
            stack.append((nd.left, rows[m]))
            stack.append((nd.right, rows[~m]))
    return out


def fit_gbdt(
    samples: "list",
    params: GbdtParams | None = None,
    seed: int = 0,
) -> GbdtModel:
    """Fit boosted trees on a list of detection samples."""
    if not samples:
        raise ValueError("empty training set")
    X = np.stack([s.x for s in samples])
    y = np.array([s.y for s in samples], dtype=np.int64)
    return fit_gbdt_arrays(X, y, params, seed)


def fit_gbdt_arrays(
    X: np.ndarray,
    y: np.ndarray,
    params: GbdtParams | None = None,
    seed: int = 0,
) -> GbdtModel:
    """Fit boosted trees on binary labels.

    With a single class present the model is prior-only: the clamped base
    log-odds and no trees.
    """
    params = params or GbdtParams()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    if y.shape != (len(X),):
        raise ValueError(f"y shape {y.shape} does not match X rows {len(X)}")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    y = y.astype(float)

    w = _sample_weights(y, params.class_weight)
    rate = float(np.sum(w * y) / np.sum(w))
    rate = min(max(rate, _PROBA_CLAMP), 1.0 - _PROBA_CLAMP)
    base = float(np.log(rate / (1.0 - rate)))
    model = GbdtModel(
        base_score=base, trees=[], params=params, n_features=X.shape[1]
    )
    if len(np.unique(y)) < 2:
        return model

    order = np.argsort(X, axis=0, kind="stable")
    rng = np.random.default_rng(seed)
    scores = np.full(len(X), base)
    n_sub = int(round(params.subsample * len(X)))
    w_split = None if np.all(w == 1.0) else w
    for _ in range(params.n_trees):
        p = _sigmoid(scores)
        g = w * (y - p)
        h = w * p * (1.0 - p)
        if n_sub < len(X):
            rows = np.sort(rng.choice(len(X), size=n_sub, replace=False))
            in_sub = np.zeros(len(X), dtype=bool)
            in_sub[rows] = True
            sr = _partition_sorted(order, in_sub, n_sub)
        else:
            rows = np.arange(len(X))
            sr = order
        tree = _grow_tree(X, g, h, w_split, rows, sr, 0, params)
        scores += params.learning_rate * _tree_predict(tree, X)
        model.trees.append(tree)
        model.loss_curve.append(log_loss(y, _sigmoid(scores)))
    return model


def predict_margin(model: GbdtModel, X: np.ndarray) -> np.ndarray | float:
    """Raw additive score (log-odds). 1-D input means one sample."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(
            f"expected {model.n_features} features, got shape {X.shape}"
        )
    scores = np.full(len(X), model.base_score)
    for tree in model.trees:
        scores += model.params.learning_rate * _tree_predict(tree, X)
    return float(scores[0]) if single else scores


def predict_proba(model: GbdtModel, X: np.ndarray) -> np.ndarray | float:
    margin = predict_margin(model, X)
    if isinstance(margin, float):
        return float(_sigmoid(np.array([margin]))[0])
    return _sigmoid(margin)


def classify(
    model: GbdtModel, X: np.ndarray, threshold: float = 0.5
) -> np.ndarray | int:
    """Hard labels: probability >= threshold maps to 1."""
    proba = predict_proba(model, X)
    if isinstance(proba, float):
        return int(proba >= threshold)
    return (proba >= threshold).astype(np.int64)


def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"value": node.value}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(d: dict) -> TreeNode:
    if "value" in d:
        return TreeNode(value=float(d["value"]))
    return TreeNode(
        feature=int(d["feature"]),
        threshold=float(d["threshold"]),
        left=_node_from_dict(d["left"]),
        right=_node_from_dict(d["right"]),
    )


def save_gbdt(model: GbdtModel, path: str | Path) -> None:
    """Serialize to JSON. Floats use repr, so values survive bit-exactly."""
    p = model.params
    class_weight = p.class_weight
    if isinstance(class_weight, dict):
        class_weight = {str(k): v for k, v in class_weight.items()}
    doc = {
        "format": FORMAT_TAG,
        "n_features": model.n_features,
        "base_score": model.base_score,
        "params": {
            "n_trees": p.n_trees,
            "max_depth": p.max_depth,
            "learning_rate": p.learning_rate,
            "min_samples_leaf": p.min_samples_leaf,
            "subsample": p.subsample,
            "l2_damping": p.l2_damping,
            "class_weight": class_weight,
        },
        "loss_curve": model.loss_curve,
        "trees": [_node_to_dict(t) for t in model.trees],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_gbdt(path: str | Path) -> GbdtModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != FORMAT_TAG:
        raise ValueError(f"{path}: not a {FORMAT_TAG} file")
    raw = dict(doc["params"])
    if isinstance(raw.get("class_weight"), dict):
        raw["class_weight"] = {int(k): v for k, v in raw["class_weight"].items()}
    return GbdtModel(
        base_score=float(doc["base_score"]),
        trees=[_node_from_dict(t) for t in doc["trees"]],
        params=GbdtParams(**raw),
        n_features=int(doc["n_features"]),
        loss_curve=[float(v) for v in doc.get("loss_curve", [])],
    )
