"""Uniform prediction interface over trees and networks, plus model files."""

import json
from dataclasses import dataclass, field

import numpy as np

from .nn import NNModel, nn_from_dict, nn_to_dict, train_nn
from .tree import HYPERPLANE, PARALLEL, TreeModel, train_oct, tree_from_dict, tree_to_dict

LEARNERS = ("oct", "oct-h", "nn")
MODEL_FORMAT = "optstrat-model"


@dataclass(frozen=True, eq=False)
class TrainedPredictor:
    kind: str
    model: object
    M: int
    global_counts: np.ndarray
    hyperparams: dict = field(default_factory=dict)
    val_accuracy: float = float("nan")
    param_names: tuple = ()

    @property
    def p(self):
        return self.model.p

    def _global_order(self):
        labels = np.arange(self.M)
        return labels[np.lexsort((labels, -self.global_counts))]

    def predict_topk(self, theta, k=3):
        """``k`` distinct labels, most likely first (ties to the lower label)."""
        if not 1 <= k <= self.M:
            raise ValueError(f"k must lie in 1..{self.M}")
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.shape[0] != self.p:
            raise ValueError(f"expected {self.p} parameters, got {theta.shape[0]}")
        labels = np.arange(self.M)
        if isinstance(self.model, NNModel):
            prob = self.model.proba(theta[None, :])[0]
            return [int(v) for v in labels[np.lexsort((labels, -prob))][:k]]
        leaf = int(self.model.route(theta[None, :])[0])
        counts = self.model.counts[leaf]
        ranked = [int(v) for v in labels[np.lexsort((labels, -counts))] if counts[v] > 0]
        out = ranked[:k]
        if len(out) < k:
            seen = set(out)
            for v in self._global_order():
                if len(out) == k:
                    break
                if int(v) not in seen:
                    out.append(int(v))
        return out

    def predict(self, X):
        return self.model.predict(X)


def train(data, learner="oct", seed=0, restarts=None, grid=None, param_names=()):
    """Train a learner (``oct``, ``oct-h`` or ``nn``) with its default grid."""
    if learner not in LEARNERS:
        raise ValueError(f"unknown learner {learner!r}; choose from {', '.join(LEARNERS)}")
    Xtr, ytr = data.train
    counts = np.bincount(ytr, minlength=data.M).astype(np.int64)
    if learner == "nn":
        model = train_nn(data, grid=grid, seed=seed)
        hp = {k: model.info.get(k) for k in ("lr", "batch", "epochs", "hidden")}
    else:
        mode = PARALLEL if learner == "oct" else HYPERPLANE
        kw = {} if restarts is None else {"restarts": restarts}
        model = train_oct(data, grid=grid, mode=mode, seed=seed, **kw)
        hp = {"depth": model.max_depth, "min_bucket": model.min_bucket, "alpha": model.alpha,
              "mode": model.mode}
    return TrainedPredictor(learner, model, data.M, counts, hp,
                            float(model.info.get("val_accuracy", float("nan"))),
                            tuple(param_names))


def predictor_to_dict(pred):
    body = nn_to_dict(pred.model) if pred.kind == "nn" else tree_to_dict(pred.model)
    return {
        "format": MODEL_FORMAT, "version": 1, "kind": pred.kind, "M": pred.M,
        "global_counts": pred.global_counts.tolist(), "hyperparams": pred.hyperparams,
        "val_accuracy": pred.val_accuracy, "param_names": list(pred.param_names),
        "model": body,
    }


def predictor_from_dict(d):
    if d.get("format") != MODEL_FORMAT:
        raise ValueError("not a model file")
    if d["kind"] not in LEARNERS:
        raise ValueError(f"unknown model kind {d['kind']!r}")
    info = {"val_accuracy": d["val_accuracy"]}
    model = nn_from_dict(d["model"], info) if d["kind"] == "nn" else tree_from_dict(d["model"], info)
    return TrainedPredictor(d["kind"], model, int(d["M"]),
                            np.asarray(d["global_counts"], dtype=np.int64), dict(d["hyperparams"]),
                            float(d["val_accuracy"]), tuple(d["param_names"]))


def dumps_predictor(pred):
    return json.dumps(predictor_to_dict(pred), sort_keys=True)


def loads_predictor(text):
    return predictor_from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# rendering


def _fmt(v):
    return f"{v:.6g}"


def split_text(tree, t, names):
    """Split of node ``t`` in raw parameter units, e.g. ``u2 < 1.99``."""
    a = tree.A[t] / tree.scale
    b = tree.B[t] + float(np.sum(tree.A[t] * tree.shift / tree.scale))
    m = np.abs(a).max()
    a, b = a / m, b / m
    nz = np.flatnonzero(a)
    if nz.size == 1 and a[nz[0]] == 1.0:
        return f"{names[nz[0]]} < {_fmt(b)}"
    parts = []
    for j in nz:
        c = a[j]
        mag = _fmt(abs(c))
        if not parts:
            parts.append(("-" if c < 0 else "") + f"{mag} {names[j]}")
        else:
            parts.append(("- " if c < 0 else "+ ") + f"{mag} {names[j]}")
    return " ".join(parts) + f" < {_fmt(b)}"


def _names(tree, names):
    names = list(names) if names is not None else [f"theta{j}" for j in range(tree.p)]
    if len(names) != tree.p:
        raise ValueError(f"need {tree.p} parameter names, got {len(names)}")
    return names


def render_tree(tree, names=None):
    """Indented text: one line per node, true branch first."""
    if isinstance(tree, TrainedPredictor):
        names = names if names is not None else (tree.param_names or None)
        tree = tree.model
    if not isinstance(tree, TreeModel):
        raise TypeError("only tree models can be rendered")
    names = _names(tree, names)
    lines = []

    def walk(t, depth, prefix):
        pad = "  " * depth + prefix
        if tree.left[t] < 0:
            lines.append(f"{pad}strategy {int(tree.label[t])} (n={int(tree.counts[t].sum())})")
            return
        lines.append(f"{pad}{split_text(tree, t, names)}")
        walk(int(tree.left[t]), depth + 1, "true: ")
        walk(int(tree.right[t]), depth + 1, "false: ")

    walk(0, 0, "")
    return "\n".join(lines) + "\n"


def render_dot(tree, names=None):
    if isinstance(tree, TrainedPredictor):
        names = names if names is not None else (tree.param_names or None)
        tree = tree.model
    names = _names(tree, names)
    out = ["digraph tree {", "  node [fontname=\"Helvetica\"];"]
    for t in range(tree.n_nodes):
        if tree.left[t] < 0:
            text = f"strategy {int(tree.label[t])}\\nn={int(tree.counts[t].sum())}"
            out.append(f"  n{t} [shape=box, label=\"{text}\"];")
        else:
            out.append(f"  n{t} [shape=ellipse, label=\"{split_text(tree, t, names)}\"];")
    for t in range(tree.n_nodes):
        if tree.left[t] >= 0:
            out.append(f"  n{t} -> n{int(tree.left[t])} [label=\"true\"];")
            out.append(f"  n{t} -> n{int(tree.right[t])} [label=\"false\"];")
    out.append("}")
    return "\n".join(out) + "\n"
