"""Classification trees with axis-parallel or hyperplane splits.

Training minimizes

    L = (misclassified training points) / N + alpha * sum_t ||a_t||_1

over trees of bounded depth whose leaves hold at least ``min_bucket``
points. A greedy top-down tree is improved by local search: every node in
turn is offered the options of becoming a leaf, being replaced by one of its
child subtrees, or getting a re-optimized split, and a change is kept only if
the exact loss drops. Hyperplane weights are normalized to ``max|a_j| = 1``,
so ``||a_t||_1`` counts one per parallel split and grows with every extra
feature a hyperplane uses.

Features are min-max normalized to [0, 1] before training; the model stores
the shift/scale and routes raw parameters itself.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K

PARALLEL = "parallel"
HYPERPLANE = "hyperplane"

DEPTHS = (5, 10, 15)
MIN_BUCKETS = (1, 5, 10)
ALPHA = 0.01
RESTARTS = 10
_CD_SWEEPS = 3
_MAX_PASSES = 50


@dataclass(frozen=True, eq=False)
class TreeModel:
    """Flat binary tree; node 0 is the root, ``left[t] == -1`` marks a leaf.

    A point ``theta`` goes left at node ``t`` when
    ``A[t] @ ((theta - shift) / scale) < B[t]``.
    """

    A: np.ndarray
    B: np.ndarray
    left: np.ndarray
    right: np.ndarray
    label: np.ndarray
    counts: np.ndarray
    shift: np.ndarray
    scale: np.ndarray
    mode: str = PARALLEL
    max_depth: int = 5
    min_bucket: int = 1
    alpha: float = ALPHA
    info: dict = field(default_factory=dict)

    @property
    def p(self):
        return self.A.shape[1]

    @property
    def M(self):
        return self.counts.shape[1]

    @property
    def n_nodes(self):
        return self.left.shape[0]

    def is_leaf(self, t):
        return self.left[t] < 0

    def branch_nodes(self):
        return [t for t in range(self.n_nodes) if self.left[t] >= 0]

    def leaves(self):
        return [t for t in range(self.n_nodes) if self.left[t] < 0]

    def depth(self):
        best = 0
        stack = [(0, 0)]
        while stack:
            t, d = stack.pop()
            if self.left[t] < 0:
                best = max(best, d)
            else:
                stack.append((self.left[t], d + 1))
                stack.append((self.right[t], d + 1))
        return best

    def normalize(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.p:
            raise ValueError(f"expected {self.p} features, got {X.shape[1]}")
        return np.ascontiguousarray((X - self.shift) / self.scale)

    def route(self, X):
        return K.route(self.normalize(X), self.A, self.B, self.left, self.right)

    def predict(self, X):
        return self.label[self.route(X)]


# ---------------------------------------------------------------------------
# mutable training tree


class _Node:
    __slots__ = ("a", "b", "left", "right", "label")

    def __init__(self, label=0, a=None, b=0.0, left=None, right=None):
        self.a = a
        self.b = b
        self.left = left
        self.right = right
        self.label = label

    @property
    def leaf(self):
        return self.left is None


def _majority(y, M):
    if y.size == 0:
        return 0, 0
    c = np.bincount(y, minlength=M)
    lab = int(np.argmax(c))
    return lab, int(c[lab])


def _goes_left(node, Z, idx):
    return Z[idx] @ node.a < node.b


def _eval(node, Z, y, idx, M, alpha_n, relabel=True):
    """(cost in sample units, smallest leaf size) of a subtree on ``idx``."""
    if node.leaf:
        if relabel:
            _, top = _majority(y[idx], M)
            err = idx.size - top
        else:
            err = int(np.count_nonzero(y[idx] != node.label))
        return float(err), idx.size
    m = _goes_left(node, Z, idx)
    cl, sl = _eval(node.left, Z, y, idx[m], M, alpha_n, relabel)
    cr, sr = _eval(node.right, Z, y, idx[~m], M, alpha_n, relabel)
    return cl + cr + alpha_n * K.complexity(node.a), min(sl, sr)


def _relabel(node, Z, y, idx, M):
    if node.leaf:
        if idx.size:
            node.label = _majority(y[idx], M)[0]
        return
    m = _goes_left(node, Z, idx)
    _relabel(node.left, Z, y, idx[m], M)
    _relabel(node.right, Z, y, idx[~m], M)


def _point_errors(node, Z, y, idx):
    """0/1 error of each point routed through ``node`` with fixed labels."""
    out = np.empty(idx.size)
    if node.leaf:
        out[:] = y[idx] != node.label
        return out
    m = _goes_left(node, Z, idx)
    out[m] = _point_errors(node.left, Z, y, idx[m])
    out[~m] = _point_errors(node.right, Z, y, idx[~m])
    return out


def _complexity_sum(node):
    if node.leaf:
        return 0.0
    return K.complexity(node.a) + _complexity_sum(node.left) + _complexity_sum(node.right)


def _height(node):
    if node.leaf:
        return 0
    return 1 + max(_height(node.left), _height(node.right))


def _unit(p, j):
    a = np.zeros(p)
    a[j] = 1.0
    return a


def _greedy(Z, y, idx, M, depth_left, mb, features):
    lab, top = _majority(y[idx], M)
    node = _Node(lab)
    if depth_left == 0 or top == idx.size or idx.size < 2 * mb:
        return node
    err, gini, j, t = K.best_parallel_new(Z, y, idx, M, mb, features)
    if j < 0:
        return node
    leaf_err = idx.size - top
    leaf_gini = idx.size - float(np.sum(np.bincount(y[idx], minlength=M) ** 2)) / idx.size
    if err > leaf_err or (err == leaf_err and gini >= leaf_gini - 1e-9):
        return node
    node.a = _unit(Z.shape[1], j)
    node.b = t
    m = Z[idx, j] < t
    node.left = _greedy(Z, y, idx[m], M, depth_left - 1, mb, features)
    node.right = _greedy(Z, y, idx[~m], M, depth_left - 1, mb, features)
    return node


def _normalize_split(a, b):
    m = np.abs(a).max()
    if m <= 0.0:
        return a, b
    return a / m, b / m


def _refine_hyperplane(Z, idx, a, b, costL, costR, mb, alpha_n, rng, sweeps=_CD_SWEEPS):
    """Coordinate descent on the split weights with exact threshold rescans."""
    Zs = np.ascontiguousarray(Z[idx])
    a = a.copy()
    proj = Zs @ a
    c, t = K.best_threshold(proj, costL, costR, mb)
    if not np.isfinite(t):
        return np.inf, a, b
    b = t
    best = c + alpha_n * K.complexity(a)
    p = a.size
    for _ in range(sweeps):
        improved = False
        for j in rng.permutation(p):
            cost, w = K.coordinate_step(Zs, a, b, j, costL, costR, mb, alpha_n)
            if not np.isfinite(w) or cost >= best - 1e-9:
                continue
            trial = a.copy()
            trial[j] = w
            trial, tb = _normalize_split(trial, b)
            proj = Zs @ trial
            c2, t2 = K.best_threshold(proj, costL, costR, mb)
            if not np.isfinite(t2):
                continue
            total = c2 + alpha_n * K.complexity(trial)
            if total < best - 1e-9:
                best, a, b = total, trial, t2
                improved = True
        if not improved:
            break
    return best, a, b


class _Trainer:
    def __init__(self, Z, y, M, mode, max_depth, mb, alpha, rng, features):
        self.Z = Z
        self.y = y
        self.M = M
        self.mode = mode
        self.max_depth = max_depth
        self.mb = mb
        self.alpha_n = alpha * Z.shape[0]
        self.rng = rng
        self.features = features
        self.all_features = np.arange(Z.shape[1], dtype=np.int64)

    def loss(self, root, idx):
        c, _ = _eval(root, self.Z, self.y, idx, self.M, self.alpha_n)
        return c / self.Z.shape[0]

    def _nodes_with_points(self, root, idx):
        out = []
        stack = [(root, None, 0, idx, 0)]
        while stack:
            node, parent, side, pts, depth = stack.pop()
            out.append((node, parent, side, pts, depth))
            if not node.leaf:
                m = _goes_left(node, self.Z, pts)
                stack.append((node.right, node, 1, pts[~m], depth + 1))
                stack.append((node.left, node, 0, pts[m], depth + 1))
        return out

    def _split_candidates(self, node, idx, depth):
        """Re-optimized split(s) at ``node``; yields (children, a, b)."""
        Z, y, M, mb = self.Z, self.y, self.M, self.mb
        p = Z.shape[1]
        if node.leaf:
            if depth >= self.max_depth or idx.size < 2 * mb:
                return
            err, _, j, t = K.best_parallel_new(Z, y, idx, M, mb, self.all_features)
            if j < 0:
                return
            a = _unit(p, j)
            m = Z[idx, j] < t
            left = _Node(_majority(y[idx[m]], M)[0])
            right = _Node(_majority(y[idx[~m]], M)[0])
            yield left, right, a, t
            if self.mode == HYPERPLANE:
                costL = (y[idx] != left.label).astype(float)
                costR = (y[idx] != right.label).astype(float)
                _, ah, bh = _refine_hyperplane(Z, idx, a, t, costL, costR, mb, self.alpha_n, self.rng)
                if np.isfinite(bh):
                    yield _Node(left.label), _Node(right.label), ah, bh
            return
        costL = _point_errors(node.left, Z, y, idx)
        costR = _point_errors(node.right, Z, y, idx)
        _, j, t = K.best_parallel_fixed(Z, idx, costL, costR, mb, self.all_features)
        if j >= 0:
            yield node.left, node.right, _unit(p, j), t
        if self.mode == HYPERPLANE:
            starts = [(node.a, node.b)]
            if j >= 0:
                starts.append((_unit(p, j), t))
            for a0, b0 in starts:
                _, ah, bh = _refine_hyperplane(Z, idx, a0, b0, costL, costR, mb, self.alpha_n, self.rng)
                if np.isfinite(bh):
                    yield node.left, node.right, ah, bh

    def _improve_node(self, node, idx, depth):
        """Best replacement subtree for ``node`` or None."""
        Z, y, M, mb, an = self.Z, self.y, self.M, self.mb, self.alpha_n
        current, _ = _eval(node, Z, y, idx, M, an)
        best_cost = current - 1e-9
        best = None
        if not node.leaf:
            lab, top = _majority(y[idx], M)
            if idx.size - top < best_cost and idx.size >= mb:
                best_cost = idx.size - top
                best = _Node(lab)
            for child in (node.left, node.right):
                c, smallest = _eval(child, Z, y, idx, M, an)
                if c < best_cost and smallest >= mb:
                    best_cost = c
                    best = child
        room = self.max_depth - depth
        for left, right, a, b in self._split_candidates(node, idx, depth):
            cand = _Node(node.label, a, b, left, right)
            if _height(cand) > room:
                continue
            c, smallest = _eval(cand, Z, y, idx, M, an)
            if c < best_cost and smallest >= mb:
                best_cost = c
                best = cand
        return best

    def local_search(self, root, idx):
        trace = [self.loss(root, idx)]
        for _ in range(_MAX_PASSES):
            improved = False
            entries = self._nodes_with_points(root, idx)
            order = self.rng.permutation(len(entries))
            gone = set()
            for k in order:
                node, parent, side, pts, depth = entries[k]
                if id(node) in gone:
                    continue
                # points may have moved if an ancestor changed; recompute them
                path = self._locate(root, node)
                if path is None:
                    continue
                parent, side, pts, depth = path
                repl = self._improve_node(node, pts, depth)
                if repl is None:
                    continue
                _relabel(repl, self.Z, self.y, pts, self.M)
                for sub, *_ in self._nodes_with_points(node, pts):
                    gone.add(id(sub))
                if parent is None:
                    root = repl
                elif side == 0:
                    parent.left = repl
                else:
                    parent.right = repl
                _relabel(root, self.Z, self.y, idx, self.M)
                trace.append(self.loss(root, idx))
                improved = True
            if not improved:
                break
        return root, trace

    def _locate(self, root, target):
        stack = [(root, None, 0, self._root_idx, 0)]
        while stack:
            node, parent, side, pts, depth = stack.pop()
            if node is target:
                return parent, side, pts, depth
            if not node.leaf:
                m = _goes_left(node, self.Z, pts)
                stack.append((node.left, node, 0, pts[m], depth + 1))
                stack.append((node.right, node, 1, pts[~m], depth + 1))
        return None

    def fit(self, idx):
        self._root_idx = idx
        root = _greedy(self.Z, self.y, idx, self.M, self.max_depth, self.mb, self.features)
        return self.local_search(root, idx)


def _flatten(root, Z, y, idx, M, p):
    nodes = []
    pts = []
    queue = [(root, idx)]
    while queue:
        node, ii = queue.pop(0)
        nodes.append(node)
        pts.append(ii)
        if not node.leaf:
            m = _goes_left(node, Z, ii)
            queue.append((node.left, ii[m]))
            queue.append((node.right, ii[~m]))
    pos = {id(n): k for k, n in enumerate(nodes)}
    n = len(nodes)
    A = np.zeros((n, p))
    B = np.zeros(n)
    left = np.full(n, -1, dtype=np.int64)
    right = np.full(n, -1, dtype=np.int64)
    label = np.zeros(n, dtype=np.int64)
    counts = np.zeros((n, M), dtype=np.int64)
    for k, node in enumerate(nodes):
        counts[k] = np.bincount(y[pts[k]], minlength=M)
        label[k] = node.label
        if not node.leaf:
            A[k] = node.a
            B[k] = node.b
            left[k] = pos[id(node.left)]
            right[k] = pos[id(node.right)]
    return A, B, left, right, label, counts


def feature_scaling(X):
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    span = np.where(span > 0.0, span, 1.0)
    return lo, span


def fit_tree(X, y, M, mode=PARALLEL, max_depth=5, min_bucket=1, alpha=ALPHA, restarts=RESTARTS,
             seed=0, shift=None, scale=None):
    """Train one tree (fixed hyperparameters), best of ``restarts`` local searches."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] < 1:
        raise ValueError("need at least one training point")
    if shift is None:
        shift, scale = feature_scaling(X)
    Z = np.ascontiguousarray((X - shift) / scale)
    p = Z.shape[1]
    idx = np.arange(Z.shape[0])
    rng = np.random.default_rng(seed)
    best = None
    for r in range(max(1, restarts)):
        if r == 0 or p == 1:
            feats = np.arange(p, dtype=np.int64)
        else:
            size = int(rng.integers(1, p + 1))
            feats = np.sort(rng.choice(p, size=size, replace=False)).astype(np.int64)
        trainer = _Trainer(Z, y, M, mode, max_depth, min_bucket, alpha, rng, feats)
        root, trace = trainer.fit(idx)
        loss = trace[-1]
        if best is None or loss < best[0] - 1e-12:
            best = (loss, root, trace, r)
    loss, root, trace, r = best
    A, B, left, right, label, counts = _flatten(root, Z, y, idx, M, p)
    return TreeModel(A, B, left, right, label, counts, np.asarray(shift, dtype=float),
                     np.asarray(scale, dtype=float), mode, max_depth, min_bucket, alpha,
                     info={"train_loss": loss, "loss_trace": trace, "best_restart": r})


def oct_loss(tree, X, y, alpha=None):
    """Normalized misclassification plus ``alpha * sum ||a_t||_1``."""
    alpha = tree.alpha if alpha is None else alpha
    y = np.asarray(y, dtype=np.int64)
    leaves = tree.route(X)
    err = 0
    for t in np.unique(leaves):
        lab = y[leaves == t]
        err += lab.size - np.bincount(lab, minlength=tree.M).max()
    pen = sum(np.abs(tree.A[t]).sum() for t in tree.branch_nodes())
    return err / max(1, y.size) + alpha * pen


def train_oct(data, grid=None, mode=PARALLEL, restarts=RESTARTS, alpha=ALPHA, seed=0):
    """Grid search over (depth, min_bucket); best validation accuracy wins.

    Ties prefer the smaller depth, then the smaller min_bucket.
    """
    if data.N < 2:
        raise ValueError("tree training needs at least two samples")
    grid = list(grid) if grid is not None else list(itertools.product(DEPTHS, MIN_BUCKETS))
    grid.sort()
    Xtr, ytr = data.train
    Xva, yva = data.validation
    shift, scale = feature_scaling(Xtr)
    best = None
    scores = []
    for depth, mb in grid:
        tree = fit_tree(Xtr, ytr, data.M, mode, depth, mb, alpha, restarts, seed, shift, scale)
        acc = float(np.mean(tree.predict(Xva) == yva)) if yva.size else 1.0
        scores.append({"depth": depth, "min_bucket": mb, "val_accuracy": acc,
                       "train_loss": tree.info["train_loss"]})
        if best is None or acc > best[0]:
            best = (acc, tree)
    acc, tree = best
    info = dict(tree.info)
    info.update({"val_accuracy": acc, "grid": scores})
    return TreeModel(tree.A, tree.B, tree.left, tree.right, tree.label, tree.counts, tree.shift,
                     tree.scale, tree.mode, tree.max_depth, tree.min_bucket, tree.alpha, info)


def tree_to_dict(tree):
    return {
        "A": tree.A.tolist(), "B": tree.B.tolist(), "left": tree.left.tolist(),
        "right": tree.right.tolist(), "label": tree.label.tolist(), "counts": tree.counts.tolist(),
        "shift": tree.shift.tolist(), "scale": tree.scale.tolist(), "mode": tree.mode,
        "max_depth": tree.max_depth, "min_bucket": tree.min_bucket, "alpha": tree.alpha,
    }


def tree_from_dict(d, info=None):
    M = len(d["counts"][0]) if d["counts"] else 1
    p = len(d["shift"])
    return TreeModel(
        np.asarray(d["A"], dtype=float).reshape(-1, p), np.asarray(d["B"], dtype=float),
        np.asarray(d["left"], dtype=np.int64), np.asarray(d["right"], dtype=np.int64),
        np.asarray(d["label"], dtype=np.int64),
        np.asarray(d["counts"], dtype=np.int64).reshape(-1, M),
        np.asarray(d["shift"], dtype=float), np.asarray(d["scale"], dtype=float),
        d["mode"], int(d["max_depth"]), int(d["min_bucket"]), float(d["alpha"]), info or {},
    )
