"""Feedforward ReLU network with a softmax output, trained by mini-batch SGD."""

import itertools
from dataclasses import dataclass, field

import numpy as np

LEARNING_RATES = (0.001, 0.01, 0.1)
BATCH_SIZES = (32, 128)
EPOCHS = (50, 100)
N_HIDDEN = 2


def hidden_width(M):
    return max(32, 2 * M)


def softmax(Z):
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class NNModel:
    """Layers ``y_l = g(W_l y_{l-1} + b_l)``; ReLU hidden layers, softmax output.

    Inputs are standardized with the stored ``shift`` / ``scale``.
    """

    weights: tuple
    biases: tuple
    shift: np.ndarray
    scale: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def p(self):
        return self.weights[0].shape[1]

    @property
    def M(self):
        return self.weights[-1].shape[0]

    def logits(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.p:
            raise ValueError(f"expected {self.p} features, got {X.shape[1]}")
        H = (X - self.shift) / self.scale
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            H = np.maximum(H @ W.T + b, 0.0)
        return H @ self.weights[-1].T + self.biases[-1]

    def proba(self, X):
        return softmax(self.logits(X))

    def predict(self, X):
        return np.argmax(self.logits(X), axis=1)


def init_params(sizes, rng):
    """He-scaled normal weights, zero biases."""
    Ws, bs = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        Ws.append(rng.standard_normal((n_out, n_in)) * np.sqrt(2.0 / n_in))
        bs.append(np.zeros(n_out))
    return Ws, bs


def loss_and_grads(Ws, bs, X, y):
    """Mean cross-entropy of one-hot labels ``y`` and its gradients."""
    acts = [X]
    H = X
    for W, b in zip(Ws[:-1], bs[:-1]):
        H = np.maximum(H @ W.T + b, 0.0)
        acts.append(H)
    P = softmax(H @ Ws[-1].T + bs[-1])
    n = X.shape[0]
    rows = np.arange(n)
    loss = -np.mean(np.log(np.maximum(P[rows, y], 1e-300)))
    D = P.copy()
    D[rows, y] -= 1.0
    D /= n
    gW = [None] * len(Ws)
    gb = [None] * len(bs)
    for layer in range(len(Ws) - 1, -1, -1):
        gW[layer] = D.T @ acts[layer]
        gb[layer] = D.sum(axis=0)
        if layer:
            D = (D @ Ws[layer]) * (acts[layer] > 0.0)
    return loss, gW, gb


def _standardize(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    return mu, np.where(sd > 0.0, sd, 1.0)


def _sgd(Xs, y, sizes, lr, batch, epochs_list, seed):
    """Train once up to max(epochs_list); snapshot at each listed epoch count."""
    rng = np.random.default_rng(seed)
    Ws, bs = init_params(sizes, rng)
    n = Xs.shape[0]
    snaps = {}
    trace = []
    for epoch in range(1, max(epochs_list) + 1):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch):
            sel = perm[start:start + batch]
            loss, gW, gb = loss_and_grads(Ws, bs, Xs[sel], y[sel])
            if not np.isfinite(loss):
                return snaps, trace, False
            total += loss * sel.size
            for k in range(len(Ws)):
                Ws[k] -= lr * gW[k]
                bs[k] -= lr * gb[k]
        trace.append(total / n)
        if not all(np.all(np.isfinite(W)) for W in Ws):
            return snaps, trace, False
        if epoch in epochs_list:
            snaps[epoch] = ([W.copy() for W in Ws], [b.copy() for b in bs])
    return snaps, trace, True


def train_nn(data, grid=None, hidden=None, seed=0):
    """Grid search over (learning rate, batch size, epochs) on validation accuracy.

    Runs that share learning rate and batch size share one training run and
    are read off at each epoch count. Ties keep the earlier grid point.
    """
    if data.N < 2:
        raise ValueError("network training needs at least two samples")
    Xtr, ytr = data.train
    Xva, yva = data.validation
    mu, sd = _standardize(Xtr)
    M = data.M
    if M == 1:
        W = np.zeros((1, data.p))
        return NNModel((W,), (np.zeros(1),), mu, sd,
                       {"val_accuracy": 1.0, "grid": [], "constant": True})
    width = hidden if hidden is not None else hidden_width(M)
    sizes = [data.p] + [width] * N_HIDDEN + [M]
    if grid is None:
        grid = list(itertools.product(LEARNING_RATES, BATCH_SIZES, EPOCHS))
    runs = {}
    for lr, bsz, ep in grid:
        runs.setdefault((lr, bsz), []).append(ep)
    Xs = (Xtr - mu) / sd
    best = None
    scores = []
    for (lr, bsz), eps in runs.items():
        with np.errstate(over="ignore", invalid="ignore"):
            snaps, trace, ok = _sgd(Xs, ytr, sizes, lr, bsz, sorted(eps), seed)
        for ep in sorted(eps):
            if ep not in snaps:
                scores.append({"lr": lr, "batch": bsz, "epochs": ep, "val_accuracy": None,
                               "discarded": "non-finite loss"})
                continue
            Ws, bs = snaps[ep]
            model = NNModel(tuple(Ws), tuple(bs), mu, sd)
            acc = float(np.mean(model.predict(Xva) == yva)) if yva.size else 1.0
            scores.append({"lr": lr, "batch": bsz, "epochs": ep, "val_accuracy": acc})
            if best is None or acc > best[0]:
                best = (acc, model, (lr, bsz, ep), trace[:ep])
    if best is None:
        raise RuntimeError("every network grid point diverged")
    acc, model, (lr, bsz, ep), trace = best
    info = {"val_accuracy": acc, "lr": lr, "batch": bsz, "epochs": ep, "hidden": width,
            "grid": scores, "loss_trace": trace}
    return NNModel(model.weights, model.biases, mu, sd, info)


def nn_to_dict(model):
    return {"weights": [W.tolist() for W in model.weights],
            "biases": [b.tolist() for b in model.biases],
            "shift": model.shift.tolist(), "scale": model.scale.tolist()}


def nn_from_dict(d, info=None):
    Ws = tuple(np.asarray(W, dtype=float) for W in d["weights"])
    bs = tuple(np.asarray(b, dtype=float) for b in d["biases"])
    return NNModel(Ws, bs, np.asarray(d["shift"], dtype=float), np.asarray(d["scale"], dtype=float),
                   info or {})
