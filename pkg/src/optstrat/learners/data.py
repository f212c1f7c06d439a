from dataclasses import dataclass

import numpy as np

VAL_FRACTION = 0.1


@dataclass(frozen=True, eq=False)
class Dataset:
    """Features ``X`` (N x p), labels ``y`` in 0..M-1 and a fixed train/validation split."""

    X: np.ndarray
    y: np.ndarray
    M: int
    train_idx: np.ndarray
    val_idx: np.ndarray

    @property
    def N(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def train(self):
        return self.X[self.train_idx], self.y[self.train_idx]

    @property
    def validation(self):
        return self.X[self.val_idx], self.y[self.val_idx]


def make_dataset(X, y, M=None, seed=0, val_fraction=VAL_FRACTION):
    """Wrap samples with a seeded random split (at least one validation point if N >= 2)."""
    X = np.ascontiguousarray(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be N x p with one label per row")
    if M is None:
        M = int(y.max()) + 1 if y.size else 1
    if y.size and (y.min() < 0 or y.max() >= M):
        raise ValueError("labels must lie in 0..M-1")
    N = X.shape[0]
    perm = np.random.default_rng(seed).permutation(N)
    n_val = int(round(val_fraction * N))
    if N >= 2:
        n_val = min(max(n_val, 1), N - 1)
    else:
        n_val = 0
    val_idx = np.sort(perm[:n_val])
    train_idx = np.sort(perm[n_val:])
    return Dataset(X, y, int(M), train_idx, val_idx)
