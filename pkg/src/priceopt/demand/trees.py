"""Variance-reduction regression trees, random forests, and squared-loss boosting."""
from __future__ import annotations

import numpy as np

from ..core import DomainError
from .artifact import ModelArtifact, check_matrix

LEAF = -1


class _Builder:
    def __init__(self, X, y, max_depth, min_samples_leaf, max_features, rng):
        self.X, self.y = X, y
        self.max_depth = np.inf if max_depth is None else max_depth
        self.min_leaf = min_samples_leaf
        self.max_features = max_features
        self.rng = rng
        self.feature, self.threshold, self.left, self.right = [], [], [], []
        self.value, self.n_samples, self.sse = [], [], []

    def _new_node(self, idx):
        y = self.y[idx]
        mean = float(np.mean(y))
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(mean)
        self.n_samples.append(len(idx))
        self.sse.append(float(np.sum((y - mean) ** 2)))
        return len(self.value) - 1

    def _best_split(self, idx, features):
        """Best (gain, feature, threshold) among ``features`` or None."""
        Xs = self.X[np.ix_(idx, features)]
        order = np.argsort(Xs, axis=0, kind="stable")
        xs = np.take_along_axis(Xs, order, axis=0)
        ys = self.y[idx][order]
        n = len(idx)
        csum = np.cumsum(ys, axis=0)
        total = csum[-1]
        n_left = np.arange(1, n)[:, None]
        n_right = n - n_left
        mean_l = csum[:-1] / n_left
        mean_r = (total - csum[:-1]) / n_right
        # SSE reduction of a split = n_l * n_r / n * (mean_l - mean_r)^2
        gain = n_left * n_right / n * (mean_l - mean_r) ** 2
        valid = xs[1:] > xs[:-1]
        if self.min_leaf > 1:
            valid &= (n_left >= self.min_leaf) & (n_right >= self.min_leaf)
        gain = np.where(valid, gain, -1.0)
        flat = int(np.argmax(gain.T))          # feature-major, first best wins
        j, k = divmod(flat, n - 1)
        if gain[k, j] <= 0:
            return None
        lo, hi = xs[k, j], xs[k + 1, j]
        thr = 0.5 * (lo + hi)
        if not lo <= thr < hi:
            thr = lo
        return gain[k, j], features[j], thr

    def build(self, idx, depth=0):
        node = self._new_node(idx)
        y = self.y[idx]
        if depth >= self.max_depth or len(idx) < 2 * self.min_leaf or np.ptp(y) == 0:
            return node
        p = self.X.shape[1]
        if self.max_features >= p:
            best = self._best_split(idx, np.arange(p))
        else:
            perm = self.rng.permutation(p)
            best = self._best_split(idx, np.sort(perm[:self.max_features]))
            if best is None:
                # keep searching the unsampled features rather than stopping early
                best = self._best_split(idx, np.sort(perm[self.max_features:]))
        if best is None:
            return node
        _, f, thr = best
        go_left = self.X[idx, f] <= thr
        self.feature[node] = int(f)
        self.threshold[node] = float(thr)
        self.left[node] = self.build(idx[go_left], depth + 1)
        self.right[node] = self.build(idx[~go_left], depth + 1)
        return node

    def arrays(self):
        return {
            "feature": np.array(self.feature, dtype=np.int64),
            "threshold": np.array(self.threshold, dtype=float),
            "left": np.array(self.left, dtype=np.int64),
            "right": np.array(self.right, dtype=np.int64),
            "value": np.array(self.value, dtype=float),
            "n_samples": np.array(self.n_samples, dtype=np.int64),
            "sse": np.array(self.sse, dtype=float),
        }


def build_tree(X, y, max_depth=None, min_samples_leaf=1, max_features=None, rng=None) -> dict:
    """Grow one regression tree; returns its node arrays (pre-order)."""
    p = X.shape[1]
    mf = p if max_features is None else max(1, min(int(max_features), p))
    b = _Builder(X, y, max_depth, min_samples_leaf, mf, rng or np.random.default_rng(0))
    b.build(np.arange(len(y)))
    return b.arrays()


def _subtree_stats(tree, active):
    """Leaf count and summed leaf SSE for each node's subtree."""
    feat, left, right, sse = tree["feature"], tree["left"], tree["right"], tree["sse"]
    n = len(feat)
    leaves = np.zeros(n, dtype=np.int64)
    risk = np.zeros(n)
    for i in range(n - 1, -1, -1):   # children always follow their parent
        if not active[i]:
            continue
        if feat[i] == LEAF:
            leaves[i], risk[i] = 1, sse[i]
        else:
            leaves[i] = leaves[left[i]] + leaves[right[i]]
            risk[i] = risk[left[i]] + risk[right[i]]
    return leaves, risk


def prune_tree(tree: dict, ccp_alpha: float) -> dict:
    """Minimal cost-complexity (weakest-link) pruning.

    Node risk is SSE divided by the root sample count, so ``ccp_alpha`` is in
    units of mean squared error per extra leaf.
    """
    if ccp_alpha <= 0:
        return tree
    tree = {k: v.copy() for k, v in tree.items()}
    n_root = tree["n_samples"][0]
    active = np.ones(len(tree["feature"]), dtype=bool)
    while tree["feature"][0] != LEAF:
        leaves, risk = _subtree_stats(tree, active)
        internal = np.flatnonzero(active & (tree["feature"] != LEAF))
        g = (tree["sse"][internal] - risk[internal]) / n_root / (leaves[internal] - 1)
        k = int(np.argmin(g))
        if g[k] > ccp_alpha:
            break
        node = internal[k]
        stack = [tree["left"][node], tree["right"][node]]
        while stack:
            c = stack.pop()
            active[c] = False
            if tree["feature"][c] != LEAF:
                stack.extend([tree["left"][c], tree["right"][c]])
        tree["feature"][node] = LEAF
        tree["left"][node] = tree["right"][node] = LEAF
    return _compact(tree, active)


def _compact(tree, active):
    keep = np.flatnonzero(active)
    remap = -np.ones(len(active), dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    out = {k: v[keep].copy() for k, v in tree.items()}
    for side in ("left", "right"):
        child = out[side]
        out[side] = np.where(child >= 0, remap[np.maximum(child, 0)], LEAF)
    return out


def predict_tree(tree: dict, X: np.ndarray) -> np.ndarray:
    feat, thr, left, right = tree["feature"], tree["threshold"], tree["left"], tree["right"]
    node = np.zeros(len(X), dtype=np.int64)
    rows = np.arange(len(X))
    while True:
        f = feat[node]
        inner = f != LEAF
        if not inner.any():
            break
        r, nd = rows[inner], node[inner]
        go_left = X[r, f[inner]] <= thr[nd]
        node[inner] = np.where(go_left, left[nd], right[nd])
    return tree["value"][node]


def _max_features(spec, p: int) -> int:
    if spec is None:
        return p
    if spec == "sqrt":
        return max(1, int(np.sqrt(p)))
    if isinstance(spec, float) and 0 < spec <= 1:
        return max(1, int(spec * p))
    return max(1, min(int(spec), p))


def fit_random_forest(X, y, n_trees: int = 100, max_depth: int | None = None, seed: int = 0,
                      max_features="sqrt", bootstrap: bool = True, ccp_alpha: float = 0.0,
                      min_samples_leaf: int = 1) -> ModelArtifact:
    """Bagged regression trees with per-node feature subsampling.

    Each tree is grown on a bootstrap sample, then post-pruned with
    cost-complexity parameter ``ccp_alpha``; predictions average the trees.
    """
    X, y = check_matrix(X, y)
    if n_trees < 1:
        raise DomainError("n_trees must be >= 1")
    n, p = X.shape
    mf = _max_features(max_features, p)
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        idx = rng.integers(0, n, n) if bootstrap else np.arange(n)
        tree = build_tree(X[idx], y[idx], max_depth, min_samples_leaf, mf, rng)
        trees.append(prune_tree(tree, ccp_alpha))
    return ModelArtifact(
        "random_forest", {"trees": trees},
        {"n_features": p, "n_trees": n_trees, "max_depth": max_depth, "seed": seed,
         "max_features": mf, "bootstrap": bootstrap, "ccp_alpha": ccp_alpha},
    )


def predict_forest(art: ModelArtifact, X: np.ndarray) -> np.ndarray:
    trees = art.parameters["trees"]
    return np.mean([predict_tree(t, X) for t in trees], axis=0)


def fit_gbt(X, y, n_rounds: int = 100, learning_rate: float = 0.1, max_depth: int = 3,
            min_samples_leaf: int = 1) -> ModelArtifact:
    """Stagewise squared-loss boosting: each tree fits the current residuals."""
    X, y = check_matrix(X, y)
    if n_rounds < 0:
        raise DomainError("n_rounds must be >= 0")
    if not 0 <= learning_rate <= 1:
        raise DomainError("learning_rate must lie in [0, 1]")
    init = float(np.mean(y))
    pred = np.full(len(y), init)
    trees, losses = [], [float(np.mean((y - pred) ** 2))]
    for _ in range(n_rounds):
        tree = build_tree(X, y - pred, max_depth, min_samples_leaf)
        pred = pred + learning_rate * predict_tree(tree, X)
        trees.append(tree)
        losses.append(float(np.mean((y - pred) ** 2)))
    return ModelArtifact(
        "gbt", {"init": init, "learning_rate": learning_rate, "trees": trees},
        {"n_features": X.shape[1], "n_rounds": n_rounds, "max_depth": max_depth,
         "train_loss": losses},
    )


def predict_gbt(art: ModelArtifact, X: np.ndarray) -> np.ndarray:
    params = art.parameters
    out = np.full(len(X), params["init"])
    for tree in params["trees"]:
        out += params["learning_rate"] * predict_tree(tree, X)
    return out
