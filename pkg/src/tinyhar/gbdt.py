"""Multiclass gradient-boosted regression trees, flat-array layout.

Boosting is one-vs-rest on softmax gradients: each round fits one
regression tree per class to that class's negative gradient with greedy
variance-reduction splits. Trees live in flat node arrays with
forward-only child links so they serialize linearly and can be walked
iteratively with a tiny stack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimMismatch, InvalidArgument, SingleClass
from .features import MANIFEST_VERSION, DEFAULT_MA_WIDTH, FeatureMask, N_FEATURES

LEAF = -1


@dataclass
class TreeNode:
    """Internal node (feature/threshold/children) or leaf (value)."""

    feature: int  # LEAF for leaves
    threshold: float
    left: int
    right: int
    value: float

    @property
    def is_leaf(self) -> bool:
        return self.feature == LEAF


@dataclass
class Tree:
    nodes: List[TreeNode]

    def predict_one(self, fv: np.ndarray) -> float:
        i = 0
        node = self.nodes[0]
        while not node.is_leaf:
            i = node.left if fv[node.feature] < node.threshold else node.right
            node = self.nodes[i]
        return node.value

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.predict_one(x) for x in X])


@dataclass
class Forest:
    trees: List[Tree]  # round-major: rounds x n_classes
    n_classes: int
    shrinkage: float
    base_score: float
    feature_mask: FeatureMask
    class_names: Tuple[str, ...] = ()
    split_gains: List[Tuple[int, float]] = field(default_factory=list)
    manifest_version: int = MANIFEST_VERSION
    ma_width: int = DEFAULT_MA_WIDTH

    @property
    def n_rounds(self) -> int:
        return len(self.trees) // self.n_classes

    @property
    def n_inputs(self) -> int:
        return len(self.feature_mask)


@dataclass(frozen=True)
class GbdtConfig:
    n_rounds: int = 25
    max_depth: int = 4
    min_leaf: int = 5
    shrinkage: float = 0.3
    seed: int = 0


def _best_split(
    X: np.ndarray, g: np.ndarray, rows: np.ndarray, min_leaf: int
) -> Optional[Tuple[int, float, float]]:
    """(feature, threshold, gain) of the best variance-reduction split.

    Ties break toward the lower feature index; returns None when no split
    satisfies the min_leaf constraint or improves on the parent.
    """
    y = g[rows]
    n = len(y)
    if n < 2 * min_leaf:
        return None
    parent_sse = float(((y - y.mean()) ** 2).sum())
    best = None
    for f in range(X.shape[1]):
        v = X[rows, f]
        order = np.argsort(v, kind="stable")
        vs, ys = v[order], y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys**2)
        total, total_sq = csum[-1], csq[-1]
        k = np.arange(1, n)
        valid = (k >= min_leaf) & (k <= n - min_leaf) & (vs[1:] != vs[:-1])
        if not valid.any():
            continue
        left_sse = csq[:-1] - csum[:-1] ** 2 / k
        right_sse = (total_sq - csq[:-1]) - (total - csum[:-1]) ** 2 / (n - k)
        gain = parent_sse - (left_sse + right_sse)
        gain[~valid] = -np.inf
        j = int(np.argmax(gain))
        if gain[j] > 1e-12 and (best is None or gain[j] > best[2]):
            best = (f, float((vs[j] + vs[j + 1]) / 2), float(gain[j]))
    return best


def _fit_tree(
    X: np.ndarray,
    g: np.ndarray,
    max_depth: int,
    min_leaf: int,
    gains: List[Tuple[int, float]],
) -> Tree:
    """Greedy depth-first tree; children are appended after their parent."""
    nodes: List[TreeNode] = []

    def build(rows: np.ndarray, depth: int) -> int:
        idx = len(nodes)
        split = _best_split(X, g, rows, min_leaf) if depth < max_depth else None
        if split is None:
            nodes.append(TreeNode(LEAF, 0.0, 0, 0, float(g[rows].mean())))
            return idx
        f, thr, gain = split
        # SSE gain = per-sample variance reduction x node sample count
        gains.append((f, gain))
        nodes.append(TreeNode(f, thr, 0, 0, 0.0))
        go_left = X[rows, f] < thr
        nodes[idx].left = build(rows[go_left], depth + 1)
        nodes[idx].right = build(rows[~go_left], depth + 1)
        return idx

    build(np.arange(len(X)), 0)
    return Tree(nodes)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def gbdt_train(
    train: Tuple[np.ndarray, np.ndarray],
    val: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    hyper: GbdtConfig = GbdtConfig(),
    feature_mask: Optional[FeatureMask] = None,
    class_names: Tuple[str, ...] = (),
    n_classes: Optional[int] = None,
) -> Forest:
    """Boosted forest on softmax gradients; deterministic per config."""
    X, y = np.asarray(train[0], float), np.asarray(train[1])
    if hyper.max_depth < 1:
        raise InvalidArgument("max_depth must be >= 1")
    if len(np.unique(y)) < 2:
        raise SingleClass("training set needs at least two classes")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    if feature_mask is None:
        feature_mask = FeatureMask(tuple(range(X.shape[1])))

    Y = np.zeros((len(X), n_classes))
    Y[np.arange(len(X)), y] = 1.0
    shrink = float(np.float32(hyper.shrinkage))
    base = 0.0
    scores = np.full((len(X), n_classes), base)
    trees: List[Tree] = []
    gains: List[Tuple[int, float]] = []
    for _ in range(hyper.n_rounds):
        P = _softmax(scores)
        residual = Y - P
        for c in range(n_classes):
            tree = _fit_tree(X, residual[:, c], hyper.max_depth, hyper.min_leaf, gains)
            # deployment stores 32-bit floats; round now so serialized
            # trees predict identically to the in-memory forest
            for node in tree.nodes:
                node.threshold = float(np.float32(node.threshold))
                node.value = float(np.float32(node.value))
            trees.append(tree)
            if shrink != 0:
                scores[:, c] += shrink * tree.predict(X)
    return Forest(
        trees,
        n_classes,
        shrink,
        float(np.float32(base)),
        feature_mask,
        class_names,
        gains,
    )


def gbdt_scores(f: Forest, X: np.ndarray) -> np.ndarray:
    """Per-class scores for a batch of feature vectors."""
    X = np.atleast_2d(np.asarray(X, float))
    if X.shape[1] != f.n_inputs:
        raise DimMismatch(f"expected {f.n_inputs} inputs, got {X.shape[1]}")
    scores = np.full((len(X), f.n_classes), f.base_score)
    for i, tree in enumerate(f.trees):
        c = i % f.n_classes
        scores[:, c] += f.shrinkage * tree.predict(X)
    return scores


def gbdt_predict(f: Forest, fv) -> np.ndarray:
    """Class scores for one feature vector (iterative tree walks)."""
    fv = np.asarray(fv, float)
    if fv.ndim == 1:
        return gbdt_scores(f, fv[None, :])[0]
    return gbdt_scores(f, fv)


def feature_importance(f: Forest) -> np.ndarray:
    """Gain-based importance over the 78 canonical features, summing to 1.

    Each split contributes its variance reduction weighted by the node
    sample count; masked-out features score 0.
    """
    if not f.trees:
        raise InvalidArgument("empty forest")
    scores = np.zeros(N_FEATURES)
    kept = f.feature_mask.kept
    for local_idx, gain in f.split_gains:
        scores[kept[local_idx]] += gain
    total = scores.sum()
    return scores / total if total > 0 else scores
