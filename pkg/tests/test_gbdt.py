import numpy as np
import pytest

from oracles import recursive_tree_eval
from tinyhar.errors import DimMismatch, InvalidArgument, SingleClass
from tinyhar.features import N_FEATURES, FeatureMask
from tinyhar.gbdt import (
    LEAF,
    Forest,
    GbdtConfig,
    Tree,
    TreeNode,
    _best_split,
    _fit_tree,
    feature_importance,
    gbdt_predict,
    gbdt_scores,
    gbdt_train,
)


def blobs(n_per=50, n_classes=3, dim=4, seed=0, spread=5.0):
    rng = np.random.default_rng(seed)
    centers = rng.normal(0, spread, (n_classes, dim))
    X = np.concatenate(
        [rng.normal(centers[c], 0.6, (n_per, dim)) for c in range(n_classes)]
    )
    y = np.repeat(np.arange(n_classes), n_per)
    return X, y, centers


def nearest_centroid_accuracy(X, y, centers):
    """Independent oracle: classify by nearest blob center."""
    d = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return float(np.mean(np.argmin(d, axis=1) == y))


class TestBestSplit:
    def test_obvious_threshold(self):
        # One feature cleanly separates targets 0 and 10 at x = 0.5
        X = np.array([[0.0], [0.1], [0.2], [0.8], [0.9], [1.0]])
        g = np.array([0.0, 0.0, 0.0, 10.0, 10.0, 10.0])
        f, thr, gain = _best_split(X, g, np.arange(6), min_leaf=1)
        assert f == 0
        assert 0.2 < thr < 0.8
        # SSE gain equals the full parent SSE when both halves are pure
        assert np.isclose(gain, ((g - g.mean()) ** 2).sum())

    def test_midpoint_threshold(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        g = np.array([0.0, 0.0, 5.0, 5.0])
        f, thr, _ = _best_split(X, g, np.arange(4), min_leaf=1)
        assert thr == 1.5

    def test_min_leaf_blocks_split(self):
        X = np.array([[0.0], [1.0], [2.0]])
        g = np.array([0.0, 0.0, 9.0])
        assert _best_split(X, g, np.arange(3), min_leaf=2) is None

    def test_constant_target_no_split(self):
        X = np.random.default_rng(0).normal(size=(20, 3))
        g = np.full(20, 2.5)
        assert _best_split(X, g, np.arange(20), min_leaf=1) is None

    def test_constant_feature_no_split(self):
        X = np.ones((10, 1))
        g = np.arange(10.0)
        assert _best_split(X, g, np.arange(10), min_leaf=1) is None

    def test_tie_breaks_to_lower_feature(self):
        # Two identical features: the split must use feature 0
        col = np.array([0.0, 0.0, 1.0, 1.0])
        X = np.column_stack([col, col])
        g = np.array([0.0, 0.0, 4.0, 4.0])
        f, _, _ = _best_split(X, g, np.arange(4), min_leaf=1)
        assert f == 0


class TestFitTree:
    def test_leaf_values_are_means(self):
        X = np.array([[0.0], [0.1], [0.9], [1.0]])
        g = np.array([1.0, 3.0, 10.0, 14.0])
        tree = _fit_tree(X, g, max_depth=1, min_leaf=1, gains=[])
        root = tree.nodes[0]
        assert not root.is_leaf
        assert tree.nodes[root.left].value == 2.0
        assert tree.nodes[root.right].value == 12.0

    def test_depth_zero_single_leaf(self):
        X = np.arange(10.0)[:, None]
        g = np.arange(10.0)
        tree = _fit_tree(X, g, max_depth=0, min_leaf=1, gains=[])
        assert len(tree.nodes) == 1
        assert tree.nodes[0].is_leaf
        assert tree.nodes[0].value == g.mean()

    def test_children_forward_only(self):
        X, y, _ = blobs(40, 3, 4)
        g = (y == 0).astype(float) - 1 / 3
        tree = _fit_tree(X, g, max_depth=4, min_leaf=2, gains=[])
        for i, node in enumerate(tree.nodes):
            if not node.is_leaf:
                assert node.left > i and node.right > i

    def test_iterative_matches_recursive_oracle(self):
        X, y, _ = blobs(60, 3, 5, seed=2)
        g = (y == 1).astype(float) - 1 / 3
        tree = _fit_tree(X, g, max_depth=4, min_leaf=2, gains=[])
        for row in X[:25]:
            assert tree.predict_one(row) == recursive_tree_eval(tree.nodes, row)

    def test_depth_limit_respected(self):
        X, y, _ = blobs(60, 3, 4)
        g = (y == 0).astype(float)
        tree = _fit_tree(X, g, max_depth=2, min_leaf=1, gains=[])

        def depth(i):
            n = tree.nodes[i]
            return 0 if n.is_leaf else 1 + max(depth(n.left), depth(n.right))

        assert depth(0) <= 2


class TestTrain:
    def test_tree_count(self):
        X, y, _ = blobs(30, 3, 4)
        forest = gbdt_train((X, y), hyper=GbdtConfig(n_rounds=7, max_depth=3))
        assert len(forest.trees) == 7 * 3
        assert forest.n_rounds == 7

    def test_beats_and_approaches_centroid_oracle(self):
        X, y, centers = blobs(60, 4, 5, seed=1)
        forest = gbdt_train((X, y), hyper=GbdtConfig(n_rounds=20, max_depth=3))
        pred = np.argmax(gbdt_scores(forest, X), axis=1)
        acc = float(np.mean(pred == y))
        oracle = nearest_centroid_accuracy(X, y, centers)
        assert acc >= oracle - 0.02
        assert acc >= 0.95

    def test_training_accuracy_monotone_in_rounds(self):
        X, y, _ = blobs(50, 3, 4, seed=3, spread=2.0)
        accs = []
        for rounds in (1, 5, 15):
            f = gbdt_train((X, y), hyper=GbdtConfig(n_rounds=rounds, max_depth=3))
            accs.append(np.mean(np.argmax(gbdt_scores(f, X), axis=1) == y))
        assert accs[0] <= accs[1] + 1e-12 and accs[1] <= accs[2] + 1e-12

    def test_deterministic(self):
        X, y, _ = blobs(40)
        a = gbdt_train((X, y), hyper=GbdtConfig(n_rounds=5))
        b = gbdt_train((X, y), hyper=GbdtConfig(n_rounds=5))
        pa = gbdt_scores(a, X)
        pb = gbdt_scores(b, X)
        assert np.array_equal(pa, pb)

    def test_single_class_rejected(self):
        X = np.random.default_rng(0).normal(size=(10, 3))
        with pytest.raises(SingleClass):
            gbdt_train((X, np.zeros(10, dtype=int)))

    def test_bad_depth(self):
        X, y, _ = blobs(10)
        with pytest.raises(InvalidArgument):
            gbdt_train((X, y), hyper=GbdtConfig(max_depth=0))

    def test_thresholds_are_float32_exact(self):
        X, y, _ = blobs(30)
        forest = gbdt_train((X, y), hyper=GbdtConfig(n_rounds=3))
        for tree in forest.trees:
            for node in tree.nodes:
                assert node.threshold == float(np.float32(node.threshold))
                assert node.value == float(np.float32(node.value))


class TestPredict:
    def test_dim_mismatch(self, trained_forest):
        with pytest.raises(DimMismatch):
            gbdt_scores(trained_forest, np.ones((2, 5)))

    def test_single_matches_batch(self, trained_forest, small_split):
        _, (Xv, _), _ = small_split
        batch = gbdt_scores(trained_forest, Xv[:10])
        for i in range(10):
            assert np.array_equal(gbdt_predict(trained_forest, Xv[i]), batch[i])

    def test_strict_less_than_routing(self):
        # fv[f] exactly at the threshold goes right
        nodes = [
            TreeNode(0, 1.0, 1, 2, 0.0),
            TreeNode(LEAF, 0.0, 0, 0, -7.0),
            TreeNode(LEAF, 0.0, 0, 0, 7.0),
        ]
        tree = Tree(nodes)
        assert tree.predict_one(np.array([0.999])) == -7.0
        assert tree.predict_one(np.array([1.0])) == 7.0

    def test_fixture_validation_accuracy(self, trained_forest, small_split):
        _, (Xv, yv), _ = small_split
        pred = np.argmax(gbdt_scores(trained_forest, Xv), axis=1)
        assert np.mean(pred == yv) >= 0.85


class TestImportance:
    def test_sums_to_one_over_canonical_axis(self, trained_forest):
        imp = feature_importance(trained_forest)
        assert imp.shape == (N_FEATURES,)
        assert np.isclose(imp.sum(), 1.0)
        assert np.all(imp >= 0)

    def test_informative_feature_dominates(self):
        # Only feature 2 carries signal; it must take nearly all the gain.
        rng = np.random.default_rng(0)
        X = rng.normal(size=(200, 4))
        y = (X[:, 2] > 0).astype(int)
        forest = gbdt_train((X, y), hyper=GbdtConfig(n_rounds=5, max_depth=2))
        imp = feature_importance(forest)
        assert imp[2] > 0.9

    def test_mask_maps_to_canonical_indices(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(100, 2))
        y = (X[:, 1] > 0).astype(int)
        mask = FeatureMask((10, 40))
        forest = gbdt_train((X, y), feature_mask=mask, hyper=GbdtConfig(n_rounds=3))
        imp = feature_importance(forest)
        assert imp[40] > 0.9
        assert np.all(imp[[i for i in range(N_FEATURES) if i not in (10, 40)]] == 0)

    def test_empty_forest_rejected(self):
        f = Forest([], 2, 0.3, 0.0, FeatureMask((0,)))
        with pytest.raises(InvalidArgument):
            feature_importance(f)
