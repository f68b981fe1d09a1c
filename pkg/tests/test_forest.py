import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from codeauthor.errors import ConfigurationError, FormatError
from codeauthor.forest import DecisionTree, ForestConfig, RandomForest, predict_label, predict_proba, train_forest
from codeauthor.representation import CorpusMatrix, SparseFeatureVector

from oracles import OracleCart


def corpus(X, y):
    return CorpusMatrix(sp.csr_matrix(np.asarray(X, dtype=np.float64)), y)


def sparse_random(rng, n, F, C):
    X = rng.integers(0, 4, size=(n, F)) * (rng.random((n, F)) < 0.5) / 4.0
    y = rng.integers(0, C, size=n)
    y[:C] = np.arange(C)
    return X, y


def leaf(hist):
    return DecisionTree([-1], [0.0], [-1], [-1], np.array([hist]))


class TestTraining:
    def test_one_feature_separable(self):
        X = np.zeros((20, 5))
        y = np.array([0, 1] * 10)
        X[y == 1, 3] = 0.5
        forest = train_forest(corpus(X, y), ForestConfig(n_trees=10))
        assert np.array_equal(forest.predict(X), y)

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        X, y = sparse_random(rng, 60, 12, 3)
        held = rng.random((20, 12))
        a = train_forest(corpus(X, y), ForestConfig(n_trees=15, seed=4))
        b = train_forest(corpus(X, y), ForestConfig(n_trees=15, seed=4))
        assert np.array_equal(a.predict_proba(held), b.predict_proba(held))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_single_tree_matches_exhaustive_cart(self, seed):
        rng = np.random.default_rng(seed)
        X, y = sparse_random(rng, 30, 4, int(rng.integers(2, 4)))
        config = ForestConfig(n_trees=1, bootstrap=False, features_per_split="all", seed=seed)
        forest = train_forest(corpus(X, y), config)
        oracle = OracleCart(X, y, int(y.max()) + 1)
        probe = np.vstack([X, rng.integers(0, 4, size=(20, 4)) / 4.0 + rng.choice([0, 0.1], size=(20, 4))])
        want = np.array([[float(p) for p in oracle.predict_proba(x)] for x in probe])
        np.testing.assert_allclose(forest.predict_proba(probe), want, rtol=0, atol=1e-12)

    def test_identical_vectors_give_single_leaves(self):
        X = np.ones((6, 3))
        with pytest.warns(UserWarning, match="identical"):
            forest = train_forest(corpus(X, [0, 1, 0, 1, 0, 1]), ForestConfig(n_trees=4))
        assert all(t.n_nodes == 1 for t in forest.trees)

    def test_requires_two_classes(self):
        with pytest.raises(ValueError):
            train_forest(corpus(np.eye(3), [0, 0, 0]))

    def test_labels_must_be_dense(self):
        with pytest.raises(ValueError):
            train_forest(corpus(np.eye(3), [0, 2, 2]))

    def test_max_depth(self):
        rng = np.random.default_rng(1)
        X, y = sparse_random(rng, 80, 10, 4)
        forest = train_forest(corpus(X, y), ForestConfig(n_trees=5, max_depth=2))
        assert max(t.depth() for t in forest.trees) <= 2

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            ForestConfig(n_trees=0)

    def test_out_of_bag_samples_exist(self):
        rng = np.random.default_rng(2)
        X, y = sparse_random(rng, 40, 6, 2)
        forest = train_forest(corpus(X, y), ForestConfig(n_trees=50))
        assert np.all((forest.in_bag == 0).any(axis=1))
        assert np.all(forest.in_bag.sum(axis=1) == 40)


class TestPrediction:
    def test_single_leaf_histogram(self):
        forest = RandomForest([leaf([3, 1])] * 3, ForestConfig(n_trees=3), 2, 4)
        np.testing.assert_allclose(predict_proba(forest, np.zeros(4)), [0.75, 0.25])
        assert predict_label(forest, np.zeros(4)) == 0

    def test_tie_goes_to_lowest_id(self):
        forest = RandomForest([leaf([1, 1])], ForestConfig(n_trees=1), 2, 4)
        assert predict_label(forest, np.zeros(4)) == 0

    def test_per_tree_average(self):
        rng = np.random.default_rng(5)
        X, y = sparse_random(rng, 50, 8, 3)
        forest = train_forest(corpus(X, y), ForestConfig(n_trees=5, seed=1))
        inputs = rng.random((10, 8))
        by_hand = np.zeros((10, 3))
        for tree in forest.trees:
            for i, x in enumerate(inputs):
                node = 0
                while tree.feature[node] >= 0:
                    node = tree.left[node] if x[tree.feature[node]] <= tree.threshold[node] else tree.right[node]
                by_hand[i] += tree.counts[node] / tree.counts[node].sum()
        np.testing.assert_allclose(forest.predict_proba(inputs), by_hand / 5, rtol=0, atol=1e-12)
        assert np.array_equal(forest.predict(inputs), np.argmax(by_hand, axis=1))

    def test_sums_to_one_and_accepts_sparse_vector(self):
        rng = np.random.default_rng(6)
        X, y = sparse_random(rng, 30, 6, 3)
        forest = train_forest(corpus(X, y), ForestConfig(n_trees=7))
        vec = SparseFeatureVector(6, np.array([1, 4]), np.array([0.25, 0.75]))
        p = forest.predict_proba(vec)
        assert p.shape == (3,) and abs(p.sum() - 1) < 1e-9
        np.testing.assert_allclose(p, forest.predict_proba(vec.to_dense()))

    def test_dimension_mismatch(self):
        forest = RandomForest([leaf([1, 0])], ForestConfig(n_trees=1), 2, 4)
        with pytest.raises(ValueError):
            forest.predict_proba(np.zeros(5))


class TestPersistence:
    def test_round_trip_and_hash_checks(self, tmp_path):
        rng = np.random.default_rng(7)
        X, y = sparse_random(rng, 30, 6, 3)
        forest = train_forest(corpus(X, y), ForestConfig(n_trees=6))
        path = tmp_path / "forest.npz"
        forest.save(path, "v-hash", "m-hash")
        again = RandomForest.load(path, "v-hash", "m-hash")
        probe = rng.random((15, 6))
        assert np.array_equal(again.predict_proba(probe), forest.predict_proba(probe))
        with pytest.raises(FormatError):
            RandomForest.load(path, "other", "m-hash")
        with pytest.raises(FormatError):
            RandomForest.load(path, "v-hash", "other")
