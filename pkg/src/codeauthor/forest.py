"""Random forest of Gini CART trees over sparse relative-frequency features."""

import io
import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass
from typing import List, Optional, Union

import numpy as np
import scipy.sparse as sp

from codeauthor.errors import ConfigurationError, FormatError
from codeauthor.representation import CorpusMatrix, SparseFeatureVector

log = logging.getLogger(__name__)

_DENSE_CELLS = 20_000_000
# relative margin a split must beat the parent impurity by; absorbs float noise
_IMPROVEMENT_RTOL = 1e-12


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 300
    max_depth: Optional[int] = None
    features_per_split: Union[str, int] = "sqrt"  # "sqrt", "log2", "all" or a count
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigurationError("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ConfigurationError("max_depth must be >= 0")
        fps = self.features_per_split
        if isinstance(fps, str):
            if fps not in ("sqrt", "log2", "all"):
                raise ConfigurationError(f"unknown features_per_split rule {fps!r}")
        elif fps < 1:
            raise ConfigurationError("features_per_split must be >= 1")

    def resolve_features(self, n_features: int) -> int:
        fps = self.features_per_split
        if fps == "sqrt":
            k = math.isqrt(n_features)
        elif fps == "log2":
            k = int(math.log2(n_features)) if n_features > 0 else 1
        elif fps == "all":
            k = n_features
        else:
            k = int(fps)
        return max(1, min(k, n_features))


class DecisionTree:
    """Flat array encoding; ``feature[i] < 0`` marks a leaf.

    Samples with ``x[feature] <= threshold`` go to ``left``.
    """

    def __init__(self, feature, threshold, left, right, counts):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.float64)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        best = 0
        stack = [(0, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if self.feature[node] >= 0:
                stack.append((self.left[node], d + 1))
                stack.append((self.right[node], d + 1))
        return best

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row of dense ``X``."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] >= 0
        while active.any():
            r = rows[active]
            nd = node[r]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        counts = self.counts[self.apply(X)]
        return counts / counts.sum(axis=1, keepdims=True)


class _Columns:
    """Column access for either a dense array or a CSC matrix."""

    def __init__(self, X):
        n, F = X.shape
        if n * F <= _DENSE_CELLS:
            self.dense = np.asfortranarray(X.toarray() if sp.issparse(X) else np.asarray(X, dtype=np.float64))
            self.csc = None
        else:
            self.dense = None
            self.csc = sp.csc_matrix(X)
            self.csc.sort_indices()

    def values(self, f: int, rows: np.ndarray) -> np.ndarray:
        if self.dense is not None:
            return self.dense[rows, f]
        lo, hi = self.csc.indptr[f], self.csc.indptr[f + 1]
        col_rows = self.csc.indices[lo:hi]
        out = np.zeros(len(rows))
        if hi > lo:
            pos = np.searchsorted(col_rows, rows)
            pos_c = np.minimum(pos, hi - lo - 1)
            hit = col_rows[pos_c] == rows
            out[hit] = self.csc.data[lo + pos_c[hit]]
        return out


def _best_split(values: np.ndarray, y: np.ndarray, n_classes: int):
    """Best Gini threshold on one feature: (score, threshold) or None.

    ``score`` is sum(L^2)/nL + sum(R^2)/nR over class counts, which grows as
    the weighted child impurity shrinks.
    """
    order = np.argsort(values, kind="stable")
    v = values[order]
    if v[0] == v[-1]:
        return None
    m = len(v)
    onehot = np.zeros((m, n_classes))
    onehot[np.arange(m), y[order]] = 1.0
    left = np.cumsum(onehot, axis=0)[:-1]
    total = left[-1] + onehot[-1]
    right = total - left
    n_left = np.arange(1, m, dtype=np.float64)
    n_right = m - n_left
    score = (left * left).sum(axis=1) / n_left + (right * right).sum(axis=1) / n_right
    valid = v[:-1] != v[1:]
    score = np.where(valid, score, -np.inf)
    # first threshold within rounding of the maximum, so exact ties keep the lowest
    i = int(np.argmax(score >= score.max() * (1.0 - _IMPROVEMENT_RTOL)))
    threshold = (v[i] + v[i + 1]) / 2.0
    if threshold >= v[i + 1]:
        threshold = v[i]
    return float(score[i]), float(threshold)


def _candidate_features(cols: _Columns, idx, n_features, k, rng) -> np.ndarray:
    """Uniform random subset of up to ``k`` features that vary within the node.

    Constant features are skipped without counting towards ``k``, so sparse
    nodes are not turned into leaves just because the draw hit all-zero columns.
    Returned in ascending order, which makes ties resolve to the lowest index.
    """
    perm = rng.permutation(n_features)
    if cols.dense is not None:
        block = cols.dense[idx]
        varies = block.max(axis=0) != block.min(axis=0)
        return np.sort(perm[varies[perm]][:k])
    chosen = []
    for f in perm:
        v = cols.values(int(f), idx)
        if v.min() != v.max():
            chosen.append(f)
            if len(chosen) == k:
                break
    return np.sort(np.array(chosen, dtype=np.int64))


def _grow_tree(cols: _Columns, y: np.ndarray, sample: np.ndarray, n_classes: int,
               config: ForestConfig, n_candidates: int, rng: np.random.Generator) -> DecisionTree:
    n_features = (cols.dense if cols.dense is not None else cols.csc).shape[1]
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(hist):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(hist)
        return len(feature) - 1

    root = new_node(np.bincount(y[sample], minlength=n_classes))
    stack = [(root, sample, 0)]
    while stack:
        node, idx, depth = stack.pop()
        hist = counts[node]
        if np.count_nonzero(hist) <= 1 or len(idx) < 2:
            continue
        if config.max_depth is not None and depth >= config.max_depth:
            continue
        yi = y[idx]
        parent_score = float((hist.astype(np.float64) ** 2).sum()) / len(idx)
        best = None
        for f in _candidate_features(cols, idx, n_features, n_candidates, rng):
            vals = cols.values(int(f), idx)
            found = _best_split(vals, yi, n_classes)
            if found is None:
                continue
            if best is None or found[0] > best[0] * (1.0 + _IMPROVEMENT_RTOL):
                best = (found[0], found[1], int(f), vals)
        if best is None or best[0] <= parent_score * (1.0 + _IMPROVEMENT_RTOL):
            continue
        _score, thr, f, vals = best
        go_left = vals <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(np.bincount(y[li], minlength=n_classes))
        right[node] = new_node(np.bincount(y[ri], minlength=n_classes))
        # right pushed first so the left subtree is numbered first
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return DecisionTree(feature, threshold, left, right, np.array(counts))


def _as_matrix(X) -> Union[np.ndarray, sp.csr_matrix]:
    if isinstance(X, CorpusMatrix):
        return X.matrix
    if isinstance(X, SparseFeatureVector):
        return sp.csr_matrix((X.values, X.indices, [0, len(X.indices)]), shape=(1, X.dimension))
    if sp.issparse(X):
        return sp.csr_matrix(X)
    X = np.asarray(X, dtype=np.float64)
    return X.reshape(1, -1) if X.ndim == 1 else X


class RandomForest:
    def __init__(self, trees: List[DecisionTree], config: ForestConfig, n_classes: int,
                 n_features: int, in_bag: Optional[np.ndarray] = None):
        self.trees = trees
        self.config = config
        self.n_classes = n_classes
        self.n_features = n_features
        self.in_bag = in_bag  # (n_trees, n_samples) bootstrap multiplicities

    def predict_proba(self, X) -> np.ndarray:
        """Mean of per-tree leaf class proportions.

        A single ``SparseFeatureVector`` or 1-d array yields a 1-d distribution.
        """
        single = isinstance(X, SparseFeatureVector) or (not sp.issparse(X) and not isinstance(X, CorpusMatrix)
                                                       and np.ndim(X) == 1)
        M = _as_matrix(X)
        if M.shape[1] != self.n_features:
            raise ValueError(f"input has {M.shape[1]} features, forest was trained on {self.n_features}")
        out = np.zeros((M.shape[0], self.n_classes))
        rows_per_chunk = max(1, _DENSE_CELLS // max(1, self.n_features))
        for lo in range(0, M.shape[0], rows_per_chunk):
            chunk = M[lo:lo + rows_per_chunk]
            dense = chunk.toarray() if sp.issparse(chunk) else chunk
            acc = np.zeros((dense.shape[0], self.n_classes))
            for tree in self.trees:
                acc += tree.predict_proba(dense)
            out[lo:lo + rows_per_chunk] = acc / len(self.trees)
        return out[0] if single else out

    def predict(self, X) -> np.ndarray:
        """Arg-max author id; ties resolve to the lowest id."""
        proba = self.predict_proba(X)
        return np.argmax(proba, axis=-1)

    def save(self, path, vocab_digest: str = "", mask_digest: str = "") -> None:
        meta = {
            "format": "codeauthor-forest-v1",
            "config": asdict(self.config),
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "vocab_digest": vocab_digest,
            "mask_digest": mask_digest,
        }
        sizes = np.array([t.n_nodes for t in self.trees], dtype=np.int64)
        cat = lambda attr: np.concatenate([getattr(t, attr) for t in self.trees])  # noqa: E731
        buf = io.BytesIO()
        np.savez_compressed(buf, meta=np.array(json.dumps(meta)), sizes=sizes, feature=cat("feature"),
                            threshold=cat("threshold"), left=cat("left"), right=cat("right"),
                            counts=np.concatenate([t.counts for t in self.trees]))
        with open(path, "wb") as fh:
            fh.write(buf.getvalue())

    @classmethod
    def load(cls, path, vocab_digest: Optional[str] = None, mask_digest: Optional[str] = None) -> "RandomForest":
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("format") != "codeauthor-forest-v1":
                raise FormatError(f"{path}: not a forest model file")
            if vocab_digest is not None and meta["vocab_digest"] != vocab_digest:
                raise FormatError(f"{path}: vocabulary hash mismatch")
            if mask_digest is not None and meta["mask_digest"] != mask_digest:
                raise FormatError(f"{path}: feature-mask hash mismatch")
            bounds = np.concatenate([[0], np.cumsum(data["sizes"])])
            arrays = {k: data[k] for k in ("feature", "threshold", "left", "right", "counts")}
        trees = [DecisionTree(*(arrays[k][a:b] for k in ("feature", "threshold", "left", "right", "counts")))
                 for a, b in zip(bounds[:-1], bounds[1:])]
        return cls(trees, ForestConfig(**meta["config"]), meta["n_classes"], meta["n_features"])


def train_forest(matrix: CorpusMatrix, config: ForestConfig = ForestConfig()) -> RandomForest:
    y = matrix.labels
    if len(y) == 0:
        raise ValueError("cannot train on an empty corpus")
    n_classes = int(y.max()) + 1
    present = np.bincount(y, minlength=n_classes)
    if y.min() < 0 or (present == 0).any():
        raise ValueError("labels must be dense in [0, n_classes)")
    if n_classes < 2:
        raise ValueError("need at least two classes")
    X = matrix.matrix
    n, F = X.shape
    if F == 0 or abs(X - X[np.zeros(n, dtype=np.int64)]).sum() == 0:
        warnings.warn("all feature vectors are identical; every tree will be a single leaf", stacklevel=2)
    cols = _Columns(X)
    n_candidates = config.resolve_features(max(F, 1))
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_trees)
    trees, in_bag = [], np.zeros((config.n_trees, n), dtype=np.int32)
    for t, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        sample = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
        in_bag[t] = np.bincount(sample, minlength=n)
        if F == 0:
            hist = np.bincount(y[sample], minlength=n_classes)
            trees.append(DecisionTree([-1], [0.0], [-1], [-1], hist[None, :]))
            continue
        trees.append(_grow_tree(cols, y, sample, n_classes, config, n_candidates, rng))
    log.debug("trained %d trees, mean depth %.1f", len(trees), np.mean([t.depth() for t in trees]))
    return RandomForest(trees, config, n_classes, F, in_bag)


def predict_proba(forest: RandomForest, vector) -> np.ndarray:
    return forest.predict_proba(vector)


def predict_label(forest: RandomForest, vector):
    return forest.predict(vector)
