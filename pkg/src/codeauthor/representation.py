"""Vocabularies, relative-frequency vectors and indexed context bags."""

import hashlib
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from codeauthor.errors import EmptyCorpusError, FormatError
from codeauthor.syntax.paths import PathContext

DEFAULT_MAX_CONTEXTS = 500


class Vocabulary:
    """Dense index of tokens ``[0, T)`` and paths ``[0, P)``.

    Index ``T`` (resp. ``P``) is reserved for unknown tokens (paths).
    """

    def __init__(self, tokens: Iterable[str] = (), paths: Iterable[str] = ()):
        self.token_index: Dict[str, int] = {}
        self.path_index: Dict[str, int] = {}
        self.frozen = False
        for t in tokens:
            self.add_token(t)
        for p in paths:
            self.add_path(p)

    def add_token(self, token: str) -> int:
        return self._add(self.token_index, token)

    def add_path(self, path: str) -> int:
        return self._add(self.path_index, path)

    def _add(self, index, key):
        if key in index:
            return index[key]
        if self.frozen:
            raise RuntimeError("vocabulary is frozen")
        index[key] = len(index)
        return index[key]

    def freeze(self) -> "Vocabulary":
        self.frozen = True
        return self

    @property
    def T(self) -> int:
        return len(self.token_index)

    @property
    def P(self) -> int:
        return len(self.path_index)

    @property
    def F(self) -> int:
        return self.T + self.P

    @property
    def unk_token(self) -> int:
        return self.T

    @property
    def unk_path(self) -> int:
        return self.P

    def __eq__(self, other):
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self.token_index == other.token_index and self.path_index == other.path_index

    def __repr__(self):
        return f"Vocabulary(T={self.T}, P={self.P})"

    def feature_name(self, index: int) -> str:
        """Human-readable name of feature ``index`` in ``[0, F)``."""
        if not hasattr(self, "_names"):
            names = [None] * self.F
            for t, i in self.token_index.items():
                names[i] = f"token:{t}"
            for p, i in self.path_index.items():
                names[self.T + i] = f"path:{p}"
            self._names = names
        return self._names[index]

    def digest(self) -> str:
        """Content hash used to tie serialized models to this vocabulary."""
        h = hashlib.sha256()
        for kind, index in (("token", self.token_index), ("path", self.path_index)):
            for key, i in sorted(index.items(), key=lambda kv: kv[1]):
                h.update(f"{kind}\t{key}\t{i}\n".encode("utf-8"))
        return h.hexdigest()

    def dumps(self) -> str:
        lines = []
        for kind, index in (("token", self.token_index), ("path", self.path_index)):
            for key, i in sorted(index.items(), key=lambda kv: kv[1]):
                lines.append(f"{kind}\t{key}\t{i}")
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def loads(cls, text: str) -> "Vocabulary":
        tokens, paths = {}, {}
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3 or parts[0] not in ("token", "path"):
                raise FormatError(f"vocabulary line {lineno}: expected 'kind<TAB>string<TAB>index'")
            target = tokens if parts[0] == "token" else paths
            try:
                target[parts[1]] = int(parts[2])
            except ValueError:
                raise FormatError(f"vocabulary line {lineno}: bad index {parts[2]!r}") from None
        vocab = cls()
        for index, target in ((tokens, vocab.token_index), (paths, vocab.path_index)):
            if sorted(index.values()) != list(range(len(index))):
                raise FormatError("vocabulary indices are not dense")
            target.update(index)
        return vocab.freeze()


def build_vocabulary(bags: Iterable[Sequence[PathContext]]) -> Vocabulary:
    """Index every distinct token and path; indices follow lexicographic order."""
    tokens, paths = set(), set()
    nonempty = False
    for bag in bags:
        for start, path, end in bag:
            nonempty = True
            tokens.add(start)
            tokens.add(end)
            paths.add(path)
    if not nonempty:
        raise EmptyCorpusError("all bags are empty; nothing to index")
    return Vocabulary(sorted(tokens), sorted(paths)).freeze()


@dataclass
class ContextBag:
    """Path-contexts of one sample as (start, path, end) vocabulary ids."""

    contexts: np.ndarray  # shape (n, 3), int64
    label: Optional[int] = None
    meta: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        self.contexts = np.asarray(self.contexts, dtype=np.int64).reshape(-1, 3)

    def __len__(self):
        return len(self.contexts)


def index_bag(contexts: Sequence[PathContext], vocab: Vocabulary, label=None, meta=None) -> ContextBag:
    tok, pth = vocab.token_index, vocab.path_index
    ut, up = vocab.unk_token, vocab.unk_path
    ids = [(tok.get(s, ut), pth.get(p, up), tok.get(e, ut)) for s, p, e in contexts]
    return ContextBag(np.array(ids, dtype=np.int64).reshape(-1, 3), label, dict(meta or {}))


@dataclass
class SparseFeatureVector:
    dimension: int
    indices: np.ndarray  # strictly increasing
    values: np.ndarray
    empty: bool = False  # the source bag had no contexts

    @property
    def entries(self) -> List[Tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.values.tolist()))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dimension)
        out[self.indices] = self.values
        return out


def vectorize(bag: ContextBag, vocab: Vocabulary) -> SparseFeatureVector:
    """Relative term frequencies of tokens (over start+end slots) and paths.

    Unknown ids count towards the denominators but get no entry.
    """
    T, F = vocab.T, vocab.F
    if len(bag) == 0:
        return SparseFeatureVector(F, np.zeros(0, np.int64), np.zeros(0), empty=True)
    c = bag.contexts
    token_ids = np.concatenate([c[:, 0], c[:, 2]])
    path_ids = c[:, 1]
    tcounts = np.bincount(token_ids, minlength=T + 1)[:T]
    pcounts = np.bincount(path_ids, minlength=vocab.P + 1)[:vocab.P]
    tnz = np.flatnonzero(tcounts)
    pnz = np.flatnonzero(pcounts)
    indices = np.concatenate([tnz, pnz + T])
    values = np.concatenate([tcounts[tnz] / len(token_ids), pcounts[pnz] / len(path_ids)])
    return SparseFeatureVector(F, indices.astype(np.int64), values)


def subsample_contexts(bag: ContextBag, max_contexts: int, seed: int) -> ContextBag:
    """Uniform sample without replacement of at most ``max_contexts`` contexts."""
    if max_contexts < 1:
        raise ValueError("max_contexts must be >= 1")
    if len(bag) <= max_contexts:
        return bag
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(len(bag), size=max_contexts, replace=False))
    return ContextBag(bag.contexts[keep], bag.label, dict(bag.meta))


class CorpusMatrix:
    """Labelled sparse feature vectors, stored as one CSR matrix."""

    def __init__(self, matrix: sp.csr_matrix, labels: Sequence[int],
                 author_names: Optional[Mapping[int, str]] = None):
        self.matrix = sp.csr_matrix(matrix)
        self.matrix.sort_indices()
        self.labels = np.asarray(labels, dtype=np.int64)
        if self.matrix.shape[0] != len(self.labels):
            raise ValueError("vectors and labels differ in length")
        if author_names is None:
            author_names = {i: str(i) for i in np.unique(self.labels).tolist()}
        self.author_names = dict(author_names)

    @classmethod
    def from_vectors(cls, vectors: Sequence[SparseFeatureVector], labels, author_names=None):
        if not vectors:
            raise EmptyCorpusError("no vectors")
        dim = vectors[0].dimension
        indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(v.indices) for v in vectors])
        indices = np.concatenate([v.indices for v in vectors]) if indptr[-1] else np.zeros(0, np.int64)
        data = np.concatenate([v.values for v in vectors]) if indptr[-1] else np.zeros(0)
        return cls(sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dim)), labels, author_names)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def __len__(self):
        return self.matrix.shape[0]

    @property
    def vectors(self) -> List[SparseFeatureVector]:
        m = self.matrix
        return [
            SparseFeatureVector(m.shape[1], m.indices[m.indptr[i]:m.indptr[i + 1]].astype(np.int64),
                                m.data[m.indptr[i]:m.indptr[i + 1]].copy())
            for i in range(m.shape[0])
        ]

    def subset(self, rows) -> "CorpusMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        return CorpusMatrix(self.matrix[rows], self.labels[rows], self.author_names)

    def dumps(self) -> str:
        m = self.matrix
        lines = [f"{m.shape[1]}\t{m.shape[0]}"]
        for label_id, name in sorted(self.author_names.items()):
            lines.append(f"#author\t{label_id}\t{name}")
        for i in range(m.shape[0]):
            lo, hi = m.indptr[i], m.indptr[i + 1]
            feats = " ".join(f"{j}:{v!r}" for j, v in zip(m.indices[lo:hi].tolist(), m.data[lo:hi].tolist()))
            lines.append(f"{self.labels[i]}\t{feats}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "CorpusMatrix":
        lines = text.splitlines()
        try:
            dim, count = (int(x) for x in lines[0].split("\t"))
        except (IndexError, ValueError):
            raise FormatError("corpus matrix header must be 'F<TAB>count'") from None
        names, labels, indptr, indices, data = {}, [], [0], [], []
        for line in lines[1:]:
            if line.startswith("#author\t"):
                _, label_id, name = line.split("\t", 2)
                names[int(label_id)] = name
                continue
            if not line:
                continue
            label, _, feats = line.partition("\t")
            labels.append(int(label))
            for item in feats.split():
                j, _, v = item.partition(":")
                indices.append(int(j))
                data.append(float(v))
            indptr.append(len(indices))
        if len(labels) != count:
            raise FormatError(f"header announces {count} samples, found {len(labels)}")
        matrix = sp.csr_matrix((np.array(data), np.array(indices, dtype=np.int64), np.array(indptr)),
                               shape=(count, dim))
        return cls(matrix, labels, names or None)


def vectorize_corpus(bags: Sequence[ContextBag], vocab: Vocabulary,
                     author_names: Optional[Mapping[int, str]] = None) -> CorpusMatrix:
    vectors = [vectorize(b, vocab) for b in bags]
    labels = [b.label if b.label is not None else -1 for b in bags]
    return CorpusMatrix.from_vectors(vectors, labels, author_names)

