"""Mutual-information feature ranking and top-N selection."""

import hashlib
import warnings
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
import scipy.sparse as sp

from codeauthor.errors import ConfigurationError, FormatError
from codeauthor.representation import CorpusMatrix

DEFAULT_KEEP_FRACTION = 0.07


@dataclass(frozen=True)
class SelectionConfig:
    keep_fraction: Optional[float] = DEFAULT_KEEP_FRACTION
    keep_count: Optional[int] = None

    def __post_init__(self):
        if (self.keep_fraction is None) == (self.keep_count is None):
            raise ConfigurationError("set exactly one of keep_fraction / keep_count")
        if self.keep_fraction is not None and not 0 < self.keep_fraction <= 1:
            raise ConfigurationError(f"keep_fraction must be in (0, 1], got {self.keep_fraction}")
        if self.keep_count is not None and self.keep_count < 1:
            raise ConfigurationError(f"keep_count must be >= 1, got {self.keep_count}")

    @classmethod
    def count(cls, n: int) -> "SelectionConfig":
        return cls(keep_fraction=None, keep_count=n)

    def resolve(self, n_features: int) -> int:
        if self.keep_count is not None:
            return self.keep_count
        return max(1, int(round(self.keep_fraction * n_features)))


@dataclass(frozen=True)
class FeatureMask:
    kept: np.ndarray  # sorted original indices
    dimension: int  # size of the original feature space

    @property
    def remap(self) -> Dict[int, int]:
        return {int(j): i for i, j in enumerate(self.kept)}

    def __len__(self):
        return len(self.kept)

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()

    def dumps(self) -> str:
        return f"# dimension {self.dimension}\n" + "".join(f"{j}\n" for j in self.kept.tolist())

    @classmethod
    def loads(cls, text: str) -> "FeatureMask":
        dimension = None
        kept = []
        for line in text.splitlines():
            if line.startswith("# dimension"):
                dimension = int(line.split()[-1])
            elif line.strip():
                kept.append(int(line))
        if kept != sorted(set(kept)):
            raise FormatError("mask indices must be sorted and unique")
        if dimension is None:
            dimension = kept[-1] + 1 if kept else 0
        return cls(np.array(kept, dtype=np.int64), dimension)


def _entropy_rows(counts: np.ndarray) -> np.ndarray:
    """Shannon entropy in bits of each column of a (classes x k) count table."""
    totals = counts.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = counts / totals
        terms = np.where(counts > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=0)


def mutual_information(matrix: CorpusMatrix, chunk_cells: int = 5_000_000) -> np.ndarray:
    """MI in bits between each binarised feature (value > 0) and the author label."""
    labels = matrix.labels
    if len(labels) == 0:
        raise ValueError("mutual information needs at least one sample")
    classes, y = np.unique(labels, return_inverse=True)
    if len(classes) < 2:
        raise ValueError("mutual information needs at least two distinct labels")
    n = len(y)
    C = len(classes)
    class_totals = np.bincount(y, minlength=C).astype(np.float64)
    h_a = float(_entropy_rows(class_totals[:, None])[0])

    X = matrix.matrix.tocsc()
    present = sp.csc_matrix((np.ones_like(X.data), X.indices, X.indptr), shape=X.shape)
    present.data[X.data <= 0] = 0
    present.eliminate_zeros()
    onehot = sp.csr_matrix((np.ones(n), (y, np.arange(n))), shape=(C, n))

    F = X.shape[1]
    mi = np.empty(F)
    step = max(1, chunk_cells // C)
    for lo in range(0, F, step):
        hi = min(F, lo + step)
        on = np.asarray((onehot @ present[:, lo:hi]).todense(), dtype=np.float64)  # C x k
        off = class_totals[:, None] - on
        n_on = on.sum(axis=0)
        h_cond = (n_on / n) * _entropy_rows(on) + ((n - n_on) / n) * _entropy_rows(off)
        mi[lo:hi] = h_a - h_cond
    np.clip(mi, 0.0, h_a, out=mi)
    return mi


def select_top(mi, config: SelectionConfig = SelectionConfig()) -> FeatureMask:
    """Keep the N highest-MI features; ties go to the lower index."""
    mi = np.asarray(mi, dtype=np.float64)
    if mi.size == 0:
        raise ValueError("no features to select from")
    n = config.resolve(mi.size)
    if n > mi.size:
        warnings.warn(f"requested {n} features but only {mi.size} exist; keeping all", stacklevel=2)
        n = mi.size
    order = np.argsort(-mi, kind="stable")
    return FeatureMask(np.sort(order[:n]).astype(np.int64), mi.size)


def apply_mask(matrix: CorpusMatrix, mask: FeatureMask) -> CorpusMatrix:
    if mask.dimension != matrix.dimension:
        raise ValueError(f"mask built for dimension {mask.dimension}, matrix has {matrix.dimension}")
    return CorpusMatrix(matrix.matrix[:, mask.kept], matrix.labels, matrix.author_names)
