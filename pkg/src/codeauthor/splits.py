"""Evaluation splits: stratified k-fold, work-context splits, chronological folds."""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from codeauthor.errors import ConfigurationError, EmptyCorpusError, FormatError

log = logging.getLogger(__name__)

N_TIME_FOLDS = 10


# -- file tree ---------------------------------------------------------------


class FileTree:
    """Project folder tree with single-sub-folder chains merged into one node.

    A folder whose only child is another folder is merged with it, so
    ``plugins/src/main`` becomes one node. The root is merged the same way.
    Node 0 is the root at depth 0; files are leaves one level below their folder.
    """

    def __init__(self, files: Iterable[str]):
        files = sorted({_normalize_path(f) for f in files})
        if not files:
            raise ValueError("file tree needs at least one file")
        # raw trie: folder dict maps name -> subdict; files stored under key None
        trie: dict = {}
        for f in files:
            parts = f.split("/")
            node = trie
            for part in parts[:-1]:
                node = node.setdefault(part, {})
            node.setdefault(None, []).append(f)

        self.names: List[str] = []
        self.parent: List[int] = []
        self.depth: List[int] = []
        self.is_file: List[bool] = []
        self.children: List[List[int]] = []
        self.file_node: Dict[str, int] = {}

        def add(name, parent, is_file):
            self.names.append(name)
            self.parent.append(parent)
            self.depth.append(0 if parent < 0 else self.depth[parent] + 1)
            self.is_file.append(is_file)
            self.children.append([])
            if parent >= 0:
                self.children[parent].append(len(self.names) - 1)
            return len(self.names) - 1

        def compress(name, sub):
            while None not in sub and len(sub) == 1:
                (child_name, child), = sub.items()
                name = f"{name}/{child_name}" if name else child_name
                sub = child
            return name, sub

        def build(name, sub, parent):
            name, sub = compress(name, sub)
            node = add(name, parent, False)
            for f in sub.get(None, []):
                self.file_node[f] = add(f.rsplit("/", 1)[-1], node, True)
            for child_name in sorted(k for k in sub if k is not None):
                build(child_name, sub[child_name], node)

        build("", trie, -1)

    def __contains__(self, path):
        return _normalize_path(path) in self.file_node

    @property
    def files(self) -> List[str]:
        return sorted(self.file_node)

    def node_of(self, path: str) -> int:
        try:
            return self.file_node[_normalize_path(path)]
        except KeyError:
            raise KeyError(f"file not in tree: {path}") from None

    def ancestors(self, node: int) -> List[int]:
        """``node`` followed by its ancestors up to the root."""
        chain = [node]
        while self.parent[chain[-1]] >= 0:
            chain.append(self.parent[chain[-1]])
        return chain

    def path_of(self, node: int) -> str:
        return "/".join(self.names[n] for n in reversed(self.ancestors(node)) if self.names[n])

    def unit_of(self, path: str, depth: int) -> int:
        """Atomic split unit for a file: its depth-``depth`` ancestor folder, or the file itself if shallower."""
        node = self.node_of(path)
        if self.depth[node] <= depth:
            return node
        chain = self.ancestors(node)
        return chain[self.depth[node] - depth]

    def max_depth(self) -> int:
        return max(self.depth)


def _normalize_path(path: str) -> str:
    return "/".join(p for p in str(path).replace("\\", "/").split("/") if p and p != ".")


def context_similarity(file_a: str, file_b: str, tree: FileTree) -> int:
    """Depth of the lowest common ancestor of two files (root = 0)."""
    a = tree.ancestors(tree.node_of(file_a))
    b = set(tree.ancestors(tree.node_of(file_b)))
    for node in a:
        if node in b:
            return tree.depth[node]
    raise AssertionError("files share no ancestor")  # pragma: no cover


# -- work-context split ----------------------------------------------------------


@dataclass
class SampleRef:
    sample_id: str
    author: str
    path: str
    timestamp: int = 0


def _ratio(n_train: int, n_test: int) -> float:
    total = n_train + n_test
    return n_test / total if total else 0.0


@dataclass
class AuthorSplit:
    train: List[str]
    test: List[str]
    degenerate: bool = False

    @property
    def ratio(self) -> float:
        return _ratio(len(self.train), len(self.test))


def _units(samples: Sequence[SampleRef], depth: int, tree: FileTree) -> Dict[int, List[str]]:
    units: Dict[int, List[str]] = defaultdict(list)
    for s in samples:
        units[tree.unit_of(s.path, depth)].append(s.sample_id)
    return units


def random_split(samples: Sequence[SampleRef], depth: int, test_ratio: float, tree: FileTree,
                 rng: np.random.Generator) -> AuthorSplit:
    """One greedy, unit-atomic train/test division of a single author's samples.

    Units are shuffled; each goes to test while the running test ratio is
    below ``test_ratio``, otherwise to train.
    """
    if len(samples) < 2:
        raise ValueError("an author needs at least two samples to be split")
    units = _units(samples, depth, tree)
    keys = sorted(units)
    order = rng.permutation(len(keys))
    train, test = [], []
    for k in order:
        members = units[keys[k]]
        if _ratio(len(train), len(test)) < test_ratio:
            test.extend(members)
        else:
            train.extend(members)
    return AuthorSplit(train, test, degenerate=len(keys) < 2)


@dataclass(frozen=True)
class SplitConfig:
    min_ratio: float = 0.15
    max_ratio: float = 0.35
    attempts: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.min_ratio < self.max_ratio < 1:
            raise ConfigurationError("need 0 < min_ratio < max_ratio < 1")
        if self.attempts < 1:
            raise ConfigurationError("attempts must be >= 1")

    @property
    def test_ratio(self) -> float:
        return (self.min_ratio + self.max_ratio) / 2


def split_author(samples: Sequence[SampleRef], depth: int, tree: FileTree, config: SplitConfig,
                 rng: np.random.Generator) -> Optional[AuthorSplit]:
    """Best of ``config.attempts`` random splits whose ratio lies strictly inside (min, max).

    "Best" is closest to the mid-point target; ties keep the earlier attempt.
    """
    target = config.test_ratio
    best, best_gap = None, np.inf
    for _ in range(config.attempts):
        split = random_split(samples, depth, target, tree, rng)
        r = split.ratio
        if config.min_ratio < r < config.max_ratio:
            gap = abs(r - target)
            if gap < best_gap:
                best, best_gap = split, gap
    return best


@dataclass
class SplitPlan:
    depth: int
    assignment: Dict[str, str]  # sample id -> "train" | "test"
    retained_authors: Set[str]
    ratios: Dict[str, float] = field(default_factory=dict)
    seed: int = 0

    def ids(self, side: str) -> List[str]:
        return [sid for sid, s in self.assignment.items() if s == side]

    def dumps(self) -> str:
        lines = [f"# depth\t{self.depth}", f"# seed\t{self.seed}"]
        for author in sorted(self.ratios):
            lines.append(f"# ratio\t{author}\t{self.ratios[author]!r}")
        for sid in sorted(self.assignment):
            lines.append(f"{sid}\t{self.assignment[sid]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "SplitPlan":
        depth, seed, ratios, assignment = None, 0, {}, {}
        for line in text.splitlines():
            if not line:
                continue
            parts = line.split("\t")
            if parts[0] == "# depth":
                depth = int(parts[1])
            elif parts[0] == "# seed":
                seed = int(parts[1])
            elif parts[0] == "# ratio":
                ratios[parts[1]] = float(parts[2])
            elif line.startswith("#"):
                continue
            elif len(parts) == 2 and parts[1] in ("train", "test"):
                assignment[parts[0]] = parts[1]
            else:
                raise FormatError(f"bad split-plan line {line!r}")
        if depth is None:
            raise FormatError("split plan lacks a depth header")
        return cls(depth, assignment, set(ratios), ratios, seed)


def _author_rng(seed: int, depth: int, author_rank: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, depth, author_rank]))


def build_context_splits(samples: Sequence[SampleRef], depths: Sequence[int],
                         config: SplitConfig = SplitConfig(),
                         tree: Optional[FileTree] = None) -> List[SplitPlan]:
    """One plan per depth over a common author set.

    Authors are split independently; any author without a qualifying split
    at some depth is dropped from every depth.
    """
    if tree is None:
        tree = FileTree(s.path for s in samples)
    by_author: Dict[str, List[SampleRef]] = defaultdict(list)
    for s in samples:
        by_author[s.author].append(s)
    authors = sorted(by_author)
    splits: Dict[int, Dict[str, AuthorSplit]] = {d: {} for d in depths}
    dropped = set()
    for rank, author in enumerate(authors):
        mine = by_author[author]
        for d in depths:
            split = None
            if len(mine) >= 2:
                split = split_author(mine, d, tree, config, _author_rng(config.seed, d, rank))
            if split is None:
                dropped.add(author)
                break
            splits[d][author] = split
    kept = [a for a in authors if a not in dropped]
    if dropped:
        log.info("dropping %d of %d authors without a valid split at every depth", len(dropped), len(authors))
    if not kept:
        raise EmptyCorpusError("no author has a valid split at every requested depth")
    plans = []
    for d in depths:
        assignment, ratios = {}, {}
        for author in kept:
            split = splits[d][author]
            assignment.update((sid, "train") for sid in split.train)
            assignment.update((sid, "test") for sid in split.test)
            ratios[author] = split.ratio
        plans.append(SplitPlan(d, assignment, set(kept), ratios, config.seed))
    return plans


# -- chronological folds ------------------------------------------------------


@dataclass
class TimeFolds:
    fold_of: Dict[str, int]
    boundaries: Dict[str, List[Tuple[int, int]]]  # author -> [(first, last) timestamp per fold]
    n_folds: int = N_TIME_FOLDS

    def ids(self, fold: int) -> List[str]:
        return [sid for sid, f in self.fold_of.items() if f == fold]

    def dumps(self) -> str:
        return "".join(f"{sid}\t{self.fold_of[sid]}\n" for sid in sorted(self.fold_of))

    @classmethod
    def loads(cls, text: str, n_folds: int = N_TIME_FOLDS) -> "TimeFolds":
        fold_of = {}
        for line in text.splitlines():
            if line and not line.startswith("#"):
                sid, _, fold = line.partition("\t")
                fold_of[sid] = int(fold)
        return cls(fold_of, {}, n_folds)


def _bucket_sizes(n: int, k: int) -> List[int]:
    base, extra = divmod(n, k)
    return [base + 1 if i < extra else base for i in range(k)]


def time_fold_split(samples: Sequence[SampleRef], n_folds: int = N_TIME_FOLDS) -> TimeFolds:
    """Per author: sort by (timestamp, sample id) and cut into equal contiguous buckets.

    Earlier buckets take the extra sample when the count does not divide evenly.
    """
    by_author: Dict[str, List[SampleRef]] = defaultdict(list)
    for s in samples:
        by_author[s.author].append(s)
    fold_of, boundaries = {}, {}
    for author in sorted(by_author):
        mine = sorted(by_author[author], key=lambda s: (s.timestamp, s.sample_id))
        if len(mine) < n_folds:
            raise ValueError(f"author {author!r} has {len(mine)} samples, fewer than {n_folds} folds")
        pos = 0
        bounds = []
        for fold, size in enumerate(_bucket_sizes(len(mine), n_folds)):
            chunk = mine[pos:pos + size]
            for s in chunk:
                fold_of[s.sample_id] = fold
            bounds.append((chunk[0].timestamp, chunk[-1].timestamp))
            pos += size
        boundaries[author] = bounds
    return TimeFolds(fold_of, boundaries, n_folds)


# -- stratified k-fold ----------------------------------------------------------


def stratified_kfold(labels: Sequence[Hashable], k: int, seed: int = 0) -> np.ndarray:
    """Fold index per sample: each class is shuffled and dealt round-robin."""
    if k < 2:
        raise ValueError("k must be >= 2")
    labels = list(labels)
    rng = np.random.default_rng(seed)
    folds = np.full(len(labels), -1, dtype=np.int64)
    members: Dict[Hashable, List[int]] = defaultdict(list)
    for i, lab in enumerate(labels):
        members[lab].append(i)
    for lab in sorted(members, key=repr):
        idx = np.array(members[lab])
        if len(idx) < k:
            raise ValueError(f"class {lab!r} has {len(idx)} samples, fewer than k={k}")
        shuffled = idx[rng.permutation(len(idx))]
        folds[shuffled] = np.arange(len(idx)) % k
    return folds


def dump_folds(ids: Sequence[str], folds: Sequence[int]) -> str:
    return "".join(f"{sid}\t{f}\n" for sid, f in zip(ids, folds))


def per_author_ratios(plan: SplitPlan, author_of: Mapping[str, str]) -> Dict[str, float]:
    counts: Dict[str, List[int]] = defaultdict(lambda: [0, 0])
    for sid, side in plan.assignment.items():
        counts[author_of[sid]][side == "test"] += 1
    return {a: _ratio(*c) for a, c in counts.items()}
