"""Generated Java corpora with controlled authorship signal.

Every snippet is built from a fixed set of method templates shared by all
authors; only the identifiers differ. Which identifiers a snippet draws
from decides where the signal lives: per author, per folder, or drifting
over time.
"""

from typing import List, Sequence

import numpy as np

from codeauthor.samples import Sample

TEMPLATES = (
    "int {0}(int {1}, int {2}) {{ int {3} = {1} + {2}; return {3} * 2; }}",
    "void {0}(String {1}) {{ for (int {2} = 0; {2} < {1}.length(); {2}++) {{ {3}({2}); }} }}",
    "boolean {0}(Object {1}) {{ if ({1} == null) {{ return false; }} return {2}.{3}({1}); }}",
    "List<String> {0}(int {1}) {{ List<String> {2} = new ArrayList<>(); while ({1} > 0) {{ {2}.add({3}); {1}--; }} return {2}; }}",
    "double {0}(double {1}) {{ double {2} = Math.sqrt({1}); try {{ {3}({2}); }} catch (Exception e) {{ e.printStackTrace(); }} return {2}; }}",
    "String {0}(String {1}, int {2}) {{ StringBuilder {3} = new StringBuilder({1}); {3}.append({2}); return {3}.toString(); }}",
    "void {0}(int[] {1}) {{ int {2} = 0; for (int {3} : {1}) {{ {2} += {3}; }} System.out.println({2}); }}",
    "int {0}(Map<String, Integer> {1}, String {2}) {{ Integer {3} = {1}.get({2}); return {3} == null ? 0 : {3}; }}",
)
SLOTS = 4
SHARED_NAMES = ("value", "result", "item", "count", "data", "index", "tmp", "list")

_SYLLABLES = ("ka", "lo", "mi", "ne", "pu", "ra", "si", "to", "vu", "ze", "bo", "da", "fi", "gu", "ho", "ju")


def make_names(rng: np.random.Generator, n: int, taken: set) -> List[str]:
    """``n`` fresh identifiers not in ``taken`` (which is updated)."""
    out = []
    while len(out) < n:
        k = int(rng.integers(2, 4))
        parts = [_SYLLABLES[i] for i in rng.integers(0, len(_SYLLABLES), size=k)]
        name = parts[0] + "".join(p.capitalize() for p in parts[1:]) + str(int(rng.integers(0, 100)))
        if name not in taken:
            taken.add(name)
            out.append(name)
    return out


def snippet(rng: np.random.Generator, pool: Sequence[str], shared_fraction: float = 0.0) -> str:
    template = TEMPLATES[int(rng.integers(len(TEMPLATES)))]
    names = list(rng.choice(len(pool), size=SLOTS, replace=len(pool) < SLOTS))
    filled = []
    for slot, i in enumerate(names):
        if slot > 0 and rng.random() < shared_fraction:
            filled.append(SHARED_NAMES[int(rng.integers(len(SHARED_NAMES)))])
        else:
            filled.append(pool[i])
    # placeholders must stay distinct or the template changes meaning
    seen = set()
    for slot, name in enumerate(filled):
        while name in seen:
            name = name + "X"
        seen.add(name)
        filled[slot] = name
    return template.format(*filled)


def separable_corpus(n_authors: int = 10, per_author: int = 50, private_tokens: int = 20,
                     shared_fraction: float = 0.25, seed: int = 0) -> List[Sample]:
    """Each author draws identifiers from a private pool over shared syntax."""
    rng = np.random.default_rng(seed)
    taken = set(SHARED_NAMES)
    samples = []
    for a in range(n_authors):
        pool = make_names(rng, private_tokens, taken)
        for i in range(per_author):
            samples.append(Sample(f"a{a:02d}_s{i:03d}", f"author{a:02d}", snippet(rng, pool, shared_fraction),
                                  f"src/author{a:02d}/File{i // 5}.java", i))
    return samples


def planted_context_corpus(n_authors: int = 5, top_folders: int = 4, leaf_folders: int = 2,
                           files_per_leaf: int = 3, per_file: int = 2, folder_tokens: int = 6,
                           author_signal: bool = False, seed: int = 0) -> List[Sample]:
    """Three folder levels below the root; identifiers belong to the depth-2 folder.

    Layout: ``top{t}/mod{t}_{a}/leaf{l}/File{f}.java``. Each top-level folder
    holds one depth-2 module per author, written only by that author, with its
    own identifier pool. With ``author_signal`` the pools belong to authors
    instead, so context no longer matters.
    """
    rng = np.random.default_rng(seed)
    taken = set(SHARED_NAMES)
    author_pools = [make_names(rng, folder_tokens, taken) for _ in range(n_authors)]
    samples = []
    for t in range(top_folders):
        for a in range(n_authors):
            pool = author_pools[a] if author_signal else make_names(rng, folder_tokens, taken)
            for leaf in range(leaf_folders):
                for f in range(files_per_leaf):
                    path = f"top{t}/mod{t}_{a}/leaf{leaf}/File{f}.java"
                    for k in range(per_file):
                        sid = f"a{a}_t{t}_l{leaf}_f{f}_k{k}"
                        samples.append(Sample(sid, f"author{a}", snippet(rng, pool), path, len(samples)))
    return samples


def drift_corpus(n_authors: int = 5, n_folds: int = 10, per_fold: int = 10, window: int = 20,
                 rotation: float = 0.25, seed: int = 0) -> List[Sample]:
    """Author identifier pools slide forward by ``rotation * window`` names per fold.

    With ``rotation = 0`` the corpus is stationary.
    """
    rng = np.random.default_rng(seed)
    taken = set(SHARED_NAMES)
    shift = int(round(rotation * window))
    samples = []
    for a in range(n_authors):
        stream = make_names(rng, window + shift * (n_folds - 1), taken)
        t = 0
        for fold in range(n_folds):
            pool = stream[fold * shift: fold * shift + window]
            for i in range(per_fold):
                samples.append(Sample(f"a{a}_f{fold}_s{i:02d}", f"author{a}", snippet(rng, pool),
                                      f"src/author{a}/F{fold}.java", 1_600_000_000 + 3600 * t))
                t += 1
    return samples
