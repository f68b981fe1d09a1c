"""Mine a git history into method-creation samples.

Talks to git through its plumbing commands; nothing here needs a work tree.
"""

import hashlib
import json
import logging
import os
import subprocess
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple, Union

import networkx as nx

from codeauthor.errors import CodeAuthorError, EmptyCorpusError, FormatError, ParseError
from codeauthor.samples import Sample
from codeauthor.syntax.frontends import get_frontend

log = logging.getLogger(__name__)

DEFAULT_STUBS = frozenset({"", "unknown"})
EMPTY_TREE = "4b825dc642cb6eb9a060e54bf8d69288fbee4904"


@dataclass
class FileChange:
    path: str
    before: Optional[str]  # None when the file is created
    after: Optional[str]  # None when the file is deleted


@dataclass
class CommitRecord:
    commit_id: str
    author_name: str
    author_email: str
    timestamp: int
    changes: List[FileChange] = field(default_factory=list)
    is_merge: bool = False


@dataclass
class AuthorGroup:
    group_id: int
    aliases: Set[Tuple[str, str]]
    display_name: str


@dataclass
class MethodEvent:
    kind: str  # creation | deletion | modification
    signature: str
    body: str
    path: str = ""
    commit_id: str = ""
    author_group: int = -1
    timestamp: int = 0


# -- git plumbing -------------------------------------------------------------


def _git(repo, *args, input_bytes=None) -> bytes:
    proc = subprocess.run(["git", "-C", str(repo), *args], input=input_bytes,
                          stdout=subprocess.PIPE, stderr=subprocess.PIPE)
    if proc.returncode != 0:
        raise OSError(f"git {' '.join(args)} failed in {repo}: {proc.stderr.decode(errors='replace').strip()}")
    return proc.stdout


class _BlobReader:
    """Reads many blobs through one ``git cat-file --batch`` process."""

    def __init__(self, repo):
        self.proc = subprocess.Popen(["git", "-C", str(repo), "cat-file", "--batch"],
                                     stdin=subprocess.PIPE, stdout=subprocess.PIPE)

    def read(self, sha: str) -> str:
        self.proc.stdin.write(sha.encode() + b"\n")
        self.proc.stdin.flush()
        header = self.proc.stdout.readline().split()
        if len(header) < 3 or header[1] == b"missing":
            raise OSError(f"blob {sha} missing")
        size = int(header[2])
        data = self.proc.stdout.read(size)
        self.proc.stdout.read(1)  # trailing newline
        return data.decode("utf-8", errors="replace")

    def close(self):
        self.proc.stdin.close()
        self.proc.wait()


def _has_commits(repo, branch) -> bool:
    proc = subprocess.run(["git", "-C", str(repo), "rev-parse", "--verify", "--quiet", f"{branch}^{{commit}}"],
                          stdout=subprocess.PIPE, stderr=subprocess.PIPE)
    return proc.returncode == 0


def enumerate_commits(repo: Union[str, Path], branch: str = "HEAD",
                      extensions: Sequence[str] = (".java",)) -> Iterator[CommitRecord]:
    """Every commit reachable from ``branch``, oldest first.

    Non-merge commits carry before/after contents for changed files with a
    matching extension. Merge commits are yielded without changes.
    """
    if not os.path.isdir(repo):
        raise OSError(f"repository not found: {repo}")
    _git(repo, "rev-parse", "--git-dir")  # raises OSError when unreadable
    if not _has_commits(repo, branch):
        if branch == "HEAD":
            return  # empty repository
        raise OSError(f"branch {branch!r} not found in {repo}")
    fmt = "%H%x00%P%x00%an%x00%ae%x00%at"
    out = _git(repo, "log", "--reverse", "--topo-order", f"--format={fmt}", branch).decode("utf-8", "replace")
    blobs = _BlobReader(repo)
    try:
        for line in out.splitlines():
            sha, parents, name, email, ts = line.split("\x00")
            parents = parents.split()
            record = CommitRecord(sha, name, email, int(ts), is_merge=len(parents) > 1)
            if not record.is_merge:
                base = parents[0] if parents else EMPTY_TREE
                record.changes = list(_changes(repo, base, sha, blobs, extensions))
            yield record
    finally:
        blobs.close()


def _changes(repo, base, sha, blobs, extensions) -> Iterator[FileChange]:
    raw = _git(repo, "diff-tree", "-r", "--raw", "--no-renames", "-z", base, sha)
    parts = raw.split(b"\x00")
    # -z raw output: ":meta\0path\0" pairs
    for meta, path in zip(parts[0::2], parts[1::2]):
        if not meta.startswith(b":"):
            continue
        _, _, old_sha, new_sha, status = meta[1:].decode().split()
        path = path.decode("utf-8", "replace")
        if not path.endswith(tuple(extensions)):
            continue
        before = None if status.startswith("A") else blobs.read(old_sha)
        after = None if status.startswith("D") else blobs.read(new_sha)
        yield FileChange(path, before, after)


# -- aliases -----------------------------------------------------------------


def _norm_name(name: str) -> str:
    return " ".join(name.split()).casefold()


def _norm_email(email: str) -> str:
    return email.strip().lower()


def merge_aliases(commits: Iterable, stubs: Iterable[str] = DEFAULT_STUBS) -> List[AuthorGroup]:
    """Connected components of the name/email co-occurrence graph.

    ``commits`` yields CommitRecords or plain (name, email) pairs. Stub
    values never become vertices, so they cannot glue identities together.
    """
    stubs = {_norm_name(s) for s in stubs}
    graph = nx.Graph()
    pairs: Counter = Counter()  # alias -> commit count
    for c in commits:
        name, email = (c.author_name, c.author_email) if isinstance(c, CommitRecord) else c
        pairs[(name, email)] += 1
        vertices = []
        if _norm_name(name) not in stubs:
            vertices.append(("name", _norm_name(name)))
        if _norm_email(email) not in stubs:
            vertices.append(("email", _norm_email(email)))
        graph.add_nodes_from(vertices)
        if len(vertices) == 2:
            graph.add_edge(*vertices)
    members: Dict[frozenset, Set[Tuple[str, str]]] = defaultdict(set)
    component_of = {}
    for comp in nx.connected_components(graph):
        key = frozenset(comp)
        for v in comp:
            component_of[v] = key
    for name, email in pairs:
        v = ("name", _norm_name(name)) if ("name", _norm_name(name)) in component_of else ("email", _norm_email(email))
        if v in component_of:
            members[component_of[v]].add((name, email))
    groups = []
    for aliases in sorted(members.values(), key=lambda a: sorted(a)):
        names: Counter = Counter()
        for alias in aliases:
            if _norm_name(alias[0]) not in stubs:
                names[alias[0]] += pairs[alias]
        display = min(names, key=lambda n: (-names[n], n)) if names else sorted(aliases)[0][1]
        groups.append(AuthorGroup(len(groups), aliases, display))
    return groups


def group_index(groups: Sequence[AuthorGroup]) -> Dict[Tuple[str, str], int]:
    return {alias: g.group_id for g in groups for alias in g.aliases}


# -- method diff -----------------------------------------------------------------


def _methods(source: Optional[str], frontend_id: str) -> Dict[str, str]:
    if source is None:
        return {}
    frontend = get_frontend(frontend_id)
    if frontend.find_methods is None:
        raise CodeAuthorError(f"front-end {frontend_id!r} cannot locate methods")
    try:
        found = frontend.find_methods(source)
    except ParseError as exc:
        warnings.warn(f"unparseable version treated as having no methods: {exc}", stacklevel=3)
        return {}
    out = {}
    for m in found:
        out.setdefault(m.signature, m.text)
    return out


def extract_method_events(before: Optional[str], after: Optional[str],
                          frontend_id: str = "java") -> List[MethodEvent]:
    """Method-level changes between two versions of one file, matched by signature."""
    old, new = _methods(before, frontend_id), _methods(after, frontend_id)
    events = []
    for sig in sorted(new.keys() - old.keys()):
        events.append(MethodEvent("creation", sig, new[sig]))
    for sig in sorted(old.keys() - new.keys()):
        events.append(MethodEvent("deletion", sig, old[sig]))
    for sig in sorted(old.keys() & new.keys()):
        if old[sig] != new[sig]:
            events.append(MethodEvent("modification", sig, new[sig]))
    return events


def mine_events(repo, branch: str = "HEAD", frontend_id: str = "java",
                stubs: Iterable[str] = DEFAULT_STUBS) -> Tuple[List[MethodEvent], List[AuthorGroup]]:
    frontend = get_frontend(frontend_id)
    commits = list(enumerate_commits(repo, branch, frontend.extensions))
    groups = merge_aliases(commits, stubs)
    index = group_index(groups)
    events = []
    for c in commits:
        gid = index.get((c.author_name, c.author_email), -1)
        for change in c.changes:
            for e in extract_method_events(change.before, change.after, frontend_id):
                e.path, e.commit_id, e.author_group, e.timestamp = change.path, c.commit_id, gid, c.timestamp
                events.append(e)
    return events, groups


def build_corpus(events: Iterable[MethodEvent], min_samples: int = 1, max_samples: Optional[int] = None,
                 groups: Optional[Sequence[AuthorGroup]] = None, frontend_id: str = "java") -> List[Sample]:
    """Creation events of authors whose creation count lies in [min_samples, max_samples)."""
    creations = [e for e in events if e.kind == "creation" and e.author_group >= 0]
    counts = Counter(e.author_group for e in creations)
    upper = float("inf") if max_samples is None else max_samples
    kept = {g for g, n in counts.items() if min_samples <= n < upper}
    if not kept:
        raise EmptyCorpusError(f"no author has between {min_samples} and {max_samples} creations")
    names = {g.group_id: g.display_name for g in groups} if groups else {}
    samples = []
    for e in creations:
        if e.author_group in kept:
            sid = f"{e.commit_id[:12]}:{e.path}:{e.signature}"
            samples.append(Sample(sid, names.get(e.author_group, f"author{e.author_group}"), e.body,
                                  e.path, e.timestamp, frontend_id))
    return samples


# -- event log -----------------------------------------------------------------


class ContentStore:
    """Content-addressed blob directory keyed by sha256."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def put(self, text: str) -> str:
        key = hashlib.sha256(text.encode("utf-8")).hexdigest()
        path = self.root / key[:2] / key
        if not path.exists():
            path.parent.mkdir(exist_ok=True)
            path.write_text(text, encoding="utf-8")
        return key

    def get(self, key: str) -> str:
        return (self.root / key[:2] / key).read_text(encoding="utf-8")


LOG_FIELDS = ("kind", "commit_id", "author_group", "timestamp", "path", "signature", "body_ref")


def write_event_log(events: Iterable[MethodEvent], path: Union[str, Path], store: ContentStore) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            row = [e.kind, e.commit_id, str(e.author_group), str(e.timestamp), e.path, e.signature, store.put(e.body)]
            if any("\t" in v or "\n" in v for v in row):
                raise FormatError(f"event field contains a tab or newline: {row}")
            fh.write("\t".join(row) + "\n")
            n += 1
    return n


def read_event_log(path: Union[str, Path], store: ContentStore) -> List[MethodEvent]:
    events = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != len(LOG_FIELDS):
                raise FormatError(f"{path}:{lineno}: expected {len(LOG_FIELDS)} fields")
            kind, commit, group, ts, fpath, sig, ref = parts
            events.append(MethodEvent(kind, sig, store.get(ref), fpath, commit, int(group), int(ts)))
    return events


def write_groups(groups: Sequence[AuthorGroup], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for g in groups:
            fh.write(json.dumps({"group_id": g.group_id, "display_name": g.display_name,
                                 "aliases": sorted(map(list, g.aliases))}) + "\n")
