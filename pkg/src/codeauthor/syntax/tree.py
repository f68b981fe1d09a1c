"""Immutable AST container and the plain-text tree-document format.

Tree-document grammar (one node per line, UTF-8, root first)::

    document := header? line+
    header   := "#" any-text NEWLINE          (comment lines are ignored anywhere)
    line     := node_id TAB node_type TAB token TAB children NEWLINE
    node_id  := non-negative decimal integer, unique within the document
    node_type:= any text without TAB / NEWLINE / "↑" / "↓"
    token    := "-"                            (internal node)
              | JSON string literal            (leaf, e.g. "square")
    children := "-"                            (leaf)
              | node_id (" " node_id)*         (ordered child list)

The first node line is the root. Node ids need not be dense; ``load_tree``
renumbers them in document order, so ``dump_tree(load_tree(d))`` equals ``d``
whenever ``d`` already uses dense ids in document order.
"""

import json
import re
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from codeauthor.errors import FormatError

TREE_HEADER = "# codeauthor tree v1"
EMPTY_TOKEN = "<EMPTY>"
DELIMITER = "\t"

_WHITESPACE = re.compile(r"\s+")


def normalize_token(raw: str) -> str:
    """Make a raw source token safe for line-oriented vocabulary files."""
    token = _WHITESPACE.sub("_", raw.strip().replace(DELIMITER, "_"))
    return token or EMPTY_TOKEN


@dataclass(frozen=True)
class AstNode:
    node_id: int
    node_type: str
    token: Optional[str]
    children: Tuple[int, ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children


class AstTree:
    """A rooted ordered tree of typed nodes. Leaves carry tokens.

    Construction validates every invariant (single root, unique parents,
    tokens exactly on leaves, acyclic), so a built tree is always well formed.
    """

    def __init__(self, nodes: Sequence[AstNode], root_id: int = 0):
        self.nodes = tuple(nodes)
        self.root_id = root_id
        self._validate()
        self.parent = self._parents()
        self.leaves = tuple(n for n in self.preorder() if n.is_leaf)

    def __len__(self):
        return len(self.nodes)

    def __getitem__(self, node_id):
        return self.nodes[node_id]

    def __eq__(self, other):
        if not isinstance(other, AstTree):
            return NotImplemented
        return self.root_id == other.root_id and self.nodes == other.nodes

    def __repr__(self):
        return f"AstTree({len(self.nodes)} nodes, {len(self.leaves)} leaves)"

    def _validate(self):
        n = len(self.nodes)
        if n == 0:
            raise FormatError("tree has no nodes")
        if not 0 <= self.root_id < n:
            raise FormatError("root id out of range", node_id=self.root_id)
        seen_parent = [False] * n
        for i, node in enumerate(self.nodes):
            if node.node_id != i:
                raise FormatError("node ids must equal their position", node_id=node.node_id)
            if node.is_leaf and node.token is None:
                raise FormatError("leaf without token", node_id=i)
            if not node.is_leaf and node.token is not None:
                raise FormatError("internal node carries a token", node_id=i)
            for c in node.children:
                if not 0 <= c < n:
                    raise FormatError(f"child {c} does not exist", node_id=i)
                if c == self.root_id:
                    raise FormatError("root cannot be a child", node_id=i)
                if seen_parent[c]:
                    raise FormatError(f"child {c} has more than one parent", node_id=i)
                seen_parent[c] = True
        # every non-root node has exactly one parent; reachability rules out cycles
        visited = 0
        stack = [self.root_id]
        while stack:
            visited += 1
            stack.extend(self.nodes[stack.pop()].children)
        if visited != n:
            orphan = next(i for i in range(n) if i != self.root_id and not seen_parent[i])
            raise FormatError("node unreachable from root", node_id=orphan)

    def _parents(self):
        parent = [-1] * len(self.nodes)
        for node in self.nodes:
            for c in node.children:
                parent[c] = node.node_id
        return tuple(parent)

    def preorder(self):
        """Depth-first, left-to-right traversal."""
        stack = [self.root_id]
        while stack:
            node = self.nodes[stack.pop()]
            yield node
            stack.extend(reversed(node.children))

    def depth(self, node_id: int) -> int:
        d = 0
        while node_id != self.root_id:
            node_id = self.parent[node_id]
            d += 1
        return d

    def tokens(self):
        return [leaf.token for leaf in self.leaves]


class TreeBuilder:
    """Incremental construction helper used by parser front-ends."""

    def __init__(self):
        self._types = []
        self._tokens = []
        self._children = []

    def leaf(self, node_type: str, token: str) -> int:
        return self._add(node_type, normalize_token(token), ())

    def node(self, node_type: str, children: Sequence[int], token: str = None) -> int:
        """Internal node; a childless construct becomes a leaf holding ``token``."""
        if not children:
            return self.leaf(node_type, token if token is not None else "")
        return self._add(node_type, None, tuple(children))

    def _add(self, node_type, token, children):
        self._types.append(node_type)
        self._tokens.append(token)
        self._children.append(children)
        return len(self._types) - 1

    def build(self, root: int) -> AstTree:
        # renumber in preorder so node ids follow source order with root 0
        order = []
        stack = [root]
        while stack:
            i = stack.pop()
            order.append(i)
            stack.extend(reversed(self._children[i]))
        new_id = {old: new for new, old in enumerate(order)}
        nodes = [
            AstNode(new_id[old], self._types[old], self._tokens[old],
                    tuple(new_id[c] for c in self._children[old]))
            for old in order
        ]
        return AstTree(nodes, 0)


def dump_tree(tree: AstTree) -> str:
    lines = [TREE_HEADER]
    for node in tree.preorder():
        token = "-" if node.token is None else json.dumps(node.token, ensure_ascii=False)
        children = " ".join(map(str, node.children)) if node.children else "-"
        lines.append(f"{node.node_id}\t{node.node_type}\t{token}\t{children}")
    return "\n".join(lines) + "\n"


def load_tree(document: str) -> AstTree:
    raw = []
    for lineno, line in enumerate(document.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            node_id = fields[0] if fields else None
            raise FormatError(f"line {lineno}: expected 4 tab-separated fields, got {len(fields)}",
                              node_id=node_id)
        sid, node_type, token, children = fields
        try:
            node_id = int(sid)
        except ValueError:
            raise FormatError(f"line {lineno}: bad node id {sid!r}") from None
        if not node_type or "↑" in node_type or "↓" in node_type:
            raise FormatError("invalid node type", node_id=node_id)
        if token == "-":
            tok = None
        else:
            try:
                tok = json.loads(token)
            except json.JSONDecodeError:
                raise FormatError(f"token is not a JSON string: {token!r}", node_id=node_id) from None
            if not isinstance(tok, str):
                raise FormatError("token is not a string", node_id=node_id)
        try:
            kids = () if children == "-" else tuple(int(c) for c in children.split())
        except ValueError:
            raise FormatError(f"bad child list {children!r}", node_id=node_id) from None
        raw.append((node_id, node_type, tok, kids))
    if not raw:
        raise FormatError("document contains no nodes")

    index = {}
    for pos, (node_id, *_rest) in enumerate(raw):
        if node_id < 0:
            raise FormatError("negative node id", node_id=node_id)
        if node_id in index:
            raise FormatError("duplicate node id", node_id=node_id)
        index[node_id] = pos

    has_parent = set()
    nodes = []
    for pos, (node_id, node_type, tok, kids) in enumerate(raw):
        mapped = []
        for c in kids:
            if c not in index:
                raise FormatError(f"unknown child {c}", node_id=node_id)
            if c in has_parent:
                raise FormatError(f"child {c} has more than one parent", node_id=node_id)
            has_parent.add(c)
            mapped.append(index[c])
        if tok is None and not kids:
            raise FormatError("leaf without token", node_id=node_id)
        if tok is not None and kids:
            raise FormatError("internal node carries a token", node_id=node_id)
        nodes.append(AstNode(pos, node_type, tok, tuple(mapped)))

    root = raw[0][0]
    if root in has_parent:
        raise FormatError("root appears as a child", node_id=root)
    roots = [node_id for node_id, *_ in raw if node_id not in has_parent]
    if len(roots) > 1:
        raise FormatError("more than one root", node_id=roots[1])
    try:
        return AstTree(nodes, 0)
    except FormatError as err:
        # report the document's own id, not our renumbered one
        if err.node_id is not None and 0 <= err.node_id < len(raw):
            raise FormatError(str(err).split(": ", 1)[-1], node_id=raw[err.node_id][0]) from None
        raise
