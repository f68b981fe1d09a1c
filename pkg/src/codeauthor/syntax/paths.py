"""Leaf-to-leaf path-contexts of an AST."""

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Union

from codeauthor.errors import ConfigurationError
from codeauthor.syntax.tree import AstTree, normalize_token

UP = "↑"
DOWN = "↓"

Limit = Union[int, float]


@dataclass(frozen=True)
class PathLimits:
    """Bounds on path length (vertex count) and width (child-index gap at the top node).

    ``math.inf`` disables a bound.
    """

    max_length: Limit = 8
    max_width: Limit = 2

    def __post_init__(self):
        if self.max_length < 2:
            raise ConfigurationError(f"max_length must be >= 2, got {self.max_length}")
        if self.max_width < 1:
            raise ConfigurationError(f"max_width must be >= 1, got {self.max_width}")

    @classmethod
    def unlimited(cls):
        return cls(math.inf, math.inf)


class PathContext(NamedTuple):
    start_token: str
    path: str
    end_token: str


def enumerate_path_contexts(tree: AstTree, limits: PathLimits = PathLimits()) -> List[PathContext]:
    """All leaf-pair path-contexts within ``limits``.

    Each unordered pair of distinct leaves appears at most once, oriented so
    the start leaf precedes the end leaf in depth-first order. Output is
    sorted by (start leaf, end leaf) position.
    """
    nodes = tree.nodes
    leaf_pos = {leaf.node_id: i for i, leaf in enumerate(tree.leaves)}
    max_up = limits.max_length - 1  # vertices on one side of the top node

    # below[n]: (leaf position, [leaf, ..., n]) for leaves within reach of n
    below = {}
    found = []
    for node in reversed(list(tree.preorder())):
        if node.is_leaf:
            below[node.node_id] = [(leaf_pos[node.node_id], (node.node_id,))]
            continue
        child_lists = [below.pop(c) for c in node.children]
        for i, left in enumerate(child_lists):
            if not left:
                continue
            for j in range(i + 1, len(child_lists)):
                if j - i > limits.max_width:
                    break
                for lpos, lchain in left:
                    for rpos, rchain in child_lists[j]:
                        if len(lchain) + len(rchain) + 1 > limits.max_length:
                            continue
                        found.append((lpos, rpos, lchain, node.node_id, rchain))
        merged = []
        for chains in child_lists:
            for pos, chain in chains:
                if len(chain) < max_up:
                    merged.append((pos, chain + (node.node_id,)))
        below[node.node_id] = merged

    found.sort(key=lambda item: (item[0], item[1]))
    result = []
    for _lpos, _rpos, lchain, top, rchain in found:
        up = UP.join(nodes[n].node_type for n in lchain)
        down = DOWN.join(nodes[n].node_type for n in reversed(rchain))
        path = f"{up}{UP}{nodes[top].node_type}{DOWN}{down}"
        result.append(PathContext(normalize_token(nodes[lchain[0]].token), path,
                                  normalize_token(nodes[rchain[0]].token)))
    return result


def path_length(path: str) -> int:
    """Number of vertices encoded in a path string."""
    return path.count(UP) + path.count(DOWN) + 1


def abbreviate(path: str) -> str:
    """Display form using capital letters of each node type, e.g. SN↑MD↓SVD↓SN."""
    out = []
    label = []
    for ch in path:
        if ch in (UP, DOWN):
            out.append("".join(c for c in "".join(label) if c.isupper()) or "".join(label))
            out.append(ch)
            label = []
        else:
            label.append(ch)
    out.append("".join(c for c in "".join(label) if c.isupper()) or "".join(label))
    return "".join(out)
