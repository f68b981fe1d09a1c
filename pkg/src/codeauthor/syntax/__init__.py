"""AST construction and path-context extraction."""

from codeauthor.syntax.frontends import (
    Frontend,
    available_frontends,
    get_frontend,
    parse_source,
    register_frontend,
)
from codeauthor.syntax.paths import PathContext, PathLimits, enumerate_path_contexts
from codeauthor.syntax.tree import AstNode, AstTree, dump_tree, load_tree, normalize_token

__all__ = [
    "AstNode", "AstTree", "Frontend", "PathContext", "PathLimits",
    "available_frontends", "dump_tree", "enumerate_path_contexts", "get_frontend",
    "load_tree", "normalize_token", "parse_source", "register_frontend",
]
