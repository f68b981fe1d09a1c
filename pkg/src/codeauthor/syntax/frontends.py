"""Registry of parser front-ends."""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

from codeauthor.errors import ConfigurationError
from codeauthor.syntax import javalike
from codeauthor.syntax.tree import AstTree, load_tree


@dataclass(frozen=True)
class Frontend:
    name: str
    extensions: Tuple[str, ...]
    parse: Callable[[str], AstTree]
    # None when the front-end cannot locate methods (e.g. tree documents)
    find_methods: Optional[Callable[[str], List[javalike.MethodDecl]]] = None


_REGISTRY: Dict[str, Frontend] = {}


def register_frontend(frontend: Frontend) -> None:
    _REGISTRY[frontend.name] = frontend


def get_frontend(frontend_id: str) -> Frontend:
    try:
        return _REGISTRY[frontend_id]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise ConfigurationError(f"unknown front-end {frontend_id!r} (known: {known})") from None


def available_frontends() -> List[str]:
    return sorted(_REGISTRY)


def parse_source(source: str, frontend_id: str = "java") -> AstTree:
    return get_frontend(frontend_id).parse(source)


register_frontend(Frontend("java", (".java",), javalike.parse, javalike.find_methods))
register_frontend(Frontend("tree", (".tree",), load_tree))
