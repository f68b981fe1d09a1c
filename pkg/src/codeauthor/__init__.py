"""Language-agnostic source-code authorship attribution on AST path-contexts."""

__version__ = "0.1.0"
