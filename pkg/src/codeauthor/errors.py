"""Exception types shared across the package."""


class CodeAuthorError(Exception):
    """Base class for all errors raised by codeauthor."""


class ConfigurationError(CodeAuthorError):
    """Unknown front-end, invalid hyperparameter, malformed config file."""


class ParseError(CodeAuthorError):
    """Source text could not be parsed by a front-end."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class FormatError(CodeAuthorError):
    """A serialized document (tree, vocabulary, model, ...) is malformed."""

    def __init__(self, message, node_id=None):
        self.node_id = node_id
        if node_id is not None:
            message = f"node {node_id}: {message}"
        super().__init__(message)


class EmptyCorpusError(CodeAuthorError):
    """No usable samples were left to build a vocabulary, corpus or split."""


class DivergenceError(CodeAuthorError):
    """Training produced a non-finite loss."""

    def __init__(self, step, loss):
        self.step = step
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} at step {step}")
