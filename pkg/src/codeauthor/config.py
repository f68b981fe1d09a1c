"""Experiment configuration in a small ``key = value`` text format.

Blank lines and ``#`` comments are ignored. A value written as
``a | b | c`` declares a grid; :func:`expand_grid` enumerates it.
"""

import itertools
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from codeauthor.errors import ConfigurationError
from codeauthor.forest import ForestConfig
from codeauthor.nn import NnConfig
from codeauthor.selection import SelectionConfig
from codeauthor.splits import SplitConfig
from codeauthor.syntax.paths import PathLimits

MODELS = ("pbrf", "pbnn")
SPLITS = ("kfold", "context", "time")


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "pbrf"
    samples: str = ""
    frontend: str = "java"
    seed: int = 0
    # path extraction
    max_path_length: int = 8
    max_path_width: int = 2
    # feature selection (forest only)
    keep_fraction: Optional[float] = 0.07
    keep_count: Optional[int] = None
    # forest
    n_trees: int = 300
    max_depth: Optional[int] = None
    features_per_split: str = "sqrt"
    bootstrap: bool = True
    # network
    embedding_dim: int = 128
    learning_rate: float = 0.01
    epochs: int = 20
    batch_size: int = 32
    max_contexts: int = 500
    dropout_keep: float = 0.75
    # evaluation split
    split: str = "kfold"
    k: int = 10
    depths: Tuple[int, ...] = tuple(range(1, 10))
    min_ratio: float = 0.15
    max_ratio: float = 0.35
    attempts: int = 100

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigurationError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.split not in SPLITS:
            raise ConfigurationError(f"split must be one of {SPLITS}, got {self.split!r}")
        if self.keep_count is not None and self.keep_fraction is not None:
            object.__setattr__(self, "keep_fraction", None)
        # build the component configs once so their validation runs here
        self.limits(), self.selection(), self.forest(), self.nn(), self.split_config()
        if not self.depths or min(self.depths) < 1:
            raise ConfigurationError("depths must be positive")

    def limits(self) -> PathLimits:
        return PathLimits(self.max_path_length, self.max_path_width)

    def selection(self) -> SelectionConfig:
        return SelectionConfig(self.keep_fraction, self.keep_count)

    def forest(self) -> ForestConfig:
        per_split = self.features_per_split
        if isinstance(per_split, str) and per_split.isdigit():
            per_split = int(per_split)
        return ForestConfig(self.n_trees, self.max_depth, per_split, self.bootstrap, self.seed)

    def nn(self) -> NnConfig:
        return NnConfig(self.embedding_dim, self.learning_rate, self.epochs, self.batch_size,
                        self.max_contexts, self.seed, self.dropout_keep)

    def split_config(self) -> SplitConfig:
        return SplitConfig(self.min_ratio, self.max_ratio, self.attempts, self.seed)

    def check_files(self) -> None:
        if not self.samples:
            raise ConfigurationError("no samples file configured")
        if not Path(self.samples).is_file():
            raise ConfigurationError(f"samples file not found: {self.samples}")

    def items(self) -> List[Tuple[str, object]]:
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def dumps(self) -> str:
        return "".join(f"{k} = {format_value(v)}\n" for k, v in self.items())


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(map(str, value))
    return str(value)


def _parse_depths(text: str) -> Tuple[int, ...]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return tuple(out)


def parse_value(key: str, text: str):
    if key not in _FIELD_TYPES:
        raise ConfigurationError(f"unknown config key {key!r}")
    text = text.strip()
    kind = str(_FIELD_TYPES[key])
    try:
        if key == "depths":
            return _parse_depths(text)
        if text.lower() == "none" and "Optional" in kind:
            return None
        if "bool" in kind:
            if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return text.lower() in ("true", "1", "yes")
        if "int" in kind:
            return int(text)
        if "float" in kind:
            value = float(text)
            if not math.isfinite(value):
                raise ValueError(text)
            return value
        return text
    except ValueError:
        raise ConfigurationError(f"bad value for {key}: {text!r}") from None


def parse_config_text(text: str) -> Dict[str, List[str]]:
    """Raw ``key -> [alternatives]`` mapping; later keys override earlier ones."""
    raw: Dict[str, List[str]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigurationError(f"config line {lineno}: expected 'key = value'")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigurationError(f"config line {lineno}: unknown key {key!r}")
        raw[key] = [v.strip() for v in value.split("|")]
    return raw


def expand_grid(raw: Dict[str, List[str]], base: ExperimentConfig = ExperimentConfig()) -> List[ExperimentConfig]:
    """One config per combination of grid alternatives, in declaration order."""
    keys = list(raw)
    out = []
    for combo in itertools.product(*(raw[k] for k in keys)):
        values = {k: parse_value(k, v) for k, v in zip(keys, combo)}
        if "keep_count" in values and values["keep_count"] is not None and "keep_fraction" not in values:
            values["keep_fraction"] = None
        out.append(replace(base, **values))
    return out


def load_config(path=None, overrides: Optional[List[str]] = None) -> List[ExperimentConfig]:
    """Configs from a file plus ``key=value`` overrides (overrides win)."""
    raw = parse_config_text(Path(path).read_text(encoding="utf-8")) if path else {}
    for item in overrides or ():
        raw.update(parse_config_text(item))
    return expand_grid(raw)
