"""Labelled code samples and their JSON-lines storage."""

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, List, Union

from codeauthor.errors import FormatError
from codeauthor.splits import SampleRef


@dataclass
class Sample:
    sample_id: str
    author: str
    source: str
    path: str = ""
    timestamp: int = 0
    frontend: str = "java"

    def ref(self) -> SampleRef:
        return SampleRef(self.sample_id, self.author, self.path, self.timestamp)


def write_samples(samples: Iterable[Sample], path: Union[str, Path]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(asdict(s), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_samples(path: Union[str, Path]) -> List[Sample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(Sample(**json.loads(line)))
            except (json.JSONDecodeError, TypeError) as exc:
                raise FormatError(f"{path}:{lineno}: bad sample record ({exc})") from None
    ids = [s.sample_id for s in out]
    if len(set(ids)) != len(ids):
        raise FormatError(f"{path}: duplicate sample ids")
    return out


def author_labels(samples: Iterable[Sample]):
    """Dense label per author, in sorted author order."""
    names = sorted({s.author for s in samples})
    return {a: i for i, a in enumerate(names)}
