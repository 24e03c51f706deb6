from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List

import numpy as np
import orjson

_OPTS = orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_APPEND_NEWLINE


def _default(obj: Any) -> Any:
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def dumps(record: Dict[str, Any]) -> bytes:
    """One sorted-key JSON line. No timestamps are added, so equal runs give equal bytes."""
    return orjson.dumps(record, default=_default, option=_OPTS)


class RecordWriter:
    """Append-only line-delimited JSON file."""

    def __init__(self, path: str | Path, truncate: bool = True):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if truncate:
            self.path.write_bytes(b"")

    def write(self, record: Dict[str, Any]) -> None:
        with self.path.open("ab") as f:
            f.write(dumps(record))

    def write_many(self, records: Iterable[Dict[str, Any]]) -> None:
        with self.path.open("ab") as f:
            for r in records:
                f.write(dumps(r))


def iter_records(path: str | Path) -> Iterator[Dict[str, Any]]:
    with Path(path).open("rb") as f:
        for line in f:
            if line.strip():
                yield orjson.loads(line)


def read_records(path: str | Path) -> List[Dict[str, Any]]:
    return list(iter_records(path))
