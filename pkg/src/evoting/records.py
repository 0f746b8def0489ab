"""Line-delimited record files: one self-describing JSON object per line, UTF-8.

Serialization sorts keys so identical values always produce identical bytes.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Iterator, Mapping
from pathlib import Path

from .errors import SchemaError


def dumps_record(record: Mapping) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False)


def write_jsonl(path: str | Path, records: Iterable[Mapping]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(dumps_record(record))
            fh.write("\n")


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: invalid record: {exc}") from None
            if not isinstance(record, dict):
                raise SchemaError(f"{path}:{lineno}: record is not an object")
            yield record
