"""Line-delimited JSON helpers shared by the CLI stages."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator, Union


class JsonlError(ValueError):
    """A line of an input file is not a JSON object."""


def read_jsonl(path: Union[str, Path]) -> Iterator[dict]:
    """Yield one object per nonempty line; errors carry the line number."""
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
            except ValueError as exc:
                raise JsonlError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            if not isinstance(payload, dict):
                raise JsonlError(f"{path}:{lineno}: expected a JSON object")
            yield payload


def write_jsonl(path: Union[str, Path], payloads: Iterable[dict]) -> int:
    """Write compact one-object-per-line JSON; returns the line count."""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for payload in payloads:
            handle.write(json.dumps(payload, separators=(",", ":")) + "\n")
            count += 1
    return count
