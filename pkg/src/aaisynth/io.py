"""Line-delimited JSON persistence with atomic replacement and append-only logs."""

from __future__ import annotations

import json
import os
import tempfile
import threading
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, TypeVar

from .domain import ValidationError

T = TypeVar("T")


class SchemaError(ValidationError):
    """A persisted record failed to decode; carries the file and line."""

    def __init__(self, path: Path | str, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = Path(path)
        self.line = line


def dumps_line(record: dict[str, Any]) -> str:
    return json.dumps(record, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def atomic_write_text(path: Path | str, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_jsonl(path: Path | str, records: Iterable[dict[str, Any]]) -> None:
    atomic_write_text(path, "".join(dumps_line(r) + "\n" for r in records))


def write_json(path: Path | str, obj: Any) -> None:
    atomic_write_text(path, json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True) + "\n")


def iter_jsonl(path: Path | str, decode: Callable[[dict[str, Any]], T]) -> Iterator[T]:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield decode(json.loads(line))
            except json.JSONDecodeError as exc:
                raise SchemaError(path, lineno, f"invalid JSON: {exc.msg}") from None
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(path, lineno, str(exc)) from None


def read_jsonl(path: Path | str, decode: Callable[[dict[str, Any]], T]) -> list[T]:
    return list(iter_jsonl(path, decode))


class JsonlAppender:
    """Single-writer append log; each record is flushed and fsynced before returning.

    A torn final line (crash mid-write) is dropped on the next open so resumed
    runs never see a half record.
    """

    def __init__(self, path: Path | str):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._repair_tail()

    def _repair_tail(self) -> None:
        if not self.path.exists():
            return
        data = self.path.read_bytes()
        if data and not data.endswith(b"\n"):
            keep = data[: data.rfind(b"\n") + 1]
            atomic_write_text(self.path, keep.decode("utf-8"))

    def append(self, record: dict[str, Any]) -> None:
        line = dumps_line(record) + "\n"
        with self._lock, self.path.open("a", encoding="utf-8", newline="\n") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())
