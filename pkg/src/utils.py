"""
Utility functions for the VulSATD pipeline.
Includes JSONL/JSON IO, atomic writes and content digests.
"""

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Tuple, Union

from .errors import DatasetFormatError

PathLike = Union[str, Path]


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Write text via a temp file in the target directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=str(path.parent))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
    return path


def atomic_write_bytes(path: PathLike, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=str(path.parent))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
    return path


def dumps_line(obj: Dict[str, Any]) -> str:
    """One JSONL line (no trailing newline), UTF-8 kept readable."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=False)


def write_jsonl(path: PathLike, rows: Iterable[Dict[str, Any]]) -> Path:
    """Atomically write rows as line-delimited JSON."""
    text = "".join(dumps_line(row) + "\n" for row in rows)
    return atomic_write_text(path, text)


def iter_jsonl_lines(path: PathLike) -> Iterator[Tuple[int, str]]:
    """
    Yield (1-based line number, decoded line) for every non-blank line.

    Raises:
        DatasetFormatError: a line is not valid UTF-8 (names the line)
    """
    with open(path, "rb") as f:
        for line_number, raw in enumerate(f, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise DatasetFormatError(
                    f"invalid UTF-8 at byte {e.start} ({e.reason})", line_number=line_number
                ) from e
            if line.strip():
                yield line_number, line


def read_jsonl(path: PathLike) -> List[Dict[str, Any]]:
    """Read line-delimited JSON objects; blank lines are skipped."""
    rows = []
    for line_number, line in iter_jsonl_lines(path):
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise DatasetFormatError(f"invalid JSON ({e.msg})", line_number=line_number) from e
    return rows


def write_json(path: PathLike, obj: Any) -> Path:
    return atomic_write_text(path, json.dumps(obj, ensure_ascii=False, indent=2) + "\n")


def file_digest(path: PathLike, algorithm: str = "sha256") -> str:
    """Content hash of a file, streamed in 1 MiB chunks."""
    h = hashlib.new(algorithm)
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return f"{algorithm}:{h.hexdigest()}"


def text_digest(text: str, algorithm: str = "sha256") -> str:
    h = hashlib.new(algorithm)
    h.update(text.encode("utf-8"))
    return f"{algorithm}:{h.hexdigest()}"


def format_percent(part: int, total: int) -> str:
    """'1.42%' style percentage; 0 total renders as 0.00%."""
    if total <= 0:
        return "0.00%"
    return f"{100.0 * part / total:.2f}%"
