"""
Character-level C scanner.

Splits C text into segments (code, preprocessor directive, string literal,
char literal, line comment, block comment) without a grammar. Comment
stripping and function segmentation are both built on these segments, so
comment delimiters inside literals and braces inside directives are never
mistaken for the real thing.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List

from .errors import LexerError


class SegmentKind(Enum):
    CODE = "code"
    DIRECTIVE = "directive"
    STRING = "string"
    CHAR = "char"
    LINE_COMMENT = "line_comment"
    BLOCK_COMMENT = "block_comment"

    @property
    def is_comment(self) -> bool:
        return self in (SegmentKind.LINE_COMMENT, SegmentKind.BLOCK_COMMENT)


@dataclass(frozen=True)
class Segment:
    """Half-open character span [start, end) of one kind."""

    kind: SegmentKind
    start: int
    end: int

    def text(self, source: str) -> str:
        return source[self.start:self.end]


def byte_offset(source: str, index: int) -> int:
    """Convert a character index into a UTF-8 byte offset."""
    return len(source[:index].encode("utf-8"))


def _skip_literal(source: str, i: int, quote: str) -> int:
    """Return the index just past the literal opened at i. Unterminated literals stop at end of line."""
    n = len(source)
    j = i + 1
    while j < n:
        c = source[j]
        if c == "\\":
            j += 2
            continue
        if c == quote:
            return j + 1
        if c == "\n":
            return j
        j += 1
    return n


def _line_comment_end(source: str, i: int) -> int:
    """End of a // comment starting at i (exclusive of the newline; honours backslash splices)."""
    n = len(source)
    j = i + 2
    while j < n:
        if source[j] == "\n":
            k = j - 1
            if k >= 0 and source[k] == "\r":
                k -= 1
            if k >= i + 2 and source[k] == "\\":
                j += 1
                continue
            return j
        j += 1
    return n


def scan(source: str) -> List[Segment]:
    """
    Segment C source text.

    Raises:
        LexerError: on an unterminated block comment (offset of its opening).
    """
    segments: List[Segment] = []
    n = len(source)
    i = 0
    run_start = 0
    run_kind = SegmentKind.CODE
    in_directive = False
    at_line_start = True

    def flush(upto: int) -> None:
        if upto > run_start:
            segments.append(Segment(run_kind, run_start, upto))

    while i < n:
        c = source[i]
        nxt = source[i + 1] if i + 1 < n else ""

        if c == "/" and nxt in ("/", "*"):
            flush(i)
            if nxt == "/":
                end = _line_comment_end(source, i)
                segments.append(Segment(SegmentKind.LINE_COMMENT, i, end))
            else:
                close = source.find("*/", i + 2)
                if close < 0:
                    raise LexerError("unterminated block comment", byte_offset(source, i))
                end = close + 2
                segments.append(Segment(SegmentKind.BLOCK_COMMENT, i, end))
            i = end
            run_start = i
            run_kind = SegmentKind.DIRECTIVE if in_directive else SegmentKind.CODE
            continue

        if c in ('"', "'"):
            end = _skip_literal(source, i, c)
            if in_directive:
                # `#include "x.h"` stays one directive segment
                i = end
                continue
            flush(i)
            kind = SegmentKind.STRING if c == '"' else SegmentKind.CHAR
            segments.append(Segment(kind, i, end))
            at_line_start = False
            i = end
            run_start = i
            run_kind = SegmentKind.CODE
            continue

        if c == "#" and at_line_start and not in_directive:
            flush(i)
            in_directive = True
            run_start = i
            run_kind = SegmentKind.DIRECTIVE

        if c == "\n":
            prev = i - 1
            if prev >= 0 and source[prev] == "\r":
                prev -= 1
            spliced = prev >= 0 and source[prev] == "\\"
            if in_directive and not spliced:
                # the newline itself belongs to code
                flush(i)
                in_directive = False
                run_start = i
                run_kind = SegmentKind.CODE
            at_line_start = True
        elif not c.isspace():
            at_line_start = False

        i += 1

    flush(n)
    return segments


def clean_comment(raw: str) -> str:
    """
    Interior text of one comment: delimiters removed, leading `*` gutters and
    surrounding blank lines trimmed, inner lines stripped.
    """
    if raw.startswith("/*"):
        interior = raw[2:-2] if raw.endswith("*/") and len(raw) >= 4 else raw[2:]
        lines = [line.strip().lstrip("*").strip() for line in interior.split("\n")]
    else:
        lines = [raw[2:].lstrip("/").strip()]
    while lines and not lines[0]:
        lines.pop(0)
    while lines and not lines[-1]:
        lines.pop()
    return "\n".join(lines)
