"""
Function corpus: ingestion, extraction from raw C, and bimodal input preparation.

Records travel as line-delimited JSON with the fields
`id, project, dataset, code, leading_comment, satd, vuln`. Prepared corpora
add `comment_text`, `code_text` and `mode`.
"""

import json
import logging
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, StrictBool, StrictInt, StrictStr, ValidationError

from .config import InputMode
from .errors import DatasetFormatError, DuplicateRecordError, LexerError
from .lexer import Segment, SegmentKind, byte_offset, clean_comment, scan
from .utils import PathLike, format_percent, iter_jsonl_lines, write_jsonl

logger = logging.getLogger(__name__)

SUPPORTED_FORMATS = ("JSONL",)


@dataclass(frozen=True)
class FunctionRecord:
    """One C function with its leading comment and optional SATD/vulnerability labels."""

    id: str
    project: str
    dataset: str
    code: str
    leading_comment: str = ""
    satd_label: Optional[bool] = None
    vuln_label: Optional[bool] = None

    @property
    def is_fully_labeled(self) -> bool:
        return self.satd_label is not None and self.vuln_label is not None

    def label(self, task: str) -> Optional[bool]:
        return self.satd_label if task == "satd" else self.vuln_label

    def with_labels(self, satd: Optional[bool] = None, vuln: Optional[bool] = None) -> "FunctionRecord":
        return replace(
            self,
            satd_label=self.satd_label if satd is None else satd,
            vuln_label=self.vuln_label if vuln is None else vuln,
        )

    def to_dict(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {
            "id": self.id,
            "project": self.project,
            "dataset": self.dataset,
            "code": self.code,
            "leading_comment": self.leading_comment,
        }
        if self.satd_label is not None:
            row["satd"] = self.satd_label
        if self.vuln_label is not None:
            row["vuln"] = self.vuln_label
        return row


@dataclass(frozen=True)
class PreparedInput:
    """The (comment, code) pair fed to the tokenizer, in IN or OUT configuration."""

    id: str
    comment_text: str
    code_text: str
    mode: InputMode
    satd_label: Optional[bool] = None
    vuln_label: Optional[bool] = None

    def label(self, task: str) -> Optional[bool]:
        return self.satd_label if task == "satd" else self.vuln_label


class _RecordSchema(BaseModel):
    """Wire schema of one dataset line."""

    model_config = ConfigDict(extra="ignore")

    id: Union[StrictStr, StrictInt]
    project: StrictStr
    dataset: StrictStr
    code: StrictStr
    leading_comment: StrictStr = ""
    satd: Optional[StrictBool] = None
    vuln: Optional[StrictBool] = None


def _validate_code(code: str) -> Optional[str]:
    if not code.strip():
        return "code is empty"
    if "{" not in code or "}" not in code:
        return "code has no function body (missing '{' or '}')"
    return None


def ingest_dataset(path: PathLike, format: str = "JSONL") -> List[FunctionRecord]:
    """
    Read a labeled function dataset.

    Args:
        path: Line-delimited record file
        format: Only "JSONL" is supported

    Returns:
        Records in file order. Missing `satd`/`vuln` fields give unlabeled records.

    Raises:
        DatasetFormatError: malformed line (names its line number)
        DuplicateRecordError: repeated id (names both line numbers)
    """
    if format.upper() not in SUPPORTED_FORMATS:
        raise DatasetFormatError(f"unsupported dataset format {format!r}")
    path = Path(path)
    if not path.exists():
        raise DatasetFormatError(f"dataset file not found: {path}")

    records: List[FunctionRecord] = []
    seen: Dict[str, int] = {}
    for line_number, line in iter_jsonl_lines(path):
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as e:
            raise DatasetFormatError(f"invalid JSON ({e.msg})", line_number=line_number) from e
        if not isinstance(raw, dict):
            raise DatasetFormatError("record is not a JSON object", line_number=line_number)
        try:
            row = _RecordSchema.model_validate(raw)
        except ValidationError as e:
            problems = "; ".join(f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors())
            raise DatasetFormatError(problems, line_number=line_number) from e

        problem = _validate_code(row.code)
        if problem:
            raise DatasetFormatError(problem, line_number=line_number)

        record_id = str(row.id)
        if record_id in seen:
            raise DuplicateRecordError(record_id, seen[record_id], line_number)
        seen[record_id] = line_number

        records.append(
            FunctionRecord(
                id=record_id,
                project=row.project,
                dataset=row.dataset,
                code=row.code,
                leading_comment=row.leading_comment,
                satd_label=row.satd,
                vuln_label=row.vuln,
            )
        )
    logger.info(f"Ingested {len(records)} records from {path}")
    return records


def write_dataset(records: Iterable[FunctionRecord], path: PathLike) -> Path:
    """Serialize records in the ingest format (atomic write)."""
    return write_jsonl(path, (r.to_dict() for r in records))


# ---------------------------------------------------------------------------
# Comments
# ---------------------------------------------------------------------------

def strip_internal_comments(code: str) -> Tuple[str, List[str]]:
    """
    Remove every comment outside string/char literals.

    Returns:
        (stripped code, comment interiors in source order). Bytes outside
        comments are untouched.

    Raises:
        LexerError: unterminated block comment (with its start offset)
    """
    kept: List[str] = []
    comments: List[str] = []
    for seg in scan(code):
        text = seg.text(code)
        if seg.kind.is_comment:
            comments.append(clean_comment(text))
        else:
            kept.append(text)
    return "".join(kept), comments


def prepare_input(record: FunctionRecord, mode: InputMode) -> PreparedInput:
    """
    Build the bimodal input for one record.

    IN keeps the code verbatim and uses only the leading comment. OUT moves the
    internal comments next to the leading comment (newline-joined, source
    order) and strips them from the code.
    """
    mode = InputMode(mode)
    if mode is InputMode.IN:
        comment_text = record.leading_comment
        code_text = record.code
    else:
        code_text, internal = strip_internal_comments(record.code)
        parts = [record.leading_comment] + internal
        comment_text = "\n".join(p for p in parts if p)
    return PreparedInput(
        id=record.id,
        comment_text=comment_text,
        code_text=code_text,
        mode=mode,
        satd_label=record.satd_label,
        vuln_label=record.vuln_label,
    )


def all_comment_text(record: FunctionRecord) -> str:
    """Leading plus internal comments: what annotation always looks at."""
    return prepare_input(record, InputMode.OUT).comment_text


def write_prepared(records: Iterable[FunctionRecord], mode: InputMode, path: PathLike) -> Path:
    """Write records with `comment_text`/`code_text`/`mode` added."""
    def rows():
        for record in records:
            prepared = prepare_input(record, mode)
            row = record.to_dict()
            row["comment_text"] = prepared.comment_text
            row["code_text"] = prepared.code_text
            row["mode"] = prepared.mode.value
            yield row

    return write_jsonl(path, rows())


# ---------------------------------------------------------------------------
# Extraction from raw C
# ---------------------------------------------------------------------------

_NON_FUNCTION_HEAD = re.compile(r"^\s*typedef\b")


def _function_name(header_code: str) -> Optional[str]:
    """Identifier right before the parameter list of a function header."""
    text = header_code.rstrip()
    if not text.endswith(")"):
        return None
    depth = 0
    for i in range(len(text) - 1, -1, -1):
        c = text[i]
        if c == ")":
            depth += 1
        elif c == "(":
            depth -= 1
            if depth == 0:
                m = re.search(r"([A-Za-z_]\w*)\s*$", text[:i])
                return m.group(1) if m else None
    return None


def _looks_like_function(header_code: str) -> bool:
    if _NON_FUNCTION_HEAD.match(header_code):
        return False
    if "=" in header_code.replace("==", ""):
        return False
    return _function_name(header_code) is not None


def _is_trailing(source: str, seg: Segment) -> bool:
    """True when code precedes the comment on its own line."""
    line_start = source.rfind("\n", 0, seg.start) + 1
    return source[line_start:seg.start].strip() != ""


def _leading_comment(source: str, segments: List[Segment], first_index: int, header_start: int) -> str:
    """
    Collect the comment block ending right before the header at header_start.

    Whitespace may separate the block from the signature; a blank line between
    two comments ends the block.
    """
    if source[segments[first_index].start:header_start].strip():
        return ""
    collected: List[Segment] = []
    j = first_index - 1
    while j >= 0:
        seg = segments[j]
        if seg.kind.is_comment:
            if _is_trailing(source, seg):
                break
            collected.append(seg)
            j -= 1
            continue
        if seg.kind is SegmentKind.CODE and not seg.text(source).strip():
            if collected and seg.text(source).count("\n") >= 2:
                break
            j -= 1
            continue
        break
    collected.reverse()
    parts = [clean_comment(s.text(source)) for s in collected]
    return "\n".join(p for p in parts if p)


def extract_functions(
    source: str,
    *,
    source_name: str = "source",
    project: str = "",
    dataset: str = "",
) -> List[FunctionRecord]:
    """
    Split a C file into top-level function records.

    A function is a top-level `{ ... }` block whose header ends with a
    parameter list. The contiguous comment block just above the header becomes
    the leading comment; internal comments stay in `code`.

    Raises:
        LexerError: unbalanced braces outside literals (byte offset of the culprit)
    """
    segments = scan(source)
    records: List[FunctionRecord] = []

    depth = 0
    open_stack: List[int] = []
    header_start: Optional[int] = None
    header_seg: int = -1
    header_parts: List[str] = []
    current: Optional[Tuple[int, int, str]] = None  # (start, first segment index, header code)

    for index, seg in enumerate(segments):
        if seg.kind.is_comment:
            if depth == 0 and header_start is not None:
                header_parts.append(" ")
            continue

        if seg.kind is SegmentKind.DIRECTIVE:
            if depth == 0:
                header_start, header_parts = None, []
            continue

        text = seg.text(source)
        if seg.kind in (SegmentKind.STRING, SegmentKind.CHAR):
            if depth == 0:
                if header_start is None:
                    header_start, header_seg = seg.start, index
                header_parts.append(text)
            continue

        for offset, c in enumerate(text):
            pos = seg.start + offset
            if depth == 0:
                if c == "{":
                    header_code = "".join(header_parts)
                    if header_start is not None and _looks_like_function(header_code):
                        current = (header_start, header_seg, header_code)
                    else:
                        current = None
                    depth = 1
                    open_stack.append(pos)
                    continue
                if c == "}":
                    raise LexerError("unbalanced '}'", byte_offset(source, pos))
                if c == ";":
                    header_start, header_parts = None, []
                    continue
                if header_start is None:
                    if c.isspace():
                        continue
                    header_start, header_seg = pos, index
                header_parts.append(c)
                continue

            if c == "{":
                depth += 1
                open_stack.append(pos)
            elif c == "}":
                depth -= 1
                open_stack.pop()
                if depth == 0:
                    if current is not None:
                        start, first_seg, header_code = current
                        name = _function_name(header_code) or "anonymous"
                        line = source.count("\n", 0, start) + 1
                        records.append(
                            FunctionRecord(
                                id=f"{source_name}:{name}:{line}",
                                project=project,
                                dataset=dataset,
                                code=source[start:pos + 1],
                                leading_comment=_leading_comment(source, segments, first_seg, start),
                            )
                        )
                    current = None
                    header_start, header_parts = None, []

    if depth != 0:
        raise LexerError("unbalanced '{'", byte_offset(source, open_stack[-1]))
    return records


# ---------------------------------------------------------------------------
# Demographics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Demographics:
    """Counts behind the dataset demographics table."""

    total: int
    satd: int
    vuln: int
    missing_satd: int
    missing_vuln: int

    def summary(self) -> str:
        return (
            f"{self.total:,} functions, {format_percent(self.satd, self.total)} SATD, "
            f"{format_percent(self.vuln, self.total)} vulnerable"
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "functions": self.total,
            "satd": self.satd,
            "vuln": self.vuln,
            "satd_percent": round(100.0 * self.satd / self.total, 2) if self.total else 0.0,
            "vuln_percent": round(100.0 * self.vuln / self.total, 2) if self.total else 0.0,
            "missing_satd": self.missing_satd,
            "missing_vuln": self.missing_vuln,
        }


def dataset_demographics(records: Iterable[FunctionRecord]) -> Demographics:
    total = satd = vuln = missing_satd = missing_vuln = 0
    for r in records:
        total += 1
        if r.satd_label is None:
            missing_satd += 1
        elif r.satd_label:
            satd += 1
        if r.vuln_label is None:
            missing_vuln += 1
        elif r.vuln_label:
            vuln += 1
    return Demographics(total, satd, vuln, missing_satd, missing_vuln)
