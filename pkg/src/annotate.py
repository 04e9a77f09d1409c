"""
SATD annotation and the SATD x vulnerability contingency analysis.

Two annotators: MAT (the IDE task tags TODO/FIXME/XXX/HACK as whole words)
and configurable pattern lists loaded from a `w:`/`s:` pattern file.
"""

import logging
import math
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np
from scipy.stats import chi2_contingency

from .config import InputMode
from .corpus import FunctionRecord, all_comment_text
from .errors import PatternSetError, StatisticsError, UnlabeledRecordError
from .utils import PathLike

logger = logging.getLogger(__name__)

MAT_TAGS = ("TODO", "FIXME", "XXX", "HACK")

# letters, digits and underscore delimit words
_WORD_CHARS = "A-Za-z0-9_"


class MatchKind(str, Enum):
    WORD = "w"
    SUBSTRING = "s"


@dataclass(frozen=True)
class Pattern:
    text: str
    kind: MatchKind = MatchKind.WORD


def _word_regex(text: str) -> "re.Pattern[str]":
    return re.compile(rf"(?<![{_WORD_CHARS}]){re.escape(text)}(?![{_WORD_CHARS}])", re.IGNORECASE)


class PatternSet:
    """
    Named, ordered, case-insensitive SATD patterns.

    Invariants: non-empty, unique after case folding.
    """

    def __init__(self, name: str, patterns: Sequence[Pattern]):
        if not patterns:
            raise PatternSetError(f"pattern set {name!r} is empty")
        seen: Dict[str, Pattern] = {}
        for p in patterns:
            if not p.text.strip():
                raise PatternSetError(f"pattern set {name!r} contains a blank pattern")
            key = p.text.casefold()
            if key in seen:
                raise PatternSetError(f"pattern set {name!r} repeats {p.text!r} (as {seen[key].text!r})")
            seen[key] = p
        self.name = name
        self.patterns: Tuple[Pattern, ...] = tuple(patterns)
        self._word_regexes = [_word_regex(p.text) for p in self.patterns if p.kind is MatchKind.WORD]
        self._substrings = [p.text.casefold() for p in self.patterns if p.kind is MatchKind.SUBSTRING]

    def __len__(self) -> int:
        return len(self.patterns)

    def __repr__(self) -> str:
        return f"PatternSet(name={self.name!r}, patterns={len(self.patterns)})"

    def matches(self, comment_text: str) -> bool:
        if not comment_text:
            return False
        if any(rx.search(comment_text) for rx in self._word_regexes):
            return True
        folded = comment_text.casefold()
        return any(s in folded for s in self._substrings)


MAT_PATTERNS = PatternSet("mat", [Pattern(tag, MatchKind.WORD) for tag in MAT_TAGS])

_MAT_REGEX = re.compile(
    rf"(?<![{_WORD_CHARS}])(?:{'|'.join(MAT_TAGS)})(?![{_WORD_CHARS}])",
    re.IGNORECASE,
)


def annotate_mat(comment_text: str) -> bool:
    """True iff a MAT tag occurs as a whole word (any case; trailing ':' or '!' are fine)."""
    return _MAT_REGEX.search(comment_text) is not None


def annotate_patterns(comment_text: str, patterns: PatternSet) -> bool:
    return patterns.matches(comment_text)


def load_pattern_set(path: PathLike, name: str = "") -> PatternSet:
    """
    Read a pattern file: one pattern per line, `w:` (word) or `s:` (substring)
    prefix, `#` starts a comment line. Unprefixed lines are words.
    """
    path = Path(path)
    if not path.exists():
        raise PatternSetError(f"pattern file not found: {path}")
    patterns: List[Pattern] = []
    for line_number, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        prefix, sep, rest = line.partition(":")
        if sep and prefix in ("w", "s"):
            text = rest.strip()
            kind = MatchKind(prefix)
        else:
            text, kind = line, MatchKind.WORD
        if not text:
            raise PatternSetError(f"{path}:{line_number}: empty pattern")
        patterns.append(Pattern(text, kind))
    return PatternSet(name or path.stem, patterns)


Annotator = Union[str, PatternSet]


def _verdict(annotator: Annotator, text: str) -> bool:
    if isinstance(annotator, PatternSet):
        return annotator.matches(text)
    if str(annotator).lower() == "mat":
        return annotate_mat(text)
    raise PatternSetError(f"unknown annotator {annotator!r}")


def label_dataset(
    records: Iterable[FunctionRecord],
    annotator: Annotator = "mat",
    mode: InputMode = InputMode.OUT,
) -> List[FunctionRecord]:
    """
    Set satd_label from the annotator's verdict over all of a record's comments.

    Annotation always reads leading + internal comments; `mode` only describes
    how the model will later see the record and does not change the verdict.
    vuln_label is never touched.
    """
    InputMode(mode)
    labeled = []
    for record in records:
        verdict = _verdict(annotator, all_comment_text(record))
        labeled.append(record.with_labels(satd=verdict))
    return labeled


# ---------------------------------------------------------------------------
# Contingency
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContingencyTable:
    """Rows: non-SATD / SATD. Columns: non-vulnerable / vulnerable."""

    n00: int
    n01: int
    n10: int
    n11: int

    def __post_init__(self):
        if min(self.n00, self.n01, self.n10, self.n11) < 0:
            raise StatisticsError(f"negative count in {self}")

    @property
    def total(self) -> int:
        return self.n00 + self.n01 + self.n10 + self.n11

    def as_array(self) -> np.ndarray:
        return np.array([[self.n00, self.n01], [self.n10, self.n11]], dtype=np.float64)

    def transpose(self) -> "ContingencyTable":
        return ContingencyTable(self.n00, self.n10, self.n01, self.n11)

    def __add__(self, other: "ContingencyTable") -> "ContingencyTable":
        return ContingencyTable(
            self.n00 + other.n00, self.n01 + other.n01, self.n10 + other.n10, self.n11 + other.n11
        )


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    p_value: float
    cramers_v: float

    def to_dict(self) -> Dict[str, Any]:
        return {"statistic": self.statistic, "dof": self.dof, "p": self.p_value, "cramers_v": self.cramers_v}


def build_contingency(records: Iterable[FunctionRecord]) -> ContingencyTable:
    """Count records per (SATD, vulnerable) label pair."""
    counts = [[0, 0], [0, 0]]
    for r in records:
        if r.satd_label is None:
            raise UnlabeledRecordError(r.id, "satd")
        if r.vuln_label is None:
            raise UnlabeledRecordError(r.id, "vuln")
        counts[int(r.satd_label)][int(r.vuln_label)] += 1
    return ContingencyTable(counts[0][0], counts[0][1], counts[1][0], counts[1][1])


def chi_square(table: ContingencyTable) -> ChiSquareResult:
    """
    Pearson chi-squared independence test, no continuity correction.

    Raises:
        StatisticsError: any zero row or column sum (expected counts undefined)
    """
    observed = table.as_array()
    if table.total <= 0 or (observed.sum(axis=0) == 0).any() or (observed.sum(axis=1) == 0).any():
        raise StatisticsError(f"chi-square undefined for {table}: a marginal is zero")
    statistic, p_value, dof, _expected = chi2_contingency(observed, correction=False)
    statistic = float(max(statistic, 0.0))
    cramers_v = math.sqrt(statistic / table.total)
    return ChiSquareResult(statistic=statistic, dof=int(dof), p_value=float(min(max(p_value, 0.0), 1.0)), cramers_v=cramers_v)


def render_contingency(table: ContingencyTable, result: ChiSquareResult) -> str:
    """Plain-text contingency table with the test outcome underneath."""
    rows = [
        ("", "non-vulnerable", "vulnerable", "total"),
        ("non-SATD", f"{table.n00:,}", f"{table.n01:,}", f"{table.n00 + table.n01:,}"),
        ("SATD", f"{table.n10:,}", f"{table.n11:,}", f"{table.n10 + table.n11:,}"),
        ("total", f"{table.n00 + table.n10:,}", f"{table.n01 + table.n11:,}", f"{table.total:,}"),
    ]
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(cell.rjust(widths[i]) if i else cell.ljust(widths[i]) for i, cell in enumerate(r)) for r in rows]
    lines.append(f"chi2 = {result.statistic:.1f}, dof = {result.dof}, p = {result.p_value:.3g}, Cramer's V = {result.cramers_v:.3f}")
    return "\n".join(lines)


def contingency_record(table: ContingencyTable, result: ChiSquareResult) -> Dict[str, Any]:
    """Machine-readable counterpart of render_contingency."""
    return {
        "n00": table.n00,
        "n01": table.n01,
        "n10": table.n10,
        "n11": table.n11,
        "total": table.total,
        **result.to_dict(),
    }
