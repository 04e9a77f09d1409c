"""
Bimodal model input: `[CLS] comment [SEP] code [EOS]` with head-only truncation.
"""

from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from .corpus import PreparedInput
from .errors import InputError
from .tokenizer import TokenizerModel, encode_with_stats

DEFAULT_BUDGET = 509
SPECIALS_PER_INPUT = 3


def truncate_head_only(
    comment_ids: Sequence[int],
    code_ids: Sequence[int],
    budget: int,
) -> Tuple[List[int], List[int]]:
    """
    Trim tail tokens until len(comment) + len(code) <= budget.

    The strictly longer segment loses its last token first; once the two are
    equal, code is cut and the segments then alternate. Closed form of that
    removal loop:
        - the longer side absorbs up to |a - b| removals
        - the remaining r removals split ceil(r/2) code, floor(r/2) comment

    Raises:
        ValueError: budget < 2
    """
    if budget < 2:
        raise ValueError(f"budget must be >= 2, got {budget}")
    a, b = len(comment_ids), len(code_ids)
    excess = a + b - budget
    if excess <= 0:
        return list(comment_ids), list(code_ids)

    first = min(abs(a - b), excess)
    if a > b:
        a -= first
    else:
        b -= first
    rest = excess - first
    b -= (rest + 1) // 2
    a -= rest // 2
    return list(comment_ids[:a]), list(code_ids[:b])


@dataclass(frozen=True)
class EncodedPair:
    """One tokenized record. input_ids never contain PAD."""

    id: str
    comment_ids: Tuple[int, ...]
    code_ids: Tuple[int, ...]
    input_ids: Tuple[int, ...]
    satd_label: Optional[bool] = None
    vuln_label: Optional[bool] = None
    truncated: bool = False
    unk_count: int = 0

    @property
    def segment_lengths(self) -> Tuple[int, int]:
        return len(self.comment_ids), len(self.code_ids)

    def label(self, task: str) -> Optional[bool]:
        return self.satd_label if task == "satd" else self.vuln_label

    def to_dict(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {
            "id": self.id,
            "input_ids": list(self.input_ids),
            "segment_lengths": list(self.segment_lengths),
        }
        if self.satd_label is not None:
            row["satd"] = self.satd_label
        if self.vuln_label is not None:
            row["vuln"] = self.vuln_label
        return row


def build_model_input(tok: TokenizerModel, prepared: PreparedInput, budget: int = DEFAULT_BUDGET) -> EncodedPair:
    """Encode both segments, truncate to the content budget and add the specials."""
    comment_full, unk_comment = encode_with_stats(tok, prepared.comment_text)
    code_full, unk_code = encode_with_stats(tok, prepared.code_text)
    comment_ids, code_ids = truncate_head_only(comment_full, code_full, budget)
    input_ids = [tok.cls_id, *comment_ids, tok.sep_id, *code_ids, tok.eos_id]
    return EncodedPair(
        id=prepared.id,
        comment_ids=tuple(comment_ids),
        code_ids=tuple(code_ids),
        input_ids=tuple(input_ids),
        satd_label=prepared.satd_label,
        vuln_label=prepared.vuln_label,
        truncated=len(comment_ids) + len(code_ids) < len(comment_full) + len(code_full),
        unk_count=unk_comment + unk_code,
    )


def encode_corpus(tok: TokenizerModel, prepared: Iterable[PreparedInput], budget: int = DEFAULT_BUDGET) -> List[EncodedPair]:
    return [build_model_input(tok, p, budget) for p in prepared]


def encoded_from_dict(row: Dict[str, Any], tok: TokenizerModel) -> EncodedPair:
    """Rebuild an EncodedPair from its JSONL row (segments are recovered from the separators)."""
    ids = [int(i) for i in row["input_ids"]]
    comment_len, code_len = (int(n) for n in row["segment_lengths"])
    if len(ids) != comment_len + code_len + SPECIALS_PER_INPUT or ids[0] != tok.cls_id or ids[-1] != tok.eos_id:
        raise InputError(f"record {row.get('id')!r}: input_ids do not match segment_lengths")
    return EncodedPair(
        id=str(row["id"]),
        comment_ids=tuple(ids[1:1 + comment_len]),
        code_ids=tuple(ids[2 + comment_len:-1]),
        input_ids=tuple(ids),
        satd_label=row.get("satd"),
        vuln_label=row.get("vuln"),
    )
