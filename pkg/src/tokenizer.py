"""
Byte-pair encoding trained from scratch on the prepared corpus.

Text is pre-tokenized into whitespace runs, identifier-like words and single
punctuation characters; merges never cross a pre-token boundary. Because
whitespace runs are pre-tokens of their own, decoding is plain concatenation
and round-trips exactly for text over the training alphabet.
"""

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

from .corpus import PreparedInput
from .errors import ConfigurationError, InputError
from .utils import PathLike, atomic_write_text

logger = logging.getLogger(__name__)

PAD, UNK, CLS, SEP, EOS = "<pad>", "<unk>", "<cls>", "<sep>", "<eos>"
SPECIAL_TOKENS = (PAD, UNK, CLS, SEP, EOS)
PAD_ID = SPECIAL_TOKENS.index(PAD)

VOCAB_FILE = "vocab.txt"
MERGES_FILE = "merges.txt"

_PRETOKEN = re.compile(r"\s+|\w+|[^\w\s]")

Pair = Tuple[str, str]


def pretokenize(text: str) -> List[str]:
    """Split text into whitespace runs, word runs and single punctuation characters."""
    return _PRETOKEN.findall(text)


@dataclass(frozen=True)
class TokenizerModel:
    """
    Trained BPE vocabulary.

    Ids 0..4 are the specials (PAD, UNK, CLS, SEP, EOS), then the sorted base
    alphabet, then merge outputs in merge order.
    """

    vocab: Dict[str, int]
    merges: Tuple[Pair, ...]
    id_to_token: Dict[int, str] = field(init=False, repr=False, compare=False)
    ranks: Dict[Pair, int] = field(init=False, repr=False, compare=False)
    _cache: Dict[str, Tuple[str, ...]] = field(init=False, repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        id_to_token = {i: t for t, i in self.vocab.items()}
        if len(id_to_token) != len(self.vocab):
            raise InputError("vocabulary ids are not unique")
        for idx, special in enumerate(SPECIAL_TOKENS):
            if self.vocab.get(special) != idx:
                raise InputError(f"special token {special!r} must have id {idx}")
        for a, b in self.merges:
            if a + b not in self.vocab:
                raise InputError(f"merge output {a + b!r} missing from vocabulary")
        object.__setattr__(self, "id_to_token", id_to_token)
        object.__setattr__(self, "ranks", {pair: rank for rank, pair in enumerate(self.merges)})

    @property
    def pad_id(self) -> int:
        return self.vocab[PAD]

    @property
    def unk_id(self) -> int:
        return self.vocab[UNK]

    @property
    def cls_id(self) -> int:
        return self.vocab[CLS]

    @property
    def sep_id(self) -> int:
        return self.vocab[SEP]

    @property
    def eos_id(self) -> int:
        return self.vocab[EOS]

    @property
    def special_ids(self) -> Dict[str, int]:
        return {t: self.vocab[t] for t in SPECIAL_TOKENS}

    def __len__(self) -> int:
        return len(self.vocab)

    def segment_word(self, word: str) -> Tuple[str, ...]:
        """Apply merges to one pre-token, lowest rank first."""
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        symbols = list(word)
        while len(symbols) > 1:
            best = min(
                ((self.ranks[p], p) for p in zip(symbols, symbols[1:]) if p in self.ranks),
                default=None,
            )
            if best is None:
                break
            symbols = _merge_symbols(symbols, best[1])
        result = tuple(symbols)
        self._cache[word] = result
        return result


def _merge_symbols(symbols: Sequence[str], pair: Pair) -> List[str]:
    """Replace every non-overlapping occurrence of pair, left to right."""
    out: List[str] = []
    i = 0
    n = len(symbols)
    while i < n:
        if i < n - 1 and symbols[i] == pair[0] and symbols[i + 1] == pair[1]:
            out.append(pair[0] + pair[1])
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return out


def count_pairs(words: Dict[Tuple[str, ...], int]) -> Counter:
    """Adjacent symbol pair frequencies over a word-frequency table."""
    pairs: Counter = Counter()
    for symbols, freq in words.items():
        for pair in zip(symbols, symbols[1:]):
            pairs[pair] += freq
    return pairs


def best_pair(pairs: Counter) -> Tuple[Pair, int]:
    """Most frequent pair; ties go to the lexicographically smallest pair."""
    pair = min(pairs, key=lambda p: (-pairs[p], p))
    return pair, pairs[pair]


def _corpus_texts(corpus: Iterable[Union[PreparedInput, str]]) -> List[str]:
    texts: List[str] = []
    for item in corpus:
        if isinstance(item, PreparedInput):
            texts.extend((item.comment_text, item.code_text))
        else:
            texts.append(str(item))
    return texts


def minimum_vocab_size(alphabet_size: int) -> int:
    return alphabet_size + len(SPECIAL_TOKENS) + 1


def train_bpe(corpus: Iterable[Union[PreparedInput, str]], vocab_size: int) -> TokenizerModel:
    """
    Greedy BPE over comment and code text.

    Args:
        corpus: prepared inputs (both segments are used) or raw strings
        vocab_size: total vocabulary size including specials

    Returns:
        TokenizerModel with at most vocab_size entries
    """
    texts = _corpus_texts(corpus)
    if not texts:
        raise InputError("cannot train a tokenizer on an empty corpus")

    word_freq: Counter = Counter()
    for text in texts:
        word_freq.update(pretokenize(text))

    alphabet = sorted({ch for word in word_freq for ch in word})
    minimum = minimum_vocab_size(len(alphabet))
    if vocab_size < minimum:
        raise ConfigurationError(
            f"vocab_size {vocab_size} too small: minimum is {minimum} "
            f"({len(alphabet)} alphabet symbols + {len(SPECIAL_TOKENS)} specials + 1)"
        )

    vocab: Dict[str, int] = {t: i for i, t in enumerate(SPECIAL_TOKENS)}
    for ch in alphabet:
        vocab[ch] = len(vocab)

    words: Dict[Tuple[str, ...], int] = {tuple(w): f for w, f in word_freq.items()}
    merges: List[Pair] = []
    while len(vocab) < vocab_size:
        pairs = count_pairs(words)
        if not pairs:
            break
        pair, freq = best_pair(pairs)
        if freq < 2:
            break
        merges.append(pair)
        merged = pair[0] + pair[1]
        if merged not in vocab:
            vocab[merged] = len(vocab)
        next_words: Dict[Tuple[str, ...], int] = {}
        for symbols, f in words.items():
            key = tuple(_merge_symbols(symbols, pair)) if len(symbols) > 1 else symbols
            next_words[key] = next_words.get(key, 0) + f
        words = next_words

    logger.info("Trained BPE: %d merges, vocabulary %d (alphabet %d)", len(merges), len(vocab), len(alphabet))
    return TokenizerModel(vocab=vocab, merges=tuple(merges))


def encode_with_stats(tok: TokenizerModel, text: str) -> Tuple[List[int], int]:
    """Encode text and count the symbols that fell back to UNK."""
    ids: List[int] = []
    unk = 0
    for word in pretokenize(text):
        for symbol in tok.segment_word(word):
            idx = tok.vocab.get(symbol)
            if idx is None:
                idx = tok.unk_id
                unk += 1
            ids.append(idx)
    return ids, unk


def encode(tok: TokenizerModel, text: str) -> List[int]:
    """Deterministic encoding; no special tokens are inserted."""
    return encode_with_stats(tok, text)[0]


def decode(tok: TokenizerModel, ids: Iterable[int]) -> str:
    parts = []
    for idx in ids:
        token = tok.id_to_token.get(int(idx))
        if token is None:
            raise InputError(f"unknown token id {idx}")
        parts.append(token)
    return "".join(parts)


def save_tokenizer(tok: TokenizerModel, directory: PathLike) -> Tuple[Path, Path]:
    """Write `vocab.txt` (JSON-quoted token TAB id) and `merges.txt` (one JSON pair per line)."""
    directory = Path(directory)
    vocab_lines = "".join(f"{json.dumps(t, ensure_ascii=False)}\t{i}\n" for t, i in sorted(tok.vocab.items(), key=lambda kv: kv[1]))
    merge_lines = "".join(json.dumps(list(p), ensure_ascii=False) + "\n" for p in tok.merges)
    vocab_path = atomic_write_text(directory / VOCAB_FILE, vocab_lines)
    merges_path = atomic_write_text(directory / MERGES_FILE, merge_lines)
    return vocab_path, merges_path


def load_tokenizer(directory: PathLike) -> TokenizerModel:
    directory = Path(directory)
    vocab: Dict[str, int] = {}
    merges: List[Pair] = []
    try:
        for line_number, line in enumerate((directory / VOCAB_FILE).read_text(encoding="utf-8").splitlines(), start=1):
            if not line:
                continue
            token_json, _, idx = line.rpartition("\t")
            vocab[json.loads(token_json)] = int(idx)
        for line in (directory / MERGES_FILE).read_text(encoding="utf-8").splitlines():
            if line:
                a, b = json.loads(line)
                merges.append((a, b))
    except FileNotFoundError as e:
        raise InputError(f"tokenizer file missing: {e.filename}") from e
    except (ValueError, TypeError) as e:
        raise InputError(f"corrupt tokenizer in {directory}: {e}") from e
    return TokenizerModel(vocab=vocab, merges=tuple(merges))
