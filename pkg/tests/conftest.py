"""
Shared fixtures: small C listings, a separable synthetic corpus and tiny configs.
"""

import sys
from itertools import product
from pathlib import Path
from typing import List

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.config import InputMode, ModelConfig, TaskMode, TokenizerConfig, TrainConfig
from src.corpus import FunctionRecord, prepare_input
from src.inputs import encode_corpus
from src.tokenizer import train_bpe


# Signal mask update with a SATD leading comment; vulnerable.
SIGMASK_CODE = """\
int update_mask(int how, const sigset_t *set)
{
    unsigned long *src = (unsigned long *) set;
    unsigned long *dest = (unsigned long *) &current_mask;
    size_t i, words = sizeof(sigset_t) / sizeof(unsigned long);

    switch (how) {
    case SIG_BLOCK:
        for (i = 0; i < words; i++) {
            /* OR the bit field longword -wise. */
            *dest++ |= *src++;
        }
        break;
    case SIG_SETMASK:
        /* Replace the whole sigmask. */
        memcpy(&current_mask, set, sizeof(sigset_t));
        break;
    }
    return 0;
}"""

SIGMASK_LEADING = "FIXME: the mask is assumed to be a whole number of longs."

# Reallocation wrapper, SATD only in a // comment inside an #ifdef; not vulnerable.
REALLOC_SOURCE = """\
#include <stdlib.h>
#include "mem.h"

/**
 * av_realloc semantics (same as glibc): a NULL ptr behaves like malloc,
 * a zero size behaves like free and returns NULL.
 */
void *av_realloc(void *ptr, unsigned int size)
{
#ifdef MEMALIGN_HACK
    int diff;
#endif
    if (size > INT_MAX)
        return NULL;
#ifdef MEMALIGN_HACK
    //FIXME this isn't aligned correctly, though it probably isn't needed
    if (!ptr) return av_malloc(size);
    diff = ((char *) ptr)[-1];
    return (char *) realloc((char *) ptr - diff, size + diff) + diff;
#else
    return realloc(ptr, size);
#endif
}
"""

# Login response builder with a TODO in the body; vulnerable.
LOGIN_CODE = """\
static void send_login_response(struct session *s, struct request *req)
{
    struct login_rsp *rsp = &req->iu.login_rsp;
    uint64_t tag = req->iu.tag;

    /* TODO handle case that requested size is wrong and
     * the buffer format is unsupported
     */
    memset(&req->iu, 0, sizeof(struct login_rsp));
    rsp->opcode = LOGIN_RSP;
    rsp->tag = tag;
    send_iu(s, req, sizeof(*rsp));
}"""

STUB_CODE = "void unmap_region(struct device *dev, void *data)\n{\n    /* FIXME */\n}"


def _realloc_record() -> FunctionRecord:
    start = REALLOC_SOURCE.index("void *av_realloc")
    return FunctionRecord(
        id="devign-realloc",
        project="ffmpeg",
        dataset="devign",
        code=REALLOC_SOURCE[start:].rstrip(),
        leading_comment=(
            "av_realloc semantics (same as glibc): a NULL ptr behaves like malloc,\n"
            "a zero size behaves like free and returns NULL."
        ),
        satd_label=None,
        vuln_label=False,
    )


@pytest.fixture
def listing_records() -> List[FunctionRecord]:
    """Three SATD-bearing functions (vulnerable, non-vulnerable, vulnerable)."""
    return [
        FunctionRecord(
            id="bigvul-sigmask",
            project="hurd",
            dataset="bigvul",
            code=SIGMASK_CODE,
            leading_comment=SIGMASK_LEADING,
            vuln_label=True,
        ),
        _realloc_record(),
        FunctionRecord(
            id="devign-login",
            project="qemu",
            dataset="devign",
            code=LOGIN_CODE,
            vuln_label=True,
        ),
    ]


@pytest.fixture
def plain_record() -> FunctionRecord:
    """A function without any comment."""
    return FunctionRecord(
        id="plain-1",
        project="demo",
        dataset="demo",
        code="int add(int a, int b)\n{\n    return a + b;\n}",
        vuln_label=False,
    )


NAMES = ["buf", "dst", "src", "len", "ctx", "tmp", "out", "req", "hdr", "pkt"]


def make_separable_records(per_combo: int = 16, seed: int = 0) -> List[FunctionRecord]:
    """
    SATD iff the comment starts with FIXME, vulnerable iff the body calls memcpy.

    Each (satd, vuln) combination appears per_combo times, so both tasks are
    exactly balanced.
    """
    rng = np.random.default_rng(seed)
    records = []
    for satd, vuln in product([False, True], repeat=2):
        for _ in range(per_combo):
            a, b = rng.choice(NAMES, size=2, replace=False)
            idx = len(records)
            comment = f"FIXME check the {a} size" if satd else f"copy the {a} into {b}"
            body = f"memcpy({a}, {b}, n);" if vuln else f"fill_bytes({a}, {b}, n);"
            code = f"int step_{idx}(char *{a}, char *{b}, int n)\n{{\n    {body}\n    return n;\n}}"
            records.append(
                FunctionRecord(
                    id=f"syn-{idx:03d}",
                    project="synthetic",
                    dataset="separable",
                    code=code,
                    leading_comment=comment,
                    satd_label=satd,
                    vuln_label=vuln,
                )
            )
    order = rng.permutation(len(records))
    return [records[int(i)] for i in order]


@pytest.fixture
def separable_records() -> List[FunctionRecord]:
    return make_separable_records()


@pytest.fixture(scope="session")
def tiny_tokenizer_config() -> TokenizerConfig:
    return TokenizerConfig(vocab_size=300, budget=125)


@pytest.fixture(scope="session")
def tiny_model_config() -> ModelConfig:
    return ModelConfig(vocab_size=300, hidden=32, layers=2, heads=4, max_len=128, dropout=0.1, task_mode=TaskMode.MULTI)


@pytest.fixture(scope="session")
def tiny_train_config() -> TrainConfig:
    return TrainConfig(learning_rate=1e-3, epochs=30, batch_size=8, seed=42)


@pytest.fixture(scope="session")
def separable_encoded(tiny_tokenizer_config):
    """(tokenizer, encoded pairs) for the separable corpus in OUT mode."""
    prepared = [prepare_input(r, InputMode.OUT) for r in make_separable_records()]
    tok = train_bpe(prepared, tiny_tokenizer_config.vocab_size)
    return tok, encode_corpus(tok, prepared, tiny_tokenizer_config.budget)
