"""
Bimodal transformer encoder with single-task or multi-task classification heads.

The encoder (token + learned positional embeddings, pre-norm self-attention
blocks, final LayerNorm) is shared; each active task gets its own
dropout + affine head over the CLS hidden state.
"""

import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import ModelConfig, TaskMode
from .errors import ConfigurationError, InputError, SequenceTooLongError
from .inputs import EncodedPair
from .tokenizer import PAD_ID
from .utils import PathLike, atomic_write_bytes

logger = logging.getLogger(__name__)

NUM_CLASSES = 2


class MultiHeadSelfAttention(nn.Module):
    """Scaled dot-product self-attention over all heads with a key padding mask."""

    def __init__(self, hidden: int, heads: int, dropout: float):
        super().__init__()
        self.heads = heads
        self.head_dim = hidden // heads
        self.qkv = nn.Linear(hidden, 3 * hidden)
        self.out = nn.Linear(hidden, hidden)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor, attention_mask: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Args:
            x: (B, T, H)
            attention_mask: (B, T) bool, True for real tokens

        Returns:
            output (B, T, H) and attention weights (B, heads, T, T)
        """
        B, T, H = x.shape
        q, k, v = self.qkv(x).view(B, T, 3, self.heads, self.head_dim).permute(2, 0, 3, 1, 4)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(~attention_mask[:, None, None, :], float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        context = self.dropout(weights) @ v
        context = context.transpose(1, 2).reshape(B, T, H)
        return self.out(context), weights


class EncoderBlock(nn.Module):
    """Pre-norm block: x + attn(ln(x)), then x + ffn(ln(x))."""

    def __init__(self, hidden: int, heads: int, ffn_hidden: int, dropout: float):
        super().__init__()
        self.ln_attn = nn.LayerNorm(hidden)
        self.attn = MultiHeadSelfAttention(hidden, heads, dropout)
        self.ln_ffn = nn.LayerNorm(hidden)
        self.ffn = nn.Sequential(
            nn.Linear(hidden, ffn_hidden),
            nn.GELU(),
            nn.Linear(ffn_hidden, hidden),
        )
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor, attention_mask: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        attended, weights = self.attn(self.ln_attn(x), attention_mask)
        x = x + self.dropout(attended)
        x = x + self.dropout(self.ffn(self.ln_ffn(x)))
        return x, weights


class SharedEncoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.token_embedding = nn.Embedding(config.vocab_size, config.hidden)
        self.position_embedding = nn.Embedding(config.max_len, config.hidden)
        self.dropout = nn.Dropout(config.dropout)
        self.blocks = nn.ModuleList(
            EncoderBlock(config.hidden, config.heads, config.hidden * config.ffn_multiplier, config.dropout)
            for _ in range(config.layers)
        )
        self.ln_final = nn.LayerNorm(config.hidden)
        nn.init.normal_(self.token_embedding.weight, std=0.02)
        nn.init.normal_(self.position_embedding.weight, std=0.02)

    def forward(
        self, input_ids: torch.Tensor, attention_mask: torch.Tensor
    ) -> Tuple[torch.Tensor, List[torch.Tensor]]:
        positions = torch.arange(input_ids.shape[1], device=input_ids.device)
        x = self.dropout(self.token_embedding(input_ids) + self.position_embedding(positions)[None, :, :])
        attentions = []
        for block in self.blocks:
            x, weights = block(x, attention_mask)
            attentions.append(weights)
        return self.ln_final(x), attentions


class VulSatdClassifier(nn.Module):
    """
    Shared encoder plus one 2-logit head per active task.

    The encoder is drawn from `config.seed` before any head, so MULTI and
    single-task models built from the same seed start from the same encoder.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.tasks: Tuple[str, ...] = TaskMode(config.task_mode).tasks
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(config.seed)
            self.encoder = SharedEncoder(config)
            self.heads = nn.ModuleDict(
                {
                    task: nn.Sequential(nn.Dropout(config.dropout), nn.Linear(config.hidden, NUM_CLASSES))
                    for task in self.tasks
                }
            )

    def forward(
        self,
        input_ids: torch.Tensor,
        attention_mask: torch.Tensor,
        return_attention: bool = False,
    ):
        """
        Args:
            input_ids: (B, T) token ids
            attention_mask: (B, T) bool, True for real tokens

        Returns:
            {task: (B, 2) logits}, plus per-layer attention weights if requested
        """
        hidden, attentions = self.encoder(input_ids, attention_mask)
        cls_state = hidden[:, 0, :]
        logits = {task: head(cls_state) for task, head in self.heads.items()}
        if return_attention:
            return logits, attentions
        return logits


@dataclass(frozen=True)
class TaskLogits:
    """Two-class scores of one record; a task is None when its head is absent."""

    satd: Optional[Tuple[float, float]] = None
    vuln: Optional[Tuple[float, float]] = None

    def get(self, task: str) -> Optional[Tuple[float, float]]:
        return self.satd if task == "satd" else self.vuln


def init_model(config: ModelConfig) -> VulSatdClassifier:
    """Build a model deterministically from config.seed."""
    if config.hidden % config.heads != 0:
        raise ConfigurationError(f"hidden ({config.hidden}) must be divisible by heads ({config.heads})")
    model = VulSatdClassifier(config)
    logger.info(
        "Initialized %s model: %d parameters (seed %d)",
        TaskMode(config.task_mode).value, count_parameters(model), config.seed,
    )
    return model


def collate(
    batch: Sequence[EncodedPair],
    max_len: int,
    device: Optional[torch.device] = None,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Right-pad a batch with PAD.

    Returns:
        input_ids (B, T) long, attention_mask (B, T) bool
    """
    if not batch:
        raise InputError("cannot collate an empty batch")
    for pair in batch:
        if len(pair.input_ids) > max_len:
            raise SequenceTooLongError(pair.id, len(pair.input_ids), max_len)
    width = max(len(pair.input_ids) for pair in batch)
    input_ids = torch.full((len(batch), width), PAD_ID, dtype=torch.long)
    attention_mask = torch.zeros((len(batch), width), dtype=torch.bool)
    for row, pair in enumerate(batch):
        n = len(pair.input_ids)
        input_ids[row, :n] = torch.tensor(pair.input_ids, dtype=torch.long)
        attention_mask[row, :n] = True
    if device is not None:
        input_ids, attention_mask = input_ids.to(device), attention_mask.to(device)
    return input_ids, attention_mask


def forward(model: VulSatdClassifier, batch: Sequence[EncodedPair], training: bool = False) -> List[TaskLogits]:
    """Per-record logits; dropout is active only when training=True."""
    was_training = model.training
    model.train(training)
    try:
        input_ids, attention_mask = collate(batch, model.config.max_len, _device_of(model))
        with torch.set_grad_enabled(training):
            logits = model(input_ids, attention_mask)
    finally:
        model.train(was_training)
    rows = {task: t.detach().cpu().tolist() for task, t in logits.items()}
    out = []
    for i in range(len(batch)):
        out.append(
            TaskLogits(
                satd=tuple(rows["satd"][i]) if "satd" in rows else None,
                vuln=tuple(rows["vuln"][i]) if "vuln" in rows else None,
            )
        )
    return out


def _device_of(model: nn.Module) -> torch.device:
    return next(model.parameters()).device


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def expected_parameter_count(config: ModelConfig) -> int:
    """Closed-form parameter count from the layer shapes."""
    V, H, L = config.vocab_size, config.hidden, config.max_len
    Fh = H * config.ffn_multiplier
    per_block = 2 * H + 3 * (H * H + H) + (H * H + H) + 2 * H + (H * Fh + Fh) + (Fh * H + H)
    heads = len(TaskMode(config.task_mode).tasks) * (H * NUM_CLASSES + NUM_CLASSES)
    return V * H + L * H + config.layers * per_block + 2 * H + heads


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(
    model: VulSatdClassifier,
    path: PathLike,
    manifest_id: Optional[str] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """torch.save of {config, seed, state_dict, manifest_id, extra}, written atomically."""
    payload = {
        "config": model.config.model_dump(mode="json"),
        "seed": model.config.seed,
        "state_dict": {k: v.detach().cpu() for k, v in model.state_dict().items()},
        "manifest_id": manifest_id,
        "extra": extra or {},
    }
    buffer = io.BytesIO()
    torch.save(payload, buffer)
    return atomic_write_bytes(path, buffer.getvalue())


def load_checkpoint(path: PathLike, map_location: str = "cpu") -> Tuple[VulSatdClassifier, Dict[str, Any]]:
    """
    Rebuild a model from a checkpoint.

    Returns:
        (model in eval mode, raw payload without the state_dict)
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location=map_location, weights_only=True)
    config = ModelConfig.model_validate(payload["config"])
    model = VulSatdClassifier(config)
    state_dict = payload["state_dict"]
    first = next(iter(state_dict.values()), None)
    if first is not None and first.dtype != torch.float32:
        model = model.to(first.dtype)
    model.load_state_dict(state_dict)
    model.eval()
    meta = {k: v for k, v in payload.items() if k != "state_dict"}
    return model, meta
