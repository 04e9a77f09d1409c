"""
Training loop, weighted loss, prediction and a finite-difference gradient check.
"""

import csv
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from .callbacks import CallbackList, TrainingCallback
from .config import ModelConfig, TrainConfig
from .errors import EmptySplitError, StatisticsError, UnlabeledRecordError
from .inputs import EncodedPair
from .metrics import Metrics, compute_metrics
from .model import VulSatdClassifier, collate

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["epoch", "split", "task", "loss", "precision", "recall", "f1"]


@dataclass(frozen=True)
class ClassWeights:
    """Per-class loss weights for one task: (w_negative, w_positive)."""

    negative: float = 1.0
    positive: float = 1.0

    def as_tensor(self, dtype: torch.dtype = torch.float32, device: Optional[torch.device] = None) -> torch.Tensor:
        return torch.tensor([self.negative, self.positive], dtype=dtype, device=device)


UNIT_WEIGHTS = ClassWeights()


def class_weights(labels: Sequence[bool], K: int = 2) -> ClassWeights:
    """
    Inverse-frequency weights w_c = N / (K * n_c).

    Raises:
        StatisticsError: a class is absent
    """
    n = len(labels)
    positives = sum(1 for y in labels if y)
    negatives = n - positives
    if positives == 0 or negatives == 0:
        raise StatisticsError(f"class weights undefined: {negatives} negatives, {positives} positives")
    return ClassWeights(negative=n / (K * negatives), positive=n / (K * positives))


def l2_penalty(params: Iterable[torch.Tensor]) -> torch.Tensor:
    """Sum of squared entries over all parameters."""
    total = None
    for p in params:
        term = p.pow(2).sum()
        total = term if total is None else total + term
    return total if total is not None else torch.tensor(0.0)


def task_loss(logits: torch.Tensor, labels: torch.Tensor, weights: ClassWeights = UNIT_WEIGHTS) -> torch.Tensor:
    """Mean over the batch of cross-entropy scaled by the weight of each example's true class."""
    per_example = F.cross_entropy(logits, labels, reduction="none")
    scale = weights.as_tensor(dtype=per_example.dtype, device=per_example.device)[labels]
    return (per_example * scale).mean()


def loss(
    logits: Mapping[str, torch.Tensor],
    labels: Mapping[str, torch.Tensor],
    weights: Optional[Mapping[str, ClassWeights]] = None,
    l2_lambda: float = 0.0,
    params: Optional[Iterable[torch.Tensor]] = None,
    task_loss_weights: Tuple[float, float] = (1.0, 1.0),
) -> torch.Tensor:
    """
    Training objective.

    A single task contributes its weighted cross-entropy; with both tasks the
    two are summed, scaled by task_loss_weights (satd, vuln). l2_lambda * ||params||^2
    is added when l2_lambda > 0.
    """
    weights = weights or {}
    tasks = list(logits.keys())
    scale = dict(zip(("satd", "vuln"), task_loss_weights)) if len(tasks) > 1 else {}
    total = None
    for task in tasks:
        term = task_loss(logits[task], labels[task], weights.get(task, UNIT_WEIGHTS)) * scale.get(task, 1.0)
        total = term if total is None else total + term
    if l2_lambda > 0 and params is not None:
        total = total + l2_lambda * l2_penalty(params)
    return total


def _labels_tensor(batch: Sequence[EncodedPair], tasks: Sequence[str], device: torch.device) -> Dict[str, torch.Tensor]:
    out = {}
    for task in tasks:
        values = []
        for pair in batch:
            y = pair.label(task)
            if y is None:
                raise UnlabeledRecordError(pair.id, task)
            values.append(int(y))
        out[task] = torch.tensor(values, dtype=torch.long, device=device)
    return out


def _batches(items: Sequence[EncodedPair], batch_size: int, order: Optional[np.ndarray] = None):
    idx = order if order is not None else np.arange(len(items))
    for start in range(0, len(idx), batch_size):
        yield [items[int(i)] for i in idx[start:start + batch_size]]


# ---------------------------------------------------------------------------
# History
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    split: str
    task: str
    loss: float
    precision: float
    recall: float
    f1: float


@dataclass
class History:
    """Per-epoch loss and metrics, one row per (epoch, split, task)."""

    records: List[EpochRecord] = field(default_factory=list)

    def add(self, epoch: int, split: str, loss_value: float, metrics: Mapping[str, Metrics]) -> List[EpochRecord]:
        rows = [
            EpochRecord(epoch, split, task, float(loss_value), m.precision, m.recall, m.f1)
            for task, m in metrics.items()
        ]
        self.records.extend(rows)
        return rows

    def rows(self, split: Optional[str] = None, task: Optional[str] = None) -> List[EpochRecord]:
        return [r for r in self.records if (split is None or r.split == split) and (task is None or r.task == task)]

    def losses(self, split: str) -> List[float]:
        seen: Dict[int, float] = {}
        for r in self.rows(split=split):
            seen.setdefault(r.epoch, r.loss)
        return [seen[e] for e in sorted(seen)]

    def to_dicts(self) -> List[Dict[str, object]]:
        return [asdict(r) for r in self.records]

    def write_csv(self, path: Path) -> Path:
        """Append rows to a CSV, writing the header only for a new file."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_header = not path.exists()
        with open(path, "a", newline="") as f:
            w = csv.writer(f)
            if write_header:
                w.writerow(HISTORY_COLUMNS)
            for r in self.records:
                w.writerow([r.epoch, r.split, r.task, r.loss, r.precision, r.recall, r.f1])
        return path


@dataclass
class TrainResult:
    model: VulSatdClassifier
    history: History
    best_epoch: int
    best_score: float
    weights: Dict[str, ClassWeights]
    train_seconds: float


def selection_score(metrics: Mapping[str, Metrics]) -> float:
    """Validation F1; the mean of task F1s for multi-task models."""
    return float(np.mean([m.f1 for m in metrics.values()]))


def evaluate(
    model: VulSatdClassifier,
    data: Sequence[EncodedPair],
    batch_size: int = 64,
    weights: Optional[Mapping[str, ClassWeights]] = None,
    task_loss_weights: Tuple[float, float] = (1.0, 1.0),
) -> Tuple[float, Dict[str, Metrics]]:
    """Mean data loss (same objective as training, without L2) and per-task metrics in eval mode."""
    if not data:
        raise EmptySplitError("cannot evaluate on an empty split")
    device = next(model.parameters()).device
    tasks = model.tasks
    model.eval()
    total = 0.0
    preds: Dict[str, List[bool]] = {t: [] for t in tasks}
    gold: Dict[str, List[bool]] = {t: [] for t in tasks}
    with torch.no_grad():
        for batch in _batches(data, batch_size):
            input_ids, attention_mask = collate(batch, model.config.max_len, device)
            labels = _labels_tensor(batch, tasks, device)
            logits = model(input_ids, attention_mask)
            total += float(loss(logits, labels, weights, task_loss_weights=task_loss_weights)) * len(batch)
            for task in tasks:
                preds[task].extend(logits[task].argmax(dim=-1).bool().tolist())
                gold[task].extend(labels[task].bool().tolist())
    metrics = {task: compute_metrics(preds[task], gold[task]) for task in tasks}
    return total / len(data), metrics


def train(
    model: VulSatdClassifier,
    train_data: Sequence[EncodedPair],
    val_data: Sequence[EncodedPair],
    tc: TrainConfig,
    callbacks: Optional[Sequence[TrainingCallback]] = None,
) -> TrainResult:
    """
    Mini-batch Adam at a fixed learning rate, seeded shuffle per epoch.

    The model is left holding the epoch checkpoint with the best validation
    F1 (strict improvement wins, so ties keep the earlier epoch).
    """
    if not train_data:
        raise EmptySplitError("training split is empty")
    if not val_data:
        raise EmptySplitError("validation split is empty")

    tasks = model.tasks
    device = next(model.parameters()).device
    weights: Dict[str, ClassWeights] = {}
    for task in tasks:
        task_labels = [p.label(task) for p in train_data]
        missing = next((p.id for p, y in zip(train_data, task_labels) if y is None), None)
        if missing is not None:
            raise UnlabeledRecordError(missing, task)
        weights[task] = class_weights(task_labels) if tc.weighted_loss else UNIT_WEIGHTS

    cb = CallbackList(list(callbacks or []))
    torch.manual_seed(tc.seed)
    rng = np.random.default_rng(tc.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=tc.learning_rate)
    history = History()
    best_score = float("-inf")
    best_epoch = 0
    best_state = None

    logger.info(
        "Training %s on %d records (val %d), seed %d, weights %s",
        "+".join(tasks), len(train_data), len(val_data), tc.seed,
        {t: (round(w.negative, 4), round(w.positive, 4)) for t, w in weights.items()},
    )
    cb.on_train_start(model, tc)
    t0 = time.perf_counter()
    for epoch in range(1, tc.epochs + 1):
        model.train()
        order = rng.permutation(len(train_data))
        running = 0.0
        preds: Dict[str, List[bool]] = {t: [] for t in tasks}
        gold: Dict[str, List[bool]] = {t: [] for t in tasks}
        for batch in _batches(train_data, tc.batch_size, order):
            input_ids, attention_mask = collate(batch, model.config.max_len, device)
            labels = _labels_tensor(batch, tasks, device)
            logits = model(input_ids, attention_mask)
            data_loss = loss(logits, labels, weights, task_loss_weights=tc.task_loss_weights)
            objective = data_loss
            if tc.l2_lambda > 0:
                objective = objective + tc.l2_lambda * l2_penalty(model.parameters())
            optimizer.zero_grad()
            objective.backward()
            optimizer.step()
            running += float(data_loss.detach()) * len(batch)
            for task in tasks:
                preds[task].extend(logits[task].detach().argmax(dim=-1).bool().tolist())
                gold[task].extend(labels[task].bool().tolist())

        train_metrics = {task: compute_metrics(preds[task], gold[task]) for task in tasks}
        epoch_rows = history.add(epoch, "train", running / len(train_data), train_metrics)
        val_loss, val_metrics = evaluate(model, val_data, tc.batch_size, weights, task_loss_weights=tc.task_loss_weights)
        epoch_rows += history.add(epoch, "val", val_loss, val_metrics)

        score = selection_score(val_metrics)
        if score > best_score:
            best_score, best_epoch = score, epoch
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}

        if not cb.on_epoch_end(epoch, epoch_rows):
            logger.info("Stopping after epoch %d on callback request", epoch)
            break

    train_seconds = time.perf_counter() - t0
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    result = TrainResult(
        model=model,
        history=history,
        best_epoch=best_epoch,
        best_score=best_score,
        weights=weights,
        train_seconds=train_seconds,
    )
    cb.on_train_end(result)
    return result


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

@dataclass
class TaskPredictions:
    """argmax labels and softmax probabilities (N, 2) for one task."""

    labels: List[bool]
    probabilities: np.ndarray


def probabilities_from_logits(logits: torch.Tensor) -> torch.Tensor:
    return torch.softmax(logits, dim=-1)


def predict(
    model: VulSatdClassifier,
    inputs: Sequence[EncodedPair],
    batch_size: int = 64,
) -> Dict[str, TaskPredictions]:
    """label = argmax of the two logits per task; probabilities from softmax."""
    device = next(model.parameters()).device
    model.eval()
    probs: Dict[str, List[np.ndarray]] = {t: [] for t in model.tasks}
    with torch.no_grad():
        for batch in _batches(inputs, batch_size):
            input_ids, attention_mask = collate(batch, model.config.max_len, device)
            logits = model(input_ids, attention_mask)
            for task in model.tasks:
                probs[task].append(probabilities_from_logits(logits[task]).cpu().numpy())
    out = {}
    for task, chunks in probs.items():
        p = np.concatenate(chunks, axis=0) if chunks else np.zeros((0, 2))
        out[task] = TaskPredictions(labels=[bool(x) for x in p.argmax(axis=1)], probabilities=p)
    return out


# ---------------------------------------------------------------------------
# Gradient check
# ---------------------------------------------------------------------------

def _tiny_batch(
    config: ModelConfig, batch: int, seq_len: int, generator: torch.Generator
) -> Tuple[torch.Tensor, torch.Tensor, Dict[str, torch.Tensor]]:
    input_ids = torch.randint(1, config.vocab_size, (batch, seq_len), generator=generator)
    lengths = torch.randint(3, seq_len + 1, (batch,), generator=generator)
    lengths[0] = seq_len
    attention_mask = torch.arange(seq_len)[None, :] < lengths[:, None]
    input_ids = input_ids.masked_fill(~attention_mask, 0)
    labels = {
        task: torch.randint(0, 2, (batch,), generator=generator)
        for task in ("satd", "vuln")
    }
    return input_ids, attention_mask, labels


def grad_check(
    config: ModelConfig,
    tolerance: float = 1e-4,
    *,
    l2_lambda: float = 0.0,
    seq_len: int = 12,
    batch: int = 3,
    samples_per_tensor: int = 6,
    step: float = 1e-5,
    seed: int = 0,
    model: Optional[VulSatdClassifier] = None,
) -> float:
    """
    Max relative error between autograd and central finite differences.

    Runs in float64 with dropout 0. Every entry of every weight and bias is
    compared; the embedding tables are sampled at `samples_per_tensor` entries
    per tensor, drawn from the rows the batch actually reads.

    Args:
        model: Checked instead of a fresh model built from `config`; its own config then
            applies. Moved to float64 in place.
    """
    if model is not None:
        config = model.config
    if config.hidden > 16 or config.layers > 2 or seq_len > 12:
        raise ValueError("grad_check expects tiny dimensions (hidden <= 16, layers <= 2, sequence <= 12)")
    if config.dropout != 0:
        raise ValueError("grad_check needs dropout 0")
    if seq_len > config.max_len:
        raise ValueError(f"seq_len {seq_len} exceeds max_len {config.max_len}")

    generator = torch.Generator().manual_seed(seed)
    model = (model if model is not None else VulSatdClassifier(config)).double()
    model.eval()
    input_ids, attention_mask, all_labels = _tiny_batch(config, batch, seq_len, generator)
    labels = {t: all_labels[t] for t in model.tasks}
    weights = {t: ClassWeights(0.75, 1.5) for t in model.tasks}

    def objective() -> torch.Tensor:
        logits = model(input_ids, attention_mask)
        return loss(logits, labels, weights, l2_lambda=l2_lambda, params=model.parameters())

    model.zero_grad()
    objective().backward()
    analytic = {name: p.grad.detach().clone() for name, p in model.named_parameters()}
    embedding_rows = {
        "encoder.token_embedding.weight": sorted(set(input_ids[attention_mask].tolist())),
        "encoder.position_embedding.weight": list(range(seq_len)),
    }

    worst = 0.0
    worst_name = ""
    with torch.no_grad():
        for name, p in model.named_parameters():
            flat = p.data.view(-1)
            if name in embedding_rows:
                width = p.shape[1]
                candidates = [row * width + col for row in embedding_rows[name] for col in range(width)]
                picks = torch.randperm(len(candidates), generator=generator)[:samples_per_tensor].tolist()
                entries = [candidates[j] for j in picks]
            else:
                entries = range(flat.numel())
            grad_flat = analytic[name].view(-1)
            for i in entries:
                original = flat[i].item()
                flat[i] = original + step
                plus = objective().item()
                flat[i] = original - step
                minus = objective().item()
                flat[i] = original
                numeric = (plus - minus) / (2 * step)
                a = grad_flat[i].item()
                rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-4)
                if rel > worst:
                    worst, worst_name = rel, name

    if worst >= tolerance:
        logger.warning("Gradient check failed: max relative error %.3e at %s", worst, worst_name)
    else:
        logger.info("Gradient check passed: max relative error %.3e", worst)
    return worst
