"""
Experiment orchestration: seeded splits, the approach x loss x input-mode
cells, delta tables and the multi-task vs single-task speed benchmark.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from .callbacks import TrainingCallback
from .config import (
    DEFAULT_TOKENIZER_CONFIG,
    ExperimentConfig,
    InputMode,
    LossMode,
    ModelConfig,
    TaskMode,
    TokenizerConfig,
    TrainConfig,
)
from .corpus import FunctionRecord, prepare_input
from .errors import EmptySplitError, InputError, MissingCellError
from .inputs import EncodedPair, encode_corpus
from .metrics import Metrics, compute_metrics
from .model import VulSatdClassifier, init_model
from .tokenizer import TokenizerModel, train_bpe
from .training import History, predict, train
from .utils import text_digest

logger = logging.getLogger(__name__)

T = TypeVar("T")

MIN_SPLIT_RECORDS = 10
ROW_ORDER = ("MT_SATD", "MT_VULN", "ST_SATD", "ST_VULN")
LOSS_ORDER = (LossMode.REGULAR, LossMode.WEIGHTED)
MODE_ORDER = (InputMode.OUT, InputMode.IN)
UP, DOWN = "▲", "▼"


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------

def _part_sizes(n: int, fractions: Sequence[float]) -> Tuple[int, int, int]:
    n_train = int(np.floor(n * fractions[0] + 1e-9))
    n_val = int(np.floor(n * fractions[1] + 1e-9))
    return n_train, n_val, n - n_train - n_val


def split(
    records: Sequence[T],
    fractions: Sequence[float] = (0.8, 0.1, 0.1),
    seed: int = 42,
    stratify_task: Optional[str] = None,
) -> Tuple[List[T], List[T], List[T]]:
    """
    Seeded shuffle then contiguous slicing into train/val/test.

    With `stratify_task` each label class is shuffled and sliced on its own,
    so every part keeps roughly the corpus class ratio.

    Raises:
        ValueError: fractions not positive or not summing to 1
        EmptySplitError: fewer than 10 records or an empty part
    """
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must be three positive numbers summing to 1, got {tuple(fractions)}")
    n = len(records)
    if n < MIN_SPLIT_RECORDS:
        raise EmptySplitError(f"need at least {MIN_SPLIT_RECORDS} records to split, got {n}")
    rng = np.random.default_rng(seed)

    if stratify_task is None:
        order = rng.permutation(n)
        n_train, n_val, _ = _part_sizes(n, fractions)
        parts = (order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:])
    else:
        groups: Dict[bool, List[int]] = {False: [], True: []}
        for i, r in enumerate(records):
            y = r.label(stratify_task)
            if y is None:
                raise InputError(f"cannot stratify on {stratify_task}: record {r.id!r} is unlabeled")
            groups[bool(y)].append(i)
        collected: List[List[int]] = [[], [], []]
        for key in (False, True):
            idx = np.asarray(groups[key], dtype=np.int64)
            idx = idx[rng.permutation(len(idx))]
            n_train, n_val, _ = _part_sizes(len(idx), fractions)
            collected[0].extend(idx[:n_train].tolist())
            collected[1].extend(idx[n_train:n_train + n_val].tolist())
            collected[2].extend(idx[n_train + n_val:].tolist())
        parts = tuple(np.asarray(c, dtype=np.int64)[rng.permutation(len(c))] for c in collected)

    train_part, val_part, test_part = ([records[int(i)] for i in p] for p in parts)
    for name, part in (("train", train_part), ("val", val_part), ("test", test_part)):
        if not part:
            raise EmptySplitError(f"{name} split is empty for {n} records and fractions {tuple(fractions)}")
    return train_part, val_part, test_part


@dataclass
class DatasetSplits:
    """One fixed split realization of a labeled dataset."""

    name: str
    train: List[FunctionRecord]
    val: List[FunctionRecord]
    test: List[FunctionRecord]
    seed: int = 42

    @property
    def sizes(self) -> Tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)

    @property
    def digest(self) -> str:
        """Hash of the id order in each part; identical digests mean identical splits."""
        ids = "|".join(",".join(r.id for r in part) for part in (self.train, self.val, self.test))
        return text_digest(ids)

    def describe(self) -> Dict[str, Any]:
        return {"seed": self.seed, "sizes": list(self.sizes), "digest": self.digest}


def make_splits(name: str, records: Sequence[FunctionRecord], tc: TrainConfig) -> DatasetSplits:
    """Split a labeled dataset per the TrainConfig (stratified on vulnerability when requested)."""
    for r in records:
        if not r.is_fully_labeled:
            raise InputError(f"record {r.id!r} in {name} is missing a label; annotate the dataset first")
    train_part, val_part, test_part = split(
        records, tc.split, tc.seed, stratify_task="vuln" if tc.stratify else None
    )
    splits = DatasetSplits(name, train_part, val_part, test_part, seed=tc.seed)
    logger.info("Split %s with seed %d: sizes %s (%s)", name, tc.seed, splits.sizes, splits.digest)
    return splits


@dataclass
class EncodedSplits:
    input_mode: InputMode
    tokenizer: TokenizerModel
    train: List[EncodedPair]
    val: List[EncodedPair]
    test: List[EncodedPair]


def encode_splits(
    splits: DatasetSplits,
    input_mode: InputMode,
    tokenizer_config: TokenizerConfig = DEFAULT_TOKENIZER_CONFIG,
    tokenizer: Optional[TokenizerModel] = None,
) -> EncodedSplits:
    """Prepare all parts in the given input mode; the tokenizer is trained on train only."""
    prepared = {
        part: [prepare_input(r, input_mode) for r in getattr(splits, part)]
        for part in ("train", "val", "test")
    }
    tok = tokenizer or train_bpe(prepared["train"], tokenizer_config.vocab_size)
    budget = tokenizer_config.budget
    return EncodedSplits(
        input_mode=InputMode(input_mode),
        tokenizer=tok,
        train=encode_corpus(tok, prepared["train"], budget),
        val=encode_corpus(tok, prepared["val"], budget),
        test=encode_corpus(tok, prepared["test"], budget),
    )


# ---------------------------------------------------------------------------
# Cells
# ---------------------------------------------------------------------------

@dataclass
class CellResult:
    """Test metrics of one (approach, loss, input mode) cell."""

    dataset: str
    approach: TaskMode
    loss_mode: LossMode
    input_mode: InputMode
    metrics: Dict[str, Metrics]
    seed: int = 42
    history: Optional[History] = None
    train_seconds: float = 0.0
    test_seconds: float = 0.0
    best_epoch: int = 0
    val_score: float = 0.0
    train_config: Optional[TrainConfig] = None
    model: Optional[VulSatdClassifier] = field(default=None, repr=False)

    @property
    def key(self) -> Tuple[str, str, str]:
        return TaskMode(self.approach).value, LossMode(self.loss_mode).value, InputMode(self.input_mode).value

    def row_names(self) -> Dict[str, str]:
        """task -> report row name (MT_SATD, ST_VULN, ...)."""
        prefix = "MT" if TaskMode(self.approach) is TaskMode.MULTI else "ST"
        return {task: f"{prefix}_{task.upper()}" for task in self.metrics}


def _cell_train_config(tc: TrainConfig, loss_mode: LossMode) -> TrainConfig:
    return tc.model_copy(update={"weighted_loss": LossMode(loss_mode) is LossMode.WEIGHTED})


def _cell_model_config(mc: ModelConfig, approach: TaskMode, tokenizer: TokenizerModel) -> ModelConfig:
    # the embedding table is sized to the trained vocabulary
    return mc.model_copy(update={"task_mode": TaskMode(approach), "vocab_size": len(tokenizer)})


def run_cell(
    splits: DatasetSplits,
    approach: TaskMode,
    loss_mode: LossMode,
    input_mode: InputMode,
    model_config: ModelConfig,
    train_config: TrainConfig,
    tokenizer_config: TokenizerConfig = DEFAULT_TOKENIZER_CONFIG,
    encoded: Optional[EncodedSplits] = None,
    callbacks: Optional[Sequence[TrainingCallback]] = None,
    keep_model: bool = True,
) -> CellResult:
    """
    Train one cell on splits.train (selecting on splits.val) and evaluate on splits.test.

    `encoded` lets cells that share an input mode reuse one tokenizer and encoding.
    """
    if encoded is None or encoded.input_mode is not InputMode(input_mode):
        encoded = encode_splits(splits, input_mode, tokenizer_config)
    mc = _cell_model_config(model_config, approach, encoded.tokenizer)
    tc = _cell_train_config(train_config, loss_mode)

    model = init_model(mc)
    result = train(model, encoded.train, encoded.val, tc, callbacks)

    t0 = time.perf_counter()
    predictions = predict(result.model, encoded.test, batch_size=tc.batch_size)
    test_seconds = time.perf_counter() - t0

    metrics = {
        task: compute_metrics(pred.labels, [bool(p.label(task)) for p in encoded.test])
        for task, pred in predictions.items()
    }
    cell = CellResult(
        dataset=splits.name,
        approach=TaskMode(approach),
        loss_mode=LossMode(loss_mode),
        input_mode=InputMode(input_mode),
        metrics=metrics,
        seed=tc.seed,
        history=result.history,
        train_seconds=result.train_seconds,
        test_seconds=test_seconds,
        best_epoch=result.best_epoch,
        val_score=result.best_score,
        train_config=tc,
        model=result.model if keep_model else None,
    )
    logger.info(
        "Cell %s/%s/%s on %s: %s (train %.1fs, test %.2fs)",
        *cell.key, splits.name,
        " ".join(f"f1[{t}]={m.f1:.3f}" for t, m in metrics.items()),
        cell.train_seconds, cell.test_seconds,
    )
    return cell


def sweep_cell(
    splits: DatasetSplits,
    approach: TaskMode,
    loss_mode: LossMode,
    input_mode: InputMode,
    model_config: ModelConfig,
    train_configs: Sequence[TrainConfig],
    tokenizer_config: TokenizerConfig = DEFAULT_TOKENIZER_CONFIG,
    encoded: Optional[EncodedSplits] = None,
    callbacks: Optional[Sequence[TrainingCallback]] = None,
) -> CellResult:
    """Run each declared TrainConfig and keep the one with the highest validation F1."""
    if not train_configs:
        raise ValueError("sweep_cell needs at least one TrainConfig")
    if encoded is None:
        encoded = encode_splits(splits, input_mode, tokenizer_config)
    best: Optional[CellResult] = None
    for i, tc in enumerate(train_configs):
        cell = run_cell(
            splits, approach, loss_mode, input_mode, model_config, tc,
            tokenizer_config, encoded=encoded, callbacks=callbacks,
        )
        logger.info("Sweep %s candidate %d/%d: val score %.4f", cell.key, i + 1, len(train_configs), cell.val_score)
        if best is None or cell.val_score > best.val_score:
            best = cell
    return best


def _run_cell_job(job: Tuple[Any, ...]) -> CellResult:
    splits, approach, loss_mode, mode, mc, grid, tok_cfg, encoded = job
    cell = sweep_cell(splits, approach, loss_mode, mode, mc, grid, tok_cfg, encoded=encoded)
    cell.model = None
    return cell


def run_experiment(
    config: ExperimentConfig,
    datasets: Dict[str, Sequence[FunctionRecord]],
    callbacks: Optional[Sequence[TrainingCallback]] = None,
) -> Tuple[List[CellResult], Dict[str, Dict[str, Any]]]:
    """
    Run every declared cell for every dataset on one fixed split per dataset.

    Returns:
        (cells, split description per dataset)
    """
    grid = list(config.train_grid) or [config.train]
    cells: List[CellResult] = []
    split_info: Dict[str, Dict[str, Any]] = {}
    for name, records in datasets.items():
        splits = make_splits(name, records, config.train)
        split_info[name] = splits.describe()
        for mode in config.input_modes:
            encoded = encode_splits(splits, mode, config.tokenizer)
            jobs = [
                (splits, approach, loss_mode, mode, config.model, grid, config.tokenizer, encoded)
                for approach in config.approaches
                for loss_mode in config.loss_modes
            ]
            if config.workers > 1:
                with ProcessPoolExecutor(max_workers=config.workers) as pool:
                    cells.extend(pool.map(_run_cell_job, jobs))
            else:
                for job in jobs:
                    splits_, approach, loss_mode, mode_, mc, grid_, tok_cfg, enc = job
                    cells.append(
                        sweep_cell(splits_, approach, loss_mode, mode_, mc, grid_, tok_cfg, encoded=enc, callbacks=callbacks)
                    )
    return cells, split_info


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    approach: str
    loss_mode: LossMode
    input_mode: InputMode
    metrics: Metrics


@dataclass(frozen=True)
class Delta:
    """
    kind: "mt_vs_st" (MT - ST, on the MT row), "weighted_vs_regular"
    (weighted - regular, on the weighted row) or "out_vs_in" (OUT - IN, on the OUT row).
    """

    kind: str
    approach: str
    loss_mode: LossMode
    input_mode: InputMode
    value: float

    @property
    def marker(self) -> str:
        return delta_marker(self.value)


@dataclass
class ExperimentReport:
    dataset: str
    rows: List[ReportRow]
    deltas: List[Delta]
    cells: List[CellResult] = field(default_factory=list)
    split: Optional[Dict[str, Any]] = None

    def row(self, approach: str, loss_mode: LossMode, input_mode: InputMode = InputMode.OUT) -> Optional[ReportRow]:
        for r in self.rows:
            if r.approach == approach and r.loss_mode is LossMode(loss_mode) and r.input_mode is InputMode(input_mode):
                return r
        return None

    def delta(self, kind: str, approach: str, loss_mode: LossMode, input_mode: InputMode = InputMode.OUT) -> Optional[Delta]:
        for d in self.deltas:
            if (d.kind, d.approach, d.loss_mode, d.input_mode) == (kind, approach, LossMode(loss_mode), InputMode(input_mode)):
                return d
        return None


def delta_marker(value: float) -> str:
    """Direction marker of a delta as printed at 3 decimals; empty when it rounds to 0."""
    rounded = round(value, 3)
    if rounded > 0:
        return UP
    if rounded < 0:
        return DOWN
    return ""


def format_delta(value: float) -> str:
    marker = delta_marker(value)
    if not marker:
        return "0.000"
    return f"{marker} {abs(round(value, 3)):.3f}"


def _row_sort_key(row: ReportRow) -> Tuple[int, int, int]:
    return MODE_ORDER.index(row.input_mode), LOSS_ORDER.index(row.loss_mode), ROW_ORDER.index(row.approach)


def _missing(approach: str, loss_mode: LossMode, input_mode: InputMode, needed_for: str) -> MissingCellError:
    return MissingCellError(
        f"report needs row {approach} ({LossMode(loss_mode).value}, {InputMode(input_mode).value}) for {needed_for}"
    )


def build_report(cells: Sequence[CellResult], dataset: Optional[str] = None, strict: bool = True) -> ExperimentReport:
    """
    Fold cells into report rows and deltas.

    ΔF1 pairs MT_x with ST_x inside one (loss, mode) group; Δ′F1 pairs weighted
    with regular when both loss modes are present; the mode delta pairs OUT
    with IN when both input modes are present.

    Raises:
        MissingCellError: one operand of a delta is present without the other
            (with strict=False such deltas are skipped instead)
    """
    if not cells:
        raise MissingCellError("report needs at least one cell")
    names = {c.dataset for c in cells}
    if dataset is None:
        if len(names) > 1:
            raise InputError(f"cells span several datasets {sorted(names)}; pass dataset=")
        dataset = next(iter(names))
    cells = [c for c in cells if c.dataset == dataset]

    table: Dict[Tuple[str, LossMode, InputMode], ReportRow] = {}
    for cell in cells:
        for task, row_name in cell.row_names().items():
            key = (row_name, LossMode(cell.loss_mode), InputMode(cell.input_mode))
            if key in table:
                raise InputError(f"duplicate cell for {row_name} ({key[1].value}, {key[2].value})")
            table[key] = ReportRow(row_name, key[1], key[2], cell.metrics[task])
    rows = sorted(table.values(), key=_row_sort_key)

    deltas: List[Delta] = []
    loss_modes = {k[1] for k in table}
    input_modes = {k[2] for k in table}
    for mode in sorted(input_modes, key=MODE_ORDER.index):
        for loss_mode in sorted(loss_modes, key=LOSS_ORDER.index):
            for task in ("SATD", "VULN"):
                mt = table.get((f"MT_{task}", loss_mode, mode))
                st = table.get((f"ST_{task}", loss_mode, mode))
                if mt is None and st is None:
                    continue
                if mt is None or st is None:
                    which = f"MT_{task}" if mt is None else f"ST_{task}"
                    if strict:
                        raise _missing(which, loss_mode, mode, f"ΔF1 of {task}")
                    continue
                deltas.append(Delta("mt_vs_st", mt.approach, loss_mode, mode, mt.metrics.f1 - st.metrics.f1))

    if {LossMode.REGULAR, LossMode.WEIGHTED} <= loss_modes:
        for mode in sorted(input_modes, key=MODE_ORDER.index):
            for name in ROW_ORDER:
                weighted = table.get((name, LossMode.WEIGHTED, mode))
                regular = table.get((name, LossMode.REGULAR, mode))
                if weighted is None and regular is None:
                    continue
                if weighted is None or regular is None:
                    which = LossMode.WEIGHTED if weighted is None else LossMode.REGULAR
                    if strict:
                        raise _missing(name, which, mode, "Δ′F1")
                    continue
                deltas.append(
                    Delta("weighted_vs_regular", name, LossMode.WEIGHTED, mode, weighted.metrics.f1 - regular.metrics.f1)
                )

    deltas.extend(mode_deltas(table, strict))
    return ExperimentReport(dataset=dataset, rows=rows, deltas=deltas, cells=list(cells))


def mode_deltas(table: Dict[Tuple[str, LossMode, InputMode], ReportRow], strict: bool = True) -> List[Delta]:
    """F1(OUT) - F1(IN) per row and loss mode, when both input modes were run."""
    modes = {k[2] for k in table}
    if not {InputMode.IN, InputMode.OUT} <= modes:
        return []
    out: List[Delta] = []
    for loss_mode in LOSS_ORDER:
        for name in ROW_ORDER:
            row_out = table.get((name, loss_mode, InputMode.OUT))
            row_in = table.get((name, loss_mode, InputMode.IN))
            if row_out is None and row_in is None:
                continue
            if row_out is None or row_in is None:
                which = InputMode.OUT if row_out is None else InputMode.IN
                if strict:
                    raise _missing(name, loss_mode, which, "the OUT - IN delta")
                continue
            out.append(Delta("out_vs_in", name, loss_mode, InputMode.OUT, row_out.metrics.f1 - row_in.metrics.f1))
    return out


def render_report(report: ExperimentReport) -> str:
    """Plain-text tables, one per (input mode, loss mode), MT rows before ST."""
    lines = [f"Dataset: {report.dataset}"]
    if report.split:
        lines.append(f"Split: seed={report.split['seed']} sizes={tuple(report.split['sizes'])}")
    groups: Dict[Tuple[InputMode, LossMode], List[ReportRow]] = {}
    for row in report.rows:
        groups.setdefault((row.input_mode, row.loss_mode), []).append(row)
    for (mode, loss_mode), rows in groups.items():
        kinds = [("ΔF1", "mt_vs_st")]
        if any(d.kind == "weighted_vs_regular" for d in report.deltas) and loss_mode is LossMode.WEIGHTED:
            kinds.append(("Δ′F1", "weighted_vs_regular"))
        if any(d.kind == "out_vs_in" for d in report.deltas) and mode is InputMode.OUT:
            kinds.append(("ΔoutF1", "out_vs_in"))
        header = ["Approach", "Precision", "Recall", "F1"] + [label for label, _ in kinds]
        body = []
        for row in rows:
            cells = [row.approach, f"{row.metrics.precision:.3f}", f"{row.metrics.recall:.3f}", f"{row.metrics.f1:.3f}"]
            for _, kind in kinds:
                d = report.delta(kind, row.approach, loss_mode, mode)
                cells.append(format_delta(d.value) if d is not None else "")
            body.append(cells)
        widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
        lines.append("")
        lines.append(f"[{mode.value} | {loss_mode.value} loss]")
        lines.append("  ".join(h.ljust(widths[i]) for i, h in enumerate(header)))
        for r in body:
            lines.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(r)))
    return "\n".join(lines)


def report_records(report: ExperimentReport) -> List[Dict[str, Any]]:
    """One machine-readable record per report row."""
    cell_by_row: Dict[Tuple[str, str, str], CellResult] = {}
    for cell in report.cells:
        for _task, name in cell.row_names().items():
            cell_by_row[(name, LossMode(cell.loss_mode).value, InputMode(cell.input_mode).value)] = cell
    records = []
    for row in report.rows:
        key = (row.approach, row.loss_mode.value, row.input_mode.value)
        cell = cell_by_row.get(key)
        deltas = {
            d.kind: round(d.value, 6)
            for d in report.deltas
            if (d.approach, d.loss_mode, d.input_mode) == (row.approach, row.loss_mode, row.input_mode)
        }
        records.append(
            {
                "dataset": report.dataset,
                "approach": row.approach,
                "loss": row.loss_mode.value,
                "mode": row.input_mode.value,
                "precision": row.metrics.precision,
                "recall": row.metrics.recall,
                "f1": row.metrics.f1,
                "tp": row.metrics.tp,
                "fp": row.metrics.fp,
                "fn": row.metrics.fn,
                "tn": row.metrics.tn,
                "deltas": deltas,
                "train_seconds": cell.train_seconds if cell else None,
                "test_seconds": cell.test_seconds if cell else None,
                "seed": cell.seed if cell else None,
                "best_epoch": cell.best_epoch if cell else None,
                "split": report.split,
            }
        )
    return records


def report_from_records(records: Sequence[Dict[str, Any]], strict: bool = True) -> ExperimentReport:
    """
    Rebuild a report from the rows `report_records` wrote (metrics only).

    Raises:
        InputError: a row lacks a field or holds an unknown approach, loss or mode
    """
    cells: List[CellResult] = []
    by_cell: Dict[Tuple[str, TaskMode, LossMode, InputMode], Dict[str, Metrics]] = {}
    seeds: Dict[Tuple[str, TaskMode, LossMode, InputMode], int] = {}
    for index, rec in enumerate(records, start=1):
        try:
            prefix, task = rec["approach"].split("_", 1)
            if prefix not in ("MT", "ST") or task.lower() not in ("satd", "vuln"):
                raise ValueError(f"unknown approach {prefix}_{task}")
            approach = TaskMode.MULTI if prefix == "MT" else TaskMode(f"ST_{task.upper()}")
            key = (str(rec["dataset"]), approach, LossMode(rec["loss"]), InputMode(rec["mode"]))
            m = Metrics(
                tp=int(rec.get("tp", 0)), fp=int(rec.get("fp", 0)), fn=int(rec.get("fn", 0)), tn=int(rec.get("tn", 0)),
                precision=float(rec["precision"]), recall=float(rec["recall"]), f1=float(rec["f1"]),
            )
            seed = None if rec.get("seed") is None else int(rec["seed"])
        except KeyError as e:
            raise InputError(f"metrics row {index}: missing field {e}") from e
        except (ValueError, TypeError, AttributeError) as e:
            raise InputError(f"metrics row {index}: {e}") from e
        by_cell.setdefault(key, {})[task.lower()] = m
        if seed is not None:
            seeds[key] = seed
    for key, metrics in by_cell.items():
        dataset, approach, loss_mode, mode = key
        cells.append(
            CellResult(
                dataset=dataset,
                approach=approach,
                loss_mode=loss_mode,
                input_mode=mode,
                metrics=metrics,
                seed=seeds.get(key, 0),
            )
        )
    report = build_report(cells, strict=strict)
    report.split = next((rec.get("split") for rec in records if rec.get("split")), None)
    return report


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------

@dataclass
class BenchmarkResult:
    """MULTI / (ST_SATD + ST_VULN) wall-clock ratios, median over runs."""

    train_ratio: float
    test_ratio: float
    runs: int
    train_ratios: List[float]
    test_ratios: List[float]
    train_variance: float
    test_variance: float
    seconds: Dict[str, List[Tuple[float, float]]]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "train_ratio": self.train_ratio,
            "test_ratio": self.test_ratio,
            "runs": self.runs,
            "train_ratios": self.train_ratios,
            "test_ratios": self.test_ratios,
            "train_variance": self.train_variance,
            "test_variance": self.test_variance,
            "seconds": {k: [list(v) for v in vals] for k, vals in self.seconds.items()},
        }


def benchmark_mt_vs_st(
    splits: DatasetSplits,
    model_config: ModelConfig,
    train_config: TrainConfig,
    tokenizer_config: TokenizerConfig = DEFAULT_TOKENIZER_CONFIG,
    runs: int = 3,
    input_mode: InputMode = InputMode.OUT,
) -> BenchmarkResult:
    """
    Time MULTI against the two single-task models at identical scale.

    One tokenizer and encoding are shared by every cell so only training and
    test passes are measured.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    encoded = encode_splits(splits, input_mode, tokenizer_config)
    seconds: Dict[str, List[Tuple[float, float]]] = {m.value: [] for m in TaskMode}
    train_ratios: List[float] = []
    test_ratios: List[float] = []
    for run in range(runs):
        timings = {}
        for approach in (TaskMode.MULTI, TaskMode.ST_SATD, TaskMode.ST_VULN):
            cell = run_cell(
                splits, approach, LossMode.REGULAR, input_mode, model_config, train_config,
                tokenizer_config, encoded=encoded, keep_model=False,
            )
            timings[approach] = (cell.train_seconds, cell.test_seconds)
            seconds[approach.value].append(timings[approach])
        st_train = timings[TaskMode.ST_SATD][0] + timings[TaskMode.ST_VULN][0]
        st_test = timings[TaskMode.ST_SATD][1] + timings[TaskMode.ST_VULN][1]
        train_ratios.append(timings[TaskMode.MULTI][0] / st_train)
        test_ratios.append(timings[TaskMode.MULTI][1] / st_test)
        print(f"[Bench] run={run + 1}/{runs} train_ratio={train_ratios[-1]:.3f} test_ratio={test_ratios[-1]:.3f}")
    return BenchmarkResult(
        train_ratio=float(np.median(train_ratios)),
        test_ratio=float(np.median(test_ratios)),
        runs=runs,
        train_ratios=train_ratios,
        test_ratios=test_ratios,
        train_variance=float(np.var(train_ratios)),
        test_variance=float(np.var(test_ratios)),
        seconds=seconds,
    )
