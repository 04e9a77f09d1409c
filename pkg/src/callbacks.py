"""
Training callbacks: TensorBoard scalars and bracketed stdout progress lines.
"""

import logging
import time
from pathlib import Path
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence

from torch.utils.tensorboard import SummaryWriter

if TYPE_CHECKING:
    from .training import EpochRecord, TrainResult

logger = logging.getLogger(__name__)


class TrainingCallback:
    """
    Hooks called by `training.train`.

    on_epoch_end returns False to stop training after the current epoch.
    """

    def on_train_start(self, model, train_config) -> None:
        pass

    def on_epoch_end(self, epoch: int, records: Sequence["EpochRecord"]) -> bool:
        return True

    def on_train_end(self, result: "TrainResult") -> None:
        pass


class CallbackList(TrainingCallback):
    def __init__(self, callbacks: List[TrainingCallback]):
        self.callbacks = list(callbacks)

    def on_train_start(self, model, train_config) -> None:
        for cb in self.callbacks:
            cb.on_train_start(model, train_config)

    def on_epoch_end(self, epoch: int, records: Sequence["EpochRecord"]) -> bool:
        keep_going = True
        for cb in self.callbacks:
            keep_going = cb.on_epoch_end(epoch, records) and keep_going
        return keep_going

    def on_train_end(self, result: "TrainResult") -> None:
        for cb in self.callbacks:
            cb.on_train_end(result)


class TensorboardCallback(TrainingCallback):
    """
    Writes `loss/<split>` and `f1|precision|recall/<split>/<task>` scalars per epoch.
    """

    def __init__(self, log_dir: Path):
        self.log_dir = Path(log_dir)
        self._writer: Optional[SummaryWriter] = None

    def on_train_start(self, model, train_config) -> None:
        self._writer = SummaryWriter(log_dir=str(self.log_dir))
        self._writer.add_text("config/train", train_config.model_dump_json())
        self._writer.add_text("config/model", model.config.model_dump_json())

    def on_epoch_end(self, epoch: int, records: Sequence["EpochRecord"]) -> bool:
        if self._writer is None:
            return True
        logged_loss = set()
        for r in records:
            if r.split not in logged_loss:
                self._writer.add_scalar(f"loss/{r.split}", r.loss, epoch)
                logged_loss.add(r.split)
            self._writer.add_scalar(f"f1/{r.split}/{r.task}", r.f1, epoch)
            self._writer.add_scalar(f"precision/{r.split}/{r.task}", r.precision, epoch)
            self._writer.add_scalar(f"recall/{r.split}/{r.task}", r.recall, epoch)
        return True

    def on_train_end(self, result: "TrainResult") -> None:
        if self._writer is None:
            return
        self._writer.add_scalar("best/epoch", result.best_epoch, result.best_epoch)
        self._writer.add_scalar("best/val_score", result.best_score, result.best_epoch)
        self._writer.flush()
        self._writer.close()
        self._writer = None


class StdoutMetricsCallback(TrainingCallback):
    """
    Prints one `[Train]` line per epoch and split, and a summary at the end.

    Useful next to TensorBoard because it shows per-task F1 at a glance.
    """

    def __init__(self, prefix: str = "Train", every: int = 1):
        self.prefix = prefix
        self.every = max(1, int(every))
        self._t0 = time.time()

    def on_train_start(self, model, train_config) -> None:
        self._t0 = time.time()
        print(
            f"[{self.prefix}] tasks={'+'.join(model.tasks)} epochs={train_config.epochs} "
            f"lr={train_config.learning_rate:.2e} batch={train_config.batch_size} "
            f"weighted={train_config.weighted_loss} seed={train_config.seed}"
        )

    def on_epoch_end(self, epoch: int, records: Sequence["EpochRecord"]) -> bool:
        if epoch % self.every != 0:
            return True
        by_split: Dict[str, List["EpochRecord"]] = {}
        for r in records:
            by_split.setdefault(r.split, []).append(r)
        for split, rows in by_split.items():
            f1s = " ".join(f"f1[{r.task}]={r.f1:.3f}" for r in rows)
            print(f"[{self.prefix}] epoch={epoch} split={split} loss={rows[0].loss:.4f} {f1s}")
        return True

    def on_train_end(self, result: "TrainResult") -> None:
        elapsed = max(0.0, time.time() - self._t0)
        print(
            f"[{self.prefix}] best_epoch={result.best_epoch} "
            f"val_score={result.best_score:.3f} | elapsed={elapsed:.0f}s"
        )
