"""
Inference wrapper for trained VulSATD checkpoints.
Bundles a model with its tokenizer and input mode so raw records can be scored.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .config import InputMode
from .corpus import FunctionRecord, prepare_input
from .inputs import DEFAULT_BUDGET, build_model_input
from .model import VulSatdClassifier, load_checkpoint
from .tokenizer import TokenizerModel, load_tokenizer
from .training import predict
from .utils import PathLike


@dataclass(frozen=True)
class Verdict:
    label: bool
    probability: float


class TrainedClassifier:
    """
    Scores FunctionRecords with a trained model.

    Used for:
    - `evaluate` on held-out datasets
    - scoring freshly extracted functions
    """

    def __init__(
        self,
        model: VulSatdClassifier,
        tokenizer: TokenizerModel,
        input_mode: InputMode = InputMode.OUT,
        budget: int = DEFAULT_BUDGET,
        batch_size: int = 64,
    ):
        """
        Args:
            model: Trained classifier (eval mode is enforced on every call)
            tokenizer: Tokenizer the model was trained with
            input_mode: How comments are presented to the model
            budget: Content token budget
            batch_size: Inference batch size
        """
        self.model = model
        self.tokenizer = tokenizer
        self.input_mode = InputMode(input_mode)
        self.budget = budget
        self.batch_size = batch_size

    @property
    def tasks(self):
        return self.model.tasks

    def encode(self, records: Sequence[FunctionRecord]):
        return [build_model_input(self.tokenizer, prepare_input(r, self.input_mode), self.budget) for r in records]

    def classify_many(self, records: Sequence[FunctionRecord]) -> List[Dict[str, Verdict]]:
        if not records:
            return []
        predictions = predict(self.model, self.encode(records), batch_size=self.batch_size)
        out: List[Dict[str, Verdict]] = [{} for _ in records]
        for task, pred in predictions.items():
            for i, (label, probs) in enumerate(zip(pred.labels, pred.probabilities)):
                out[i][task] = Verdict(label=label, probability=float(probs[1]))
        return out

    def classify(self, record: FunctionRecord) -> Dict[str, Verdict]:
        return self.classify_many([record])[0]


def load_trained_classifier(
    checkpoint_path: PathLike,
    tokenizer_dir: Optional[PathLike] = None,
    **kwargs,
) -> TrainedClassifier:
    """
    Load a classifier from a checkpoint written by `train`.

    Args:
        checkpoint_path: Path to the `.pt` checkpoint
        tokenizer_dir: Tokenizer directory; defaults to the one recorded in the checkpoint
        **kwargs: Additional TrainedClassifier arguments

    Returns:
        TrainedClassifier ready to score records
    """
    model, meta = load_checkpoint(checkpoint_path)
    extra = meta.get("extra", {})
    tok_dir = tokenizer_dir or extra.get("tokenizer_dir")
    if tok_dir is None:
        tok_dir = Path(checkpoint_path).parent / "tokenizer"
    kwargs.setdefault("input_mode", InputMode(extra.get("input_mode", InputMode.OUT.value)))
    kwargs.setdefault("budget", int(extra.get("budget", DEFAULT_BUDGET)))
    return TrainedClassifier(model=model, tokenizer=load_tokenizer(tok_dir), **kwargs)
