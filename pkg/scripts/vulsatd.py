"""
Command-line entry point for the VulSATD pipeline.

Subcommands: ingest, extract, annotate, tokenize, train, evaluate, compare,
bench, chi2. Every command accepts `--config <experiment.json>`; flags
override individual config fields. Exit codes: 0 success, 2 bad input or
configuration, 3 internal error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

sys.path.insert(0, str(Path(__file__).parent.parent))

from pydantic import ValidationError

from src.annotate import (
    MAT_PATTERNS,
    ContingencyTable,
    build_contingency,
    chi_square,
    contingency_record,
    label_dataset,
    load_pattern_set,
    render_contingency,
)
from src.callbacks import StdoutMetricsCallback, TensorboardCallback
from src.config import ExperimentConfig, InputMode, LossMode, TaskMode, load_experiment_config
from src.corpus import (
    dataset_demographics,
    extract_functions,
    ingest_dataset,
    prepare_input,
    write_dataset,
    write_prepared,
)
from src.errors import InputError, VulSatdError
from src.experiment import (
    benchmark_mt_vs_st,
    build_report,
    encode_splits,
    make_splits,
    render_report,
    report_from_records,
    report_records,
    run_experiment,
    sweep_cell,
)
from src.inputs import encode_corpus
from src.manifest import RunManifest, write_manifest
from src.metrics import compute_metrics
from src.model import save_checkpoint
from src.tokenizer import load_tokenizer, save_tokenizer, train_bpe
from src.trained_classifier import load_trained_classifier
from src.utils import PathLike, read_jsonl, write_json, write_jsonl

logger = logging.getLogger("vulsatd")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INTERNAL = 3

C_SUFFIXES = (".c", ".h")


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------

def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file (or defaults) with command-line overrides applied and re-validated."""
    config = load_experiment_config(Path(args.config) if getattr(args, "config", None) else None)
    data = config.model_dump(mode="json")
    overrides = {
        ("train", "epochs"): getattr(args, "epochs", None),
        ("train", "learning_rate"): getattr(args, "lr", None),
        ("train", "batch_size"): getattr(args, "batch_size", None),
        ("train", "seed"): getattr(args, "seed", None),
        ("model", "seed"): getattr(args, "seed", None),
        ("model", "hidden"): getattr(args, "hidden", None),
        ("model", "layers"): getattr(args, "layers", None),
        ("model", "heads"): getattr(args, "heads", None),
        ("model", "max_len"): getattr(args, "max_len", None),
        ("tokenizer", "vocab_size"): getattr(args, "vocab_size", None),
        ("tokenizer", "budget"): getattr(args, "budget", None),
    }
    for (section, key), value in overrides.items():
        if value is not None:
            data[section][key] = value
    if getattr(args, "stratify", False):
        data["train"]["stratify"] = True
    if getattr(args, "workers", None) is not None:
        data["workers"] = args.workers
    return ExperimentConfig.model_validate(data)


def _manifest(args: argparse.Namespace, config: Optional[ExperimentConfig] = None) -> RunManifest:
    manifest = RunManifest(
        command=args.command,
        config_path=str(args.config) if getattr(args, "config", None) else None,
        config=config.model_dump(mode="json") if config is not None else {},
    )
    if config is not None:
        manifest.seeds = {"train": config.train.seed, "model": config.model.seed}
        logger.info("Seeds: train=%d model=%d", config.train.seed, config.model.seed)
    return manifest


def _dataset_name(args: argparse.Namespace, path: Path) -> str:
    return getattr(args, "dataset_name", None) or path.stem


def _write_report(
    args: argparse.Namespace,
    path: PathLike,
    payload: Dict[str, Any],
    inputs: Sequence[PathLike] = (),
    config: Optional[ExperimentConfig] = None,
) -> Path:
    """Write a JSON report carrying its manifest id, plus the manifest sidecar."""
    manifest = _manifest(args, config)
    for p in inputs:
        manifest.add_input(p)
    manifest.finish()
    out = write_json(path, {**payload, "manifest_id": manifest.manifest_id})
    write_manifest(manifest, out)
    return out


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_ingest(args: argparse.Namespace) -> int:
    """Validate a dataset file, optionally normalize it, print demographics."""
    path = Path(args.input)
    records = ingest_dataset(path, format=args.format)
    demographics = dataset_demographics(records)
    print(demographics.summary())
    if args.out:
        manifest = _manifest(args)
        manifest.add_input(path)
        out = write_dataset(records, args.out)
        write_manifest(manifest.finish(), out)
    if args.json_out:
        _write_report(args, args.json_out, demographics.to_dict(), inputs=[path])
    return EXIT_OK


def _c_files(paths: List[str]) -> List[Path]:
    files: List[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(f for f in p.rglob("*") if f.suffix in C_SUFFIXES and f.is_file()))
        elif p.exists():
            files.append(p)
        else:
            raise InputError(f"no such file or directory: {p}")
    return files


def cmd_extract(args: argparse.Namespace) -> int:
    """Extract function records from raw C files."""
    manifest = _manifest(args)
    records = []
    for f in _c_files(args.sources):
        manifest.add_input(f)
        source = f.read_text(encoding="utf-8", errors="replace")
        found = extract_functions(source, source_name=f.name, project=args.project, dataset=args.dataset)
        logger.debug("%s: %d functions", f, len(found))
        records.extend(found)
    out = write_dataset(records, args.out)
    write_manifest(manifest.finish(), out)
    print(f"[Extract] functions={len(records)} -> {out}")
    return EXIT_OK


def _print_chi2(records) -> Dict[str, Any]:
    table = build_contingency(records)
    result = chi_square(table)
    print(render_contingency(table, result))
    return contingency_record(table, result)


def cmd_annotate(args: argparse.Namespace) -> int:
    """Label SATD with MAT or a pattern file; optionally report chi-squared against vulnerability."""
    path = Path(args.input)
    records = ingest_dataset(path)
    manifest = _manifest(args)
    manifest.add_input(path)
    if args.patterns:
        manifest.add_input(args.patterns)
        annotator = load_pattern_set(args.patterns)
    elif args.annotator == "mat":
        annotator = MAT_PATTERNS
    else:
        raise InputError(f"unknown annotator {args.annotator!r}")
    labeled = label_dataset(records, annotator)
    satd = sum(1 for r in labeled if r.satd_label)
    print(f"[Annotate] annotator={annotator.name} records={len(labeled)} satd={satd}")
    if args.out:
        out = write_dataset(labeled, args.out)
        write_manifest(manifest.finish(), out)
    if args.chi2:
        record = _print_chi2(labeled)
        if args.json_out:
            inputs = [path] + ([args.patterns] if args.patterns else [])
            _write_report(args, args.json_out, record, inputs=inputs)
    return EXIT_OK


def cmd_chi2(args: argparse.Namespace) -> int:
    """Chi-squared test from a labeled dataset or from four counts."""
    if args.counts:
        table = ContingencyTable(*args.counts)
        result = chi_square(table)
        print(render_contingency(table, result))
        record = contingency_record(table, result)
    elif args.input:
        record = _print_chi2(ingest_dataset(args.input))
    else:
        raise InputError("chi2 needs a dataset file or --counts N00 N01 N10 N11")
    if args.json_out:
        _write_report(args, args.json_out, record, inputs=[args.input] if args.input else [])
    return EXIT_OK


def cmd_tokenize(args: argparse.Namespace) -> int:
    """Train (or load) a BPE tokenizer and write the encoded corpus."""
    config = _load_config(args)
    path = Path(args.input)
    records = ingest_dataset(path)
    mode = InputMode(args.mode)
    prepared = [prepare_input(r, mode) for r in records]
    if args.tokenizer:
        tok = load_tokenizer(args.tokenizer)
    else:
        tok = train_bpe(prepared, config.tokenizer.vocab_size)
    encoded = encode_corpus(tok, prepared, config.tokenizer.budget)

    out_dir = Path(args.out_dir)
    manifest = _manifest(args, config)
    manifest.add_input(path)
    tok_dir = out_dir / "tokenizer"
    vocab_path, merges_path = save_tokenizer(tok, tok_dir)
    suffix = mode.value.lower()
    prepared_path = write_prepared(records, mode, out_dir / f"prepared_{suffix}.jsonl")
    encoded_path = write_jsonl(out_dir / f"encoded_{suffix}.jsonl", (e.to_dict() for e in encoded))
    manifest.finish()
    for artifact in (vocab_path, merges_path, prepared_path, encoded_path):
        write_manifest(manifest, artifact)

    lengths = [len(e.input_ids) for e in encoded]
    print(
        f"[Tokenize] mode={mode.value} vocab={len(tok)} merges={len(tok.merges)} records={len(encoded)} "
        f"truncated={sum(e.truncated for e in encoded)} unk={sum(e.unk_count for e in encoded)} "
        f"max_len={max(lengths, default=0)} budget={config.tokenizer.budget}"
    )
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    """Train one (approach, loss, mode) cell and write checkpoint, tokenizer, history and metrics."""
    config = _load_config(args)
    path = Path(args.input)
    name = _dataset_name(args, path)
    records = ingest_dataset(path)
    approach = TaskMode(args.approach)
    loss_mode = LossMode(args.loss)
    mode = InputMode(args.mode)

    splits = make_splits(name, records, config.train)
    encoded = encode_splits(splits, mode, config.tokenizer)
    callbacks = [StdoutMetricsCallback()]
    if args.tensorboard:
        callbacks.append(TensorboardCallback(Path(args.tensorboard)))
    grid = list(config.train_grid) or [config.train]
    cell = sweep_cell(
        splits, approach, loss_mode, mode, config.model, grid, config.tokenizer,
        encoded=encoded, callbacks=callbacks,
    )

    out_dir = Path(args.out_dir)
    manifest = _manifest(args, config)
    manifest.add_input(path)
    manifest.finish()
    tok_dir = out_dir / "tokenizer"
    for artifact in save_tokenizer(encoded.tokenizer, tok_dir):
        write_manifest(manifest, artifact)
    checkpoint = save_checkpoint(
        cell.model,
        out_dir / "model.pt",
        manifest_id=manifest.manifest_id,
        extra={
            "input_mode": mode.value,
            "loss_mode": loss_mode.value,
            "budget": config.tokenizer.budget,
            "tokenizer_dir": str(tok_dir),
            "best_epoch": cell.best_epoch,
            "split": splits.describe(),
        },
    )
    write_manifest(manifest, checkpoint)
    history_path = cell.history.write_csv(out_dir / "history.csv")
    write_manifest(manifest, history_path)

    report = build_report([cell], strict=False)
    report.split = splits.describe()
    metrics_path = write_jsonl(out_dir / "metrics.jsonl", report_records(report))
    write_manifest(manifest, metrics_path)
    for task, m in cell.metrics.items():
        print(f"[Test] task={task} precision={m.precision:.3f} recall={m.recall:.3f} f1={m.f1:.3f}")
    print(f"Saved checkpoint: {checkpoint}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    """Score a labeled dataset with a trained checkpoint."""
    classifier = load_trained_classifier(args.checkpoint, tokenizer_dir=args.tokenizer)
    records = ingest_dataset(args.input)
    verdicts = classifier.classify_many(records)
    results: Dict[str, Any] = {}
    for task in classifier.tasks:
        pairs = [(v[task].label, r.label(task)) for v, r in zip(verdicts, records) if r.label(task) is not None]
        if not pairs:
            logger.warning("No %s labels in %s; skipping metrics", task, args.input)
            continue
        m = compute_metrics([p for p, _ in pairs], [y for _, y in pairs])
        results[task] = m.to_dict()
        print(f"[Eval] task={task} n={len(pairs)} precision={m.precision:.3f} recall={m.recall:.3f} f1={m.f1:.3f}")
    if args.out:
        _write_report(args, args.out, {"metrics": results}, inputs=[args.input, args.checkpoint])
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    """Render delta tables from metrics records (or run the grid first with --run)."""
    records: List[Dict[str, Any]] = []
    if args.run:
        config = _load_config(args)
        if not config.datasets:
            raise InputError("--run needs `datasets` in the config file")
        datasets = {Path(p).stem: ingest_dataset(p) for p in config.datasets}
        cells, split_info = run_experiment(config, datasets)
        manifest = _manifest(args, config)
        for p in config.datasets:
            manifest.add_input(p)
        manifest.finish()
        out_dir = Path(args.out_dir or config.output_dir)
        for name in datasets:
            report = build_report(cells, dataset=name)
            report.split = split_info[name]
            records.extend(report_records(report))
        out = write_jsonl(out_dir / f"{config.name}_metrics.jsonl", records)
        write_manifest(manifest, out)
    for path in args.records:
        for rec in read_jsonl(path):
            if not isinstance(rec, dict) or "dataset" not in rec:
                raise InputError(f"{path}: metrics rows need a `dataset` field")
            records.append(rec)
    if not records:
        raise InputError("nothing to compare: pass metrics files or --run")

    by_dataset: Dict[str, List[Dict[str, Any]]] = {}
    for rec in records:
        by_dataset.setdefault(str(rec["dataset"]), []).append(rec)
    machine: List[Dict[str, Any]] = []
    for name, rows in by_dataset.items():
        report = report_from_records(rows, strict=not args.lenient)
        print(render_report(report))
        print()
        machine.extend(report_records(report))
    if args.json_out:
        write_jsonl(args.json_out, machine)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    """Median MULTI / (ST_SATD + ST_VULN) wall-clock ratios for training and test."""
    config = _load_config(args)
    path = Path(args.input)
    records = ingest_dataset(path)
    splits = make_splits(_dataset_name(args, path), records, config.train)
    runs = args.runs or config.bench_runs
    result = benchmark_mt_vs_st(
        splits, config.model, config.train, config.tokenizer, runs=runs, input_mode=InputMode(args.mode)
    )
    print(
        f"[Bench] runs={result.runs} train_ratio={result.train_ratio:.3f} (var {result.train_variance:.2e}) "
        f"test_ratio={result.test_ratio:.3f} (var {result.test_variance:.2e})"
    )
    if args.json_out:
        _write_report(args, args.json_out, result.to_dict(), inputs=[path], config=config)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--heads", type=int, default=None)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--vocab-size", type=int, default=None)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--stratify", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vulsatd", description="Joint SATD and vulnerability detection for C functions")
    parser.add_argument("--config", type=str, default=None, help="experiment JSON file")
    parser.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a dataset and print demographics")
    p.add_argument("input")
    p.add_argument("--format", default="JSONL")
    p.add_argument("--out", default=None)
    p.add_argument("--json-out", default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract", help="extract functions from C sources")
    p.add_argument("sources", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--project", default="")
    p.add_argument("--dataset", default="")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("annotate", help="label SATD")
    p.add_argument("input")
    p.add_argument("--annotator", default="mat")
    p.add_argument("--patterns", default=None, help="pattern file (w:/s: prefixed lines)")
    p.add_argument("--out", default=None)
    p.add_argument("--chi2", action="store_true")
    p.add_argument("--json-out", default=None)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("chi2", help="SATD x vulnerability independence test")
    p.add_argument("input", nargs="?", default=None)
    p.add_argument("--counts", type=int, nargs=4, metavar=("N00", "N01", "N10", "N11"), default=None)
    p.add_argument("--json-out", default=None)
    p.set_defaults(func=cmd_chi2)

    p = sub.add_parser("tokenize", help="train BPE and encode a dataset")
    p.add_argument("input")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--mode", type=str.upper, choices=[m.value for m in InputMode], default=InputMode.OUT.value)
    p.add_argument("--tokenizer", default=None, help="reuse an existing tokenizer directory")
    p.add_argument("--vocab-size", type=int, default=None)
    p.add_argument("--budget", type=int, default=None)
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("train", help="train one approach/loss/mode cell")
    p.add_argument("input")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--dataset-name", default=None)
    p.add_argument("--approach", type=str.upper, choices=[m.value for m in TaskMode], default=TaskMode.MULTI.value)
    p.add_argument("--loss", type=str.lower, choices=[m.value for m in LossMode], default=LossMode.REGULAR.value)
    p.add_argument("--mode", type=str.upper, choices=[m.value for m in InputMode], default=InputMode.OUT.value)
    p.add_argument("--tensorboard", default=None, help="TensorBoard log directory")
    _add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a labeled dataset with a checkpoint")
    p.add_argument("input")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tokenizer", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="render MT/ST and loss-mode delta tables")
    p.add_argument("records", nargs="*", help="metrics .jsonl files from train/compare")
    p.add_argument("--run", action="store_true", help="run the config's experiment grid first")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--lenient", action="store_true", help="skip deltas whose operand cell is missing")
    p.add_argument("--json-out", default=None)
    p.add_argument("--workers", type=int, default=None)
    _add_model_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench", help="MT vs ST wall-clock ratios")
    p.add_argument("input")
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--dataset-name", default=None)
    p.add_argument("--mode", type=str.upper, choices=[m.value for m in InputMode], default=InputMode.OUT.value)
    p.add_argument("--json-out", default=None)
    _add_model_flags(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (VulSatdError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:
        logger.exception("internal error in %s", args.command)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
