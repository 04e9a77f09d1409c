import json

import pytest

import scripts.vulsatd as cli
from src.corpus import ingest_dataset, write_dataset
from src.utils import read_jsonl, write_jsonl
from conftest import make_separable_records

TINY_FLAGS = [
    "--lr", "1e-3", "--batch-size", "8", "--hidden", "32", "--layers", "2", "--heads", "4",
    "--max-len", "128", "--vocab-size", "300", "--budget", "125",
]


def metrics_rows(dataset, f1s, loss="regular"):
    names = ("MT_SATD", "MT_VULN", "ST_SATD", "ST_VULN")
    return [
        {"dataset": dataset, "approach": name, "loss": loss, "mode": "OUT", "precision": f1, "recall": f1, "f1": f1}
        for name, f1 in zip(names, f1s)
    ]


@pytest.fixture
def listings_file(tmp_path, listing_records, plain_record):
    return write_dataset(listing_records + [plain_record], tmp_path / "listings.jsonl")


@pytest.fixture
def separable_file(tmp_path):
    return write_dataset(make_separable_records(), tmp_path / "separable.jsonl")


class TestIngest:
    def test_summary(self, listings_file, tmp_path, capsys):
        out = tmp_path / "normalized.jsonl"
        assert cli.main(["ingest", str(listings_file), "--out", str(out), "--json-out", str(tmp_path / "demo.json")]) == 0
        assert "4 functions, 0.00% SATD, 50.00% vulnerable" in capsys.readouterr().out
        assert len(ingest_dataset(out)) == 4
        assert (tmp_path / "normalized.jsonl.manifest.json").exists()
        demographics = json.loads((tmp_path / "demo.json").read_text())
        assert demographics["functions"] == 4
        assert demographics["missing_satd"] == 4
        assert demographics["manifest_id"].startswith("sha256:")

    def test_empty_file(self, tmp_path, capsys):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert cli.main(["ingest", str(path)]) == 0
        assert "0 functions" in capsys.readouterr().out

    def test_bad_line(self, tmp_path, listing_records, capsys):
        path = tmp_path / "broken.jsonl"
        path.write_text(json.dumps(listing_records[0].to_dict()) + "\n{not json\n")
        assert cli.main(["ingest", str(path)]) == 2
        assert "line 2" in capsys.readouterr().err

    def test_invalid_utf8_is_an_input_error(self, tmp_path, listing_records, capsys):
        path = tmp_path / "latin1.jsonl"
        bad = dict(listing_records[1].to_dict(), id="latin1", leading_comment="XX")
        line = json.dumps(bad).encode("utf-8").replace(b"XX", b"\xff\xfe")
        path.write_bytes(json.dumps(listing_records[0].to_dict()).encode("utf-8") + b"\n" + line + b"\n")
        assert cli.main(["ingest", str(path)]) == 2
        assert "line 2" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert cli.main(["ingest", str(tmp_path / "absent.jsonl")]) == 2


def test_extract(tmp_path, capsys):
    from conftest import REALLOC_SOURCE

    src_dir = tmp_path / "src"
    src_dir.mkdir()
    (src_dir / "mem.c").write_text(REALLOC_SOURCE)
    (src_dir / "notes.txt").write_text("not C")
    out = tmp_path / "functions.jsonl"
    assert cli.main(["extract", str(src_dir), "--out", str(out), "--project", "ffmpeg", "--dataset", "raw"]) == 0
    assert "[Extract] functions=1" in capsys.readouterr().out
    (record,) = ingest_dataset(out)
    assert record.id == "mem.c:av_realloc:8"
    assert record.project == "ffmpeg"


class TestAnnotate:
    def test_mat_with_chi2(self, listings_file, tmp_path, capsys):
        out = tmp_path / "labeled.jsonl"
        report = tmp_path / "chi2.json"
        code = cli.main(["annotate", str(listings_file), "--chi2", "--out", str(out), "--json-out", str(report)])
        assert code == 0
        printed = capsys.readouterr().out
        assert "[Annotate] annotator=mat records=4 satd=3" in printed
        assert "chi2 = " in printed
        assert [r.satd_label for r in ingest_dataset(out)] == [True, True, True, False]
        record = json.loads(report.read_text())
        assert (record["n00"], record["n01"], record["n10"], record["n11"]) == (1, 0, 1, 2)
        assert "manifest_id" in record
        assert (tmp_path / "chi2.json.manifest.json").exists()

    def test_pattern_file(self, listings_file, tmp_path, capsys):
        patterns = tmp_path / "fixme.txt"
        patterns.write_text("# word patterns\nw: fixme\n")
        assert cli.main(["annotate", str(listings_file), "--patterns", str(patterns)]) == 0
        assert "annotator=fixme records=4 satd=2" in capsys.readouterr().out

    def test_empty_pattern_file(self, listings_file, tmp_path):
        patterns = tmp_path / "empty.txt"
        patterns.write_text("# nothing\n")
        assert cli.main(["annotate", str(listings_file), "--patterns", str(patterns)]) == 2


class TestChi2:
    def test_counts(self, capsys):
        assert cli.main(["chi2", "--counts", "134515", "7791", "1395", "657"]) == 0
        assert "chi2 = 2586.6" in capsys.readouterr().out

    def test_zero_marginal(self, capsys):
        assert cli.main(["chi2", "--counts", "0", "0", "3", "4"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_needs_input(self):
        assert cli.main(["chi2"]) == 2


class TestTokenize:
    def test_writes_artifacts_within_budget(self, listings_file, tmp_path, capsys):
        out_dir = tmp_path / "tok"
        assert cli.main(["tokenize", str(listings_file), "--out-dir", str(out_dir), "--vocab-size", "300", "--budget", "40"]) == 0
        assert "[Tokenize] mode=OUT" in capsys.readouterr().out
        for name in ("tokenizer/vocab.txt", "tokenizer/merges.txt", "encoded_out.jsonl", "prepared_out.jsonl"):
            assert (out_dir / name).exists(), name
            assert (out_dir / (name + ".manifest.json")).exists(), name
        rows = read_jsonl(out_dir / "encoded_out.jsonl")
        assert len(rows) == 4
        assert all(len(r["input_ids"]) <= 43 for r in rows)
        assert len(ingest_dataset(out_dir / "prepared_out.jsonl")) == 4

    def test_out_mode_has_longer_comments(self, listings_file, tmp_path):
        out_dir = tmp_path / "out"
        assert cli.main(["tokenize", str(listings_file), "--out-dir", str(out_dir), "--vocab-size", "300"]) == 0
        in_dir = tmp_path / "in"
        reuse = ["--tokenizer", str(out_dir / "tokenizer")]
        assert cli.main(["tokenize", str(listings_file), "--out-dir", str(in_dir), "--mode", "in"] + reuse) == 0
        out_rows = read_jsonl(out_dir / "encoded_out.jsonl")
        in_rows = read_jsonl(in_dir / "encoded_in.jsonl")
        for o, i in zip(out_rows, in_rows):
            assert o["id"] == i["id"]
            assert o["segment_lengths"][0] >= i["segment_lengths"][0]
        # the login listing only has an internal comment
        assert in_rows[2]["segment_lengths"][0] == 0
        assert out_rows[2]["segment_lengths"][0] > 0

    def test_deterministic(self, listings_file, tmp_path):
        for name in ("a", "b"):
            assert cli.main(["tokenize", str(listings_file), "--out-dir", str(tmp_path / name), "--vocab-size", "200"]) == 0
        for artifact in ("tokenizer/vocab.txt", "tokenizer/merges.txt", "encoded_out.jsonl"):
            assert (tmp_path / "a" / artifact).read_bytes() == (tmp_path / "b" / artifact).read_bytes()


def test_train_then_evaluate(separable_file, tmp_path, capsys):
    out_dir = tmp_path / "run"
    assert cli.main(["train", str(separable_file), "--out-dir", str(out_dir), "--epochs", "30"] + TINY_FLAGS) == 0
    printed = capsys.readouterr().out
    assert "[Train] epoch=30 split=val" in printed
    assert "[Test] task=satd" in printed
    for name in ("model.pt", "history.csv", "metrics.jsonl", "tokenizer/vocab.txt"):
        assert (out_dir / name).exists(), name
        assert (out_dir / (name + ".manifest.json")).exists(), name
    metrics = read_jsonl(out_dir / "metrics.jsonl")
    assert [m["approach"] for m in metrics] == ["MT_SATD", "MT_VULN"]
    assert metrics[0]["split"]["sizes"] == [51, 6, 7]

    report = tmp_path / "eval.json"
    assert cli.main(["evaluate", str(separable_file), "--checkpoint", str(out_dir / "model.pt"), "--out", str(report)]) == 0
    assert "[Eval] task=vuln n=64" in capsys.readouterr().out
    results = json.loads(report.read_text())
    assert results["metrics"]["satd"]["f1"] >= 0.9
    assert results["metrics"]["vuln"]["f1"] >= 0.9
    assert results["manifest_id"].startswith("sha256:")


class TestCompare:
    def test_markers(self, tmp_path, capsys):
        path = write_jsonl(tmp_path / "ospr.jsonl", metrics_rows("ospr", (0.711, 0.967, 0.678, 0.968)))
        machine = tmp_path / "report.jsonl"
        assert cli.main(["compare", str(path), "--json-out", str(machine)]) == 0
        printed = capsys.readouterr().out
        assert "▲ 0.033" in printed
        assert "▼ 0.001" in printed
        rows = read_jsonl(machine)
        assert rows[0]["deltas"]["mt_vs_st"] == pytest.approx(0.033, abs=1e-6)

    def test_identical_rows(self, tmp_path, capsys):
        path = write_jsonl(tmp_path / "same.jsonl", metrics_rows("same", (0.9, 0.8, 0.9, 0.8)))
        assert cli.main(["compare", str(path)]) == 0
        printed = capsys.readouterr().out
        assert "0.000" in printed
        assert "▲" not in printed and "▼" not in printed

    def test_missing_operand(self, tmp_path, capsys):
        path = write_jsonl(tmp_path / "partial.jsonl", metrics_rows("ospr", (0.711, 0.967, 0.678, 0.968))[:3])
        assert cli.main(["compare", str(path)]) == 2
        assert "ST_VULN" in capsys.readouterr().err
        assert cli.main(["compare", str(path), "--lenient"]) == 0

    def test_malformed_metrics_files(self, tmp_path, capsys):
        broken = tmp_path / "broken.jsonl"
        broken.write_text(json.dumps(metrics_rows("ospr", (0.7, 0.9, 0.6, 0.9))[0]) + "\n{oops\n")
        assert cli.main(["compare", str(broken)]) == 2
        assert "line 2" in capsys.readouterr().err

        rows = metrics_rows("ospr", (0.711, 0.967, 0.678, 0.968))
        del rows[1]["f1"]
        assert cli.main(["compare", str(write_jsonl(tmp_path / "no_f1.jsonl", rows))]) == 2
        assert "missing field" in capsys.readouterr().err

        rows = metrics_rows("ospr", (0.711, 0.967, 0.678, 0.968))
        del rows[0]["dataset"]
        assert cli.main(["compare", str(write_jsonl(tmp_path / "no_dataset.jsonl", rows))]) == 2
        assert "dataset" in capsys.readouterr().err

    def test_nothing_to_compare(self):
        assert cli.main(["compare"]) == 2


class TestBench:
    def test_single_run(self, separable_file, tmp_path, capsys):
        report = tmp_path / "bench.json"
        args = ["bench", str(separable_file), "--runs", "1", "--epochs", "1", "--json-out", str(report)] + TINY_FLAGS
        assert cli.main(args) == 0
        assert "[Bench] runs=1" in capsys.readouterr().out
        result = json.loads(report.read_text())
        assert result["runs"] == 1
        assert set(result["seconds"]) == {"MULTI", "ST_SATD", "ST_VULN"}

    def test_bad_config(self, separable_file, tmp_path):
        config = tmp_path / "broken.json"
        config.write_text("{not json")
        assert cli.main(["--config", str(config), "bench", str(separable_file)]) == 2
        assert cli.main(["bench", str(separable_file), "--hidden", "30", "--heads", "4"]) == 2

    def test_internal_error(self, separable_file, monkeypatch):
        def boom(*args, **kwargs):
            raise RuntimeError("unexpected")

        monkeypatch.setattr(cli, "benchmark_mt_vs_st", boom)
        assert cli.main(["bench", str(separable_file), "--runs", "1"] + TINY_FLAGS) == 3
