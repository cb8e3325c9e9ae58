import json
import time

import pytest

from intentmotion import dataio
from intentmotion.checkpoint import read_checkpoint
from intentmotion.cli import main
from intentmotion.evaluator import validate_report


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    """A micro dataset plus small predictor and classifier checkpoints."""
    d = tmp_path_factory.mktemp("cli")
    (d / "gen.yaml").write_text("subjects: 2\nsamples_per_subject: 4\nseed: 3\n")
    (d / "small.yaml").write_text("epochs: 2\nbatch_size: 4\nmodel:\n  blocks: 2\n")
    (d / "small_cls.yaml").write_text("epochs: 2\nbatch_size: 4\nmodel:\n  blocks: 2\n  hidden: 8\n")
    assert main(["generate", "--config", str(d / "gen.yaml"), "--out", str(d / "data.jsonl")]) == 0
    assert main(["train", "--data", str(d / "data.jsonl"), "--config", str(d / "small.yaml"),
                 "--out", str(d / "p.ckpt")]) == 0
    assert main(["train", "--data", str(d / "data.jsonl"), "--kind", "classifier",
                 "--config", str(d / "small_cls.yaml"), "--out", str(d / "c.ckpt")]) == 0
    return d


def test_generate_default(tmp_path, capsys):
    out = tmp_path / "d.jsonl"
    assert main(["generate", "--out", str(out)]) == 0
    samples = dataio.read_dataset(out)
    assert len({s.subject for s in samples}) == 10
    assert "200 samples" in capsys.readouterr().out


def test_generate_bad_key(tmp_path, capsys):
    cfg = tmp_path / "g.yaml"
    cfg.write_text("subjcts: 3\n")
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "d.jsonl")]) != 0
    assert "subjcts" in capsys.readouterr().err


def test_generate_seed_flag(work, tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    main(["generate", "--config", str(work / "gen.yaml"), "--out", str(a), "--seed", "9"])
    main(["generate", "--config", str(work / "gen.yaml"), "--out", str(b)])
    assert a.read_bytes() != b.read_bytes()
    assert b.read_bytes() == (work / "data.jsonl").read_bytes()
    samples = dataio.read_dataset(a)
    assert samples == dataio.generate_synthetic(dataio.GeneratorConfig(
        subjects=2, samples_per_subject=4, seed=9))


def test_train_micro_run(work, tmp_path):
    log = tmp_path / "log.jsonl"
    t0 = time.perf_counter()
    rc = main(["train", "--data", str(work / "data.jsonl"), "--epochs", "50", "--batch-size", "8",
               "--out", str(tmp_path / "p.ckpt"), "--log", str(log)])
    assert rc == 0 and time.perf_counter() - t0 < 60
    assert len(log.read_text().splitlines()) == 50 * 1


def test_train_log_line_count(work, tmp_path):
    log = tmp_path / "log.jsonl"
    main(["train", "--data", str(work / "data.jsonl"), "--config", str(work / "small.yaml"),
          "--epochs", "3", "--batch-size", "3", "--out", str(tmp_path / "p.ckpt"),
          "--log", str(log)])
    assert len(log.read_text().splitlines()) == 3 * 3  # ceil(8 / 3) = 3 steps per epoch


def test_train_missing_dataset(tmp_path, capsys):
    missing = tmp_path / "nope.jsonl"
    assert main(["train", "--data", str(missing), "--out", str(tmp_path / "p.ckpt")]) != 0
    assert "nope.jsonl" in capsys.readouterr().err


def test_train_resume(work, tmp_path):
    args = ["train", "--data", str(work / "data.jsonl"), "--config", str(work / "small.yaml"),
            "--epochs", "4", "--checkpoint-every", "2"]
    main(args + ["--out", str(tmp_path / "full.ckpt")])
    main(args + ["--out", str(tmp_path / "resumed.ckpt"),
                 "--resume", str(tmp_path / "full.ckpt.epoch2")])
    a, _, _ = read_checkpoint(tmp_path / "full.ckpt")
    b, _, _ = read_checkpoint(tmp_path / "resumed.ckpt")
    assert a.checksum() == b.checksum()


def test_evaluate_single(work, tmp_path):
    out = tmp_path / "r.json"
    assert main(["evaluate", "--data", str(work / "data.jsonl"), "--predictor", str(work / "p.ckpt"),
                 "--classifier", str(work / "c.ckpt"), "--out", str(out),
                 "--csv", str(tmp_path / "r.csv")]) == 0
    doc = json.loads(out.read_text())
    assert doc["mode"] == "single" and validate_report(doc)
    assert doc["report"]["macro_f1"] is not None and doc["report"]["body_l2"] is not None


def test_evaluate_loo(work, tmp_path):
    out = tmp_path / "r.json"
    assert main(["evaluate", "--data", str(work / "data.jsonl"), "--predictor", str(work / "p.ckpt"),
                 "--mode", "loo", "--config", str(work / "small.yaml"), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert validate_report(doc)
    assert [r["subject"] for r in doc["splits"]] == ["s00", "s01"]
    assert doc["aggregate"]["subject"] == "mean"


def test_evaluate_needs_checkpoint(work, tmp_path, capsys):
    assert main(["evaluate", "--data", str(work / "data.jsonl"), "--out", str(tmp_path / "r")]) != 0
    assert "checkpoints" in capsys.readouterr().err


def test_predict_intentions(work, tmp_path):
    paths = {}
    for label in ("0", "1"):
        paths[label] = tmp_path / f"m{label}.jsonl"
        assert main(["predict", "--predictor", str(work / "p.ckpt"), "--input",
                     str(work / "data.jsonl"), "--intention", label,
                     "--out", str(paths[label])]) == 0
    h0, (m0,) = dataio.read_motion(paths["0"])
    _, (m1,) = dataio.read_motion(paths["1"])
    assert m0.frames.shape == (25, 27)
    assert (m0.frames != m1.frames).any()
    assert h0["meta"]["voted_intention"] == 0


def test_predict_auto(work, tmp_path):
    out = tmp_path / "m.jsonl"
    assert main(["predict", "--predictor", str(work / "p.ckpt"), "--classifier",
                 str(work / "c.ckpt"), "--input", str(work / "data.jsonl"), "--intention", "auto",
                 "--horizon", "25", "--out", str(out), "--csv", str(tmp_path / "m.csv")]) == 0
    header, (seq,) = dataio.read_motion(out)
    labels = header["meta"]["block_labels"]
    assert len(labels) == 3 and header["meta"]["voted_intention"] in (0, 1)
    assert seq.frames.shape == (25, 27)
    assert len((tmp_path / "m.csv").read_text().splitlines()) == 26


def test_predict_auto_needs_classifier(work, tmp_path):
    assert main(["predict", "--predictor", str(work / "p.ckpt"), "--input",
                 str(work / "data.jsonl"), "--out", str(tmp_path / "m.jsonl")]) != 0


def test_bench(work, tmp_path, capsys):
    out = tmp_path / "b.json"
    assert main(["bench", "--checkpoint", str(work / "p.ckpt"), "--runs", "5", "--warmup", "1",
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["runs"] == 5 and doc["mean_ms"] > 0 and "platform" in doc["environment"]
    assert "total" in capsys.readouterr().out


def test_wrong_kind_checkpoint(work, tmp_path, capsys):
    rc = main(["predict", "--predictor", str(work / "c.ckpt"), "--input", str(work / "data.jsonl"),
               "--intention", "0", "--out", str(tmp_path / "m.jsonl")])
    assert rc != 0 and "[kind]" in capsys.readouterr().err
