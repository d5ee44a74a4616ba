import io
import json
import sys

import numpy as np
import pytest

from singit import cli, data, synth
from singit.checkpoint import save_checkpoint
from singit.model import ModelConfig, init_params
from singit.speaker import load_embedding
from singit.training import TrainConfig, read_curve

MOCK = f"{sys.executable} -m singit.mock_separator {{input}} {{outdir}}"
TINY = ["--conv-channels", "8", "--enc-lstm-hidden", "4", "--dec-lstm-hidden", "4", "--crop-frames", "8", "--downsample", "4"]


def files(d):
    return sorted(p.name for p in d.iterdir())


@pytest.fixture(scope="module")
def ckpt(tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "m.ckpt"
    model = init_params(ModelConfig(), seed=0)
    model.step = 1
    save_checkpoint(path, model)
    return path


@pytest.fixture
def wavs(tmp_path):
    data.save_audio(tmp_path / "s.wav", synth.speech_like(1.0, f0=220, seed=1))
    data.save_audio(tmp_path / "b1.wav", synth.speech_like(1.0, f0=110, seed=2))
    return tmp_path


def test_help(capsys):
    assert cli.main(["--help"]) == 0
    assert "usage" in capsys.readouterr().out
    for sub in ("ingest", "separate", "embed", "train", "transfer", "vocode", "survey-stats"):
        assert cli.main([sub, "--help"]) == 0


def test_usage_errors(capsys):
    assert cli.main(["bogus"]) == 1
    assert cli.main([]) == 1
    assert cli.main(["embed"]) == 1
    assert "usage" in capsys.readouterr().err


def test_survey_stats_stdin(monkeypatch, capsys):
    monkeypatch.setattr(sys, "stdin", io.StringIO("5\n5\n5\n5\n"))
    assert cli.main(["survey-stats"]) == 0
    assert capsys.readouterr().out.strip() == "5.00±0.000"


def test_survey_stats_file(tmp_path, capsys):
    (tmp_path / "r.txt").write_text("1\n5\n")
    assert cli.main(["survey-stats", "--file", str(tmp_path / "r.txt")]) == 0
    assert capsys.readouterr().out.strip() == "3.00±25.412"
    (tmp_path / "one.txt").write_text("4\n")
    assert cli.main(["survey-stats", "--file", str(tmp_path / "one.txt")]) == 0
    assert "degenerate" in capsys.readouterr().out


def test_survey_stats_bad_input(tmp_path):
    (tmp_path / "r.txt").write_text("7\n")
    assert cli.main(["survey-stats", "--file", str(tmp_path / "r.txt")]) == 2
    (tmp_path / "r.txt").write_text("three\n")
    assert cli.main(["survey-stats", "--file", str(tmp_path / "r.txt")]) == 2


def test_embed(wavs):
    out = wavs / "out"
    out.mkdir()
    assert cli.main(["embed", "--speech", str(wavs / "b1.wav"), "--out", str(out / "b.emb")]) == 0
    assert files(out) == ["b.emb"]
    assert load_embedding(out / "b.emb").shape == (256,)


def test_ingest(tmp_path):
    (tmp_path / "c" / "spk").mkdir(parents=True)
    data.save_audio(tmp_path / "c" / "spk" / "a.wav", synth.speech_like(0.5))
    assert cli.main(["ingest", str(tmp_path / "c"), "--out", str(tmp_path / "x.manifest")]) == 0
    assert len(data.read_manifest(tmp_path / "x.manifest")) == 1


def test_vocode_wav_and_npy(wavs):
    assert cli.main(["vocode", "--in", str(wavs / "s.wav"), "--out", str(wavs / "v.wav"), "--gl-iters", "4"]) == 0
    assert len(data.load_audio(wavs / "v.wav")) == 16000
    np.save(wavs / "x.npy", np.full((256, 11), 0.3))
    assert cli.main(["vocode", "--in", str(wavs / "x.npy"), "--out", str(wavs / "n.wav"), "--gl-iters", "2"]) == 0


def test_separate(wavs):
    out = wavs / "stems"
    assert cli.main(["separate", "--song", str(wavs / "s.wav"), "--outdir", str(out), "--separator", MOCK]) == 0
    assert files(out) == ["accompaniment.wav", "vocals.wav"]


def test_separate_unconfigured_is_runtime_error(wavs, monkeypatch):
    monkeypatch.delenv(data.SEPARATOR_ENV, raising=False)
    assert cli.main(["separate", "--song", str(wavs / "s.wav"), "--outdir", str(wavs / "o")]) == 2


def test_transfer_song(wavs, ckpt, monkeypatch):
    monkeypatch.setenv(data.SEPARATOR_ENV, MOCK)
    out = wavs / "o.wav"
    argv = ["transfer", "--song", str(wavs / "s.wav"), "--speech", str(wavs / "b1.wav"), "--ckpt", str(ckpt), "--out", str(out)]
    assert cli.main(argv + ["--gl-iters", "4"]) == 0
    w = data.load_audio(out)
    assert len(w) == 16000 and w.peak <= 1.0


def test_transfer_vocals_with_embedding_file(wavs, ckpt):
    assert cli.main(["embed", "--speech", str(wavs / "b1.wav"), "--out", str(wavs / "b.emb")]) == 0
    argv = ["transfer", "--vocals", str(wavs / "s.wav"), "--embedding", str(wavs / "b.emb"),
            "--ckpt", str(ckpt), "--out", str(wavs / "o.wav"), "--gl-iters", "2", "--zero-phase"]
    assert cli.main(argv) == 0


def test_transfer_usage_and_runtime_errors(wavs, ckpt):
    base = ["--ckpt", str(ckpt), "--out", str(wavs / "o.wav")]
    assert cli.main(["transfer", "--vocals", str(wavs / "s.wav")] + base) == 1
    assert cli.main(["transfer", "--song", "a", "--vocals", "b", "--speech", "c"] + base) == 1
    missing = ["transfer", "--vocals", str(wavs / "nope.wav"), "--speech", str(wavs / "b1.wav")] + base
    assert cli.main(missing) == 2
    bad_ckpt = ["transfer", "--vocals", str(wavs / "s.wav"), "--speech", str(wavs / "b1.wav"),
                "--ckpt", str(wavs / "s.wav"), "--out", str(wavs / "o.wav")]
    assert cli.main(bad_ckpt) == 2


@pytest.fixture
def corpus(tmp_path):
    for spk, kind in (("a", "speech"), ("b", "singing")):
        d = tmp_path / "corpus" / spk
        d.mkdir(parents=True)
        (d / ".kind").write_text(kind)
        data.save_audio(d / "u.wav", synth.speech_like(0.6, seed=len(spk + kind)))
    assert cli.main(["ingest", str(tmp_path / "corpus"), "--out", str(tmp_path / "c.manifest")]) == 0
    return tmp_path


def train(corpus, extra, out="run"):
    argv = ["train", "--manifest", str(corpus / "c.manifest"), "--out-dir", str(corpus / out)] + TINY + extra
    assert cli.main(argv) == 0
    return read_curve(corpus / out / "loss.csv")


def test_train_outputs(corpus):
    curve = train(corpus, ["--max-steps", "2", "--checkpoint-every", "2"])
    assert len(curve) == 2
    assert files(corpus / "run") == ["final.ckpt", "loss.csv", "step_00000002.ckpt"]


def test_train_config_precedence(corpus, monkeypatch):
    (corpus / "cfg.json").write_text(json.dumps({"max_steps": 3, "lr": 0.001}))
    cfg = ["--config", str(corpus / "cfg.json")]
    assert len(train(corpus, cfg, "file")) == 3
    monkeypatch.setenv("SINGIT_MAX_STEPS", "2")
    assert len(train(corpus, cfg, "env")) == 2
    assert len(train(corpus, cfg + ["--max-steps", "1"], "flag")) == 1


def test_resolve_config_precedence():
    env = {"SINGIT_LR": "0.5", "SINGIT_SEED": "4"}
    cfg = cli.resolve_config(TrainConfig, {"lr": 0.25}, {"lr": 0.1, "seed": 9, "batch_size": 3}, env)
    assert (cfg.lr, cfg.seed, cfg.batch_size, cfg.max_steps) == (0.25, 4, 3, TrainConfig().max_steps)


def test_train_unknown_config_key(corpus):
    (corpus / "cfg.json").write_text(json.dumps({"learning_rate": 1}))
    argv = ["train", "--manifest", str(corpus / "c.manifest"), "--out-dir", str(corpus / "r"), "--config", str(corpus / "cfg.json")]
    assert cli.main(argv) == 2


def test_train_resume(corpus):
    train(corpus, ["--max-steps", "2"])
    argv = ["train", "--manifest", str(corpus / "c.manifest"), "--out-dir", str(corpus / "more"),
            "--resume", str(corpus / "run" / "final.ckpt"), "--max-steps", "3"] + TINY
    assert cli.main(argv) == 0
    assert [s for s, _ in read_curve(corpus / "more" / "loss.csv")] == [3]
