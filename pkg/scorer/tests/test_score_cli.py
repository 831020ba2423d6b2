"""Command line behavior with the model loader stubbed out."""

import subprocess
import sys
from pathlib import Path

from toxscore import adapter, cli
from toxscore.adapter import ModelUnavailableError

FIXTURE = Path(__file__).parent / "fixtures" / "comments_20.jsonl"


def test_score_success(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(adapter, "load_default_scorer",
                        lambda device=None: lambda texts: [0.2] * len(texts))
    out = tmp_path / "scored.jsonl"
    rc = cli.main(["score", "--in", str(FIXTURE), "--out", str(out),
                   "--batch-size", "8"])
    assert rc == 0
    assert out.exists()
    assert "scored 19/20" in capsys.readouterr().out


def test_model_unavailable_names_install_step(tmp_path, monkeypatch, capsys):
    def unavailable(device=None):
        raise ModelUnavailableError(
            "the pretrained toxicity model is not installed; run: "
            "pip install detoxify")
    monkeypatch.setattr(adapter, "load_default_scorer", unavailable)
    rc = cli.main(["score", "--in", str(FIXTURE),
                   "--out", str(tmp_path / "scored.jsonl")])
    assert rc == 1
    assert "pip install detoxify" in capsys.readouterr().err


def test_bad_batch_size_is_validation_error(tmp_path, capsys):
    rc = cli.main(["score", "--in", str(FIXTURE),
                   "--out", str(tmp_path / "scored.jsonl"), "--batch-size", "0"])
    assert rc == 2
    assert "batch_size" in capsys.readouterr().err


def test_any_record_failure_exits_nonzero(tmp_path, monkeypatch, capsys):
    def flaky(device=None):
        def scorer(texts):
            if any("risotto" in t for t in texts):
                raise RuntimeError("no")
            return [0.2] * len(texts)
        return scorer
    monkeypatch.setattr(adapter, "load_default_scorer", flaky)
    rc = cli.main(["score", "--in", str(FIXTURE),
                   "--out", str(tmp_path / "scored.jsonl")])
    assert rc == 1
    assert "could not be scored" in capsys.readouterr().err


def test_missing_input_is_an_error(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(adapter, "load_default_scorer",
                        lambda device=None: lambda texts: [0.2] * len(texts))
    rc = cli.main(["score", "--in", str(tmp_path / "absent.jsonl"),
                   "--out", str(tmp_path / "scored.jsonl")])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_module_entry_point_help():
    proc = subprocess.run([sys.executable, "-m", "toxscore", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "score" in proc.stdout
