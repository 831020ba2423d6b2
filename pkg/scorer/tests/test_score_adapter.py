"""Adapter behavior with an injected scoring backend."""

import json
from pathlib import Path

import pytest

from toxscore.adapter import (FLAG_EMPTY, FLAG_ERROR, ScoringJob,
                              score_comments)

FIXTURE = Path(__file__).parent / "fixtures" / "comments_20.jsonl"


def fixture_lines():
    return [json.loads(line)
            for line in FIXTURE.read_text(encoding="utf-8").splitlines()]


def constant_scorer(value):
    def scorer(texts):
        return [value] * len(texts)
    return scorer


def run(tmp_path, scorer, batch_size=32, src=FIXTURE):
    out = tmp_path / "scored.jsonl"
    job = ScoringJob(input_path=str(src), output_path=str(out),
                     batch_size=batch_size)
    stats = score_comments(job, scorer=scorer)
    return stats, [json.loads(line)
                   for line in out.read_text(encoding="utf-8").splitlines()]


def test_job_validation():
    with pytest.raises(ValueError):
        ScoringJob(input_path="a", output_path="b", batch_size=0)


def test_order_count_and_fields_preserved(tmp_path):
    stats, out = run(tmp_path, constant_scorer(0.25))
    original = fixture_lines()
    assert stats.total == len(out) == 20
    assert [o["comment_id"] for o in out] == [o["comment_id"] for o in original]
    for before, after in zip(original, out):
        for key, value in before.items():
            if key != "toxicity":
                assert after[key] == value, key
    assert out[13]["permalink"] == "/r/movies/f14"  # extra fields survive
    assert out[0]["created_utc"] == 1609459200


def test_scored_records_carry_backend_output(tmp_path):
    def scorer(texts):
        return [0.5 + 0.001 * len(t) for t in texts]
    stats, out = run(tmp_path, scorer)
    assert stats.scored == 19 and stats.failed == 0
    for obj in out:
        if obj["comment_id"] != "f13":
            assert obj["toxicity"] == 0.5 + 0.001 * len(obj["body"])
            assert "flagged" not in obj


def test_empty_body_flagged_zero_and_never_sent_to_model(tmp_path):
    seen = []

    def scorer(texts):
        seen.extend(texts)
        return [0.4] * len(texts)

    stats, out = run(tmp_path, scorer)
    assert stats.empty_body == 1
    assert "" not in seen and len(seen) == 19
    empty = next(o for o in out if o["comment_id"] == "f13")
    assert empty["toxicity"] == 0.0
    assert empty["flagged"] == FLAG_EMPTY


def test_batching_respects_batch_size(tmp_path):
    sizes = []

    def scorer(texts):
        sizes.append(len(texts))
        return [0.1] * len(texts)

    run(tmp_path, scorer, batch_size=7)
    assert sizes == [7, 7, 5]  # 19 scorable records


def test_output_validates_against_main_pipeline_reader(tmp_path):
    corpus = pytest.importorskip(
        "toxpred.corpus", reason="main pipeline package not installed")
    out = tmp_path / "scored.jsonl"
    score_comments(ScoringJob(str(FIXTURE), str(out)), scorer=constant_scorer(0.9))
    records = corpus.read_comments(out, strict=True)
    assert len(records) == 20
    assert [r.comment_id for r in records] == [o["comment_id"]
                                              for o in fixture_lines()]


def test_single_record_failure_is_isolated(tmp_path):
    poison = "Correlation is not causation, the study never controlled for income."

    def scorer(texts):
        if poison in texts:
            raise RuntimeError("backend refused this batch")
        return [0.2] * len(texts)

    stats, out = run(tmp_path, scorer)
    assert stats.failed == 1 and stats.scored == 18
    bad = next(o for o in out if o["comment_id"] == "f12")
    assert bad["flagged"] == FLAG_ERROR
    assert "toxicity" not in bad
    good = next(o for o in out if o["comment_id"] == "f11")
    assert good["toxicity"] == 0.2


def test_out_of_range_backend_output_is_a_failure(tmp_path):
    def scorer(texts):
        return [1.5 if "risotto" in t else 0.3 for t in texts]
    stats, out = run(tmp_path, scorer)
    assert stats.failed == 1
    bad = next(o for o in out if o["comment_id"] == "f01")
    assert bad["flagged"] == FLAG_ERROR and "toxicity" not in bad


def test_missing_body_is_a_failure_not_a_crash(tmp_path):
    src = tmp_path / "in.jsonl"
    src.write_text('{"comment_id": "x1", "user": "u", "subreddit": "s"}\n'
                   '{"comment_id": "x2", "user": "u", "subreddit": "s", '
                   '"body": "fine text"}\n')
    stats, out = run(tmp_path, constant_scorer(0.2), src=src)
    assert stats.failed == 1 and stats.scored == 1
    assert out[0]["flagged"] == FLAG_ERROR and "toxicity" not in out[0]
    assert out[1]["toxicity"] == 0.2


def test_malformed_input_line_raises_with_location(tmp_path):
    src = tmp_path / "in.jsonl"
    src.write_text('{"comment_id": "ok", "body": "a"}\nnot json\n')
    with pytest.raises(ValueError, match=":2:"):
        run(tmp_path, constant_scorer(0.2), src=src)


def test_rescoring_clears_stale_flags(tmp_path):
    first = tmp_path / "first.jsonl"
    score_comments(ScoringJob(str(FIXTURE), str(first)),
                   scorer=lambda texts: (_ for _ in ()).throw(RuntimeError()))
    stats, out = run(tmp_path, constant_scorer(0.2), src=first)
    assert stats.failed == 0 and stats.scored == 19
    assert all("flagged" not in o or o["comment_id"] == "f13" for o in out)


def test_output_is_deterministic(tmp_path):
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    for path in (a, b):
        score_comments(ScoringJob(str(FIXTURE), str(path)),
                       scorer=constant_scorer(0.375))
    assert a.read_bytes() == b.read_bytes()
