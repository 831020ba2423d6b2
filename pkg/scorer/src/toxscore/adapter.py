"""Score raw comment text with a pretrained toxicity classifier.

The classifier sits behind a one-function contract (list of texts in,
list of toxic-label probabilities out) so the I/O pipeline is testable
without the heavyweight model and the backend can be swapped without
touching this file.  The model is used as-is; nothing here trains or
fine-tunes it.

Input and output share the comment JSONL schema of the main pipeline:
one object per line with comment_id, user, subreddit, body and optional
created_utc / toxicity.  Scoring preserves record order and every input
field, and only fills in (or overwrites) the toxicity field.  Records
that cannot be scored keep their other fields and gain a ``flagged``
field instead; the main pipeline's reader ignores it.
"""

import json
import math
from dataclasses import dataclass

MODEL_VARIANT = "original"  # pinned pretrained checkpoint
FLAG_EMPTY = "empty_body"
FLAG_ERROR = "inference_error"


class ModelUnavailableError(RuntimeError):
    """The pretrained classifier is not installed."""


@dataclass(frozen=True)
class ScoringJob:
    """One batch-scoring request: where to read, where to write, how."""

    input_path: str
    output_path: str
    batch_size: int = 32
    device: str | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class ScoringStats:
    total: int
    scored: int
    empty_body: int
    failed: int


def load_default_scorer(device=None):
    """Return a texts -> probabilities callable over the pinned model.

    Only the toxic-label head is read; the model's other outputs are
    ignored by design.
    """
    try:
        from detoxify import Detoxify
    except ImportError as exc:
        raise ModelUnavailableError(
            "the pretrained toxicity model is not installed; run: "
            "pip install detoxify  (the 'original' checkpoint downloads on "
            "first use)") from exc
    model = Detoxify(MODEL_VARIANT, device=device) if device else Detoxify(MODEL_VARIANT)

    def scorer(texts):
        return [float(p) for p in model.predict(list(texts))["toxicity"]]

    return scorer


def _read_records(path):
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise ValueError(f"{path}:{lineno}: not a JSON object")
            records.append(obj)
    return records


def _flag(obj, reason):
    obj.pop("toxicity", None)
    obj["flagged"] = reason


def _assign(obj, score):
    """Attach one classifier output; out-of-range output is a failure."""
    try:
        value = float(score)
    except (TypeError, ValueError):
        value = math.nan
    if math.isnan(value) or not 0.0 <= value <= 1.0:
        _flag(obj, FLAG_ERROR)
        return False
    obj["toxicity"] = value
    obj.pop("flagged", None)
    return True


def score_comments(job, scorer=None):
    """Score every record of job.input_path into job.output_path.

    Record order and all input fields are preserved.  Empty-body records
    get toxicity 0 and flagged="empty_body" without touching the model.
    Records the model cannot score lose their toxicity field and get
    flagged="inference_error"; scoring continues past them and the
    failure count is reported in the returned stats.
    """
    if scorer is None:
        scorer = load_default_scorer(job.device)
    records = _read_records(job.input_path)

    pending = []
    empty_body = failed = 0
    for obj in records:
        body = obj.get("body")
        if body == "":
            obj["toxicity"] = 0.0
            obj["flagged"] = FLAG_EMPTY
            empty_body += 1
        elif not isinstance(body, str):
            _flag(obj, FLAG_ERROR)
            failed += 1
        else:
            pending.append(obj)

    scored = 0
    for start in range(0, len(pending), job.batch_size):
        chunk = pending[start:start + job.batch_size]
        texts = [obj["body"] for obj in chunk]
        try:
            scores = list(scorer(texts))
            if len(scores) != len(chunk):
                raise RuntimeError(
                    f"scorer returned {len(scores)} scores for {len(chunk)} texts")
        except Exception:
            # isolate the failing record(s) instead of losing the batch
            for obj, text in zip(chunk, texts):
                try:
                    ok = _assign(obj, list(scorer([text]))[0])
                except Exception:
                    _flag(obj, FLAG_ERROR)
                    ok = False
                scored += ok
                failed += not ok
        else:
            for obj, score in zip(chunk, scores):
                ok = _assign(obj, score)
                scored += ok
                failed += not ok

    with open(job.output_path, "w", encoding="utf-8") as fh:
        for obj in records:
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return ScoringStats(total=len(records), scored=scored,
                        empty_body=empty_body, failed=failed)
