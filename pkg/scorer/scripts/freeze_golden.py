"""Freeze golden toxicity scores for the 20-comment fixture.

Run on a machine with the pretrained model installed (pip install
detoxify).  Writes tests/fixtures/golden_scores.json mapping comment_id
to the model's toxic-label probability; flagged records (empty body)
are excluded.  Commit the result so the golden test can run.
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from toxscore.adapter import ScoringJob, score_comments  # noqa: E402

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def main():
    out_path = FIXTURES / "scored_tmp.jsonl"
    stats = score_comments(ScoringJob(
        input_path=str(FIXTURES / "comments_20.jsonl"),
        output_path=str(out_path)))
    if stats.failed:
        raise SystemExit(f"{stats.failed} records failed; not freezing")
    golden = {}
    with open(out_path, encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            if "flagged" not in obj:
                golden[obj["comment_id"]] = obj["toxicity"]
    out_path.unlink()
    golden_path = FIXTURES / "golden_scores.json"
    with open(golden_path, "w", encoding="utf-8") as fh:
        json.dump(golden, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"froze {len(golden)} scores -> {golden_path}")


if __name__ == "__main__":
    main()
