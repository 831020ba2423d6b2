"""Comment ingestion and the two-stage corpus filter.

Raw comment dumps arrive as JSONL (one comment object per line).  The
filter first drops comments from low-conversation subreddits (too few
distinct authors), then drops "generic" comments: those that contain no
word specific to their subreddit and no health-topic keyword.
"""

import json
import logging
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

# Stand-in health keyword list; override via KeywordConfig / --keywords.
DEFAULT_HEALTH_KEYWORDS = frozenset({
    "covid", "covid19", "coronavirus", "vaccine", "vaccination",
    "vaccinated", "pfizer", "moderna", "astrazeneca", "lockdown",
    "pandemic", "quarantine", "mask", "booster",
})

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class CommentParseError(ValueError):
    """A JSONL line that does not parse into a valid comment record."""

    def __init__(self, lineno, reason):
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno
        self.reason = reason


@dataclass
class CommentRecord:
    """One posted comment with an optional toxicity score in [0, 1]."""

    comment_id: str
    user: str
    subreddit: str
    body: str
    created_utc: int | None = None
    toxicity: float | None = None


@dataclass
class KeywordConfig:
    """Knobs of the generic-comment filter."""

    health_keywords: frozenset = DEFAULT_HEALTH_KEYWORDS
    popular_k: int = 100
    min_distinct_users: int = 20

    def __post_init__(self):
        if self.popular_k < 1:
            raise ValueError("popular_k must be >= 1")
        if self.min_distinct_users < 0:
            raise ValueError("min_distinct_users must be >= 0")
        if not self.health_keywords:
            raise ValueError("health_keywords must be non-empty")
        self.health_keywords = frozenset(k.lower() for k in self.health_keywords)


def _parse_comment(obj, lineno):
    if not isinstance(obj, dict):
        raise CommentParseError(lineno, "not a JSON object")
    for key in ("comment_id", "user", "subreddit"):
        value = obj.get(key)
        if not isinstance(value, str) or not value:
            raise CommentParseError(lineno, f"missing or empty field {key!r}")
    body = obj.get("body")
    if not isinstance(body, str):
        raise CommentParseError(lineno, "missing or non-string field 'body'")
    toxicity = obj.get("toxicity")
    if toxicity is not None:
        if isinstance(toxicity, bool) or not isinstance(toxicity, (int, float)):
            raise CommentParseError(lineno, "toxicity must be a number")
        toxicity = float(toxicity)
        if not 0.0 <= toxicity <= 1.0:
            raise CommentParseError(lineno, f"toxicity {toxicity} outside [0, 1]")
    created = obj.get("created_utc")
    if created is not None:
        if isinstance(created, bool):
            raise CommentParseError(lineno, "created_utc must be an integer")
        if isinstance(created, float):
            if not created.is_integer():
                raise CommentParseError(lineno, "created_utc must be an integer")
            created = int(created)
        elif not isinstance(created, int):
            raise CommentParseError(lineno, "created_utc must be an integer")
    return CommentRecord(
        comment_id=obj["comment_id"],
        user=obj["user"],
        subreddit=obj["subreddit"],
        body=body,
        created_utc=created,
        toxicity=toxicity,
    )


def read_comments(path, strict=False):
    """Read CommentRecords from a JSONL file, in file order.

    Malformed lines (bad JSON, missing fields, toxicity outside [0, 1])
    raise CommentParseError when ``strict`` is true; otherwise they are
    skipped and counted, with one summary warning at the end.
    """
    records = []
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CommentParseError(lineno, f"invalid JSON ({exc.msg})") from exc
                records.append(_parse_comment(obj, lineno))
            except CommentParseError:
                if strict:
                    raise
                skipped += 1
    if skipped:
        logger.warning("skipped %d malformed line(s) in %s", skipped, path)
    return records


def write_comments_jsonl(records, path):
    """Write CommentRecords as JSONL with the same schema read_comments expects."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            obj = {
                "comment_id": rec.comment_id,
                "user": rec.user,
                "subreddit": rec.subreddit,
                "body": rec.body,
            }
            if rec.created_utc is not None:
                obj["created_utc"] = rec.created_utc
            if rec.toxicity is not None:
                obj["toxicity"] = rec.toxicity
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def filter_low_activity(comments, min_distinct_users):
    """Keep only comments whose subreddit has > min_distinct_users distinct authors.

    Author counts are taken once over the full input, before any removal.
    """
    authors = defaultdict(set)
    for c in comments:
        authors[c.subreddit].add(c.user)
    return [c for c in comments if len(authors[c.subreddit]) > min_distinct_users]


def tokenize(body):
    """Lowercase and split on runs of non-alphanumeric characters."""
    return _TOKEN_RE.findall(body.lower())


def popular_words(comments, k):
    """The k tokens with the highest total occurrence count over all bodies.

    Ties at the cutoff are broken lexicographically so runs are
    reproducible; fewer than k distinct tokens returns them all.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = Counter()
    for c in comments:
        counts.update(tokenize(c.body))
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return [token for token, _ in ranked[:k]]


def specific_words(popular_in, popular_out):
    """Popular words of one side minus the popular words of the other."""
    return set(popular_in) - set(popular_out)


def is_health_related(body, keywords):
    """True iff the body contains at least one keyword token."""
    return any(token in keywords for token in tokenize(body))


def build_specific_words(comments, popular_k):
    """Per-subreddit specific-word sets.

    For each subreddit s present in ``comments``, computes the k most
    popular words inside s and the k most popular words in the rest of
    the corpus, and keeps the difference.
    """
    counts_in = defaultdict(Counter)
    total = Counter()
    for c in comments:
        tokens = tokenize(c.body)
        counts_in[c.subreddit].update(tokens)
        total.update(tokens)

    def top_k(counter):
        ranked = sorted(counter.items(), key=lambda item: (-item[1], item[0]))
        return [token for token, _ in ranked[:popular_k]]

    specific = {}
    for sub, inside in counts_in.items():
        outside = Counter()
        for token, count in total.items():
            rest = count - inside.get(token, 0)
            if rest > 0:
                outside[token] = rest
        specific[sub] = specific_words(top_k(inside), top_k(outside))
    return specific


def remove_generic(comments, specific_by_subreddit, keywords):
    """Drop comments with no subreddit-specific word and no health keyword."""
    kept = []
    for c in comments:
        try:
            specific = specific_by_subreddit[c.subreddit]
        except KeyError:
            raise ValueError(
                f"no specific-word entry configured for subreddit {c.subreddit!r}"
            ) from None
        tokens = tokenize(c.body)
        if any(t in specific for t in tokens) or any(t in keywords for t in tokens):
            kept.append(c)
    return kept


def filter_corpus(comments, config):
    """Run the full filter: low-activity removal, then generic-comment removal.

    Returns (surviving comments, stats dict).
    """
    active = filter_low_activity(comments, config.min_distinct_users)
    specific = build_specific_words(active, config.popular_k)
    kept = remove_generic(active, specific, config.health_keywords)
    stats = {
        "input_comments": len(comments),
        "after_low_activity": len(active),
        "after_generic_removal": len(kept),
        "subreddits_kept": len({c.subreddit for c in kept}),
    }
    return kept, stats
