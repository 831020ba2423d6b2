"""Aggregate comments into labeled user-subreddit interactions.

An interaction is the set of comments one user posted in one subreddit.
Its binary label is the rounded mean of the member comment toxicities,
with the boundary mean == 0.5 mapping to non-toxic.
"""

import csv
import json
import math
from dataclasses import dataclass
from typing import NamedTuple


@dataclass
class InteractionRecord:
    """All comments of one user in one subreddit, reduced to a labeled mean."""

    user: str
    subreddit: str
    comment_count: int
    mean_toxicity: float
    label: int


class IndexedInteraction(NamedTuple):
    user_index: int
    subreddit_index: int
    label: int
    mean_toxicity: float
    comment_count: int


@dataclass
class DyadicDataset:
    """Interaction set with contiguous user and subreddit indices.

    Indices follow first appearance in the interaction sequence, so they
    are deterministic for a fixed input ordering but not stable across
    differently-ordered corpora.
    """

    users: list
    subreddits: list
    interactions: list

    @property
    def n_users(self):
        return len(self.users)

    @property
    def n_subreddits(self):
        return len(self.subreddits)


def toxicity_label(mean_toxicity):
    """Binary label for a mean toxicity: non-toxic unless it exceeds 0.5."""
    return 0 if mean_toxicity <= 0.5 else 1


def aggregate_interactions(comments):
    """One InteractionRecord per distinct (user, subreddit) pair.

    The mean is computed with exact compensated summation (math.fsum),
    so it does not depend on comment order.  Every comment must carry a
    toxicity score.
    """
    groups = {}
    for c in comments:
        if c.toxicity is None:
            raise ValueError(f"comment {c.comment_id!r} has no toxicity score")
        groups.setdefault((c.user, c.subreddit), []).append(c.toxicity)
    records = []
    for (user, subreddit), scores in groups.items():
        mean = math.fsum(scores) / len(scores)
        records.append(InteractionRecord(
            user=user,
            subreddit=subreddit,
            comment_count=len(scores),
            mean_toxicity=mean,
            label=toxicity_label(mean),
        ))
    return records


def index_dataset(interactions):
    """Assign contiguous indices to users and subreddits, in first-appearance order."""
    user_index = {}
    sub_index = {}
    users = []
    subreddits = []
    indexed = []
    seen_pairs = set()
    for rec in interactions:
        if rec.user not in user_index:
            user_index[rec.user] = len(users)
            users.append(rec.user)
        if rec.subreddit not in sub_index:
            sub_index[rec.subreddit] = len(subreddits)
            subreddits.append(rec.subreddit)
        pair = (user_index[rec.user], sub_index[rec.subreddit])
        if pair in seen_pairs:
            raise ValueError(
                f"duplicate interaction for user {rec.user!r} in {rec.subreddit!r}"
            )
        seen_pairs.add(pair)
        indexed.append(IndexedInteraction(
            user_index=pair[0],
            subreddit_index=pair[1],
            label=rec.label,
            mean_toxicity=rec.mean_toxicity,
            comment_count=rec.comment_count,
        ))
    return DyadicDataset(users=users, subreddits=subreddits, interactions=indexed)


INTERACTIONS_HEADER = ["user", "subreddit", "comment_count", "mean_toxicity", "label"]


def write_interactions_csv(records, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(INTERACTIONS_HEADER)
        for rec in records:
            writer.writerow([
                rec.user,
                rec.subreddit,
                rec.comment_count,
                repr(rec.mean_toxicity),
                rec.label,
            ])


def read_interactions_csv(path):
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != INTERACTIONS_HEADER:
            raise ValueError(f"unexpected interactions header: {header}")
        for row in reader:
            user, subreddit, count, mean, label = row
            records.append(InteractionRecord(
                user=user,
                subreddit=subreddit,
                comment_count=int(count),
                mean_toxicity=float(mean),
                label=int(label),
            ))
    return records


def write_index_json(dataset, path):
    """Sidecar mapping user/subreddit strings to their contiguous indices."""
    payload = {
        "users": {name: i for i, name in enumerate(dataset.users)},
        "subreddits": {name: i for i, name in enumerate(dataset.subreddits)},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
