"""Cold-start-free train/validation/test partitioning of dyadic data.

Classic holdout on dyadic data can strand users or subreddits entirely
in the test partition, leaving nothing to learn their latent features
from.  The procedure here holds out, per user and per class, one random
interaction, then switches one back per subreddit whose entire class
ended up held out.  Without timestamps the held-out interaction is drawn
uniformly at random under a fixed seed instead of time-wise last.
"""

import csv
import random
from collections import defaultdict
from dataclasses import dataclass

TRAIN = "train"
VALIDATION = "validation"
TEST = "test"
TAGS = (TRAIN, VALIDATION, TEST)


@dataclass
class SplitAssignment:
    """Per-interaction tag, parallel to the dataset's interaction list."""

    assignment: list
    seed: int | None
    with_validation: bool


def _holdout_pass(interactions, eligible, tags, rng, held_tag):
    """One holdout round over ``eligible`` interaction positions.

    Per user and class, one of >=2 interactions goes to ``held_tag``;
    then any subreddit whose entire class was held out gets one switched
    back to train.  Toxic interactions are processed before non-toxic,
    users and subreddits in index order; the rng is consumed in that
    fixed order.
    """
    for label in (1, 0):
        by_user = defaultdict(list)
        for i in eligible:
            it = interactions[i]
            if it.label == label:
                by_user[it.user_index].append(i)
        for user in sorted(by_user):
            candidates = by_user[user]
            if len(candidates) >= 2:
                held = candidates[rng.randrange(len(candidates))]
                tags[held] = held_tag

    for label in (1, 0):
        by_sub = defaultdict(list)
        for i in eligible:
            it = interactions[i]
            if it.label == label:
                by_sub[it.subreddit_index].append(i)
        for sub in sorted(by_sub):
            candidates = by_sub[sub]
            held = [i for i in candidates if tags[i] == held_tag]
            if held and len(held) == len(candidates):
                back = held[rng.randrange(len(held))]
                tags[back] = TRAIN


def loli_binary_split(dataset, seed, with_validation=True):
    """Partition a DyadicDataset into train/validation/test tags.

    The test round runs on the full dataset; when ``with_validation`` is
    set the same procedure is re-run on the surviving train subset with
    seed + 1, relabeling its held-out interactions as validation.
    Deterministic for a fixed (dataset, seed).
    """
    if not dataset.interactions:
        raise ValueError("cannot split an empty dataset")
    n = len(dataset.interactions)
    tags = [TRAIN] * n

    rng = random.Random(seed)
    _holdout_pass(dataset.interactions, range(n), tags, rng, TEST)

    if with_validation:
        rng_val = random.Random(seed + 1)
        train_positions = [i for i in range(n) if tags[i] == TRAIN]
        _holdout_pass(dataset.interactions, train_positions, tags, rng_val, VALIDATION)

    return SplitAssignment(assignment=tags, seed=seed, with_validation=with_validation)


def verify_split(dataset, split):
    """Check the cold-start and partition invariants; return violation strings.

    An empty report means: the tags are a valid partition, every user
    and subreddit present in the dataset has at least one train
    interaction, and the entities of the held-out partitions are subsets
    of the train entities.
    """
    violations = []
    tags = split.assignment
    if len(tags) != len(dataset.interactions):
        violations.append(
            f"assignment length {len(tags)} != interaction count {len(dataset.interactions)}"
        )
        return violations
    for i, tag in enumerate(tags):
        if tag not in TAGS:
            violations.append(f"interaction {i} has unknown tag {tag!r}")

    users_by_tag = {tag: set() for tag in TAGS}
    subs_by_tag = {tag: set() for tag in TAGS}
    all_users = set()
    all_subs = set()
    for it, tag in zip(dataset.interactions, tags):
        all_users.add(it.user_index)
        all_subs.add(it.subreddit_index)
        if tag in users_by_tag:
            users_by_tag[tag].add(it.user_index)
            subs_by_tag[tag].add(it.subreddit_index)

    for user in sorted(all_users - users_by_tag[TRAIN]):
        violations.append(f"user index {user} has no train interaction")
    for sub in sorted(all_subs - subs_by_tag[TRAIN]):
        violations.append(f"subreddit index {sub} has no train interaction")
    for tag in (TEST, VALIDATION):
        for user in sorted(users_by_tag[tag] - users_by_tag[TRAIN]):
            violations.append(f"{tag} user index {user} not covered by train")
        for sub in sorted(subs_by_tag[tag] - subs_by_tag[TRAIN]):
            violations.append(f"{tag} subreddit index {sub} not covered by train")
    return violations


def partition_triples(dataset, split):
    """Group (user_index, subreddit_index, label) triples by split tag."""
    parts = {tag: [] for tag in TAGS}
    for it, tag in zip(dataset.interactions, split.assignment):
        parts[tag].append((it.user_index, it.subreddit_index, it.label))
    return parts


SPLIT_HEADER = ["user", "subreddit", "split"]


def write_split_csv(dataset, split, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SPLIT_HEADER)
        for it, tag in zip(dataset.interactions, split.assignment):
            writer.writerow([dataset.users[it.user_index],
                             dataset.subreddits[it.subreddit_index],
                             tag])


def read_split_csv(dataset, path):
    """Re-attach a split file to a dataset; every interaction must be tagged."""
    by_pair = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SPLIT_HEADER:
            raise ValueError(f"unexpected split header: {header}")
        for user, subreddit, tag in reader:
            if tag not in TAGS:
                raise ValueError(f"unknown split tag {tag!r}")
            by_pair[(user, subreddit)] = tag
    tags = []
    for it in dataset.interactions:
        pair = (dataset.users[it.user_index], dataset.subreddits[it.subreddit_index])
        if pair not in by_pair:
            raise ValueError(f"split file has no entry for interaction {pair}")
        tags.append(by_pair[pair])
    return SplitAssignment(
        assignment=tags,
        seed=None,
        with_validation=VALIDATION in tags,
    )
