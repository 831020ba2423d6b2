"""Reference predictors: majority class, global rate, per-user rate.

NON predicts everything non-toxic (what a platform without prediction
does).  RND flips a coin biased by the global toxic share of the
training set.  USR flips a coin biased by each user's own toxic share.
"Predicted as toxic with probability p" is sampling, not thresholding,
so both random baselines take a seed.
"""

import numpy as np

# Maps user index -> toxic share of that user's training interactions.
UserToxicityProfile = dict


def predict_non(batch):
    """All-zero (non-toxic) predictions."""
    return np.zeros(len(batch), dtype=int)


def predict_rnd(batch, p_toxic, seed):
    """Each interaction toxic independently with the global probability."""
    if not 0.0 <= p_toxic <= 1.0:
        raise ValueError("p_toxic must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    return (rng.random(len(batch)) < p_toxic).astype(int)


def toxic_fraction(triples):
    """Share of label-1 interactions, used as RND's coin bias."""
    labels = [label for _, _, label in triples]
    if not labels:
        raise ValueError("cannot compute a toxic fraction of nothing")
    return sum(labels) / len(labels)


def build_user_profile(train_triples):
    """Per-user toxic share over the training interactions."""
    totals = {}
    toxic = {}
    for u, _, label in train_triples:
        totals[u] = totals.get(u, 0) + 1
        toxic[u] = toxic.get(u, 0) + label
    return {u: toxic[u] / totals[u] for u in totals}


def predict_usr(batch, profile, seed):
    """Each interaction toxic independently with its user's training share."""
    try:
        ratios = np.array([profile[row[0]] for row in batch], dtype=float)
    except KeyError as exc:
        raise ValueError(
            f"user index {exc.args[0]} missing from the training profile "
            "(likely a split violation upstream)"
        ) from None
    rng = np.random.default_rng(seed)
    return (rng.random(len(batch)) < ratios).astype(int)
