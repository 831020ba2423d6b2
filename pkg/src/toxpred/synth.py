"""Synthetic dyadic corpora with planted low-rank toxicity structure.

The real comment corpus cannot be redistributed, so pipeline and model
checks run on generated data instead: hidden user/subreddit factors
decide which interactions are toxic, a calibrated threshold sets the
class balance, and each interaction is expanded into comments whose
toxicity scores average on the correct side of 0.5.  Comment bodies are
placeholders; the keyword filter is exercised on hand-built fixtures,
not on this output.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .corpus import CommentRecord

CALIBRATION_TOLERANCE = 0.02

# Beta shapes peaked near 1 and near 0, echoing the strongly bimodal
# per-comment toxicity seen in real interactions.
_TOXIC_BETA = (8.0, 2.0)
_CLEAN_BETA = (2.0, 8.0)

# Planted factor geometry.  The leading axis carries main effects (how
# toxicity-prone a subreddit is, how much a user amplifies that); the
# remaining axes carry a weak user-subreddit interaction.  Main effects
# dominate on purpose: at ~7 observations per user a planted structure
# buried in per-pair interactions is not recoverable by any learner, and
# the generated task would be noise.  Real toxicity concentrates in a few
# venues, which this mix mimics.
_USER_MAIN_MEAN = 1.0
_USER_MAIN_STD = 0.05
_SUB_MAIN_MEAN = 1.0
_SUB_MAIN_STD = 3.0
_INTERACTION_STD = 0.10


@dataclass
class SynthSpec:
    """Defaults mirror the real corpus: ~10% toxic, ~6.8 interactions per user."""

    n_users: int = 2000
    m_subs: int = 100
    d_true: int = 2
    toxic_rate_target: float = 0.10
    density: float = 0.0677
    noise_flip_prob: float = 0.05
    comments_min: int = 1
    comments_max: int = 6
    seed: int = 0

    def __post_init__(self):
        if self.d_true < 1:
            raise ValueError("d_true must be >= 1")
        if not 0.0 < self.toxic_rate_target < 1.0:
            raise ValueError("toxic_rate_target must lie in (0, 1)")
        if not 0.0 < self.density <= 1.0:
            raise ValueError("density must lie in (0, 1]")
        if not 0.0 <= self.noise_flip_prob < 0.5:
            raise ValueError("noise_flip_prob must lie in [0, 0.5)")
        if not 1 <= self.comments_min <= self.comments_max:
            raise ValueError("need 1 <= comments_min <= comments_max")
        if self.density * self.n_users * self.m_subs < self.n_users + self.m_subs:
            raise ValueError("density too low for the splitter to cover all entities")


def _draw_factors(rng, count, d_true, main_mean, main_std):
    """Gaussian factors: main effect on axis 0, interaction on the rest."""
    factors = _INTERACTION_STD * rng.standard_normal((count, d_true))
    factors[:, 0] = main_mean + main_std * rng.standard_normal(count)
    return factors


def _interaction_toxicities(rng, label, count):
    """Comment scores whose mean is strictly on the label's side of 0.5."""
    a, b = _TOXIC_BETA if label else _CLEAN_BETA
    while True:
        scores = rng.beta(a, b, size=count)
        mean = scores.mean()
        if (label == 1 and mean > 0.5) or (label == 0 and mean < 0.5):
            return scores


def generate(spec):
    """Build a comment corpus plus its hidden ground truth.

    Returns (comments, ground_truth): comments are CommentRecords ready
    for JSONL emission; ground_truth holds the planted factors, the
    calibrated bias, and the clean and observed (noise-flipped) labels.
    Deterministic for a fixed spec.
    """
    rng = np.random.default_rng(spec.seed)
    n, m = spec.n_users, spec.m_subs
    user_factors = _draw_factors(rng, n, spec.d_true, _USER_MAIN_MEAN, _USER_MAIN_STD)
    sub_factors = _draw_factors(rng, m, spec.d_true, _SUB_MAIN_MEAN, _SUB_MAIN_STD)

    n_pairs = int(round(spec.density * n * m))
    cells = np.sort(rng.choice(n * m, size=n_pairs, replace=False))
    u_idx, s_idx = np.divmod(cells, m)

    scores = np.einsum("ij,ij->i", user_factors[u_idx], sub_factors[s_idx])
    threshold = float(np.quantile(scores, 1.0 - spec.toxic_rate_target))
    bias = -threshold
    clean = (scores > threshold).astype(int)
    realized = float(clean.mean())
    if abs(realized - spec.toxic_rate_target) > CALIBRATION_TOLERANCE:
        raise ValueError(
            f"calibration infeasible: toxic fraction {realized:.4f} vs "
            f"target {spec.toxic_rate_target:.4f}"
        )

    flips = rng.random(n_pairs) < spec.noise_flip_prob
    observed = np.where(flips, 1 - clean, clean)
    counts = rng.integers(spec.comments_min, spec.comments_max + 1, size=n_pairs)

    comments = []
    comment_no = 0
    for i in range(n_pairs):
        toxicities = _interaction_toxicities(rng, int(observed[i]), int(counts[i]))
        for score in toxicities:
            comment_no += 1
            comments.append(CommentRecord(
                comment_id=f"c{comment_no:07d}",
                user=f"u{u_idx[i]:05d}",
                subreddit=f"s{s_idx[i]:03d}",
                body=f"synthetic comment {comment_no}",
                toxicity=float(score),
            ))

    ground_truth = {
        "spec": asdict(spec),
        "bias": bias,
        "user_factors": user_factors.tolist(),
        "sub_factors": sub_factors.tolist(),
        "pairs": [[int(u), int(s)] for u, s in zip(u_idx, s_idx)],
        "clean_labels": clean.tolist(),
        "observed_labels": observed.tolist(),
        "toxic_fraction_clean": realized,
        "toxic_fraction_observed": float(observed.mean()),
    }
    return comments, ground_truth
