"""Synthetic corpus generation with planted structure."""

import numpy as np
import pytest

from toxpred import evaluation, factorizer, splitter
from toxpred.corpus import read_comments, write_comments_jsonl
from toxpred.labeler import aggregate_interactions, index_dataset
from toxpred.synth import SynthSpec, generate


SMALL = dict(n_users=120, m_subs=20, density=0.15, seed=7)


def test_spec_validation():
    with pytest.raises(ValueError):
        SynthSpec(d_true=0)
    with pytest.raises(ValueError):
        SynthSpec(toxic_rate_target=0.0)
    with pytest.raises(ValueError):
        SynthSpec(density=0.0)
    with pytest.raises(ValueError):
        SynthSpec(noise_flip_prob=0.5)
    with pytest.raises(ValueError):
        SynthSpec(comments_min=3, comments_max=2)
    with pytest.raises(ValueError):
        # too sparse for every user and subreddit to be coverable
        SynthSpec(n_users=100, m_subs=10, density=0.01)


def test_generate_is_deterministic():
    a_comments, a_truth = generate(SynthSpec(**SMALL))
    b_comments, b_truth = generate(SynthSpec(**SMALL))
    assert a_comments == b_comments
    assert a_truth == b_truth
    c_comments, _ = generate(SynthSpec(**{**SMALL, "seed": 8}))
    assert c_comments != a_comments


def test_pair_count_matches_density():
    spec = SynthSpec(**SMALL)
    _, truth = generate(spec)
    expected = round(spec.density * spec.n_users * spec.m_subs)
    assert len(truth["pairs"]) == expected
    assert len(truth["clean_labels"]) == expected
    assert len(set(map(tuple, truth["pairs"]))) == expected  # distinct cells


def test_calibration_hits_target_rate():
    spec = SynthSpec(n_users=500, m_subs=50, density=0.3,
                     toxic_rate_target=0.1, seed=3)
    _, truth = generate(spec)
    assert 0.08 <= truth["toxic_fraction_clean"] <= 0.12


def test_labels_follow_planted_threshold_rule():
    spec = SynthSpec(**SMALL)
    _, truth = generate(spec)
    U = np.array(truth["user_factors"])
    V = np.array(truth["sub_factors"])
    bias = truth["bias"]
    for (u, s), label in zip(truth["pairs"], truth["clean_labels"]):
        score = float(U[u] @ V[s]) + bias
        assert label == (1 if score > 0 else 0)


def test_noise_free_round_trip_recovers_planted_labels():
    spec = SynthSpec(noise_flip_prob=0.0, **SMALL)
    comments, truth = generate(spec)
    recovered = {(r.user, r.subreddit): r.label
                 for r in aggregate_interactions(comments)}
    for (u, s), label in zip(truth["pairs"], truth["clean_labels"]):
        assert recovered[(f"u{u:05d}", f"s{s:03d}")] == label
    assert truth["observed_labels"] == truth["clean_labels"]


def test_noisy_round_trip_error_rate_bounded():
    # 6000 observed cells: flip-rate std ~0.003, so +0.01 is > 3 std
    spec = SynthSpec(n_users=1000, m_subs=40, density=0.15,
                     noise_flip_prob=0.05, seed=7)
    comments, truth = generate(spec)
    recovered = {(r.user, r.subreddit): r.label
                 for r in aggregate_interactions(comments)}
    mismatches = 0
    for (u, s), label in zip(truth["pairs"], truth["clean_labels"]):
        if recovered[(f"u{u:05d}", f"s{s:03d}")] != label:
            mismatches += 1
    rate = mismatches / len(truth["pairs"])
    assert rate <= spec.noise_flip_prob + 0.01
    # aggregation is exact on the observed (flipped) labels
    for (u, s), label in zip(truth["pairs"], truth["observed_labels"]):
        assert recovered[(f"u{u:05d}", f"s{s:03d}")] == label


def test_comment_counts_within_range():
    spec = SynthSpec(comments_min=2, comments_max=4, **SMALL)
    comments, truth = generate(spec)
    per_pair = {}
    for c in comments:
        per_pair[(c.user, c.subreddit)] = per_pair.get((c.user, c.subreddit), 0) + 1
    assert set(per_pair.values()) <= {2, 3, 4}
    assert len(per_pair) == len(truth["pairs"])


def test_emitted_jsonl_passes_strict_reader(tmp_path):
    comments, _ = generate(SynthSpec(**SMALL))
    path = tmp_path / "synth.jsonl"
    write_comments_jsonl(comments, path)
    back = read_comments(path, strict=True)
    assert back == comments


def test_comment_toxicities_average_on_label_side():
    comments, truth = generate(SynthSpec(**SMALL))
    by_pair = {}
    for c in comments:
        by_pair.setdefault((c.user, c.subreddit), []).append(c.toxicity)
    for (u, s), label in zip(truth["pairs"], truth["observed_labels"]):
        mean = np.mean(by_pair[(f"u{u:05d}", f"s{s:03d}")])
        if label == 1:
            assert mean > 0.5
        else:
            assert mean < 0.5


def test_planted_structure_is_learnable_at_d8():
    comments, _ = generate(SynthSpec(n_users=500, m_subs=50, density=0.3,
                                     noise_flip_prob=0.0, seed=1))
    dataset = index_dataset(aggregate_interactions(comments))
    split = splitter.loli_binary_split(dataset, seed=1)
    parts = splitter.partition_triples(dataset, split)
    config = factorizer.TrainConfig(d=8, learning_rate=1e-3, l2_lambda=1e-4,
                                    batch_size=256, max_epochs=1000, seed=1)
    params, _ = factorizer.fit(parts[splitter.TRAIN],
                               parts[splitter.VALIDATION],
                               dataset.n_users, dataset.n_subreddits, config)
    val = parts[splitter.VALIDATION]
    probs = factorizer.predict_batch(params, [u for u, _, _ in val],
                                     [s for _, s, _ in val])
    gmean = evaluation.gmean_score([y for _, _, y in val],
                                   (probs > 0.5).astype(int))
    assert gmean >= 0.9


def test_ground_truth_records_spec_and_fractions():
    spec = SynthSpec(**SMALL)
    _, truth = generate(spec)
    assert truth["spec"]["n_users"] == spec.n_users
    assert truth["spec"]["seed"] == spec.seed
    observed = np.array(truth["observed_labels"])
    assert truth["toxic_fraction_observed"] == pytest.approx(observed.mean())
