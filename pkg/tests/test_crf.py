"""Inference and training checks for the sequence model, anchored by
brute-force enumeration and finite-difference oracles."""
import itertools
import math
import random
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convoplan.annotation import AnnotatedSentence, Token
from convoplan.crf import (
    CrfError,
    CrfModel,
    FeatureConfig,
    InvalidLabelError,
    ModelFormatError,
    TrainHyper,
    TrainingDataError,
    TrainingExample,
    extract_features,
    load_model,
    log_likelihood_and_gradient,
    log_partition,
    marginal_confidence,
    save_model,
    sequence_log_probability,
    train,
    viterbi,
)

VOCAB = ["take", "put", "go", "the", "a", "book", "cup", "table", "kitchen", "to"]


def toy_sentence(words):
    tokens = tuple(
        Token(index=i, text=w, lemma=w, pos="NOUN", dep="root" if i == 0 else "dobj",
              head=0)
        for i, w in enumerate(words)
    )
    return AnnotatedSentence(tokens=tokens, source_text=" ".join(words))


def random_example(rng, max_len=6, labels=("O", "B-X", "I-X")):
    m = rng.randint(1, max_len)
    words = [rng.choice(VOCAB) for _ in range(m)]
    gold = tuple(rng.choice(labels) for _ in range(m))
    return TrainingExample(toy_sentence(words), gold)


def random_model(rng, examples, labels, config=None, scale=1.0):
    config = config or FeatureConfig(window=1, use_lemma=False, use_pos=False, use_dep=False)
    obs = set()
    for ex in examples:
        for i in range(len(ex.sentence)):
            obs.update(extract_features(ex.sentence, i, ex.aux, config))
    obs = tuple(sorted(obs))
    n = len(obs) * len(labels) + len(labels) ** 2
    weights = np.array([rng.gauss(0.0, scale) for _ in range(n)])
    return CrfModel(labels=labels, obs_features=obs, weights=weights, config=config)


def enumerate_scores(model, example):
    """All (sequence, unnormalized log score) pairs by direct summation."""
    node, trans = model.potentials(example)
    m, y = node.shape
    out = []
    for seq in itertools.product(range(y), repeat=m):
        s = sum(node[t, seq[t]] for t in range(m))
        s += sum(trans[seq[t], seq[t + 1]] for t in range(m - 1))
        out.append((seq, s))
    return out


# ---------------------------------------------------------------------------
# Exact-inference oracles
# ---------------------------------------------------------------------------


def test_viterbi_and_logz_match_enumeration_200_instances():
    rng = random.Random(42)
    labels = ("O", "B-X", "I-X", "B-Y")
    start = time.monotonic()
    for i in range(200):
        n_labels = rng.choice((2, 3, 4))
        lab = labels[:n_labels]
        ex = random_example(rng, max_len=6, labels=lab)
        model = random_model(rng, [ex], lab)
        scored = enumerate_scores(model, ex)
        brute_z = math.log(sum(math.exp(s) for _, s in scored))
        # first maximum in label-index order is the tie-break winner
        best_seq, best_score = max(scored, key=lambda p: (p[1], [-x for x in p[0]]))
        log_z, _, _ = log_partition(model, ex)
        assert log_z == pytest.approx(brute_z, abs=1e-9)
        path, log_prob = viterbi(model, ex)
        assert tuple(model.labels.index(l) for l in path) == best_seq
        assert log_prob == pytest.approx(best_score - brute_z, abs=1e-9)
    assert time.monotonic() - start < 30.0


def test_distribution_normalizes():
    rng = random.Random(7)
    for _ in range(25):
        lab = ("O", "B-X", "I-X")
        ex = random_example(rng, max_len=5, labels=lab)
        model = random_model(rng, [ex], lab)
        total = sum(
            math.exp(sequence_log_probability(model, ex, tuple(model.labels[i] for i in seq)))
            for seq, _ in enumerate_scores(model, ex)
        )
        assert total == pytest.approx(1.0, abs=1e-9)


def test_viterbi_tie_break_prefers_lowest_label_index():
    ex = TrainingExample(toy_sentence(["book"]))
    config = FeatureConfig(window=0, use_lemma=False, use_pos=False, use_dep=False)
    obs = tuple(extract_features(ex.sentence, 0, None, config))
    model = CrfModel(labels=("O", "B-X"), obs_features=obs,
                     weights=np.zeros(len(obs) * 2 + 4), config=config)
    path, _ = viterbi(model, ex)
    assert path == ("O",)


# ---------------------------------------------------------------------------
# Gradient oracle
# ---------------------------------------------------------------------------


def test_gradient_matches_finite_differences_20_seeds():
    start = time.monotonic()
    for seed in range(20):
        rng = random.Random(seed)
        labels = ("O", "B-X", "I-X")
        examples = [random_example(rng, max_len=4, labels=labels) for _ in range(3)]
        model = random_model(rng, examples, labels, scale=0.5)
        l2 = 0.05
        _, grad = log_likelihood_and_gradient(model, examples, l2=l2)
        h = 1e-6
        idx = rng.sample(range(model.num_features), min(10, model.num_features))
        for k in idx:
            saved = model.weights[k]
            model.weights[k] = saved + h
            up, _ = log_likelihood_and_gradient(model, examples, l2=l2)
            model.weights[k] = saved - h
            down, _ = log_likelihood_and_gradient(model, examples, l2=l2)
            model.weights[k] = saved
            numeric = (up - down) / (2 * h)
            denom = max(1.0, abs(numeric), abs(grad[k]))
            assert abs(grad[k] - numeric) / denom < 1e-4, f"seed {seed} weight {k}"
    assert time.monotonic() - start < 10.0


# ---------------------------------------------------------------------------
# Training behavior
# ---------------------------------------------------------------------------


def small_corpus():
    data = [
        (["take", "the", "book"], ("B-Taking", "O", "B-theme")),
        (["take", "the", "cup"], ("B-Taking", "O", "B-theme")),
        (["go", "to", "kitchen"], ("B-Motion", "O", "B-goal")),
        (["put", "the", "cup"], ("B-Placing", "O", "B-theme")),
    ]
    return [TrainingExample(toy_sentence(w), g) for w, g in data]


def test_training_fits_and_is_deterministic():
    corpus = small_corpus()
    labels = ("O", "B-Taking", "B-Motion", "B-Placing", "B-theme", "B-goal")
    config = FeatureConfig(window=1)
    a = train(corpus, labels, config, TrainHyper(max_iters=60))
    b = train(corpus, labels, config, TrainHyper(max_iters=60))
    assert np.array_equal(a.weights, b.weights)
    for ex in corpus:
        path, _ = viterbi(a, TrainingExample(ex.sentence))
        assert path == ex.gold


def test_training_objective_never_decreases():
    corpus = small_corpus()
    labels = ("O", "B-Taking", "B-Motion", "B-Placing", "B-theme", "B-goal")
    config = FeatureConfig(window=1)
    prev = None
    for iters in (1, 3, 8, 20):
        model = train(corpus, labels, config, TrainHyper(max_iters=iters))
        obj, _ = log_likelihood_and_gradient(model, corpus, l2=0.1)
        if prev is not None:
            assert obj >= prev - 1e-9
        prev = obj


def test_unseen_features_are_ignored_at_decode_time():
    corpus = small_corpus()
    labels = ("O", "B-Taking", "B-Motion", "B-Placing", "B-theme", "B-goal")
    model = train(corpus, labels, FeatureConfig(window=1), TrainHyper(max_iters=40))
    novel = TrainingExample(toy_sentence(["zorb", "the", "book"]))
    path, log_prob = viterbi(model, novel)  # must not raise
    assert len(path) == 3
    assert log_prob <= 0.0


def test_confidence_is_a_probability():
    corpus = small_corpus()
    labels = ("O", "B-Taking", "B-Motion", "B-Placing", "B-theme", "B-goal")
    model = train(corpus, labels, FeatureConfig(window=1), TrainHyper(max_iters=40))
    ex = TrainingExample(toy_sentence(["take", "the", "book"]))
    path, _ = viterbi(model, ex)
    conf = marginal_confidence(model, ex, path)
    assert 0.0 < conf <= 1.0


def test_training_errors():
    with pytest.raises(TrainingDataError):
        train([], ("O",), FeatureConfig())
    no_gold = [TrainingExample(toy_sentence(["a"]))]
    with pytest.raises(TrainingDataError):
        train(no_gold, ("O",), FeatureConfig())
    bad_label = [TrainingExample(toy_sentence(["a"]), ("B-Nope",))]
    with pytest.raises(TrainingDataError):
        train(bad_label, ("O",), FeatureConfig())


def test_invalid_label_at_scoring():
    corpus = small_corpus()
    labels = ("O", "B-Taking", "B-Motion", "B-Placing", "B-theme", "B-goal")
    model = train(corpus, labels, FeatureConfig(window=1), TrainHyper(max_iters=5))
    with pytest.raises(InvalidLabelError):
        sequence_log_probability(model, corpus[0], ("Q", "Q", "Q"))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def test_model_round_trip_is_bit_exact(tmp_path):
    rng = random.Random(3)
    labels = ("O", "B-X", "I-X")
    examples = [random_example(rng, labels=labels) for _ in range(4)]
    model = random_model(rng, examples, labels)
    path = tmp_path / "m.crf"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.labels == model.labels
    assert loaded.obs_features == model.obs_features
    assert np.array_equal(loaded.weights, model.weights)
    assert loaded.config == model.config
    # byte-stable re-save
    save_model(loaded, tmp_path / "m2.crf")
    assert (tmp_path / "m.crf").read_bytes() == (tmp_path / "m2.crf").read_bytes()


def test_load_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.crf"
    path.write_bytes(b"something else\n{}\n")
    with pytest.raises(ModelFormatError):
        load_model(path)


def test_feature_window_emits_sentinels():
    s = toy_sentence(["take", "book"])
    config = FeatureConfig(window=2, use_lemma=False, use_pos=False, use_dep=False)
    feats = extract_features(s, 0, None, config)
    assert "w-1=<BOS>" in feats and "w-2=<BOS>" in feats
    assert "w+1=book" in feats and "w+2=<EOS>" in feats
    with pytest.raises(CrfError):
        extract_features(s, 5, None, config)


# ---------------------------------------------------------------------------
# Properties
# ---------------------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=1, max_value=5))
def test_gold_probability_never_exceeds_viterbi(seed, length):
    rng = random.Random(seed)
    labels = ("O", "B-X", "I-X")
    words = [rng.choice(VOCAB) for _ in range(length)]
    gold = tuple(rng.choice(labels) for _ in range(length))
    ex = TrainingExample(toy_sentence(words), gold)
    model = random_model(rng, [ex], labels)
    _, best = viterbi(model, ex)
    assert sequence_log_probability(model, ex, gold) <= best + 1e-9
