import numpy as np
import pytest

from emocast.embed import random_embeddings
from emocast.errors import ConfigError
from emocast.evalharness import macro_f1
from emocast.reconstruct import extract_wlb, split
from emocast.seqmodel import BiLSTMPredictor, MajorityBaseline, encode_emotions, encode_text
from emocast.embed import TokenPipeline

from conftest import random_corpus, toy_sample_set

WORD_TABLE = random_embeddings(
    [f"t{i}" for i in range(10)] + list("abcdefghij") +
    ["oh", "really", "fine", "steak", "sorry", "great", "hello", "why", "sure", "maybe"],
    dim=8, seed=0,
)


def small_sets(seed=0, with_text=False, w=2, n_labels=3):
    corpus = random_corpus(seed, n_conversations=14, min_len=4, max_len=8,
                           n_labels=n_labels, with_text=with_text)
    return split(extract_wlb(corpus, w), 0.8, seed=0)


# ---------------------------------------------------------------------------
# encoders

def test_encode_emotions_single_row():
    sset = toy_sample_set(seed=0, n=5, w=1, n_labels=7)
    sample = sset.samples[0]
    mat = encode_emotions(sample, 7)
    assert mat.shape == (1, 7)
    assert mat[0, sample.window[0].emotion] == 1.0
    assert mat.sum() == 1.0


def test_encode_emotions_rows_sum_to_one():
    sset = toy_sample_set(seed=1, n=10, w=4, n_labels=5)
    for s in sset:
        mat = encode_emotions(s, 5)
        assert np.array_equal(mat.sum(axis=1), np.ones(4))


def test_encode_emotions_roundtrip_decode():
    # oracle: argmax-decoding recovers the original emotion ids
    sset = toy_sample_set(seed=2, n=20, w=3, n_labels=6)
    for s in sset:
        mat = encode_emotions(s, 6)
        decoded = list(np.argmax(mat, axis=1))
        assert decoded == [t.emotion for t in s.window]


def test_encode_text_shape():
    sset = toy_sample_set(seed=3, n=4, w=3, with_text=True)
    pipeline = TokenPipeline(stopwords=frozenset())
    mat = encode_text(sset.samples[0], WORD_TABLE, pipeline, max_tokens=5)
    assert mat.shape == (3, 40)


def test_encode_text_default_shape_is_6000_wide():
    table = random_embeddings(["x"], dim=300, seed=0)
    sset = toy_sample_set(seed=3, n=2, w=2, with_text=True)
    pipeline = TokenPipeline()
    mat = encode_text(sset.samples[0], table, pipeline, max_tokens=20)
    assert mat.shape == (2, 6000)


def test_encode_text_empty_utterance_zero_row():
    sset = toy_sample_set(seed=4, n=3, w=2, with_text=False)
    pipeline = TokenPipeline()
    mat = encode_text(sset.samples[0], WORD_TABLE, pipeline, max_tokens=5)
    assert np.all(mat == 0.0)


# ---------------------------------------------------------------------------
# forward contract

def test_zeroed_head_gives_uniform_distribution():
    train, _ = small_sets()
    m = BiLSTMPredictor(seq_type="E", hidden=8, epochs=1, seed=0)
    m._resolve_config(train)
    state = m._build_state(np.random.default_rng(0))
    state["head2.W"].value[:] = 0.0
    state["head2.b"].value[:] = 0.0
    probs, _ = m._forward(m._encode(train.samples[:6]), state)
    assert np.allclose(probs, 1.0 / 3.0)
    # exact tie resolves to the lowest label id
    assert np.all(np.argmax(probs, axis=1) == 0)


def test_distributions_are_valid_probability_vectors():
    train, test = small_sets()
    m = BiLSTMPredictor(seq_type="E", hidden=8, epochs=2, seed=0).fit(train, test_set=test)
    probs = m.predict_proba(test)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(probs > 0.0)


def test_forward_returns_prediction_with_argmax():
    train, test = small_sets()
    m = BiLSTMPredictor(seq_type="E", hidden=8, epochs=2, seed=0).fit(train, test_set=test)
    pred = m.forward(test.samples[0])
    assert pred.distribution.shape == (3,)
    assert pred.label == int(np.argmax(pred.distribution))


def test_fit_determinism_byte_identical_history():
    train, test = small_sets()
    kwargs = dict(seq_type="E", hidden=8, epochs=3, seed=11)
    m1 = BiLSTMPredictor(**kwargs).fit(train, test_set=test)
    m2 = BiLSTMPredictor(**kwargs).fit(train, test_set=test)
    assert m1.history_ == m2.history_  # dataclass equality is exact float equality
    assert np.array_equal(m1.predict_proba(test), m2.predict_proba(test))


def test_history_length_equals_epochs():
    train, test = small_sets()
    m = BiLSTMPredictor(seq_type="E", hidden=8, epochs=5, seed=0).fit(train, test_set=test)
    assert len(m.history_) == 5
    assert [r.epoch for r in m.history_] == list(range(5))


def test_epochs_zero_forbidden():
    train, _ = small_sets()
    with pytest.raises(ValueError, match="epochs"):
        BiLSTMPredictor(seq_type="E", hidden=8, epochs=0).fit(train)


def test_loss_decreases_on_single_sample():
    sset = toy_sample_set(seed=5, n=1, w=2, n_labels=3)
    m = BiLSTMPredictor(seq_type="E", hidden=8, epochs=12, lr=0.01,
                        class_weights="none", seed=0).fit(sset)
    losses = [r.train_loss for r in m.history_]
    for a, b in zip(losses[:10], losses[1:11]):
        assert b < a


def test_text_model_requires_embeddings():
    train, _ = small_sets(with_text=True)
    with pytest.raises(ConfigError, match="embedding"):
        BiLSTMPredictor(seq_type="T").fit(train)


def test_text_model_rejects_emotion_only_corpus():
    train, _ = small_sets(with_text=False)
    with pytest.raises(ConfigError, match="emotion-only"):
        BiLSTMPredictor(seq_type="T", embeddings=WORD_TABLE).fit(train)


def test_lookback_mismatch_rejected():
    train, _ = small_sets(w=2)
    with pytest.raises(ConfigError, match="does not match"):
        BiLSTMPredictor(seq_type="E", lookback=3).fit(train)


def test_attention_defaults_by_seq_type():
    train_e, _ = small_sets()
    m = BiLSTMPredictor(seq_type="E", hidden=8, epochs=1, seed=0).fit(train_e)
    assert m.attention_ is False
    train_t, _ = small_sets(with_text=True)
    mt = BiLSTMPredictor(seq_type="T", hidden=6, epochs=1, seed=0,
                         embeddings=WORD_TABLE, max_tokens=4).fit(train_t)
    assert mt.attention_ is True


def test_et_model_trains_and_predicts():
    train, test = small_sets(with_text=True)
    m = BiLSTMPredictor(seq_type="ET", hidden=6, epochs=2, seed=0,
                        embeddings=WORD_TABLE, max_tokens=4).fit(train, test_set=test)
    assert m.predict(test).shape == (len(test),)


def test_selection_modes():
    train, test = small_sets()
    m_max = BiLSTMPredictor(seq_type="E", hidden=8, epochs=4, seed=0,
                            selection="max").fit(train, test_set=test)
    scores = [r.test_macro_f1 for r in m_max.history_]
    assert m_max.best_epoch_ == int(np.argmax(scores))
    m_final = BiLSTMPredictor(seq_type="E", hidden=8, epochs=4, seed=0,
                              selection="final").fit(train, test_set=test)
    assert m_final.best_epoch_ == 3


def test_label_permutation_equivariance_of_forward():
    train, test = small_sets(n_labels=3)
    k = 3
    perm = np.array([2, 0, 1])  # label i becomes perm[i]
    m = BiLSTMPredictor(seq_type="E", hidden=8, epochs=1, seed=0)
    m._resolve_config(train)
    state = m._build_state(np.random.default_rng(0))

    permuted_state = state.copy()
    for prefix in ("e_lstm.fwd", "e_lstm.bwd"):
        W = permuted_state[f"{prefix}.W"].value
        W[perm] = state[f"{prefix}.W"].value[:k]
    permuted_state["head2.W"].value[:, perm] = state["head2.W"].value
    permuted_state["head2.b"].value[perm] = state["head2.b"].value

    from dataclasses import replace
    for sample in test.samples[:5]:
        permuted_sample = replace(
            sample,
            window=tuple(replace(t, emotion=int(perm[t.emotion])) for t in sample.window),
            target_emotion=int(perm[sample.target_emotion]),
        )
        p_orig, _ = m._forward(m._encode([sample]), state)
        p_perm, _ = m._forward(m._encode([permuted_sample]), permuted_state)
        assert np.allclose(p_perm[0][perm], p_orig[0], atol=1e-12)


def test_overfits_twenty_distinct_samples():
    sset = toy_sample_set(seed=6, n=20, w=3, n_labels=3, distinct_on="emotion")
    m = BiLSTMPredictor(seq_type="E", hidden=16, epochs=150, lr=0.01,
                        class_weights="none", seed=0).fit(sset)
    preds = m.predict(sset)
    gold = np.array([s.target_emotion for s in sset])
    assert np.mean(preds == gold) == 1.0


# ---------------------------------------------------------------------------
# majority baseline

def test_majority_predicts_modal_label():
    sset = toy_sample_set(seed=7, n=12, w=1, n_labels=3)
    all_zero = sset.with_samples(tuple(
        type(s)(s.conversation_id, s.window, 0, s.target_speaker, s.target_turn)
        for s in sset.samples
    ))
    m = MajorityBaseline().fit(all_zero)
    assert m.label_ == 0
    assert np.all(m.predict(all_zero) == 0)


def test_majority_tie_breaks_to_lowest_id():
    sset = toy_sample_set(seed=8, n=10, w=1, n_labels=5)
    samples = list(sset.samples)
    # force an exact tie between labels 1 and 3
    targets = [1, 3] * 5
    forced = sset.with_samples(tuple(
        type(s)(s.conversation_id, s.window, t, s.target_speaker, s.target_turn)
        for s, t in zip(samples, targets)
    ))
    m = MajorityBaseline().fit(forced)
    assert m.label_ == 1


def test_majority_macro_f1_law():
    train, test = small_sets()
    m = MajorityBaseline().fit(train)
    gold = np.array([s.target_emotion for s in test])
    score = macro_f1(gold, m.predict(test), test.n_labels)
    support = np.mean(gold == m.label_)
    expected_f1 = 0.0 if support == 0 else 2 * support / (1 + support)
    assert score == pytest.approx(expected_f1 / test.n_labels)
