import io

import pytest
from hypothesis import given
from hypothesis import strategies as st

from emocast.corpus import Conversation, Corpus, Utterance
from emocast.reconstruct import (
    Sample,
    WindowTurn,
    extract_wlb,
    extract_wolb,
    extract_wslb,
    label_distribution,
    load_samples,
    save_samples,
    split,
    split_by_conversation,
)

from conftest import make_label_set, random_corpus


def corpus_of_lengths(lengths, n_speakers=2, alternating=True, n_labels=3):
    conversations = []
    for ci, length in enumerate(lengths):
        utts = tuple(
            Utterance(speaker=t % n_speakers if alternating else 0,
                      tokens=(), emotion=t % n_labels, turn_index=t)
            for t in range(length)
        )
        conversations.append(Conversation(id=f"c{ci}", utterances=utts))
    return Corpus(
        label_set=make_label_set(n_labels),
        speakers={f"s{i}": i for i in range(n_speakers)},
        conversations=tuple(conversations),
    )


def brute_force_wlb_count(corpus, w):
    # independent enumerator: count targets with at least w earlier turns
    total = 0
    for conv in corpus.conversations:
        for t in range(len(conv)):
            if t >= w:
                total += 1
    return total


def test_wlb_length3_w1():
    sset = extract_wlb(corpus_of_lengths([3]), 1)
    assert len(sset) == 2
    assert [s.target_turn for s in sset] == [1, 2]


def test_wlb_discards_short_conversations():
    assert len(extract_wlb(corpus_of_lengths([2]), 4)) == 0


def test_wlb_mixed_lengths():
    corpus = corpus_of_lengths([5, 3, 2])
    sset = extract_wlb(corpus, 2)
    assert len(sset) == 4
    assert len(sset) == brute_force_wlb_count(corpus, 2)


def test_wlb_window_is_immediately_preceding():
    sset = extract_wlb(corpus_of_lengths([5]), 2)
    target3 = next(s for s in sset if s.target_turn == 3)
    assert [t.turn_index for t in target3.window] == [1, 2]


def test_wslb_dyadic_windows():
    corpus = corpus_of_lengths([6])  # speakers alternate 0,1,0,1,0,1
    sset1 = extract_wslb(corpus, 1)
    target4 = next(s for s in sset1 if s.target_turn == 4)
    assert [t.turn_index for t in target4.window] == [2]
    sset2 = extract_wslb(corpus, 2)
    target5 = next(s for s in sset2 if s.target_turn == 5)
    assert [t.turn_index for t in target5.window] == [1, 3]


def test_wslb_round_robin_three_speakers():
    corpus = corpus_of_lengths([4], n_speakers=3)
    assert len(extract_wslb(corpus, 2)) == 0


def test_wolb_dyadic_windows():
    corpus = corpus_of_lengths([6])
    sset1 = extract_wolb(corpus, 1)
    target4 = next(s for s in sset1 if s.target_turn == 4)
    assert [t.turn_index for t in target4.window] == [3]
    sset2 = extract_wolb(corpus, 2)
    target5 = next(s for s in sset2 if s.target_turn == 5)
    assert [t.turn_index for t in target5.window] == [2, 4]


def test_wolb_monologue_empty():
    corpus = corpus_of_lengths([7], n_speakers=1)
    for w in (1, 2, 3):
        assert len(extract_wolb(corpus, w)) == 0


def test_extract_rejects_bad_w(small_corpus):
    with pytest.raises(ValueError):
        extract_wlb(small_corpus, 0)


@given(st.integers(min_value=0, max_value=60), st.integers(min_value=1, max_value=6))
def test_wlb_count_law(seed, w):
    corpus = random_corpus(seed, n_conversations=8, min_len=1, max_len=9, n_speakers=3)
    assert len(extract_wlb(corpus, w)) == sum(max(0, len(c) - w) for c in corpus.conversations)


@given(st.integers(min_value=0, max_value=40))
def test_monotonicity_in_w(seed):
    corpus = random_corpus(seed, n_conversations=6, min_len=1, max_len=10, n_speakers=3)
    for extractor in (extract_wlb, extract_wslb, extract_wolb):
        sizes = [len(extractor(corpus, w)) for w in (1, 2, 3, 4)]
        assert sizes == sorted(sizes, reverse=True)


@given(st.integers(min_value=0, max_value=40), st.integers(min_value=1, max_value=3))
def test_window_speaker_invariants(seed, w):
    corpus = random_corpus(seed, n_conversations=8, min_len=2, max_len=9, n_speakers=3)
    for s in extract_wslb(corpus, w):
        assert all(t.speaker == s.target_speaker for t in s.window)
    for s in extract_wolb(corpus, w):
        assert all(t.speaker != s.target_speaker for t in s.window)
    for s in extract_wlb(corpus, w):
        assert [t.turn_index for t in s.window] == list(range(s.target_turn - w, s.target_turn))


def test_split_sizes_and_laws():
    corpus = corpus_of_lengths([12])
    sset = extract_wlb(corpus, 1)  # 11 samples
    sset = sset.with_samples(sset.samples[:10])
    train, test = split(sset, 0.8, seed=1)
    assert (len(train), len(test)) == (8, 2)
    assert set(train.samples) | set(test.samples) == set(sset.samples)
    assert set(train.samples) & set(test.samples) == set()
    again_train, again_test = split(sset, 0.8, seed=1)
    assert again_train.samples == train.samples
    assert again_test.samples == test.samples


def test_split_different_seeds_differ():
    corpus = random_corpus(11, n_conversations=20, min_len=4, max_len=9)
    sset = extract_wlb(corpus, 1)
    t1, _ = split(sset, 0.8, seed=1)
    t2, _ = split(sset, 0.8, seed=2)
    assert t1.samples != t2.samples


def test_split_validation():
    corpus = corpus_of_lengths([2])
    sset = extract_wlb(corpus, 1)  # one sample
    with pytest.raises(ValueError):
        split(sset, 0.8)
    with pytest.raises(ValueError):
        split(extract_wlb(corpus_of_lengths([5]), 1), 1.5)


def test_split_by_conversation_no_leakage():
    corpus = random_corpus(5, n_conversations=10, min_len=3, max_len=6)
    sset = extract_wlb(corpus, 1)
    train, test = split_by_conversation(sset, 0.8, seed=0)
    assert {s.conversation_id for s in train} & {s.conversation_id for s in test} == set()
    assert len(train) + len(test) == len(sset)


def test_label_distribution_counts_targets():
    corpus = corpus_of_lengths([4])
    sset = extract_wlb(corpus, 1)
    dist = label_distribution(sset)
    assert dist.total == len(sset)
    empty = label_distribution(sset.with_samples(()))
    assert empty.counts == (0, 0, 0)


def test_sample_invariants_enforced():
    turn = WindowTurn(speaker=0, tokens=(), emotion=0, turn_index=5)
    with pytest.raises(ValueError, match="precede"):
        Sample("c", (turn,), target_emotion=0, target_speaker=0, target_turn=4)
    with pytest.raises(ValueError, match="non-target"):
        Sample("c", (turn,), target_emotion=0, target_speaker=1, target_turn=6,
               dependency="self")
    with pytest.raises(ValueError, match="target speaker"):
        Sample("c", (turn,), target_emotion=0, target_speaker=0, target_turn=6,
               dependency="other")


def test_samples_roundtrip_jsonl(small_corpus):
    sset = extract_wlb(small_corpus, 2)
    buf = io.StringIO()
    save_samples(sset, buf)
    loaded = load_samples(io.StringIO(buf.getvalue()), n_labels=sset.n_labels)
    assert loaded.samples == sset.samples
    assert (loaded.w, loaded.dependency) == (sset.w, sset.dependency)
