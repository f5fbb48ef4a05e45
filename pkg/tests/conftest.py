"""Shared fixtures and synthetic corpus generators."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from emocast.corpus import Conversation, Corpus, EmotionLabelSet, Utterance
from emocast.reconstruct import Sample, SampleSet, WindowTurn

settings.register_profile("ci", deadline=None, derandomize=True, max_examples=50)
settings.load_profile("ci")

WORDS = ("oh", "really", "fine", "steak", "sorry", "great", "hello", "why", "sure", "maybe")


def make_label_set(n_labels: int) -> EmotionLabelSet:
    return EmotionLabelSet(tuple(f"e{i}" for i in range(n_labels)))


def random_corpus(
    seed: int,
    n_conversations: int = 10,
    min_len: int = 1,
    max_len: int = 10,
    n_labels: int = 4,
    n_speakers: int = 2,
    with_text: bool = False,
    alternating: bool = False,
) -> Corpus:
    rng = np.random.default_rng(seed)
    label_set = make_label_set(n_labels)
    conversations = []
    for ci in range(n_conversations):
        length = int(rng.integers(min_len, max_len + 1))
        utterances = []
        for t in range(length):
            speaker = t % n_speakers if alternating else int(rng.integers(0, n_speakers))
            tokens = tuple(rng.choice(WORDS, size=rng.integers(1, 5))) if with_text else ()
            utterances.append(
                Utterance(
                    speaker=speaker,
                    tokens=tokens,
                    emotion=int(rng.integers(0, n_labels)),
                    turn_index=t,
                )
            )
        conversations.append(Conversation(id=f"c{ci}", utterances=tuple(utterances)))
    speakers = {f"s{i}": i for i in range(n_speakers)}
    return Corpus(label_set=label_set, speakers=speakers, conversations=tuple(conversations))


def self_dependent_corpus(
    seed: int,
    n_conversations: int = 150,
    turns: int = 10,
    n_labels: int = 4,
    persistence: float = 0.8,
) -> Corpus:
    """Dyadic alternating corpus where each speaker repeats their own previous
    emotion with the given probability; the other speaker carries no signal."""
    rng = np.random.default_rng(seed)
    label_set = make_label_set(n_labels)
    conversations = []
    for ci in range(n_conversations):
        last: dict[int, int | None] = {0: None, 1: None}
        utterances = []
        for t in range(turns):
            speaker = t % 2
            prev = last[speaker]
            if prev is None or rng.random() > persistence:
                emotion = int(rng.integers(0, n_labels))
            else:
                emotion = prev
            last[speaker] = emotion
            utterances.append(Utterance(speaker=speaker, tokens=(), emotion=emotion, turn_index=t))
        conversations.append(Conversation(id=f"c{ci}", utterances=tuple(utterances)))
    return Corpus(
        label_set=label_set,
        speakers={"A": 0, "B": 1},
        conversations=tuple(conversations),
        kind="dyadic",
    )


def toy_sample_set(
    seed: int,
    n: int = 20,
    w: int = 3,
    n_labels: int = 3,
    with_text: bool = False,
    n_speakers: int = 2,
    distinct_on: str = "none",
) -> SampleSet:
    """Random windows with random targets.

    ``distinct_on`` = "emotion" or "text" makes windows pairwise distinct in
    the channel a model actually sees, which overfit checks need.
    """
    if distinct_on == "emotion" and n_labels**w < n:
        raise ValueError(f"cannot make {n} windows distinct in emotions with {n_labels}^{w} patterns")
    rng = np.random.default_rng(seed)
    samples = []
    seen = set()
    attempts = 0
    while len(samples) < n:
        attempts += 1
        if attempts > 100 * n:
            raise RuntimeError("window generation did not converge")
        emotions = tuple(int(e) for e in rng.integers(0, n_labels, size=w))
        speakers = tuple(int(s) for s in rng.integers(0, n_speakers, size=w))
        tokens = tuple(
            tuple(rng.choice(WORDS, size=2)) if with_text else () for _ in range(w)
        )
        if distinct_on == "emotion":
            key = emotions
        elif distinct_on == "text":
            key = tokens
        else:
            key = None
        if key is not None:
            if key in seen:
                continue
            seen.add(key)
        window = tuple(
            WindowTurn(speaker=speakers[i], tokens=tokens[i], emotion=emotions[i], turn_index=i)
            for i in range(w)
        )
        samples.append(
            Sample(
                conversation_id=f"t{len(samples)}",
                window=window,
                target_emotion=int(rng.integers(0, n_labels)),
                target_speaker=int(rng.integers(0, n_speakers)),
                target_turn=w,
                dependency="all",
            )
        )
    return SampleSet(tuple(samples), w=w, dependency="all", n_labels=n_labels)


@pytest.fixture
def small_corpus() -> Corpus:
    return random_corpus(seed=3, n_conversations=12, min_len=2, max_len=8)
