"""Emotion-transition statistics and per-speaker descriptive analytics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .balance import LabelDistribution
from .corpus import Corpus


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic emotion transition estimates.

    ``matrix[r][c]`` is the probability of seeing emotion c a fixed number
    of turns (``gap``) after emotion r within one conversation. Rows with
    zero support are all-zero and listed in ``empty_rows``.
    """

    matrix: np.ndarray
    support: np.ndarray
    gap: int
    labels: tuple[str, ...]

    @property
    def empty_rows(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.support == 0))

    def to_csv(self) -> str:
        lines = ["," + ",".join(self.labels)]
        for name, row in zip(self.labels, self.matrix):
            lines.append(name + "," + ",".join(repr(float(x)) for x in row))
        return "\n".join(lines) + "\n"

    def to_heatmap_json(self) -> dict:
        return {
            "labels": list(self.labels),
            "gap": self.gap,
            "matrix": [[float(x) for x in row] for row in self.matrix],
            "support": [int(s) for s in self.support],
        }


def _normalize(counts: np.ndarray, gap: int, labels: tuple[str, ...]) -> TransitionMatrix:
    support = counts.sum(axis=1)
    matrix = np.zeros_like(counts, dtype=np.float64)
    nz = support > 0
    matrix[nz] = counts[nz] / support[nz, None]
    return TransitionMatrix(matrix=matrix, support=support.astype(np.int64), gap=gap, labels=labels)


def transition_matrix(corpus: Corpus, gap: int = 1) -> TransitionMatrix:
    """Estimate P(e_{i+gap} | e_i) from all pairs gap turns apart.

    Pairs never cross conversation boundaries. On strictly alternating
    dyadic data, gap=1 pairs opposite speakers and gap=2 the same speaker.
    """
    if gap < 1:
        raise ValueError(f"gap must be >= 1, got {gap}")
    k = len(corpus.label_set)
    counts = np.zeros((k, k), dtype=np.int64)
    for conv in corpus.conversations:
        emotions = [u.emotion for u in conv.utterances]
        for i in range(len(emotions) - gap):
            counts[emotions[i], emotions[i + gap]] += 1
    return _normalize(counts, gap, corpus.label_set.names)


def same_speaker_transition_matrix(corpus: Corpus) -> TransitionMatrix:
    """Pair each utterance with the same speaker's next utterance, any gap.

    Useful for group conversations where turn parity does not identify the
    speaker; reported with gap=0 to mark the non-positional pairing.
    """
    k = len(corpus.label_set)
    counts = np.zeros((k, k), dtype=np.int64)
    for conv in corpus.conversations:
        last_by_speaker: dict[int, int] = {}
        for utt in conv.utterances:
            prev = last_by_speaker.get(utt.speaker)
            if prev is not None:
                counts[prev, utt.emotion] += 1
            last_by_speaker[utt.speaker] = utt.emotion
    return _normalize(counts, 0, corpus.label_set.names)


def speaker_distribution(corpus: Corpus, speaker) -> LabelDistribution:
    """Emotion counts of a single speaker's utterances (name or id)."""
    if isinstance(speaker, str):
        speaker_id = corpus.speaker_id(speaker)
        if speaker_id is None:
            return LabelDistribution((0,) * len(corpus.label_set))
    else:
        speaker_id = speaker
    counts = [0] * len(corpus.label_set)
    for conv in corpus.conversations:
        for utt in conv.utterances:
            if utt.speaker == speaker_id:
                counts[utt.emotion] += 1
    return LabelDistribution(tuple(counts))
