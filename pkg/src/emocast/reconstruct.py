"""Lookback sample extraction and deterministic train/test splitting.

Three extraction regimes over a corpus:

* ``extract_wlb``  — window = the w turns immediately before the target,
  regardless of speaker.
* ``extract_wslb`` — window = the target speaker's own w most recent
  prior turns.
* ``extract_wolb`` — window = the w most recent prior turns by speakers
  other than the target speaker.

Targets without w qualifying prior turns are skipped; a conversation too
short to supply any window contributes nothing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import IO, Callable, Iterator

import numpy as np

from .balance import LabelDistribution
from .corpus import Corpus, Utterance
from .errors import CorpusFormatError

DEPENDENCIES = ("all", "self", "other")


@dataclass(frozen=True)
class WindowTurn:
    """One (speaker, tokens, emotion) entry of a lookback window."""

    speaker: int
    tokens: tuple[str, ...]
    emotion: int
    turn_index: int


@dataclass(frozen=True)
class Sample:
    conversation_id: str
    window: tuple[WindowTurn, ...]
    target_emotion: int
    target_speaker: int
    target_turn: int
    dependency: str = "all"

    def __post_init__(self):
        if self.dependency not in DEPENDENCIES:
            raise ValueError(f"dependency must be one of {DEPENDENCIES}")
        if any(t.turn_index >= self.target_turn for t in self.window):
            raise ValueError("window turns must strictly precede the target turn")
        if self.dependency == "self" and any(t.speaker != self.target_speaker for t in self.window):
            raise ValueError("self-dependency window contains a non-target speaker")
        if self.dependency == "other" and any(t.speaker == self.target_speaker for t in self.window):
            raise ValueError("other-dependency window contains the target speaker")

    @property
    def w(self) -> int:
        return len(self.window)


@dataclass(frozen=True)
class SampleSet:
    """Homogeneous collection of samples sharing w, dependency mode and label space."""

    samples: tuple[Sample, ...]
    w: int
    dependency: str
    n_labels: int

    def __post_init__(self):
        for s in self.samples:
            if s.w != self.w or s.dependency != self.dependency:
                raise ValueError("sample set must be homogeneous in w and dependency mode")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def with_samples(self, samples: tuple[Sample, ...]) -> "SampleSet":
        return replace(self, samples=tuple(samples))

    @property
    def has_text(self) -> bool:
        return any(t.tokens for s in self.samples for t in s.window)


def _window_turn(utt: Utterance) -> WindowTurn:
    return WindowTurn(
        speaker=utt.speaker, tokens=utt.tokens, emotion=utt.emotion, turn_index=utt.turn_index
    )


def _extract(
    corpus: Corpus,
    w: int,
    dependency: str,
    qualifies: Callable[[Utterance, Utterance], bool],
) -> SampleSet:
    if w < 1:
        raise ValueError(f"window length must be >= 1, got {w}")
    samples: list[Sample] = []
    for conv in corpus.conversations:
        for target in conv.utterances:
            if target.turn_index < w:
                continue  # fewer than w prior turns of any kind
            history = [u for u in conv.utterances[: target.turn_index] if qualifies(u, target)]
            if len(history) < w:
                continue
            window = tuple(_window_turn(u) for u in history[-w:])
            samples.append(
                Sample(
                    conversation_id=conv.id,
                    window=window,
                    target_emotion=target.emotion,
                    target_speaker=target.speaker,
                    target_turn=target.turn_index,
                    dependency=dependency,
                )
            )
    return SampleSet(tuple(samples), w=w, dependency=dependency, n_labels=len(corpus.label_set))


def extract_wlb(corpus: Corpus, w: int) -> SampleSet:
    """Speaker-agnostic windows: the w turns immediately preceding each target."""
    return _extract(corpus, w, "all", lambda u, target: True)


def extract_wslb(corpus: Corpus, w: int) -> SampleSet:
    """Self-dependency windows: the target speaker's w most recent prior turns."""
    return _extract(corpus, w, "self", lambda u, target: u.speaker == target.speaker)


def extract_wolb(corpus: Corpus, w: int) -> SampleSet:
    """Other-dependency windows: the w most recent prior turns by other speakers."""
    return _extract(corpus, w, "other", lambda u, target: u.speaker != target.speaker)


def extract(corpus: Corpus, w: int, dependency: str) -> SampleSet:
    if dependency == "all":
        return extract_wlb(corpus, w)
    if dependency == "self":
        return extract_wslb(corpus, w)
    if dependency == "other":
        return extract_wolb(corpus, w)
    raise ValueError(f"dependency must be one of {DEPENDENCIES}, got {dependency!r}")


def split(
    sample_set: SampleSet, train_fraction: float = 0.8, seed: int = 0
) -> tuple[SampleSet, SampleSet]:
    """Deterministic shuffle under seed, then prefix/suffix split."""
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(sample_set)
    if n < 2:
        raise ValueError(f"need at least 2 samples to split, got {n}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    cut = int(np.floor(train_fraction * n))
    train = tuple(sample_set.samples[i] for i in order[:cut])
    test = tuple(sample_set.samples[i] for i in order[cut:])
    return sample_set.with_samples(train), sample_set.with_samples(test)


def split_by_conversation(
    sample_set: SampleSet, train_fraction: float = 0.8, seed: int = 0
) -> tuple[SampleSet, SampleSet]:
    """Leakage-safe variant: whole conversations go to one side or the other."""
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    cids = sorted({s.conversation_id for s in sample_set.samples})
    if len(cids) < 2:
        raise ValueError("need samples from at least 2 conversations for a per-conversation split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(cids))
    cut = int(np.floor(train_fraction * len(cids)))
    train_ids = {cids[i] for i in order[:cut]}
    train = tuple(s for s in sample_set.samples if s.conversation_id in train_ids)
    test = tuple(s for s in sample_set.samples if s.conversation_id not in train_ids)
    return sample_set.with_samples(train), sample_set.with_samples(test)


def label_distribution(sample_set: SampleSet) -> LabelDistribution:
    """Counts of target emotions over the set."""
    counts = [0] * sample_set.n_labels
    for s in sample_set.samples:
        counts[s.target_emotion] += 1
    return LabelDistribution(tuple(counts))


def save_samples(sample_set: SampleSet, writer: IO) -> None:
    """One JSON object per line, for inspection and re-loading."""
    for s in sample_set.samples:
        record = {
            "cid": s.conversation_id,
            "target_turn": s.target_turn,
            "target_emotion": s.target_emotion,
            "target_speaker": s.target_speaker,
            "dependency": s.dependency,
            "window": [
                {
                    "speaker": t.speaker,
                    "tokens": list(t.tokens),
                    "emotion": t.emotion,
                    "turn_index": t.turn_index,
                }
                for t in s.window
            ],
        }
        writer.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_samples(reader: IO, n_labels: int) -> SampleSet:
    """Inverse of save_samples; w and dependency are inferred from the records."""
    samples: list[Sample] = []
    for line_no, raw in enumerate(reader, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
            window = tuple(
                WindowTurn(
                    speaker=t["speaker"],
                    tokens=tuple(t["tokens"]),
                    emotion=t["emotion"],
                    turn_index=t["turn_index"],
                )
                for t in rec["window"]
            )
            samples.append(
                Sample(
                    conversation_id=rec["cid"],
                    window=window,
                    target_emotion=rec["target_emotion"],
                    target_speaker=rec["target_speaker"],
                    target_turn=rec["target_turn"],
                    dependency=rec.get("dependency", "all"),
                )
            )
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise CorpusFormatError(f"bad sample record ({exc})", line=line_no) from None
    if not samples:
        raise CorpusFormatError("sample file contained no records")
    w = samples[0].w
    dependency = samples[0].dependency
    return SampleSet(tuple(samples), w=w, dependency=dependency, n_labels=n_labels)
