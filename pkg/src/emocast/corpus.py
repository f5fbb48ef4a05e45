"""Data model for labeled multi-speaker conversations and jsonl ingestion.

The canonical on-disk format is line-delimited JSON, one conversation per
line::

    {"id": "c1", "turns": [{"speaker": "A", "text": "hi", "emotion": "neutral"}, ...]}

Utterance text is stored as whitespace tokens; ``text: ""`` yields an
emotion-only utterance. Label sets are named presets or custom ordered
lists of strings.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import IO, Iterator

from .balance import LabelDistribution
from .errors import CorpusFormatError, UnknownLabelError

LABEL_PRESETS: dict[str, tuple[str, ...]] = {
    "dailydialog": ("neutral", "anger", "disgust", "fear", "happiness", "sadness", "surprise"),
    "meld": ("neutral", "surprise", "fear", "sadness", "joy", "disgust", "anger"),
    "friends": ("neutral", "joy", "sadness", "fear", "anger", "surprise", "disgust", "non-neutral"),
    "iemocap": (
        "neutral",
        "happiness",
        "sadness",
        "anger",
        "surprise",
        "fear",
        "disgust",
        "frustration",
        "excitement",
        "other",
        "unknown",
    ),
}


@dataclass(frozen=True)
class EmotionLabelSet:
    """Ordered set of emotion label names; position is the label id."""

    names: tuple[str, ...]
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.names:
            raise ValueError("label set must not be empty")
        if len(set(self.names)) != len(self.names):
            raise ValueError("label names must be unique")
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "index", {n: i for i, n in enumerate(self.names)})

    def __len__(self) -> int:
        return len(self.names)

    def id_of(self, name: str) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise UnknownLabelError(name) from None

    def name_of(self, label_id: int) -> str:
        return self.names[label_id]

    @classmethod
    def preset(cls, name: str) -> "EmotionLabelSet":
        try:
            return cls(LABEL_PRESETS[name])
        except KeyError:
            raise ValueError(
                f"unknown label-set preset {name!r}; available: {sorted(LABEL_PRESETS)}"
            ) from None

    @classmethod
    def from_json(cls, text: str) -> "EmotionLabelSet":
        names = json.loads(text)
        if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
            raise ValueError("custom label set must be a JSON list of strings")
        return cls(tuple(names))


@dataclass(frozen=True)
class Utterance:
    speaker: int
    tokens: tuple[str, ...]
    emotion: int
    turn_index: int

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class Conversation:
    id: str
    utterances: tuple[Utterance, ...]

    def __post_init__(self):
        # turn_index consistency is checked by validate(), not enforced here,
        # so that malformed conversations can be represented and reported
        if not self.utterances:
            raise ValueError(f"conversation {self.id!r} has no utterances")

    def __len__(self) -> int:
        return len(self.utterances)

    @property
    def speaker_ids(self) -> tuple[int, ...]:
        return tuple(sorted({u.speaker for u in self.utterances}))


@dataclass(frozen=True)
class Corpus:
    """Immutable set of conversations with a shared label set and speaker registry."""

    label_set: EmotionLabelSet
    speakers: dict[str, int]
    conversations: tuple[Conversation, ...]
    kind: str = "group"

    def __len__(self) -> int:
        return len(self.conversations)

    def __iter__(self) -> Iterator[Conversation]:
        return iter(self.conversations)

    @property
    def n_utterances(self) -> int:
        return sum(len(c) for c in self.conversations)

    def speaker_id(self, name: str) -> int | None:
        return self.speakers.get(name)

    def speaker_names(self) -> tuple[str, ...]:
        ordered = sorted(self.speakers.items(), key=lambda kv: kv[1])
        return tuple(name for name, _ in ordered)


def _tokenize_raw(text: str) -> tuple[str, ...]:
    return tuple(text.split())


def parse_corpus(reader: IO, label_set: EmotionLabelSet, kind: str = "group") -> Corpus:
    """Parse line-delimited conversation records into a Corpus.

    Speaker names are interned to dense ids in first-appearance order over
    the whole file, so ids are deterministic given file content. Errors
    report the offending 1-based line number.
    """
    if kind not in ("dyadic", "group"):
        raise ValueError(f"corpus kind must be 'dyadic' or 'group', got {kind!r}")
    speakers: dict[str, int] = {}
    conversations: list[Conversation] = []
    n_lines = 0
    for line_no, raw in enumerate(reader, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.strip()
        if not line:
            continue
        n_lines += 1
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"invalid JSON ({exc.msg})", line=line_no) from None
        if not isinstance(record, dict) or "id" not in record or "turns" not in record:
            raise CorpusFormatError("record must be an object with 'id' and 'turns'", line=line_no)
        turns = record["turns"]
        if not isinstance(turns, list) or not turns:
            raise CorpusFormatError(
                f"conversation {record['id']!r} has an empty utterance list", line=line_no
            )
        utterances = []
        for pos, turn in enumerate(turns):
            try:
                speaker_name = turn["speaker"]
                text = turn.get("text", "")
                emotion_name = turn["emotion"]
            except (TypeError, KeyError) as exc:
                raise CorpusFormatError(f"turn {pos} is malformed ({exc})", line=line_no) from None
            if emotion_name not in label_set.index:
                raise UnknownLabelError(emotion_name, line=line_no)
            if speaker_name not in speakers:
                speakers[speaker_name] = len(speakers)
            utterances.append(
                Utterance(
                    speaker=speakers[speaker_name],
                    tokens=_tokenize_raw(text),
                    emotion=label_set.index[emotion_name],
                    turn_index=pos,
                )
            )
        conversations.append(Conversation(id=str(record["id"]), utterances=tuple(utterances)))
    if n_lines == 0:
        warnings.warn("corpus input contained no conversation records", stacklevel=2)
    return Corpus(
        label_set=label_set,
        speakers=speakers,
        conversations=tuple(conversations),
        kind=kind,
    )


def serialize_corpus(corpus: Corpus, writer: IO) -> None:
    """Write a corpus back to the canonical jsonl format, preserving order."""
    by_id = {sid: name for name, sid in corpus.speakers.items()}
    for conv in corpus.conversations:
        record = {
            "id": conv.id,
            "turns": [
                {
                    "speaker": by_id[u.speaker],
                    "text": u.text,
                    "emotion": corpus.label_set.name_of(u.emotion),
                }
                for u in conv.utterances
            ],
        }
        writer.write(json.dumps(record, ensure_ascii=False) + "\n")


def class_distribution(corpus: Corpus) -> LabelDistribution:
    """Count every utterance's emotion over the whole corpus."""
    counts = [0] * len(corpus.label_set)
    for conv in corpus.conversations:
        for utt in conv.utterances:
            counts[utt.emotion] += 1
    return LabelDistribution(tuple(counts))


@dataclass(frozen=True)
class Violation:
    conversation_id: str | None
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(corpus: Corpus) -> ValidationReport:
    """Collect structural violations without raising."""
    violations: list[Violation] = []
    seen_ids: set[str] = set()
    n_labels = len(corpus.label_set)
    known_speaker_ids = set(corpus.speakers.values())
    for conv in corpus.conversations:
        if conv.id in seen_ids:
            violations.append(Violation(conv.id, "duplicate conversation id"))
        seen_ids.add(conv.id)
        expected = 0
        for utt in conv.utterances:
            if utt.turn_index != expected:
                violations.append(
                    Violation(conv.id, f"turn_index gap: expected {expected}, got {utt.turn_index}")
                )
                expected = utt.turn_index
            expected += 1
            if not (0 <= utt.emotion < n_labels):
                violations.append(Violation(conv.id, f"emotion id {utt.emotion} out of range"))
            if utt.speaker not in known_speaker_ids:
                violations.append(Violation(conv.id, f"speaker id {utt.speaker} not in registry"))
        if corpus.kind == "dyadic" and len(conv.speaker_ids) != 2:
            violations.append(
                Violation(conv.id, f"dyadic corpus but {len(conv.speaker_ids)} distinct speaker(s)")
            )
    return ValidationReport(tuple(violations))
