"""Converters from native dataset layouts to the canonical jsonl records.

Each converter yields plain dict records; the CLI `import` subcommand
writes them out and the core parser never sees a native format.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterator

from .corpus import LABEL_PRESETS
from .errors import CorpusFormatError

_DAILYDIALOG_EMOTIONS = LABEL_PRESETS["dailydialog"]


def convert_dailydialog(text_path: str | Path, emotion_path: str | Path) -> Iterator[dict]:
    """Native pair of files: `__eou__`-separated dialogues plus emotion digit lines."""
    text_lines = Path(text_path).read_text(encoding="utf-8", errors="replace").splitlines()
    emo_lines = Path(emotion_path).read_text(encoding="utf-8", errors="replace").splitlines()
    if len(text_lines) != len(emo_lines):
        raise CorpusFormatError(
            f"text file has {len(text_lines)} lines but emotion file has {len(emo_lines)}"
        )
    for line_no, (text_line, emo_line) in enumerate(zip(text_lines, emo_lines), start=1):
        utterances = [u.strip() for u in text_line.split("__eou__") if u.strip()]
        if not utterances:
            continue
        try:
            emotion_ids = [int(x) for x in emo_line.split()]
        except ValueError:
            raise CorpusFormatError("non-integer emotion label", line=line_no) from None
        if len(utterances) != len(emotion_ids):
            raise CorpusFormatError(
                f"{len(utterances)} utterances but {len(emotion_ids)} emotion labels",
                line=line_no,
            )
        turns = []
        for idx, (text, emo) in enumerate(zip(utterances, emotion_ids)):
            if not 0 <= emo < len(_DAILYDIALOG_EMOTIONS):
                raise CorpusFormatError(f"emotion id {emo} out of range", line=line_no)
            turns.append(
                {"speaker": "A" if idx % 2 == 0 else "B",
                 "text": text,
                 "emotion": _DAILYDIALOG_EMOTIONS[emo]}
            )
        yield {"id": f"d{line_no:05d}", "turns": turns}


def convert_meld(csv_path: str | Path) -> Iterator[dict]:
    """MELD release CSV with Utterance/Speaker/Emotion/Dialogue_ID/Utterance_ID columns."""
    with open(csv_path, newline="", encoding="utf-8", errors="replace") as fh:
        reader = csv.DictReader(fh)
        required = {"Utterance", "Speaker", "Emotion", "Dialogue_ID", "Utterance_ID"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise CorpusFormatError(f"MELD csv must carry columns {sorted(required)}")
        dialogues: dict[int, list[tuple[int, dict]]] = {}
        for row in reader:
            turn = {
                "speaker": row["Speaker"],
                "text": row["Utterance"],
                "emotion": row["Emotion"].lower(),
            }
            dialogues.setdefault(int(row["Dialogue_ID"]), []).append(
                (int(row["Utterance_ID"]), turn)
            )
    for did in sorted(dialogues):
        turns = [t for _, t in sorted(dialogues[did], key=lambda kv: kv[0])]
        yield {"id": f"meld{did:05d}", "turns": turns}


def convert_friends(json_path: str | Path) -> Iterator[dict]:
    """EmotionLines Friends JSON: a list of episodes, each a list of turn objects."""
    data = json.loads(Path(json_path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise CorpusFormatError("EmotionLines file must be a JSON list of dialogues")
    for idx, dialogue in enumerate(data):
        turns = [
            {"speaker": t["speaker"], "text": t["utterance"], "emotion": t["emotion"]}
            for t in dialogue
        ]
        if turns:
            yield {"id": f"fr{idx:05d}", "turns": turns}


def convert_jsonl(path: str | Path) -> Iterator[dict]:
    """Pass-through for already-canonical files, with per-line JSON validation."""
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"invalid JSON ({exc.msg})", line=line_no) from None
            yield record


def write_records(records: Iterator[dict], out_path: str | Path) -> int:
    count = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    return count
