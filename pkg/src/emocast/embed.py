"""Text preprocessing and pretrained word-embedding tables.

Embedding files use the common text vector format: one token per line
followed by ``dim`` whitespace-separated floats.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from importlib import resources
from typing import IO, Iterable, Sequence
import warnings

import numpy as np

from .errors import CorpusFormatError

DEFAULT_MAX_TOKENS = 20
DEFAULT_DIM = 300

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def default_stopwords() -> frozenset[str]:
    text = resources.files("emocast.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(w for w in text.split() if w)


@dataclass(frozen=True)
class EmbeddingTable:
    """Immutable token -> vector table with an out-of-vocabulary policy."""

    dim: int
    vocab: dict[str, int]
    vectors: np.ndarray
    oov_policy: str = "zero"
    _oov_vector: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("embedding dimension must be positive")
        if self.oov_policy not in ("zero", "mean"):
            raise ValueError(f"oov policy must be 'zero' or 'mean', got {self.oov_policy!r}")
        if self.oov_policy == "mean" and len(self.vectors):
            oov = self.vectors.mean(axis=0)
        else:
            oov = np.zeros(self.dim)
        object.__setattr__(self, "_oov_vector", oov)

    def __len__(self) -> int:
        return len(self.vocab)

    def lookup(self, token: str) -> np.ndarray:
        row = self.vocab.get(token)
        if row is None:
            return self._oov_vector
        return self.vectors[row]


def load_embeddings(
    reader: IO,
    dim: int,
    oov_policy: str = "zero",
    vocab_filter: set[str] | None = None,
) -> EmbeddingTable:
    """Parse a text-format vector file.

    Duplicate tokens keep the first occurrence (with a warning); a line
    whose float count disagrees with ``dim`` is an error naming the line.
    ``vocab_filter`` optionally keeps only the given tokens, which makes
    loading multi-gigabyte files workable.
    """
    vocab: dict[str, int] = {}
    rows: list[np.ndarray] = []
    duplicates = 0
    for line_no, raw in enumerate(reader, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.rstrip("\n")
        if not line:
            continue
        # the last dim fields are the vector; some released files carry
        # tokens that themselves contain spaces
        parts = line.split(" ")
        if len(parts) < dim + 1:
            raise CorpusFormatError(
                f"expected {dim} floats for token {parts[0]!r}, found {len(parts) - 1}",
                line=line_no,
            )
        token = " ".join(parts[: len(parts) - dim])
        fields = parts[len(parts) - dim :]
        if vocab_filter is not None and token not in vocab_filter:
            continue
        if token in vocab:
            duplicates += 1
            continue
        try:
            vec = np.asarray([float(f) for f in fields], dtype=np.float64)
        except ValueError:
            raise CorpusFormatError(f"non-numeric value for token {token!r}", line=line_no) from None
        vocab[token] = len(rows)
        rows.append(vec)
    if duplicates:
        warnings.warn(f"embedding file contained {duplicates} duplicate token(s); kept first",
                      stacklevel=2)
    vectors = np.vstack(rows) if rows else np.zeros((0, dim))
    return EmbeddingTable(dim=dim, vocab=vocab, vectors=vectors, oov_policy=oov_policy)


def random_embeddings(tokens: Iterable[str], dim: int, seed: int = 0,
                      oov_policy: str = "zero") -> EmbeddingTable:
    """Seeded random table, for experiments without a pretrained file."""
    tokens = sorted(set(tokens))
    rng = np.random.default_rng(seed)
    vectors = rng.normal(0.0, 1.0 / np.sqrt(dim), size=(len(tokens), dim))
    return EmbeddingTable(dim=dim, vocab={t: i for i, t in enumerate(tokens)},
                          vectors=vectors, oov_policy=oov_policy)


# ---------------------------------------------------------------------------
# token pipeline

def _strip_suffixes(word: str) -> str:
    """Rule-based suffix stripping, applied to a fixpoint so it is idempotent."""
    rules = (("sses", "ss"), ("ies", "y"), ("ing", ""), ("ed", ""), ("ly", ""), ("s", ""))
    while True:
        for suffix, repl in rules:
            if word.endswith(suffix) and len(word) - len(suffix) + len(repl) >= 3:
                if suffix == "s" and word.endswith(("ss", "us", "is")):
                    continue
                word = word[: len(word) - len(suffix)] + repl
                break
        else:
            return word


@dataclass(frozen=True)
class TokenPipeline:
    """Deterministic preprocessing: lowercase, punctuation, stopwords, stemming."""

    lowercase: bool = True
    strip_punctuation: bool = True
    stopwords: frozenset[str] | None = None
    stemmer: str = "none"
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.stemmer not in ("none", "suffix"):
            raise ValueError(f"stemmer must be 'none' or 'suffix', got {self.stemmer!r}")
        if self.stopwords is None:
            object.__setattr__(self, "stopwords", default_stopwords())


def preprocess(text: str | Sequence[str], pipeline: TokenPipeline | None = None) -> list[str]:
    """Apply the pipeline to a raw string or pre-split token sequence.

    Order: lowercase, punctuation strip, stopword removal, stemming.
    Truncation to ``max_tokens`` happens at encoding time, not here.
    """
    if pipeline is None:
        pipeline = TokenPipeline()
    tokens = text.split() if isinstance(text, str) else list(text)
    out: list[str] = []
    for tok in tokens:
        if pipeline.lowercase:
            tok = tok.lower()
        if pipeline.strip_punctuation:
            tok = tok.translate(_PUNCT_TABLE)
        if not tok:
            continue
        if pipeline.stopwords and tok in pipeline.stopwords:
            continue
        if pipeline.stemmer == "suffix":
            tok = _strip_suffixes(tok)
        out.append(tok)
    return out


def encode_utterance(tokens: Sequence[str], table: EmbeddingTable,
                     max_tokens: int = DEFAULT_MAX_TOKENS) -> np.ndarray:
    """Per-token vectors concatenated in order, zero-padded to max_tokens."""
    flat = np.zeros(max_tokens * table.dim)
    for pos, tok in enumerate(tokens[:max_tokens]):
        flat[pos * table.dim : (pos + 1) * table.dim] = table.lookup(tok)
    return flat
