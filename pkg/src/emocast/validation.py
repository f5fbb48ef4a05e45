"""Input-validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

from .errors import ConfigError


def require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def check_sample_set(sample_set, nonempty: bool = False, w: int | None = None) -> None:
    """Basic structural checks on a SampleSet argument."""
    if not hasattr(sample_set, "samples") or not hasattr(sample_set, "w"):
        raise ConfigError(f"expected a SampleSet, got {type(sample_set).__name__}")
    if nonempty and len(sample_set) == 0:
        raise ConfigError("sample set is empty")
    if w is not None and sample_set.w != w:
        raise ConfigError(f"sample set has w={sample_set.w}, expected {w}")
    for s in sample_set.samples:
        if not 0 <= s.target_emotion < sample_set.n_labels:
            raise ConfigError(
                f"target emotion {s.target_emotion} out of range for {sample_set.n_labels} labels"
            )


def check_model_flags(model: str, lookback: int, seq_type: str, has_embeddings: bool) -> None:
    """Cross-field CLI validation; messages name both offending fields."""
    if model == "dgcn" and lookback < 2:
        raise ConfigError(
            f"--model dgcn requires --lookback >= 2 (got --lookback {lookback}): "
            "the graph needs at least two utterances"
        )
    if seq_type in ("T", "ET") and not has_embeddings:
        raise ConfigError(
            f"--seq-type {seq_type} requires --embeddings pointing at a vector file"
        )
