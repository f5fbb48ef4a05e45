"""Class-imbalance handling: label counts, count/smooth weights, oversampling.

Weights are meant to multiply the cross-entropy loss of a sample whose
target carries that label; ``oversample`` instead equalizes class support
by resampling with replacement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ConfigError

DEFAULT_MU = 0.15

STRATEGIES = ("none", "cw", "sw", "os")


@dataclass(frozen=True)
class LabelDistribution:
    """Per-label nonnegative counts, index-aligned with a label set."""

    counts: tuple[int, ...]

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise ValueError("label counts must be nonnegative")

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def n_labels(self) -> int:
        return len(self.counts)

    def as_dict(self, names: Iterable[str]) -> dict[str, int]:
        return dict(zip(names, self.counts))


@dataclass(frozen=True)
class ClassWeights:
    """Per-label loss multipliers plus the strategy that produced them.

    ``absent`` flags label ids that had zero count in the source
    distribution; their weights are placeholders and never used by a
    correctly-built sample set.
    """

    weights: tuple[float, ...]
    strategy: str
    mu: float | None = None
    absent: tuple[int, ...] = ()

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)


def distribution_from_labels(labels: Iterable[int], n_labels: int) -> LabelDistribution:
    counts = [0] * n_labels
    for lab in labels:
        counts[lab] += 1
    return LabelDistribution(tuple(counts))


def unit_weights(n_labels: int) -> ClassWeights:
    return ClassWeights(weights=(1.0,) * n_labels, strategy="none")


def count_weights(dist: LabelDistribution) -> ClassWeights:
    """Inverse-frequency weights: total count divided by the class count.

    Zero-count classes get weight 0 and are flagged in ``absent``.
    """
    total = dist.total
    if total == 0:
        raise ValueError("cannot derive class weights from an all-zero distribution")
    weights = []
    absent = []
    for lab, count in enumerate(dist.counts):
        if count == 0:
            absent.append(lab)
            weights.append(0.0)
        else:
            weights.append(total / count)
    return ClassWeights(tuple(weights), strategy="cw", absent=tuple(absent))


def smooth_weights(
    dist: LabelDistribution,
    mu: float = DEFAULT_MU,
    reading: str = "total",
) -> ClassWeights:
    """Log-damped weights, floored at 1: max(ln(mu * L / count), 1).

    ``reading`` selects what L means: "total" uses the total sample count,
    "classes" uses the number of classes. The "total" reading is the
    default; under "classes" the weights collapse to all-ones on any
    realistically imbalanced distribution.
    """
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if reading not in ("total", "classes"):
        raise ValueError(f"unknown reading {reading!r}")
    total = dist.total
    if total == 0:
        raise ValueError("cannot derive class weights from an all-zero distribution")
    big_l = total if reading == "total" else dist.n_labels
    weights = []
    absent = []
    for lab, count in enumerate(dist.counts):
        if count == 0:
            absent.append(lab)
            weights.append(1.0)
        else:
            weights.append(max(math.log(mu * big_l / count), 1.0))
    return ClassWeights(tuple(weights), strategy="sw", mu=mu, absent=tuple(absent))


def resolve_weights(strategy, dist: LabelDistribution, mu: float = DEFAULT_MU) -> ClassWeights:
    """Map a strategy name, explicit weights, or ready-made ClassWeights.

    "os" resolves to unit weights: oversampling balances the data itself.
    """
    if isinstance(strategy, ClassWeights):
        return strategy
    if strategy is None or (isinstance(strategy, str) and strategy in ("none", "os")):
        return unit_weights(dist.n_labels)
    if strategy == "cw":
        return count_weights(dist)
    if strategy == "sw":
        return smooth_weights(dist, mu=mu)
    if not isinstance(strategy, str):
        weights = tuple(float(x) for x in strategy)
        if len(weights) != dist.n_labels:
            raise ConfigError(
                f"explicit weights have {len(weights)} entries for {dist.n_labels} labels"
            )
        return ClassWeights(weights, strategy="none")
    raise ConfigError(f"unknown balance strategy {strategy!r} (expected one of {STRATEGIES})")


def oversample(sample_set, seed: int = 0):
    """Resample minority classes with replacement up to the majority count.

    Original samples are all retained (in order); drawn copies are appended.
    Classes absent from the input stay absent.
    """
    samples = list(sample_set.samples)
    if not samples:
        raise ValueError("cannot oversample an empty sample set")
    by_class: dict[int, list] = {}
    for s in samples:
        by_class.setdefault(s.target_emotion, []).append(s)
    max_count = max(len(group) for group in by_class.values())
    rng = np.random.default_rng(seed)
    extra = []
    for lab in sorted(by_class):
        group = by_class[lab]
        deficit = max_count - len(group)
        if deficit > 0:
            picks = rng.integers(0, len(group), size=deficit)
            extra.extend(group[i] for i in picks)
    if not extra:
        return sample_set
    return sample_set.with_samples(tuple(samples + extra))
