"""emocast: forecasting the next emotion in multi-party conversations.

The pipeline: ingest labeled conversation corpora, reconstruct lookback
sample sets (speaker-agnostic, self-dependency, or other-dependency
windows), train BiLSTM or speaker-graph classifiers with class-imbalance
handling, and evaluate with macro-F1 grids and transition analytics.
"""

from .analytics import TransitionMatrix, same_speaker_transition_matrix, speaker_distribution, transition_matrix
from .balance import (
    ClassWeights,
    LabelDistribution,
    count_weights,
    distribution_from_labels,
    oversample,
    smooth_weights,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import (
    Conversation,
    Corpus,
    EmotionLabelSet,
    LABEL_PRESETS,
    Utterance,
    class_distribution,
    parse_corpus,
    serialize_corpus,
    validate,
)
from .embed import EmbeddingTable, TokenPipeline, encode_utterance, load_embeddings, preprocess
from .errors import (
    ConfigError,
    CorpusFormatError,
    EmocastError,
    TrainingDiverged,
    UnknownLabelError,
)
from .evalharness import EvalReport, GridSpec, evaluate, f1, macro_f1, run_grid, speaker_profiles
from .graphmodel import (
    ConversationGraph,
    DGCNPredictor,
    RelationRegistry,
    build_graph,
    same_speaker_filter,
    usable_for_pooling,
)
from .reconstruct import (
    Sample,
    SampleSet,
    WindowTurn,
    extract,
    extract_wlb,
    extract_wolb,
    extract_wslb,
    label_distribution,
    load_samples,
    save_samples,
    split,
    split_by_conversation,
)
from .seqmodel import BiLSTMPredictor, MajorityBaseline, Prediction, encode_emotions, encode_text

__version__ = "0.1.0"

__all__ = [
    "BiLSTMPredictor",
    "ClassWeights",
    "ConfigError",
    "Conversation",
    "ConversationGraph",
    "Corpus",
    "CorpusFormatError",
    "DGCNPredictor",
    "EmbeddingTable",
    "EmocastError",
    "EmotionLabelSet",
    "EvalReport",
    "GridSpec",
    "LABEL_PRESETS",
    "LabelDistribution",
    "MajorityBaseline",
    "Prediction",
    "RelationRegistry",
    "Sample",
    "SampleSet",
    "TokenPipeline",
    "TrainingDiverged",
    "TransitionMatrix",
    "UnknownLabelError",
    "Utterance",
    "WindowTurn",
    "build_graph",
    "class_distribution",
    "count_weights",
    "distribution_from_labels",
    "encode_emotions",
    "encode_text",
    "encode_utterance",
    "evaluate",
    "extract",
    "extract_wlb",
    "extract_wolb",
    "extract_wslb",
    "f1",
    "label_distribution",
    "load_checkpoint",
    "load_embeddings",
    "load_samples",
    "macro_f1",
    "oversample",
    "parse_corpus",
    "preprocess",
    "run_grid",
    "same_speaker_filter",
    "same_speaker_transition_matrix",
    "save_checkpoint",
    "save_samples",
    "serialize_corpus",
    "smooth_weights",
    "speaker_distribution",
    "speaker_profiles",
    "split",
    "split_by_conversation",
    "transition_matrix",
    "usable_for_pooling",
    "validate",
]
