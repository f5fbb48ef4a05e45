"""BiLSTM next-emotion classifiers over emotion, text, or (emotion, text) windows.

``BiLSTMPredictor`` follows the sklearn estimator conventions: constructor
arguments are stored verbatim, learned state lives in trailing-underscore
attributes, and ``fit`` returns ``self``. A window sequence is encoded per
seq type (one-hot rows for E, flattened embedding rows for T, both in
parallel branches for ET), passed through a BiLSTM, pooled (final states
or additive attention), and classified by a ReLU dense layer followed by
a softmax output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from . import numcore as nc
from .balance import DEFAULT_MU, LabelDistribution, resolve_weights
from .embed import DEFAULT_MAX_TOKENS, EmbeddingTable, TokenPipeline, encode_utterance, preprocess
from .errors import ConfigError
from .evalharness import macro_f1
from .reconstruct import Sample, SampleSet
from .training import run_training_loop
from .validation import check_sample_set

SEQ_TYPES = ("E", "T", "ET")

_PREDICT_BATCH = 512


@dataclass(frozen=True)
class Prediction:
    """A probability distribution over labels and its argmax (ties: lowest id)."""

    distribution: np.ndarray
    label: int


def encode_emotions(sample: Sample, n_labels: int) -> np.ndarray:
    """w x n_labels one-hot matrix of the window's emotion ids."""
    mat = np.zeros((sample.w, n_labels))
    for row, turn in enumerate(sample.window):
        mat[row, turn.emotion] = 1.0
    return mat


def encode_text(
    sample: Sample,
    table: EmbeddingTable,
    pipeline: TokenPipeline,
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> np.ndarray:
    """w x (max_tokens * dim) matrix of flattened per-utterance embeddings."""
    mat = np.zeros((sample.w, max_tokens * table.dim))
    for row, turn in enumerate(sample.window):
        tokens = preprocess(turn.tokens, pipeline)
        mat[row] = encode_utterance(tokens, table, max_tokens)
    return mat


def _stack_emotions(samples, n_labels: int) -> np.ndarray:
    return np.stack([encode_emotions(s, n_labels) for s in samples])


def _stack_text(samples, table, pipeline, max_tokens) -> np.ndarray:
    return np.stack([encode_text(s, table, pipeline, max_tokens) for s in samples])


class BiLSTMPredictor(BaseEstimator):
    """Sequence model over lookback windows.

    Parameters
    ----------
    seq_type: "E", "T" or "ET".
    lookback: expected window length; None infers it from the training set.
    hidden: BiLSTM units per direction; None picks 64 for E, 300 for T/ET.
    dense_units: width of the ReLU dense layer; None matches ``hidden``.
    attention: None resolves to False for E and True for T/ET.
    class_weights: "sw" (default), "cw", "none", or explicit weights.
    selection: which epoch the fitted state comes from: "max" (best test
        macro-F1, the reporting protocol used throughout), "final", or "val".
    """

    def __init__(
        self,
        seq_type: str = "E",
        lookback: int | None = None,
        hidden: int | None = None,
        dense_units: int | None = None,
        attention: bool | None = None,
        class_weights="sw",
        mu: float = DEFAULT_MU,
        epochs: int = 30,
        lr: float = 0.001,
        batch_size: int = 32,
        seed: int = 0,
        embeddings: EmbeddingTable | None = None,
        max_tokens: int = DEFAULT_MAX_TOKENS,
        text_proj: int | None = None,
        pipeline: TokenPipeline | None = None,
        selection: str = "max",
    ):
        self.seq_type = seq_type
        self.lookback = lookback
        self.hidden = hidden
        self.dense_units = dense_units
        self.attention = attention
        self.class_weights = class_weights
        self.mu = mu
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed
        self.embeddings = embeddings
        self.max_tokens = max_tokens
        self.text_proj = text_proj
        self.pipeline = pipeline
        self.selection = selection

    # -- configuration ------------------------------------------------

    def _resolve_config(self, train_set: SampleSet) -> None:
        if self.seq_type not in SEQ_TYPES:
            raise ConfigError(f"seq_type must be one of {SEQ_TYPES}, got {self.seq_type!r}")
        w = self.lookback if self.lookback is not None else train_set.w
        if w < 1:
            raise ConfigError(f"lookback must be >= 1, got {w}")
        if w != train_set.w:
            raise ConfigError(f"lookback {w} does not match sample set w={train_set.w}")
        self.w_ = w
        self.n_labels_ = train_set.n_labels
        self.uses_text_ = self.seq_type in ("T", "ET")
        self.uses_emotion_ = self.seq_type in ("E", "ET")
        if self.uses_text_:
            if self.embeddings is None:
                raise ConfigError(f"seq_type {self.seq_type} requires an embedding table")
            if not train_set.has_text:
                raise ConfigError(
                    f"seq_type {self.seq_type} needs text, but the sample set is emotion-only"
                )
        self.hidden_ = self.hidden if self.hidden is not None else (64 if self.seq_type == "E" else 300)
        self.dense_units_ = self.dense_units if self.dense_units is not None else self.hidden_
        self.attention_ = self.attention if self.attention is not None else self.uses_text_
        self.text_proj_ = self.text_proj if self.text_proj is not None else self.hidden_
        self.pipeline_ = self.pipeline if self.pipeline is not None else TokenPipeline(
            max_tokens=self.max_tokens
        )

    def _build_state(self, rng: np.random.Generator) -> nc.ModelState:
        state = nc.ModelState()
        pooled = 0
        if self.uses_emotion_:
            nc.add_bilstm(state, "e_lstm", self.n_labels_, self.hidden_, rng)
            if self.attention_:
                nc.add_attention(state, "e_att", 2 * self.hidden_, rng)
            pooled += 2 * self.hidden_
        if self.uses_text_:
            nc.add_dense(state, "t_proj", self.max_tokens * self.embeddings.dim, self.text_proj_, rng)
            nc.add_bilstm(state, "t_lstm", self.text_proj_, self.hidden_, rng)
            if self.attention_:
                nc.add_attention(state, "t_att", 2 * self.hidden_, rng)
            pooled += 2 * self.hidden_
        nc.add_dense(state, "head1", pooled, self.dense_units_, rng)
        nc.add_dense(state, "head2", self.dense_units_, self.n_labels_, rng)
        return state

    # -- encoding -------------------------------------------------------

    def _encode(self, samples) -> dict:
        feats: dict = {}
        if self.uses_emotion_:
            feats["E"] = _stack_emotions(samples, self.n_labels_)
        if self.uses_text_:
            feats["T"] = _stack_text(samples, self.embeddings, self.pipeline_, self.max_tokens)
        return feats

    # -- forward / backward ----------------------------------------------

    def _branch_forward(self, X, state, prefix):
        H, lstm_cache = nc.bilstm_forward(
            X, state[f"{prefix}_lstm.fwd.W"], state[f"{prefix}_lstm.fwd.b"],
            state[f"{prefix}_lstm.bwd.W"], state[f"{prefix}_lstm.bwd.b"],
        )
        if self.attention_:
            pooled, att_cache = nc.attention_forward(H, state[f"{prefix}_att.W"], state[f"{prefix}_att.v"])
        else:
            pooled, att_cache = nc.bilstm_final(H), None
        return pooled, (lstm_cache, att_cache, H.shape)

    def _branch_backward(self, dpooled, cache, state, prefix):
        lstm_cache, att_cache, h_shape = cache
        if self.attention_:
            dH = nc.attention_backward(dpooled, att_cache)
        else:
            dH = nc.bilstm_final_backward(dpooled, h_shape)
        return nc.bilstm_backward(
            dH, lstm_cache, state[f"{prefix}_lstm.fwd.W"], state[f"{prefix}_lstm.fwd.b"],
            state[f"{prefix}_lstm.bwd.W"], state[f"{prefix}_lstm.bwd.b"],
        )

    def _forward(self, feats: dict, state: nc.ModelState):
        parts = []
        caches: dict = {}
        if self.uses_emotion_:
            pooled_e, caches["e"] = self._branch_forward(feats["E"], state, "e")
            parts.append(pooled_e)
        if self.uses_text_:
            X = feats["T"]
            B, w, D = X.shape
            proj_flat, caches["t_proj"] = nc.dense_forward(
                X.reshape(B * w, D), state["t_proj.W"], state["t_proj.b"], activation="none"
            )
            P = proj_flat.reshape(B, w, self.text_proj_)
            pooled_t, caches["t"] = self._branch_forward(P, state, "t")
            caches["t_shape"] = (B, w, D)
            parts.append(pooled_t)
        pooled = parts[0] if len(parts) == 1 else np.concatenate(parts, axis=1)
        z1, caches["head1"] = nc.dense_forward(pooled, state["head1.W"], state["head1.b"], "relu")
        logits, caches["head2"] = nc.dense_forward(z1, state["head2.W"], state["head2.b"], "none")
        probs = nc.softmax(logits, axis=1)
        caches["split"] = [p.shape[1] for p in parts]
        return probs, caches

    def _backward(self, dlogits, caches, state: nc.ModelState) -> None:
        dz1 = nc.dense_backward(dlogits, caches["head2"])
        dpooled = nc.dense_backward(dz1, caches["head1"])
        splits = caches["split"]
        offset = 0
        chunks = []
        for width in splits:
            chunks.append(dpooled[:, offset : offset + width])
            offset += width
        chunk_iter = iter(chunks)
        if self.uses_emotion_:
            self._branch_backward(next(chunk_iter), caches["e"], state, "e")
        if self.uses_text_:
            dP = self._branch_backward(next(chunk_iter), caches["t"], state, "t")
            B, w, D = caches["t_shape"]
            nc.dense_backward(dP.reshape(B * w, self.text_proj_), caches["t_proj"])

    # -- public API -------------------------------------------------------

    def fit(self, train_set: SampleSet, test_set: SampleSet | None = None,
            val_set: SampleSet | None = None) -> "BiLSTMPredictor":
        check_sample_set(train_set, nonempty=True)
        self._resolve_config(train_set)
        for other in (test_set, val_set):
            if other is not None:
                if other.w != self.w_:
                    raise ConfigError(
                        f"evaluation set w={other.w} does not match lookback {self.w_}")
                if other.n_labels != self.n_labels_:
                    raise ConfigError(
                        f"evaluation set has {other.n_labels} labels, train has {self.n_labels_}")
        dist_counts = [0] * self.n_labels_
        for s in train_set:
            dist_counts[s.target_emotion] += 1
        weights = resolve_weights(self.class_weights, LabelDistribution(tuple(dist_counts)), mu=self.mu)
        self.class_weights_ = weights
        w_arr = weights.as_array()

        rng = np.random.default_rng(self.seed)
        state = self._build_state(rng)
        feats = self._encode(train_set.samples)
        targets = np.asarray([s.target_emotion for s in train_set], dtype=np.int64)

        eval_feats = {}
        for name, sset in (("test", test_set), ("val", val_set)):
            if sset is not None and len(sset):
                eval_feats[name] = (self._encode(sset.samples),
                                    np.asarray([s.target_emotion for s in sset], dtype=np.int64))

        def batch_step(idx: np.ndarray) -> float:
            state.zero_grad()
            batch = {k: v[idx] for k, v in feats.items()}
            probs, caches = self._forward(batch, state)
            loss, dlogits = nc.batch_weighted_xent(probs, targets[idx], w_arr)
            self._backward(dlogits, caches, state)
            state.adam_step(self.lr)
            return loss

        def epoch_eval():
            out = []
            for name in ("test", "val"):
                if name in eval_feats:
                    efeats, etargets = eval_feats[name]
                    pred = self._predict_encoded(efeats, state)
                    out.append(macro_f1(etargets, pred, self.n_labels_))
                else:
                    out.append(None)
            return tuple(out)

        history, final_state, best_state, best_epoch = run_training_loop(
            state, len(train_set), self.epochs, self.batch_size, self.lr, rng,
            batch_step, epoch_eval, selection=self.selection,
        )
        self.history_ = history
        self.final_state_ = final_state
        self.state_ = best_state
        self.best_epoch_ = best_epoch
        best = [r.test_macro_f1 for r in history if r.test_macro_f1 is not None]
        self.best_test_f1_ = max(best) if best else None
        self.final_test_f1_ = history[-1].test_macro_f1
        return self

    def _predict_encoded(self, feats: dict, state: nc.ModelState) -> np.ndarray:
        n = next(iter(feats.values())).shape[0]
        out = np.empty(n, dtype=np.int64)
        for start in range(0, n, _PREDICT_BATCH):
            batch = {k: v[start : start + _PREDICT_BATCH] for k, v in feats.items()}
            probs, _ = self._forward(batch, state)
            out[start : start + _PREDICT_BATCH] = np.argmax(probs, axis=1)
        return out

    def predict_proba(self, sample_set: SampleSet) -> np.ndarray:
        check_sample_set(sample_set, nonempty=True, w=self.w_)
        feats = self._encode(sample_set.samples)
        n = len(sample_set)
        out = np.empty((n, self.n_labels_))
        for start in range(0, n, _PREDICT_BATCH):
            batch = {k: v[start : start + _PREDICT_BATCH] for k, v in feats.items()}
            probs, _ = self._forward(batch, self.state_)
            out[start : start + _PREDICT_BATCH] = probs
        return out

    def predict(self, sample_set: SampleSet) -> np.ndarray:
        return np.argmax(self.predict_proba(sample_set), axis=1)

    def forward(self, sample: Sample) -> Prediction:
        """Single-sample prediction contract: full distribution plus argmax."""
        if sample.w != self.w_:
            raise ConfigError(f"sample w={sample.w} does not match lookback {self.w_}")
        feats = self._encode([sample])
        probs, _ = self._forward(feats, self.state_)
        dist = probs[0]
        return Prediction(distribution=dist, label=int(np.argmax(dist)))


class MajorityBaseline(BaseEstimator):
    """Predicts the modal training label for every input (ties: lowest id)."""

    def fit(self, train_set: SampleSet, test_set: SampleSet | None = None) -> "MajorityBaseline":
        check_sample_set(train_set, nonempty=True)
        counts = np.zeros(train_set.n_labels, dtype=np.int64)
        for s in train_set:
            counts[s.target_emotion] += 1
        self.n_labels_ = train_set.n_labels
        self.label_ = int(np.argmax(counts))
        return self

    def predict(self, sample_set: SampleSet) -> np.ndarray:
        return np.full(len(sample_set), self.label_, dtype=np.int64)

    def predict_proba(self, sample_set: SampleSet) -> np.ndarray:
        probs = np.zeros((len(sample_set), self.n_labels_))
        probs[:, self.label_] = 1.0
        return probs
