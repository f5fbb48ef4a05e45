"""Speaker-graph next-emotion classifier and its same-speaker-edges variant.

A lookback window becomes a graph whose nodes are the window's utterances.
Node i receives edges from the pw preceding and fw following nodes; the
edge's relation id encodes (source speaker, destination speaker, direction).
Node features come from a sequential BiLSTM encoding, are transformed by a
two-stage relational graph convolution, concatenated with the sequential
features, pooled according to the dependency mode, and classified.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator

from . import numcore as nc
from .balance import DEFAULT_MU, LabelDistribution, resolve_weights
from .embed import DEFAULT_MAX_TOKENS, EmbeddingTable, TokenPipeline
from .errors import ConfigError
from .evalharness import macro_f1
from .reconstruct import Sample, SampleSet
from .seqmodel import Prediction, _stack_emotions, _stack_text
from .training import run_training_loop
from .validation import check_sample_set

PAST, FUTURE = 0, 1

_PREDICT_BATCH = 256


class RelationRegistry:
    """Dense ids for (source speaker, destination speaker, direction) triples.

    While unfrozen, lookups register new triples; once frozen, unseen
    triples map to a reserved extra id so inference never fails. The
    parameter bank therefore has ``n_relations + 1`` rows.
    """

    def __init__(self):
        self.mapping: dict[tuple[int, int, int], int] = {}
        self.frozen = False

    @property
    def n_relations(self) -> int:
        return len(self.mapping)

    @property
    def unknown_id(self) -> int:
        return len(self.mapping)

    @property
    def bank_size(self) -> int:
        return len(self.mapping) + 1

    def freeze(self) -> None:
        self.frozen = True

    def lookup(self, src_speaker: int, dst_speaker: int, direction: int) -> int:
        key = (src_speaker, dst_speaker, direction)
        found = self.mapping.get(key)
        if found is not None:
            return found
        if self.frozen:
            return self.unknown_id
        self.mapping[key] = len(self.mapping)
        return self.mapping[key]

    def to_payload(self) -> dict:
        return {f"{s},{d},{dir_}": rid for (s, d, dir_), rid in self.mapping.items()}

    @classmethod
    def from_payload(cls, payload: dict) -> "RelationRegistry":
        reg = cls()
        items = sorted(payload.items(), key=lambda kv: kv[1])
        for key, rid in items:
            s, d, dir_ = (int(x) for x in key.split(","))
            assigned = reg.lookup(s, d, dir_)
            if assigned != rid:
                raise ValueError(f"relation ids are not dense: {key!r} -> {rid}, expected {assigned}")
        reg.freeze()
        return reg


@dataclass(frozen=True)
class ConversationGraph:
    """Utterance nodes with typed directed edges (src, dst, relation_id)."""

    n: int
    speakers: tuple[int, ...]
    edges: tuple[tuple[int, int, int], ...]
    n_relations: int
    node_features: np.ndarray | None = None

    def __post_init__(self):
        for src, dst, rel in self.edges:
            if not (0 <= src < self.n and 0 <= dst < self.n) or src == dst:
                raise ValueError(f"bad edge ({src}, {dst})")
            if rel >= self.n_relations:
                raise ValueError(f"relation id {rel} outside bank of {self.n_relations}")

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "speakers": list(self.speakers),
            "edges": [list(e) for e in self.edges],
            "n_relations": self.n_relations,
        }


def build_graph(
    speakers,
    pw: int,
    fw: int,
    registry: RelationRegistry | None = None,
    features: np.ndarray | None = None,
) -> ConversationGraph:
    """Window graph: node i gets edges from nodes j with i-pw <= j < i or i < j <= i+fw."""
    if pw < 0 or fw < 0:
        raise ValueError("pw and fw must be nonnegative")
    speakers = tuple(int(s) for s in speakers)
    n = len(speakers)
    local = registry if registry is not None else RelationRegistry()
    edges = []
    for dst in range(n):
        for src in range(max(0, dst - pw), dst):
            edges.append((src, dst, local.lookup(speakers[src], speakers[dst], PAST)))
        for src in range(dst + 1, min(n - 1, dst + fw) + 1):
            edges.append((src, dst, local.lookup(speakers[src], speakers[dst], FUTURE)))
    bank = local.bank_size if registry is not None else max(local.n_relations, 1)
    return ConversationGraph(
        n=n, speakers=speakers, edges=tuple(edges), n_relations=bank, node_features=features
    )


def same_speaker_filter(graph: ConversationGraph) -> ConversationGraph:
    """Keep only edges whose endpoints share a speaker; relation ids untouched."""
    kept = tuple(
        (src, dst, rel)
        for src, dst, rel in graph.edges
        if graph.speakers[src] == graph.speakers[dst]
    )
    return replace(graph, edges=kept)


def usable_for_pooling(sample: Sample, dependency: str) -> bool:
    """Whether a window has the node subset the dependency pooling needs."""
    if dependency == "all":
        return True
    has_self = any(t.speaker == sample.target_speaker for t in sample.window)
    if dependency == "self":
        return has_self
    return any(t.speaker != sample.target_speaker for t in sample.window)


# ---------------------------------------------------------------------------
# relational graph convolution

def _group_edges(graph: ConversationGraph):
    by_dst_rel: dict[tuple[int, int], list[int]] = {}
    neigh: dict[int, list[int]] = {}
    for src, dst, rel in graph.edges:
        by_dst_rel.setdefault((dst, rel), []).append(src)
        neigh.setdefault(dst, []).append(src)
    # dedup in-neighborhoods; (src, dst) pairs are unique by construction,
    # but a filtered or hand-built graph may repeat them
    neigh = {dst: sorted(set(srcs)) for dst, srcs in neigh.items()}
    return by_dst_rel, neigh


def rgcn_forward(features: np.ndarray, graph: ConversationGraph,
                 Wrel: nc.Parameter, Wself: nc.Parameter, Wout: nc.Parameter):
    """Two-stage graph convolution with uniform 1/|N_r| edge weights.

    Stage 1: h'_i = ReLU( sum_r mean_{j in N_r(i)} h_j W_r + h_i W_self ).
    Stage 2: h''_i = ReLU( mean_{j in N(i) + {i}} h'_j W_out ).
    """
    if Wrel.value.shape[0] < graph.n_relations:
        raise ValueError(
            f"graph references {graph.n_relations} relations, bank holds {Wrel.value.shape[0]}"
        )
    by_dst_rel, neigh = _group_edges(graph)
    pre1 = features @ Wself.value
    for (dst, rel), srcs in by_dst_rel.items():
        pre1[dst] += features[srcs].mean(axis=0) @ Wrel.value[rel]
    h1 = np.maximum(pre1, 0.0)
    pool = h1.copy()
    for dst, srcs in neigh.items():
        pool[dst] = (h1[srcs].sum(axis=0) + h1[dst]) / (len(srcs) + 1)
    pre2 = pool @ Wout.value
    h2 = np.maximum(pre2, 0.0)
    cache = (features, by_dst_rel, neigh, pre1, h1, pool, pre2)
    return h2, cache


def rgcn_backward(dh2: np.ndarray, cache,
                  Wrel: nc.Parameter, Wself: nc.Parameter, Wout: nc.Parameter) -> np.ndarray:
    features, by_dst_rel, neigh, pre1, h1, pool, pre2 = cache
    dpre2 = dh2 * (pre2 > 0.0)
    Wout.grad += pool.T @ dpre2
    dpool = dpre2 @ Wout.value.T
    dh1 = np.zeros_like(h1)
    for i in range(h1.shape[0]):
        srcs = neigh.get(i)
        if srcs:
            share = dpool[i] / (len(srcs) + 1)
            dh1[i] += share
            np.add.at(dh1, srcs, share)
        else:
            dh1[i] += dpool[i]
    dpre1 = dh1 * (pre1 > 0.0)
    Wself.grad += features.T @ dpre1
    dfeat = dpre1 @ Wself.value.T
    for (dst, rel), srcs in by_dst_rel.items():
        mean_feat = features[srcs].mean(axis=0)
        Wrel.grad[rel] += np.outer(mean_feat, dpre1[dst])
        dmean = Wrel.value[rel] @ dpre1[dst]
        dfeat[srcs] += dmean / len(srcs)
    return dfeat


# ---------------------------------------------------------------------------
# the estimator

class DGCNPredictor(BaseEstimator):
    """Graph next-emotion classifier over wLB windows.

    ``dependency`` selects the pooled node subset ("all": last node,
    "self": target-speaker nodes, "other": remaining nodes); samples are
    always full windows. ``same_speaker_edges=True`` is the ablation
    variant that drops every cross-speaker edge.
    """

    def __init__(
        self,
        seq_type: str = "E",
        lookback: int | None = None,
        hidden: int | None = None,
        graph_hidden: int | None = None,
        dense_units: int | None = None,
        pw: int = 3,
        fw: int = 0,
        same_speaker_edges: bool = False,
        dependency: str = "all",
        self_pool: str = "mean",
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
        self.graph_hidden = graph_hidden
        self.dense_units = dense_units
        self.pw = pw
        self.fw = fw
        self.same_speaker_edges = same_speaker_edges
        self.dependency = dependency
        self.self_pool = self_pool
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

    # -- configuration ----------------------------------------------------

    def _resolve_config(self, train_set: SampleSet) -> None:
        if self.seq_type not in ("E", "T", "ET"):
            raise ConfigError(f"seq_type must be E, T or ET, got {self.seq_type!r}")
        if self.dependency not in ("all", "self", "other"):
            raise ConfigError(f"dependency must be all/self/other, got {self.dependency!r}")
        if self.self_pool not in ("mean", "last"):
            raise ConfigError(f"self_pool must be 'mean' or 'last', got {self.self_pool!r}")
        w = self.lookback if self.lookback is not None else train_set.w
        if w < 2:
            raise ConfigError(f"the graph model needs lookback >= 2, got {w}")
        if w != train_set.w:
            raise ConfigError(f"lookback {w} does not match sample set w={train_set.w}")
        if self.pw < 0 or self.fw < 0 or self.pw + self.fw < 1:
            raise ConfigError(f"need pw >= 0, fw >= 0, pw + fw >= 1 (got pw={self.pw}, fw={self.fw})")
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
        self.graph_hidden_ = self.graph_hidden if self.graph_hidden is not None else self.hidden_
        self.dense_units_ = self.dense_units if self.dense_units is not None else self.hidden_
        self.text_proj_ = self.text_proj if self.text_proj is not None else self.hidden_
        self.pipeline_ = self.pipeline if self.pipeline is not None else TokenPipeline(
            max_tokens=self.max_tokens
        )
        self.input_dim_ = (self.n_labels_ if self.uses_emotion_ else 0) + (
            self.text_proj_ if self.uses_text_ else 0
        )

    def _build_state(self, rng: np.random.Generator, bank_size: int) -> nc.ModelState:
        state = nc.ModelState()
        if self.uses_text_:
            nc.add_dense(state, "t_proj", self.max_tokens * self.embeddings.dim, self.text_proj_, rng)
        nc.add_bilstm(state, "seq", self.input_dim_, self.hidden_, rng)
        d_seq = 2 * self.hidden_
        state.add("rgcn.Wrel", nc.uniform_init(rng, (bank_size, d_seq, self.graph_hidden_), fan_in=d_seq))
        state.add("rgcn.Wself", nc.uniform_init(rng, (d_seq, self.graph_hidden_), fan_in=d_seq))
        state.add("rgcn.Wout",
                  nc.uniform_init(rng, (self.graph_hidden_, self.graph_hidden_), fan_in=self.graph_hidden_))
        nc.add_dense(state, "head1", d_seq + self.graph_hidden_, self.dense_units_, rng)
        nc.add_dense(state, "head2", self.dense_units_, self.n_labels_, rng)
        return state

    # -- encoding ----------------------------------------------------------

    def _encode(self, samples) -> dict:
        feats: dict = {}
        if self.uses_emotion_:
            feats["E"] = _stack_emotions(samples, self.n_labels_)
        if self.uses_text_:
            feats["T"] = _stack_text(samples, self.embeddings, self.pipeline_, self.max_tokens)
        feats["graphs"] = tuple(self._graph_for(s) for s in samples)
        feats["pool_rows"] = tuple(self._pool_rows(s) for s in samples)
        return feats

    def _graph_for(self, sample: Sample) -> ConversationGraph:
        graph = build_graph(
            [t.speaker for t in sample.window], self.pw, self.fw, registry=self.registry_
        )
        if self.same_speaker_edges:
            graph = same_speaker_filter(graph)
        return graph

    def _pool_rows(self, sample: Sample) -> tuple[int, ...]:
        if self.dependency == "all":
            return (sample.w - 1,)
        own = tuple(i for i, t in enumerate(sample.window) if t.speaker == sample.target_speaker)
        if self.dependency == "self":
            rows = own if self.self_pool == "mean" else own[-1:]
        else:
            rows = tuple(i for i in range(sample.w) if i not in own)
        if not rows:
            raise ValueError(
                f"window of sample at turn {sample.target_turn} in {sample.conversation_id!r} "
                f"has no nodes for dependency={self.dependency!r}"
            )
        return rows

    # -- forward / backward --------------------------------------------------

    def _forward(self, feats: dict, state: nc.ModelState):
        caches: dict = {}
        parts = []
        if self.uses_emotion_:
            parts.append(feats["E"])
        if self.uses_text_:
            Tfeat = feats["T"]
            B, w, D = Tfeat.shape
            proj_flat, caches["t_proj"] = nc.dense_forward(
                Tfeat.reshape(B * w, D), state["t_proj.W"], state["t_proj.b"], "none"
            )
            parts.append(proj_flat.reshape(B, w, self.text_proj_))
            caches["t_shape"] = (B, w, D)
        X = parts[0] if len(parts) == 1 else np.concatenate(parts, axis=2)
        H, caches["seq"] = nc.bilstm_forward(
            X, state["seq.fwd.W"], state["seq.fwd.b"], state["seq.bwd.W"], state["seq.bwd.b"]
        )
        B = H.shape[0]
        pooled = np.empty((B, 2 * self.hidden_ + self.graph_hidden_))
        rgcn_caches = []
        for b in range(B):
            g2, gc = rgcn_forward(
                H[b], feats["graphs"][b], state["rgcn.Wrel"], state["rgcn.Wself"], state["rgcn.Wout"]
            )
            rows = list(feats["pool_rows"][b])
            node_feats = np.concatenate([H[b][rows], g2[rows]], axis=1)
            pooled[b] = node_feats.mean(axis=0)
            rgcn_caches.append(gc)
        caches["rgcn"] = rgcn_caches
        caches["H_shape"] = H.shape
        z1, caches["head1"] = nc.dense_forward(pooled, state["head1.W"], state["head1.b"], "relu")
        logits, caches["head2"] = nc.dense_forward(z1, state["head2.W"], state["head2.b"], "none")
        probs = nc.softmax(logits, axis=1)
        return probs, caches

    def _backward(self, dlogits: np.ndarray, feats: dict, caches: dict,
                  state: nc.ModelState) -> None:
        dz1 = nc.dense_backward(dlogits, caches["head2"])
        dpooled = nc.dense_backward(dz1, caches["head1"])
        B, w, two_h = caches["H_shape"]
        gh = self.graph_hidden_
        dH = np.zeros((B, w, two_h))
        for b in range(B):
            rows = list(feats["pool_rows"][b])
            share = dpooled[b] / len(rows)
            dg2 = np.zeros((w, gh))
            for r in rows:
                dH[b, r] += share[:two_h]
                dg2[r] += share[two_h:]
            dH[b] += rgcn_backward(
                dg2, caches["rgcn"][b], state["rgcn.Wrel"], state["rgcn.Wself"], state["rgcn.Wout"]
            )
        dX = nc.bilstm_backward(
            dH, caches["seq"], state["seq.fwd.W"], state["seq.fwd.b"],
            state["seq.bwd.W"], state["seq.bwd.b"]
        )
        if self.uses_text_:
            offset = self.n_labels_ if self.uses_emotion_ else 0
            dproj = dX[:, :, offset : offset + self.text_proj_]
            B2, w2, D = caches["t_shape"]
            nc.dense_backward(dproj.reshape(B2 * w2, self.text_proj_), caches["t_proj"])

    # -- public API -----------------------------------------------------------

    def fit(self, train_set: SampleSet, test_set: SampleSet | None = None,
            val_set: SampleSet | None = None) -> "DGCNPredictor":
        check_sample_set(train_set, nonempty=True)
        self._resolve_config(train_set)
        for name, sset in (("test", test_set), ("val", val_set)):
            if sset is not None:
                if sset.w != self.w_:
                    raise ConfigError(f"{name} set w={sset.w} does not match lookback {self.w_}")
                if sset.n_labels != self.n_labels_:
                    raise ConfigError(
                        f"{name} set has {sset.n_labels} labels, train has {self.n_labels_}")
        for s in train_set:
            if not usable_for_pooling(s, self.dependency):
                raise ConfigError(
                    f"train sample at turn {s.target_turn} in {s.conversation_id!r} has no "
                    f"window nodes for dependency={self.dependency!r}; filter with "
                    "usable_for_pooling() first"
                )
        weights = resolve_weights(
            self.class_weights,
            LabelDistribution(tuple(
                sum(1 for s in train_set if s.target_emotion == lab)
                for lab in range(self.n_labels_)
            )),
            mu=self.mu,
        )
        self.class_weights_ = weights
        w_arr = weights.as_array()

        # first pass registers every relation seen in training windows
        self.registry_ = RelationRegistry()
        for s in train_set:
            self._graph_for(s)
        self.registry_.freeze()

        rng = np.random.default_rng(self.seed)
        state = self._build_state(rng, self.registry_.bank_size)
        feats = self._encode(train_set.samples)
        targets = np.asarray([s.target_emotion for s in train_set], dtype=np.int64)

        eval_feats = {}
        for name, sset in (("test", test_set), ("val", val_set)):
            if sset is not None and len(sset):
                usable = tuple(s for s in sset if usable_for_pooling(s, self.dependency))
                if usable:
                    eval_feats[name] = (
                        self._encode(usable),
                        np.asarray([s.target_emotion for s in usable], dtype=np.int64),
                    )

        def batch_step(idx: np.ndarray) -> float:
            state.zero_grad()
            batch = {
                "E": feats["E"][idx] if "E" in feats else None,
                "T": feats["T"][idx] if "T" in feats else None,
                "graphs": [feats["graphs"][i] for i in idx],
                "pool_rows": [feats["pool_rows"][i] for i in idx],
            }
            batch = {k: v for k, v in batch.items() if v is not None}
            probs, caches = self._forward(batch, state)
            loss, dlogits = nc.batch_weighted_xent(probs, targets[idx], w_arr)
            self._backward(dlogits, batch, caches, state)
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
        n = len(feats["graphs"])
        out = np.empty(n, dtype=np.int64)
        for start in range(0, n, _PREDICT_BATCH):
            sl = slice(start, start + _PREDICT_BATCH)
            batch = {k: v[sl] for k, v in feats.items()}
            probs, _ = self._forward(batch, state)
            out[sl] = np.argmax(probs, axis=1)
        return out

    def predict_proba(self, sample_set: SampleSet) -> np.ndarray:
        check_sample_set(sample_set, nonempty=True, w=self.w_)
        feats = self._encode(sample_set.samples)
        n = len(sample_set)
        out = np.empty((n, self.n_labels_))
        for start in range(0, n, _PREDICT_BATCH):
            sl = slice(start, start + _PREDICT_BATCH)
            batch = {k: v[sl] for k, v in feats.items()}
            probs, _ = self._forward(batch, self.state_)
            out[sl] = probs
        return out

    def predict(self, sample_set: SampleSet) -> np.ndarray:
        return np.argmax(self.predict_proba(sample_set), axis=1)

    def forward(self, sample: Sample) -> Prediction:
        if sample.w != self.w_:
            raise ConfigError(f"sample w={sample.w} does not match lookback {self.w_}")
        feats = self._encode([sample])
        probs, _ = self._forward(feats, self.state_)
        dist = probs[0]
        return Prediction(distribution=dist, label=int(np.argmax(dist)))
