"""Self-describing JSON checkpoints for trained predictors."""

from __future__ import annotations

import json
from pathlib import Path

from .embed import EmbeddingTable, TokenPipeline
from .errors import ConfigError
from .evalharness import config_fingerprint
from .graphmodel import DGCNPredictor, RelationRegistry
from .numcore import ModelState
from .seqmodel import BiLSTMPredictor

FORMAT = "emocast-checkpoint-v1"

_FITTED_COMMON = ("w_", "n_labels_", "hidden_", "dense_units_", "text_proj_",
                  "uses_text_", "uses_emotion_", "best_epoch_")
_FITTED_BY_MODEL = {
    "bilstm": _FITTED_COMMON + ("attention_",),
    "dgcn": _FITTED_COMMON + ("graph_hidden_", "input_dim_",),
}


def _model_name(predictor) -> str:
    if isinstance(predictor, BiLSTMPredictor):
        return "bilstm"
    if isinstance(predictor, DGCNPredictor):
        return "dgcn"
    raise ConfigError(f"cannot checkpoint a {type(predictor).__name__}")


def save_checkpoint(predictor, path: str | Path, label_names, extra: dict | None = None) -> dict:
    """Write parameters, config, label set and a config hash to JSON.

    ``extra`` holds run context the predictor itself does not own (e.g.
    the extraction dependency mode and the split seed).
    """
    model = _model_name(predictor)
    params = predictor.get_params()
    params.pop("embeddings", None)
    cw = params.get("class_weights")
    if cw is not None and not isinstance(cw, str):
        params["class_weights"] = [float(x) for x in getattr(cw, "weights", cw)]
    pipeline = params.pop("pipeline", None) or getattr(predictor, "pipeline_", None)
    pipeline_cfg = None
    if pipeline is not None:
        pipeline_cfg = {
            "lowercase": pipeline.lowercase,
            "strip_punctuation": pipeline.strip_punctuation,
            "stemmer": pipeline.stemmer,
            "max_tokens": pipeline.max_tokens,
        }
    fitted = {name: getattr(predictor, name) for name in _FITTED_BY_MODEL[model]}
    payload = {
        "format": FORMAT,
        "model": model,
        "params": params,
        "pipeline": pipeline_cfg,
        "fitted": fitted,
        "extra": extra or {},
        "label_set": list(label_names),
        "state": predictor.state_.to_payload(),
        "config_hash": config_fingerprint({"model": model, **params}),
    }
    if model == "dgcn":
        payload["registry"] = predictor.registry_.to_payload()
    Path(path).write_text(json.dumps(payload), encoding="utf-8")
    return payload


def load_checkpoint(path: str | Path, embeddings: EmbeddingTable | None = None):
    """Rebuild a fitted predictor from a checkpoint file.

    T/ET checkpoints need the embedding table passed back in; parameters
    are restored exactly (float64 round-trips through JSON).
    """
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != FORMAT:
        raise ConfigError(f"not a recognized checkpoint file: {path}")
    model = payload["model"]
    params = dict(payload["params"])
    params["embeddings"] = embeddings
    cls = {"bilstm": BiLSTMPredictor, "dgcn": DGCNPredictor}[model]
    predictor = cls(**params)
    for name, value in payload["fitted"].items():
        setattr(predictor, name, value)
    if predictor.uses_text_ and embeddings is None:
        raise ConfigError("this checkpoint needs an embedding table; pass embeddings=")
    pipeline_cfg = payload.get("pipeline")
    if pipeline_cfg:
        predictor.pipeline_ = TokenPipeline(**pipeline_cfg)
    else:
        predictor.pipeline_ = TokenPipeline(max_tokens=params.get("max_tokens", 20))
    predictor.state_ = ModelState.from_payload(payload["state"])
    predictor.final_state_ = predictor.state_
    if model == "dgcn":
        predictor.registry_ = RelationRegistry.from_payload(payload["registry"])
    predictor.label_names_ = tuple(payload["label_set"])
    predictor.checkpoint_extra_ = dict(payload.get("extra", {}))
    return predictor
