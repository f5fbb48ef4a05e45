"""Metrics, experiment grids, and per-speaker profile runs.

Macro-F1 here always averages per-class F1 over the *full* label set, so
classes a model never predicts (or that never occur) pull the average
down. That is the reporting convention for every table this module emits.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .balance import oversample
from .corpus import Corpus
from .errors import ConfigError
from .reconstruct import SampleSet, extract, extract_wlb, split
from .training import history_to_csv


def f1(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def confusion_matrix(gold, pred, n_labels: int) -> np.ndarray:
    """Rows are gold labels, columns predictions."""
    conf = np.zeros((n_labels, n_labels), dtype=np.int64)
    for g, p in zip(gold, pred):
        conf[g, p] += 1
    return conf


def scores_from_confusion(conf: np.ndarray):
    """Per-class (precision, recall, f1, support) from a confusion matrix."""
    diag = np.diag(conf).astype(np.float64)
    gold_totals = conf.sum(axis=1).astype(np.float64)
    pred_totals = conf.sum(axis=0).astype(np.float64)
    precision = np.divide(diag, pred_totals, out=np.zeros_like(diag), where=pred_totals > 0)
    recall = np.divide(diag, gold_totals, out=np.zeros_like(diag), where=gold_totals > 0)
    f1s = np.array([f1(p, r) for p, r in zip(precision, recall)])
    return precision, recall, f1s, conf.sum(axis=1)


def macro_f1(gold, pred, n_labels: int) -> float:
    _, _, f1s, _ = scores_from_confusion(confusion_matrix(gold, pred, n_labels))
    return float(f1s.mean())


@dataclass(frozen=True)
class EvalReport:
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f1: tuple[float, ...]
    support: tuple[int, ...]
    confusion: tuple[tuple[int, ...], ...]
    macro_f1: float
    config_fingerprint: str = ""
    epoch_of_max: int | None = None
    final_macro_f1: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def report_from_predictions(gold, pred, n_labels: int, config_fingerprint: str = "",
                            epoch_of_max: int | None = None,
                            final_macro_f1: float | None = None) -> EvalReport:
    conf = confusion_matrix(gold, pred, n_labels)
    precision, recall, f1s, support = scores_from_confusion(conf)
    return EvalReport(
        precision=tuple(float(x) for x in precision),
        recall=tuple(float(x) for x in recall),
        f1=tuple(float(x) for x in f1s),
        support=tuple(int(x) for x in support),
        confusion=tuple(tuple(int(x) for x in row) for row in conf),
        macro_f1=float(f1s.mean()),
        config_fingerprint=config_fingerprint,
        epoch_of_max=epoch_of_max,
        final_macro_f1=final_macro_f1,
    )


def evaluate(predictor, test_set: SampleSet, config_fingerprint: str = "") -> EvalReport:
    """Confusion-matrix evaluation of any predictor exposing predict()."""
    if len(test_set) == 0:
        raise ValueError("cannot evaluate on an empty test set")
    gold = np.asarray([s.target_emotion for s in test_set], dtype=np.int64)
    pred = np.asarray(predictor.predict(test_set), dtype=np.int64)
    epoch_of_max = getattr(predictor, "best_epoch_", None)
    final_f1 = getattr(predictor, "final_test_f1_", None)
    return report_from_predictions(gold, pred, test_set.n_labels, config_fingerprint,
                                   epoch_of_max=epoch_of_max, final_macro_f1=final_f1)


def config_fingerprint(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# experiment grids

GRID_MODELS = ("bilstm", "dgcn", "dgcn-s", "majority")


@dataclass(frozen=True)
class GridSpec:
    """Cartesian experiment grid: models x seq types x lookbacks x dependencies x balances."""

    models: tuple[str, ...] = ("bilstm",)
    seq_types: tuple[str, ...] = ("E",)
    lookbacks: tuple[int, ...] = (1, 2)
    dependencies: tuple[str, ...] = ("all",)
    balances: tuple[str, ...] = ("sw",)
    epochs: int = 30
    lr: float = 0.001
    batch_size: int = 32
    hidden: int | None = None
    dense_units: int | None = None
    attention: bool | None = None
    mu: float = 0.15
    pw: int = 3
    fw: int = 0
    self_pool: str = "mean"
    max_tokens: int = 20
    split_fraction: float = 0.8
    split_seed: int = 0
    train_seed: int = 0
    selection: str = "max"
    embeddings: object = None
    embeddings_path: str | None = None

    def __post_init__(self):
        for m in self.models:
            if m not in GRID_MODELS:
                raise ConfigError(f"unknown grid model {m!r}; expected one of {GRID_MODELS}")

    def axes(self) -> list[dict]:
        combos = itertools.product(
            self.models, self.seq_types, self.lookbacks, self.dependencies, self.balances
        )
        return [
            {"model": m, "seq_type": st, "lookback": w, "dependency": dep, "balance": bal}
            for m, st, w, dep, bal in combos
        ]

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("embeddings")
        return d

    @classmethod
    def from_dict(cls, data: dict, embeddings=None) -> "GridSpec":
        data = dict(data)
        data.pop("embeddings", None)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown grid spec field(s): {', '.join(unknown)}")
        for key in ("models", "seq_types", "lookbacks", "dependencies", "balances"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(embeddings=embeddings, **data)


@dataclass(frozen=True)
class CellResult:
    axes: dict
    report: EvalReport | None = None
    error: str | None = None
    n_train: int = 0
    n_test: int = 0
    history_csv: str = ""
    class_weights: tuple[float, ...] | None = None


@dataclass(frozen=True)
class ExperimentGrid:
    spec: GridSpec
    cells: tuple[CellResult, ...]

    def to_csv(self) -> str:
        lines = [
            "model,seq_type,lookback,dependency,balance,"
            "macro_f1,final_macro_f1,epoch_of_max,n_train,n_test,status"
        ]
        for cell in self.cells:
            a = cell.axes
            if cell.report is not None:
                r = cell.report
                final = "" if r.final_macro_f1 is None else repr(r.final_macro_f1)
                epoch = "" if r.epoch_of_max is None else str(r.epoch_of_max)
                lines.append(
                    f"{a['model']},{a['seq_type']},{a['lookback']},{a['dependency']},"
                    f"{a['balance']},{r.macro_f1!r},{final},{epoch},{cell.n_train},"
                    f"{cell.n_test},ok"
                )
            else:
                lines.append(
                    f"{a['model']},{a['seq_type']},{a['lookback']},{a['dependency']},"
                    f"{a['balance']},,,,{cell.n_train},{cell.n_test},error: {cell.error}"
                )
        return "\n".join(lines) + "\n"


def _cell_datasets(corpus: Corpus, spec: GridSpec, axes: dict) -> tuple[SampleSet, SampleSet]:
    """Extract, filter, split and (optionally) oversample one cell's data."""
    from .graphmodel import usable_for_pooling

    model, dep, w = axes["model"], axes["dependency"], axes["lookback"]
    if model in ("dgcn", "dgcn-s"):
        # graph cells always window over all speakers; dependency acts at pooling
        samples = extract_wlb(corpus, w)
        if dep != "all":
            kept = tuple(s for s in samples if usable_for_pooling(s, dep))
            samples = samples.with_samples(kept)
    else:
        samples = extract(corpus, w, dep)
    train, test = split(samples, spec.split_fraction, seed=spec.split_seed)
    if axes["balance"] == "os":
        train = oversample(train, seed=spec.train_seed)
    return train, test


def _build_predictor(spec: GridSpec, axes: dict):
    from .graphmodel import DGCNPredictor
    from .seqmodel import BiLSTMPredictor, MajorityBaseline

    model = axes["model"]
    if model == "majority":
        return MajorityBaseline()
    common = dict(
        seq_type=axes["seq_type"],
        lookback=axes["lookback"],
        hidden=spec.hidden,
        dense_units=spec.dense_units,
        class_weights=axes["balance"],
        mu=spec.mu,
        epochs=spec.epochs,
        lr=spec.lr,
        batch_size=spec.batch_size,
        seed=spec.train_seed,
        embeddings=spec.embeddings,
        max_tokens=spec.max_tokens,
        selection=spec.selection,
    )
    if model == "bilstm":
        return BiLSTMPredictor(attention=spec.attention, **common)
    return DGCNPredictor(
        pw=spec.pw,
        fw=spec.fw,
        same_speaker_edges=(model == "dgcn-s"),
        dependency=axes["dependency"],
        self_pool=spec.self_pool,
        **common,
    )


def run_cell(corpus: Corpus, spec: GridSpec, axes: dict) -> CellResult:
    """Run one grid cell end to end: extract, balance, fit, evaluate."""
    fingerprint = config_fingerprint({**spec.to_dict(), **axes})
    try:
        train, test = _cell_datasets(corpus, spec, axes)
        predictor = _build_predictor(spec, axes)
        if axes["model"] == "majority":
            predictor.fit(train)
            history = ""
        else:
            predictor.fit(train, test_set=test)
            history = history_to_csv(predictor.history_)
        report = evaluate(predictor, test, config_fingerprint=fingerprint)
        weights = getattr(predictor, "class_weights_", None)
        return CellResult(axes=axes, report=report, n_train=len(train), n_test=len(test),
                          history_csv=history,
                          class_weights=weights.weights if weights else None)
    except Exception as exc:  # cell failures are recorded, the grid continues
        return CellResult(axes=axes, error=f"{type(exc).__name__}: {exc}")


def run_grid(corpus: Corpus, spec: GridSpec, out_dir: str | Path | None = None,
             jobs: int = 1) -> ExperimentGrid:
    """Execute every cell deterministically; optionally write table files.

    Cells are independent; with jobs > 1 they run in worker processes but
    results are assembled in grid order, so output files are identical
    regardless of parallelism.
    """
    axes_list = spec.axes()
    if jobs > 1 and len(axes_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(run_cell, itertools.repeat(corpus), itertools.repeat(spec),
                                  axes_list))
    else:
        cells = [run_cell(corpus, spec, axes) for axes in axes_list]
    grid = ExperimentGrid(spec=spec, cells=tuple(cells))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "grid.csv").write_text(grid.to_csv(), encoding="utf-8")
        for i, cell in enumerate(grid.cells):
            payload = {
                "axes": cell.axes,
                "n_train": cell.n_train,
                "n_test": cell.n_test,
                "error": cell.error,
                "class_weights": list(cell.class_weights) if cell.class_weights else None,
                "report": cell.report.to_dict() if cell.report else None,
            }
            (out / f"cell_{i:03d}_report.json").write_text(
                json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8"
            )
            if cell.history_csv:
                (out / f"cell_{i:03d}_history.csv").write_text(cell.history_csv, encoding="utf-8")
    return grid


# ---------------------------------------------------------------------------
# per-speaker profiles

def speaker_profiles(corpus: Corpus, speakers: list[str], spec: GridSpec) -> dict:
    """Per-speaker wSLB/wOLB runs restricted to that speaker's targets.

    Returns radar-plot-ready data: for each speaker and variant, the
    per-emotion F1 vector (length = label-set size) and the macro-F1.
    One model is trained per speaker and variant, on that speaker's samples.
    """
    profiles: dict[str, dict] = {}
    for name in speakers:
        speaker_id = corpus.speaker_id(name)
        entry: dict = {"variants": {}}
        if speaker_id is None:
            entry["warning"] = f"speaker {name!r} not present in corpus"
            profiles[name] = entry
            continue
        for dep, tag in (("self", "SLB"), ("other", "OLB")):
            for w in spec.lookbacks:
                variant = f"{w}{tag}"
                samples = extract(corpus, w, dep)
                kept = tuple(s for s in samples if s.target_speaker == speaker_id)
                if len(kept) < 2:
                    entry["variants"][variant] = {
                        "warning": f"no usable targets for speaker {name!r}"
                    }
                    continue
                cell_axes = {"model": "bilstm", "seq_type": spec.seq_types[0],
                             "lookback": w, "dependency": dep, "balance": spec.balances[0]}
                try:
                    train, test = split(samples.with_samples(kept), spec.split_fraction,
                                        seed=spec.split_seed)
                    predictor = _build_predictor(spec, cell_axes)
                    predictor.fit(train, test_set=test)
                    report = evaluate(predictor, test)
                    entry["variants"][variant] = {
                        "per_emotion_f1": list(report.f1),
                        "macro_f1": report.macro_f1,
                        "support": list(report.support),
                    }
                except Exception as exc:
                    entry["variants"][variant] = {"error": f"{type(exc).__name__}: {exc}"}
        profiles[name] = entry
    return profiles
