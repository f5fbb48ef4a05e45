import json

import numpy as np
import pytest
from sklearn.metrics import f1_score as sk_f1_score

from emocast.errors import ConfigError
from emocast.evalharness import (
    EvalReport,
    GridSpec,
    confusion_matrix,
    evaluate,
    f1,
    macro_f1,
    report_from_predictions,
    run_grid,
    speaker_profiles,
)
from emocast.reconstruct import extract_wlb, split
from emocast.seqmodel import MajorityBaseline

from conftest import random_corpus, self_dependent_corpus


class _FixedPredictor:
    def __init__(self, labels):
        self.labels = np.asarray(labels)

    def predict(self, sample_set):
        return self.labels[: len(sample_set)]


def test_f1_closed_forms():
    assert f1(0.5, 0.5) == 0.5
    assert f1(1.0, 0.0) == 0.0
    assert f1(0.0, 0.0) == 0.0
    assert f1(0.9, 0.6) == pytest.approx(2 * 0.9 * 0.6 / 1.5)


def test_confusion_rows_are_gold():
    conf = confusion_matrix([0, 0, 1], [0, 1, 1], 3)
    assert conf.tolist() == [[1, 1, 0], [0, 1, 0], [0, 0, 0]]
    assert tuple(conf.sum(axis=1)) == (2, 1, 0)


def test_perfect_predictions():
    gold = [0, 1, 2, 1, 0]
    report = report_from_predictions(gold, gold, 3)
    assert report.macro_f1 == 1.0
    conf = np.asarray(report.confusion)
    assert np.array_equal(conf, np.diag([2, 2, 1]))


def test_macro_divides_by_full_label_set():
    # only 2 of 4 classes appear and are predicted perfectly
    gold = [0, 1, 0, 1]
    report = report_from_predictions(gold, gold, 4)
    assert report.macro_f1 == pytest.approx(2.0 / 4.0)


def test_majority_macro_law():
    corpus = random_corpus(6, n_conversations=12, min_len=3, max_len=8)
    sset = extract_wlb(corpus, 1)
    train, test = split(sset, 0.8, seed=0)
    m = MajorityBaseline().fit(train)
    report = evaluate(m, test)
    gold = np.array([s.target_emotion for s in test])
    p = float(np.mean(gold == m.label_))
    assert report.macro_f1 == pytest.approx((2 * p / (1 + p)) / test.n_labels)


def test_matches_sklearn_oracle_on_random_case():
    rng = np.random.default_rng(17)
    k = 5
    gold = rng.integers(0, k, size=50)
    pred = rng.integers(0, k, size=50)
    report = report_from_predictions(gold, pred, k)
    sk_per_class = sk_f1_score(gold, pred, labels=range(k), average=None, zero_division=0)
    sk_macro = sk_f1_score(gold, pred, labels=range(k), average="macro", zero_division=0)
    assert np.allclose(report.f1, sk_per_class)
    assert report.macro_f1 == pytest.approx(sk_macro)


def test_macro_is_one_iff_every_class_perfect():
    rng = np.random.default_rng(18)
    for _ in range(30):
        k = int(rng.integers(2, 5))
        gold = rng.integers(0, k, size=30)
        pred = gold.copy()
        if rng.random() < 0.7:
            pred[rng.integers(0, 30)] = (pred[rng.integers(0, 30)] + 1) % k
        report = report_from_predictions(gold, pred, k)
        all_perfect = all(
            f == 1.0 for f in report.f1
        )
        assert (report.macro_f1 == 1.0) == all_perfect


def test_evaluate_is_pure():
    corpus = random_corpus(7, n_conversations=8, min_len=3, max_len=6)
    sset = extract_wlb(corpus, 1)
    predictor = _FixedPredictor(np.zeros(len(sset), dtype=int))
    r1 = evaluate(predictor, sset)
    r2 = evaluate(predictor, sset)
    assert r1 == r2


def test_evaluate_rejects_empty_set():
    corpus = random_corpus(8, n_conversations=4, min_len=2, max_len=4)
    sset = extract_wlb(corpus, 1).with_samples(())
    with pytest.raises(ValueError, match="empty"):
        evaluate(_FixedPredictor([]), sset)


def test_grid_axes_product_count():
    spec = GridSpec(models=("bilstm", "dgcn"), seq_types=("E", "T", "ET"),
                    lookbacks=(2, 3, 4, 5), dependencies=("all",), balances=("sw",))
    assert len(spec.axes()) == 24


def test_grid_spec_roundtrip_and_validation():
    spec = GridSpec(models=("bilstm",), lookbacks=(1, 2))
    clone = GridSpec.from_dict(spec.to_dict())
    assert clone == spec
    with pytest.raises(ConfigError, match="unknown grid model"):
        GridSpec(models=("transformer",))
    with pytest.raises(ConfigError, match="unknown grid spec field"):
        GridSpec.from_dict({"models": ["bilstm"], "lookback": [1]})


def _tiny_spec(**overrides):
    base = dict(models=("bilstm", "majority"), seq_types=("E",), lookbacks=(1,),
                dependencies=("all", "self"), balances=("sw",), epochs=2, hidden=8,
                split_seed=3, train_seed=3)
    base.update(overrides)
    return GridSpec(**base)


def test_run_grid_executes_and_is_deterministic(tmp_path):
    corpus = self_dependent_corpus(1, n_conversations=30, turns=6, n_labels=3)
    spec = _tiny_spec()
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    grid1 = run_grid(corpus, spec, out_dir=out1)
    grid2 = run_grid(corpus, spec, out_dir=out2)
    assert (out1 / "grid.csv").read_bytes() == (out2 / "grid.csv").read_bytes()
    assert all(c.error is None for c in grid1.cells)
    assert len(grid1.cells) == 4
    # history files byte-identical as well
    for name in ("cell_000_history.csv",):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    report = json.loads((out1 / "cell_000_report.json").read_text())
    assert report["axes"]["model"] == "bilstm"
    assert report["report"]["macro_f1"] >= 0.0


def test_run_grid_records_cell_failures():
    corpus = self_dependent_corpus(2, n_conversations=10, turns=4, n_labels=3)
    # dgcn with lookback 1 is an invalid cell; the grid must continue
    spec = GridSpec(models=("dgcn", "majority"), seq_types=("E",), lookbacks=(1,),
                    dependencies=("all",), balances=("none",), epochs=1, hidden=4)
    grid = run_grid(corpus, spec)
    by_model = {c.axes["model"]: c for c in grid.cells}
    assert by_model["dgcn"].error is not None
    assert by_model["majority"].error is None


def test_run_grid_dgcn_dependency_cells(tmp_path):
    corpus = self_dependent_corpus(3, n_conversations=24, turns=6, n_labels=3)
    spec = GridSpec(models=("dgcn",), seq_types=("E",), lookbacks=(3,),
                    dependencies=("self", "other"), balances=("sw",), epochs=2, hidden=4)
    grid = run_grid(corpus, spec)
    assert all(c.error is None for c in grid.cells)


def test_run_grid_parallel_matches_serial(tmp_path):
    corpus = self_dependent_corpus(4, n_conversations=20, turns=5, n_labels=3)
    spec = _tiny_spec(dependencies=("all",))
    serial = tmp_path / "serial"
    parallel = tmp_path / "parallel"
    run_grid(corpus, spec, out_dir=serial, jobs=1)
    run_grid(corpus, spec, out_dir=parallel, jobs=2)
    assert (serial / "grid.csv").read_bytes() == (parallel / "grid.csv").read_bytes()


def test_speaker_profiles_shapes_and_warnings():
    corpus = self_dependent_corpus(5, n_conversations=40, turns=8, n_labels=3)
    spec = GridSpec(models=("bilstm",), seq_types=("E",), lookbacks=(1,),
                    balances=("sw",), epochs=2, hidden=8)
    profiles = speaker_profiles(corpus, ["A", "nobody"], spec)
    assert "warning" in profiles["nobody"]
    variants = profiles["A"]["variants"]
    assert set(variants) == {"1SLB", "1OLB"}
    assert len(variants["1SLB"]["per_emotion_f1"]) == 3


def test_eval_report_serializes():
    report = report_from_predictions([0, 1], [0, 1], 2, config_fingerprint="abc")
    payload = report.to_dict()
    assert payload["macro_f1"] == 1.0
    assert payload["config_fingerprint"] == "abc"
    assert isinstance(EvalReport(**payload), EvalReport)
