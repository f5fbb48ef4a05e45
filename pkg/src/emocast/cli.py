"""Command-line surface: import, stats, transitions, extract, train, evaluate, grid, profile.

Exit codes: 0 success, 1 validation/usage error, 2 runtime failure. Every
command that writes outputs also writes a ``config.json`` echo of its
arguments, sufficient to reproduce the run.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import converters
from .analytics import same_speaker_transition_matrix, speaker_distribution, transition_matrix
from .balance import oversample
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import Corpus, EmotionLabelSet, LABEL_PRESETS, class_distribution, parse_corpus, validate
from .embed import TokenPipeline, load_embeddings, preprocess
from .errors import ConfigError, CorpusFormatError, EmocastError, TrainingDiverged
from .evalharness import GridSpec, evaluate, run_grid, speaker_profiles
from .graphmodel import DGCNPredictor, usable_for_pooling
from .reconstruct import extract, extract_wlb, save_samples, split, split_by_conversation
from .seqmodel import BiLSTMPredictor
from .training import history_to_csv
from .validation import check_model_flags


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the contract wants 1 for validation errors
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_common_data_flags(p):
    p.add_argument("--dataset", required=True, help="canonical jsonl conversation file")
    p.add_argument("--labels", required=True,
                   help=f"label-set preset ({', '.join(sorted(LABEL_PRESETS))}) or JSON list file")
    p.add_argument("--kind", choices=("group", "dyadic"), default="group")


def _add_train_flags(p):
    p.add_argument("--model", choices=("bilstm", "dgcn"), default="bilstm")
    p.add_argument("--seq-type", choices=("E", "T", "ET"), default="E")
    p.add_argument("--lookback", type=int, default=1, help="window length w")
    p.add_argument("--dependency", choices=("all", "self", "other"), default="all")
    p.add_argument("--balance", choices=("none", "cw", "sw", "os"), default="sw")
    p.add_argument("--mu", type=float, default=0.15, help="smooth-weight damping")
    p.add_argument("--epochs", type=int, default=30, help="training epochs, run exactly")
    p.add_argument("--lr", type=float, default=0.001, help="Adam learning rate")
    p.add_argument("--batch", type=int, default=32, help="minibatch size")
    p.add_argument("--hidden", type=int, default=None,
                   help="BiLSTM units per direction (default: 64 for E, 300 for T/ET)")
    p.add_argument("--attention", choices=("auto", "on", "off"), default="auto")
    p.add_argument("--pw", type=int, default=3, help="past window for graph edges")
    p.add_argument("--fw", type=int, default=0, help="future window for graph edges")
    p.add_argument("--same-speaker-edges", action="store_true",
                   help="keep only same-speaker edges in the graph model")
    p.add_argument("--split", type=float, default=0.8, help="train fraction")
    p.add_argument("--split-mode", choices=("sample", "conversation"), default="sample",
                   help="split per sample, or keep whole conversations together")
    p.add_argument("--seed", type=int, default=0, help="seeds all randomness in the run")
    p.add_argument("--embeddings", default=None, help="text-format word vector file")
    p.add_argument("--dim", type=int, default=300, help="embedding dimension")
    p.add_argument("--max-tokens", type=int, default=20)
    p.add_argument("--oov", choices=("zero", "mean"), default="zero")
    p.add_argument("--stemmer", choices=("none", "suffix"), default="none")


def build_parser() -> _Parser:
    parser = _Parser(prog="emocast",
                     description="Next-emotion prediction over conversation corpora.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("import", help="convert a native dataset to canonical jsonl",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--format", required=True, choices=("dailydialog", "meld", "friends", "jsonl"))
    p.add_argument("--input", help="input file (or DailyDialog directory)")
    p.add_argument("--text", help="DailyDialog dialogues_text.txt")
    p.add_argument("--emotions", help="DailyDialog dialogues_emotion.txt")
    p.add_argument("--output", required=True)

    p = sub.add_parser("stats", help="print the corpus class distribution",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common_data_flags(p)
    p.add_argument("--speaker", default=None, help="restrict to one speaker's utterances")
    p.add_argument("--validate", action="store_true", help="also print structural violations")
    p.add_argument("--output-dir", default=None)

    p = sub.add_parser("transitions", help="emotion transition matrix as CSV/JSON",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common_data_flags(p)
    p.add_argument("--gap", type=int, default=1, help="turn distance between paired emotions")
    p.add_argument("--same-speaker", action="store_true",
                   help="pair each utterance with the same speaker's next one instead")
    p.add_argument("--output-csv", default=None)
    p.add_argument("--output-json", default=None)
    p.add_argument("--output-dir", default=None)

    p = sub.add_parser("extract", help="materialize lookback samples as jsonl",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common_data_flags(p)
    p.add_argument("--lookback", type=int, required=True)
    p.add_argument("--dependency", choices=("all", "self", "other"), default="all")
    p.add_argument("--output", required=True)

    p = sub.add_parser("train", help="train one model and write checkpoint + report",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--output-dir", required=True)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a dataset",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common_data_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--dim", type=int, default=300)
    p.add_argument("--oov", choices=("zero", "mean"), default="zero")
    p.add_argument("--full", action="store_true",
                   help="evaluate on all extracted samples instead of the held-out split")
    p.add_argument("--output-dir", default=None)

    p = sub.add_parser("grid", help="run an experiment grid from a JSON spec",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common_data_flags(p)
    p.add_argument("--spec", required=True, help="grid spec JSON file")
    p.add_argument("--seed", type=int, default=None, help="override split and train seeds")
    p.add_argument("--jobs", type=int, default=1, help="parallel cells")
    p.add_argument("--embeddings", default=None)
    p.add_argument("--dim", type=int, default=300)
    p.add_argument("--oov", choices=("zero", "mean"), default="zero")
    p.add_argument("--output-dir", required=True)

    p = sub.add_parser("profile", help="per-speaker wSLB/wOLB emotion profiles",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common_data_flags(p)
    p.add_argument("--speakers", required=True, help="comma-separated speaker names")
    p.add_argument("--lookbacks", default="1,2", help="comma-separated window lengths")
    p.add_argument("--balance", choices=("none", "cw", "sw", "os"), default="sw")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--output-dir", required=True)

    return parser


def _label_set(arg: str) -> EmotionLabelSet:
    if arg in LABEL_PRESETS:
        return EmotionLabelSet.preset(arg)
    path = Path(arg)
    if not path.exists():
        raise ConfigError(f"--labels {arg!r} is neither a preset nor an existing file")
    return EmotionLabelSet.from_json(path.read_text(encoding="utf-8"))


def _load_corpus(args) -> Corpus:
    label_set = _label_set(args.labels)
    with open(args.dataset, encoding="utf-8") as fh:
        return parse_corpus(fh, label_set, kind=args.kind)


def _config_payload(args) -> str:
    payload = {k: v for k, v in vars(args).items() if k != "command"}
    payload["command"] = args.command
    return json.dumps(payload, indent=2, sort_keys=True, default=str)


def _echo_config(args, out_dir: str | Path | None) -> None:
    if out_dir is None:
        return
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(_config_payload(args), encoding="utf-8")


def _echo_config_sidecar(args, output_path: str | Path) -> None:
    # file-writing commands get a sidecar echo next to their output
    side = Path(str(output_path) + ".config.json")
    side.write_text(_config_payload(args), encoding="utf-8")


def _load_table(args, corpus: Corpus):
    if args.embeddings is None:
        return None
    # collect both stemmed and unstemmed forms so a checkpoint trained with
    # either pipeline finds its tokens
    pipelines = [TokenPipeline(stemmer="none"), TokenPipeline(stemmer="suffix")]
    wanted: set[str] = set()
    for conv in corpus:
        for utt in conv.utterances:
            for pipeline in pipelines:
                wanted.update(preprocess(utt.tokens, pipeline))
    with open(args.embeddings, encoding="utf-8") as fh:
        return load_embeddings(fh, dim=args.dim, oov_policy=args.oov, vocab_filter=wanted)


# ---------------------------------------------------------------------------
# handlers

def _cmd_import(args) -> int:
    if args.format == "dailydialog":
        if args.text and args.emotions:
            text, emotions = args.text, args.emotions
        elif args.input:
            base = Path(args.input)
            text = base / "dialogues_text.txt"
            emotions = base / "dialogues_emotion.txt"
        else:
            raise ConfigError("--format dailydialog needs --input DIR or --text/--emotions files")
        records = converters.convert_dailydialog(text, emotions)
    else:
        if not args.input:
            raise ConfigError(f"--format {args.format} needs --input")
        records = {
            "meld": converters.convert_meld,
            "friends": converters.convert_friends,
            "jsonl": converters.convert_jsonl,
        }[args.format](args.input)
    count = converters.write_records(records, args.output)
    _echo_config_sidecar(args, args.output)
    print(f"wrote {count} conversations to {args.output}")
    return 0


def _cmd_stats(args) -> int:
    corpus = _load_corpus(args)
    if args.speaker is not None:
        dist = speaker_distribution(corpus, args.speaker)
        print(f"speaker: {args.speaker}")
    else:
        dist = class_distribution(corpus)
    total = dist.total
    print(f"conversations: {len(corpus)}")
    print(f"utterances:    {corpus.n_utterances}")
    print(f"{'label':<14}{'count':>10}{'share':>10}")
    for name, count in zip(corpus.label_set.names, dist.counts):
        share = count / total if total else 0.0
        print(f"{name:<14}{count:>10}{share:>10.4f}")
    if args.validate:
        report = validate(corpus)
        print(f"violations: {len(report.violations)}")
        for v in report.violations:
            print(f"  [{v.conversation_id}] {v.message}")
    _echo_config(args, args.output_dir)
    return 0


def _cmd_transitions(args) -> int:
    if args.gap < 1:
        raise ConfigError(f"--gap must be >= 1, got {args.gap}")
    corpus = _load_corpus(args)
    if args.same_speaker:
        matrix = same_speaker_transition_matrix(corpus)
    else:
        matrix = transition_matrix(corpus, gap=args.gap)
    csv_text = matrix.to_csv()
    if args.output_csv:
        Path(args.output_csv).write_text(csv_text, encoding="utf-8")
    else:
        print(csv_text, end="")
    if args.output_json:
        Path(args.output_json).write_text(json.dumps(matrix.to_heatmap_json(), indent=2),
                                          encoding="utf-8")
    _echo_config(args, args.output_dir)
    return 0


def _cmd_extract(args) -> int:
    if args.lookback < 1:
        raise ConfigError(f"--lookback must be >= 1, got {args.lookback}")
    corpus = _load_corpus(args)
    sample_set = extract(corpus, args.lookback, args.dependency)
    with open(args.output, "w", encoding="utf-8") as fh:
        save_samples(sample_set, fh)
    _echo_config_sidecar(args, args.output)
    print(f"wrote {len(sample_set)} samples (w={args.lookback}, "
          f"dependency={args.dependency}) to {args.output}")
    return 0


def _build_cli_predictor(args, table):
    attention = {"auto": None, "on": True, "off": False}[args.attention]
    common = dict(
        seq_type=args.seq_type,
        lookback=args.lookback,
        hidden=args.hidden,
        class_weights=args.balance,
        mu=args.mu,
        epochs=args.epochs,
        lr=args.lr,
        batch_size=args.batch,
        seed=args.seed,
        embeddings=table,
        max_tokens=args.max_tokens,
        pipeline=TokenPipeline(stemmer=args.stemmer, max_tokens=args.max_tokens),
    )
    if args.model == "bilstm":
        return BiLSTMPredictor(attention=attention, **common)
    return DGCNPredictor(
        pw=args.pw,
        fw=args.fw,
        same_speaker_edges=args.same_speaker_edges,
        dependency=args.dependency,
        **common,
    )


def _validate_train_args(args) -> None:
    if args.lookback < 1:
        raise ConfigError(f"--lookback must be >= 1, got {args.lookback}")
    if args.epochs < 1:
        raise ConfigError(f"--epochs must be >= 1, got {args.epochs}")
    if not 0.0 < args.split < 1.0:
        raise ConfigError(f"--split must be in (0, 1), got {args.split}")
    if args.mu <= 0:
        raise ConfigError(f"--mu must be positive, got {args.mu}")
    check_model_flags(args.model, args.lookback, args.seq_type, args.embeddings is not None)


def _cmd_train(args) -> int:
    _validate_train_args(args)
    corpus = _load_corpus(args)
    table = _load_table(args, corpus)
    if args.model == "dgcn":
        sample_set = extract_wlb(corpus, args.lookback)
        if args.dependency != "all":
            kept = tuple(s for s in sample_set if usable_for_pooling(s, args.dependency))
            sample_set = sample_set.with_samples(kept)
    else:
        sample_set = extract(corpus, args.lookback, args.dependency)
    splitter = split if args.split_mode == "sample" else split_by_conversation
    train_set, test_set = splitter(sample_set, args.split, seed=args.seed)
    if args.balance == "os":
        train_set = oversample(train_set, seed=args.seed)
    predictor = _build_cli_predictor(args, table)
    predictor.fit(train_set, test_set=test_set)
    report = evaluate(predictor, test_set)

    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _echo_config(args, out)
    (out / "history.csv").write_text(history_to_csv(predictor.history_), encoding="utf-8")
    report_payload = report.to_dict()
    report_payload["balance"] = {
        "strategy": args.balance,
        "class_weights": list(predictor.class_weights_.weights),
    }
    (out / "report.json").write_text(json.dumps(report_payload, indent=2, sort_keys=True),
                                     encoding="utf-8")
    save_checkpoint(predictor, out / "checkpoint.json", corpus.label_set.names,
                    extra={"dependency": args.dependency, "split": args.split,
                           "seed": args.seed, "dataset": str(args.dataset)})
    print(f"test macro-F1 (max over {args.epochs} epochs): {report.macro_f1:.4f} "
          f"at epoch {report.epoch_of_max}; final-epoch macro-F1: {report.final_macro_f1:.4f}")
    print(f"outputs in {out}")
    return 0


def _cmd_evaluate(args) -> int:
    corpus = _load_corpus(args)
    table = _load_table(args, corpus)
    predictor = load_checkpoint(args.checkpoint, embeddings=table)
    extra = getattr(predictor, "checkpoint_extra_", {})
    if isinstance(predictor, DGCNPredictor):
        sample_set = extract_wlb(corpus, predictor.w_)
        if predictor.dependency != "all":
            kept = tuple(s for s in sample_set if usable_for_pooling(s, predictor.dependency))
            sample_set = sample_set.with_samples(kept)
    else:
        sample_set = extract(corpus, predictor.w_, extra.get("dependency", "all"))
    if args.full:
        eval_set = sample_set
    else:
        _, eval_set = split(sample_set, extra.get("split", 0.8), seed=extra.get("seed", 0))
    report = evaluate(predictor, eval_set)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        _echo_config(args, out)
        (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True),
                                         encoding="utf-8")
    return 0


def _cmd_grid(args) -> int:
    corpus = _load_corpus(args)
    spec_data = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    table = _load_table(args, corpus)
    spec = GridSpec.from_dict(spec_data, embeddings=table)
    if args.seed is not None:
        spec = GridSpec.from_dict({**spec.to_dict(), "split_seed": args.seed,
                                   "train_seed": args.seed}, embeddings=table)
    needs_text = any(st in ("T", "ET") for st in spec.seq_types)
    if needs_text and table is None:
        raise ConfigError("grid spec includes T/ET cells; pass --embeddings")
    grid = run_grid(corpus, spec, out_dir=args.output_dir, jobs=args.jobs)
    _echo_config(args, args.output_dir)
    failures = [c for c in grid.cells if c.error]
    print(f"ran {len(grid.cells)} cells ({len(failures)} failed); grid.csv in {args.output_dir}")
    return 0


def _cmd_profile(args) -> int:
    corpus = _load_corpus(args)
    speakers = [s.strip() for s in args.speakers.split(",") if s.strip()]
    lookbacks = tuple(int(x) for x in args.lookbacks.split(","))
    spec = GridSpec(
        models=("bilstm",),
        seq_types=("E",),
        lookbacks=lookbacks,
        balances=(args.balance,),
        epochs=args.epochs,
        hidden=args.hidden,
        split_fraction=args.split,
        split_seed=args.seed,
        train_seed=args.seed,
    )
    profiles = speaker_profiles(corpus, speakers, spec)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _echo_config(args, out)
    payload = {"labels": list(corpus.label_set.names), "profiles": profiles}
    (out / "profiles.json").write_text(json.dumps(payload, indent=2, sort_keys=True),
                                       encoding="utf-8")
    print(f"wrote profiles for {len(speakers)} speaker(s) to {out / 'profiles.json'}")
    return 0


_HANDLERS = {
    "import": _cmd_import,
    "stats": _cmd_stats,
    "transitions": _cmd_transitions,
    "extract": _cmd_extract,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "grid": _cmd_grid,
    "profile": _cmd_profile,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except (ConfigError, CorpusFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TrainingDiverged as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    except (EmocastError, ValueError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
