"""Command line entry point: ``deskcoref <subcommand> ...``.

Reports go to stdout as JSON, logs go to stderr. The log level is read from
``DESKCOREF_LOG_LEVEL`` (default ``WARNING``).

Exit codes: 0 success, 2 I/O error, 3 malformed input, 4 numeric or
training failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .batching import LEFTOVER, SCHEMES, padding_report
from .decoder import TransitivityReport, decode_clusters, transitivity_report
from .domain import ClusterSet, FormatError, document_to_record, read_jsonl, write_jsonl
from .metrics import CorpusScorer
from .model import ModelParams, encode_documents, init_model, predict, score_document
from .pruner import PruneConfig
from .synthetic import SyntheticConfig, generate_corpus, split_corpus
from .trainer import (DESK_DIMS, DESK_PHASE_EPOCHS, FileTeacher, ModelTeacher, StringMatchTeacher,
                      TrainConfig, TrainingError, annotate_with_teacher, distill_pipeline, optimize,
                      soft_targets_for)
from .trainer.teacher import TEACHER_MAX_TOKENS

EXIT_OK, EXIT_IO, EXIT_FORMAT, EXIT_NUMERIC = 0, 2, 3, 4
LOG_ENV = "DESKCOREF_LOG_LEVEL"
PRESETS = ("desk", "reference")

log = logging.getLogger("deskcoref")


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _positive(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return n


def _non_negative(value: str) -> int:
    n = int(value)
    if n < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return n


def _fraction(value: str) -> float:
    x = float(value)
    if not 0.0 < x <= 1.0:
        raise argparse.ArgumentTypeError(f"lambda must lie in (0, 1], got {value}")
    return x


# -- shared helpers ----------------------------------------------------------

def _load_corpus(path, limit=None):
    docs = read_jsonl(path)
    return docs[:limit] if limit is not None else docs


def _train_config(args) -> TrainConfig:
    kw = {"seed": args.seed, "M": args.max_length}
    if getattr(args, "batch_tokens", None):
        kw["batch_tokens"] = args.batch_tokens
    for flag in ("lr_head", "lr_encoder", "lr_finetune", "tau"):
        if getattr(args, flag, None) is not None:
            kw[flag] = getattr(args, flag)
    return TrainConfig.desk(**kw) if args.preset == "desk" else TrainConfig(**kw)


def _prune_config(args, base: PruneConfig | None = None) -> PruneConfig:
    base = base or PruneConfig()
    return PruneConfig(
        args.lam if args.lam is not None else base.lam,
        args.max_span_width if args.max_span_width is not None else base.max_span_width,
        base.max_antecedents,
    )


def _model(args) -> ModelParams:
    """Load ``--model-in`` (applying pruning overrides) or initialise a new model."""
    if getattr(args, "model_in", None):
        model = ModelParams.load(args.model_in)
        return replace(model, prune=_prune_config(args, model.prune))
    dims = DESK_DIMS if args.preset == "desk" else {"d": 32, "p": 32}
    d = args.dim or dims["d"]
    p = args.proj_dim or dims["p"]
    return init_model(args.seed, V=args.vocab, d=d, p=p, prune=_prune_config(args))


def _teacher(spec: str, M: int):
    if spec == "string-match":
        return StringMatchTeacher()
    if spec.startswith("file:"):
        return FileTeacher(spec[5:])
    if spec.startswith("model:"):
        return ModelTeacher(ModelParams.load(spec[6:]), M)
    raise FormatError(f"unknown teacher {spec!r}; use string-match, file:<path> or model:<path>")


def _phase_epochs(args) -> dict:
    epochs = dict(DESK_PHASE_EPOCHS) if args.preset == "desk" else {}
    for phase in ("mentions", "full", "finetune"):
        value = getattr(args, f"{phase}_epochs", None)
        if value is not None:
            epochs[phase] = value
    return epochs


# -- subcommands -------------------------------------------------------------

def cmd_gen_synthetic(args) -> int:
    cfg = SyntheticConfig(count=args.count, seed=args.seed, min_sentences=args.min_sentences,
                          max_sentences=args.max_sentences, filler_rate=args.filler_rate,
                          fixed_tokens=args.fixed_tokens)
    docs = generate_corpus(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(out / "corpus.jsonl", (document_to_record(d) for d in docs))
    manifest = {"seed": args.seed, "count": args.count, "files": {"corpus": "corpus.jsonl"}}
    if args.split:
        sizes = [int(x) for x in args.split.split(",")]
        if len(sizes) != 3:
            raise FormatError("--split takes three comma-separated sizes: train,dev,test")
        parts = split_corpus(docs, *sizes)
        for name, part in parts.items():
            write_jsonl(out / f"{name}.jsonl", (document_to_record(d) for d in part))
            manifest["files"][name] = f"{name}.jsonl"
        manifest["splits"] = {name: [d.doc_id for d in part] for name, part in parts.items()}
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    _emit({"documents": len(docs), "tokens": sum(len(d) for d in docs), "out_dir": str(out),
           "files": manifest["files"]})
    return EXIT_OK


def cmd_annotate(args) -> int:
    teacher = _teacher(args.teacher, args.max_length)
    docs = _load_corpus(args.corpus, args.limit_docs)
    labeled, report = annotate_with_teacher(teacher, docs, args.max_teacher_tokens)
    write_jsonl(args.out, (document_to_record(d) for d in labeled))
    _emit({"annotated": report.annotated, "skipped_too_long": report.skipped_too_long,
           "failed": report.failed, "failures": report.failures,
           "clusters": sum(len(d.gold_clusters or ()) for d in labeled)})
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _train_config(args)
    epochs = args.epochs
    if epochs is None:
        epochs = _phase_epochs(args).get(args.phase, cfg.epochs)
    cfg = replace(cfg, epochs=epochs)
    model = _model(args)
    docs = _load_corpus(args.corpus, args.limit_docs)
    soft_targets = None
    if args.phase == "soft":
        teacher = _teacher(args.teacher, args.max_length)
        soft_targets = soft_targets_for(teacher, docs, model.prune.lam, model.prune.max_span_width)
        docs = [d for d in docs if d.doc_id in soft_targets]
    elif any(d.gold_clusters is None for d in docs):
        raise FormatError("training corpus has documents without clusters; run annotate first")
    result = optimize(model, docs, args.phase, cfg, soft_targets=soft_targets)
    result.params.save(args.model_out)
    _emit({"phase": args.phase, "epochs": epochs, "documents": len(docs),
           "loss_trace": result.loss_trace, "model_out": args.model_out})
    return EXIT_OK


def cmd_distill(args) -> int:
    cfg = _train_config(args)
    teacher = _teacher(args.teacher, args.max_length)
    unlabeled = _load_corpus(args.unlabeled, args.limit_docs)
    gold = _load_corpus(args.gold) if args.gold else None
    dev = _load_corpus(args.dev) if args.dev else None
    if dev is not None and args.dev_teacher:
        dev, _ = annotate_with_teacher(teacher, dev)
    model, report = distill_pipeline(teacher, unlabeled, _model(args), cfg, gold=gold, dev=dev,
                                     phase_epochs=_phase_epochs(args))
    model.save(args.model_out)
    out = report.to_json()
    out["model_out"] = args.model_out
    _emit(out)
    return EXIT_OK


def cmd_predict(args) -> int:
    model = _model(args)
    docs = _load_corpus(args.corpus, args.limit_docs)
    results = predict(model, docs, args.max_length, args.max_tokens_in_batch, args.scheme, args.workers)
    write_jsonl(args.out, (r.to_json(include_tokens=True) for r in results))
    _emit({"documents": len(results), "clusters": sum(len(r.clusters_char) for r in results),
           "scheme": args.scheme, "out": args.out})
    return EXIT_OK


def _read_predictions(path) -> dict[str, ClusterSet]:
    preds = {}
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                clusters = rec.get("clusters_tokens", rec.get("clusters"))
                if clusters is None:
                    raise KeyError("clusters_tokens")
                preds[str(rec["doc_id"])] = ClusterSet.from_lists(clusters)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON: {exc.msg}", i) from None
            except (AttributeError, KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"bad prediction record: {exc}", i) from None
    return preds


def cmd_evaluate(args) -> int:
    gold = _load_corpus(args.gold, args.limit_docs)
    preds = _read_predictions(args.pred)
    scorer = CorpusScorer()
    for doc in gold:
        if doc.doc_id not in preds:
            raise FormatError(f"no prediction for document {doc.doc_id!r}")
        scorer.add((doc.gold_clusters or ClusterSet()).clusters, preds[doc.doc_id].clusters, doc.doc_id)
    _emit(scorer.report(per_document=args.per_document))
    return EXIT_OK


def cmd_batch_stats(args) -> int:
    docs = _load_corpus(args.corpus, args.limit_docs)
    schemes = SCHEMES if args.scheme == "both" else (args.scheme,)
    _emit({s: padding_report(docs, args.max_length, args.max_tokens_in_batch, s).to_json() for s in schemes})
    return EXIT_OK


def cmd_analyze_transitivity(args) -> int:
    model = _model(args)
    docs = _load_corpus(args.corpus, args.limit_docs)
    vecs = encode_documents(model, docs, args.max_length, args.max_tokens_in_batch)
    total = TransitivityReport()
    for doc in docs:
        if len(doc) == 0:
            continue
        scores = score_document(model, vecs[doc.doc_id])
        clusters = decode_clusters(scores.pruned_spans, scores.F, model.prune.max_antecedents)
        total = total + transitivity_report(clusters, scores.pair)
    out = total.to_json()
    out["documents"] = len(docs)
    _emit(out)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, model_in=False, model_out=False, training=False) -> None:
    p.add_argument("--lambda", dest="lam", type=_fraction, default=None,
                   help="fraction of tokens kept as mentions (default 0.25)")
    p.add_argument("--max-span-width", type=_positive, default=None, help="longest span considered (default 10)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--limit-docs", type=_non_negative, default=None, help="use only the first N documents")
    p.add_argument("--max-length", type=_positive, default=64, help="segment length M (512 for full-scale runs)")
    p.add_argument("--max-tokens-in-batch", type=_positive, default=10000)
    p.add_argument("--preset", choices=PRESETS, default="desk",
                   help="desk: rates and sizes that train in minutes; reference: the published rates and sizes")
    if model_in:
        p.add_argument("--model-in", "--model", dest="model_in", required=not training,
                       default=None, help="model JSON file")
    if model_out:
        p.add_argument("--model-out", required=True)
    if training:
        p.add_argument("--vocab", type=_positive, default=4096, help="hashed vocabulary size V")
        p.add_argument("--dim", type=_positive, default=None, help="encoder width d")
        p.add_argument("--proj-dim", type=_positive, default=None, help="head projection width p")
        p.add_argument("--batch-tokens", type=_positive, default=None, help="training token budget per step")
        p.add_argument("--lr-head", type=float, default=None)
        p.add_argument("--lr-encoder", type=float, default=None)
        p.add_argument("--lr-finetune", type=float, default=None)
        p.add_argument("--tau", type=float, default=None, help="soft-distillation temperature")
        for phase in ("mentions", "full", "finetune"):
            p.add_argument(f"--{phase}-epochs", type=_non_negative, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deskcoref", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="write a template-generated corpus and split manifest")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=_non_negative, default=600)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--min-sentences", type=_positive, default=3)
    p.add_argument("--max-sentences", type=_positive, default=24)
    p.add_argument("--filler-rate", type=float, default=0.25)
    p.add_argument("--fixed-tokens", type=_positive, default=None, help="make every document exactly N tokens")
    p.add_argument("--split", default="500,50,50", help="train,dev,test sizes, or empty for none")
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("annotate", help="label a corpus with a teacher")
    _common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--teacher", default="string-match", help="string-match, file:<path> or model:<path>")
    p.add_argument("--max-teacher-tokens", type=_positive, default=TEACHER_MAX_TOKENS)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("train", help="run one training phase")
    _common(p, model_in=True, model_out=True, training=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--phase", choices=("mentions", "full", "finetune", "soft"), required=True)
    p.add_argument("--epochs", type=_non_negative, default=None)
    p.add_argument("--teacher", default="string-match", help="pair-logit source for --phase soft")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("distill", help="annotate, pretrain mentions, train, then fine-tune on gold")
    _common(p, model_in=True, model_out=True, training=True)
    p.add_argument("--unlabeled", required=True)
    p.add_argument("--gold", default=None, help="gold corpus for the fine-tuning phase")
    p.add_argument("--dev", default=None, help="dev corpus scored after each phase")
    p.add_argument("--dev-teacher", action="store_true", help="label the dev corpus with the teacher")
    p.add_argument("--teacher", default="string-match")
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("predict", help="write coreference clusters for a corpus")
    _common(p, model_in=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scheme", choices=SCHEMES, default=LEFTOVER)
    p.add_argument("--workers", type=_positive, default=1)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="MUC, B3, CEAF-phi4 and their average")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--limit-docs", type=_non_negative, default=None)
    p.add_argument("--per-document", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("batch-stats", help="padding report per batching scheme")
    _common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--scheme", choices=SCHEMES + ("both",), default="both")
    p.set_defaults(func=cmd_batch_stats)

    p = sub.add_parser("analyze-transitivity", help="share of negative within-cluster pair scores")
    _common(p, model_in=True)
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=cmd_analyze_transitivity)
    return parser


def main(argv=None) -> int:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"deskcoref: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (TrainingError, FloatingPointError, OverflowError) as exc:
        print(f"deskcoref: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:  # FormatError and invalid configurations
        kind = "format error" if isinstance(exc, FormatError) else "invalid input"
        print(f"deskcoref: {kind}: {exc}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
