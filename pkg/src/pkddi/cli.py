"""Command-line interface: ingest, synth, run, compare, top-features, report."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import __version__


def _fail(message: str, code: int = 2):
    log = {"error": message, "time": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
    print(json.dumps(log), file=sys.stderr)
    raise SystemExit(code)


def _load_corpus_for(cfg):
    from . import corpus as cmod

    if cfg.task is cmod.Task.SENTENCE:
        with open(cfg.sentences, encoding="utf-8") as fh:
            return cmod.build_sentence_corpus(cmod.parse_sentences(fh)), 0
    with open(cfg.labels, encoding="utf-8") as fh:
        labels = cmod.parse_labels(fh)
    if cfg.medline is not None:
        with open(cfg.medline, encoding="utf-8") as fh:
            records = cmod.parse_medline(fh)
    else:
        with open(cfg.abstracts_tsv, encoding="utf-8") as fh:
            records = cmod.parse_abstracts_tsv(fh)
    return cmod.build_abstract_corpus(records, labels)


def _load_resources(cfg):
    from . import corpus as cmod

    resources = {}
    for name, path in cfg.dictionaries.items():
        with open(path, encoding="utf-8") as fh:
            resources[name] = cmod.load_dictionary(fh, name)
    if cfg.ner_counts is not None:
        with open(cfg.ner_counts, encoding="utf-8") as fh:
            for name, table in cmod.load_ner_counts(fh).items():
                if name in resources:
                    raise cmod.CorpusError(
                        f"resource {name!r} defined as both dictionary and NER table"
                    )
                resources[name] = table
    return resources


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_ingest(args) -> int:
    from . import corpus as cmod
    from .featurize import FeatureSpace, NgramOrder, export_vocabulary_tsv

    dropped = 0
    if args.sentences:
        with open(args.sentences, encoding="utf-8") as fh:
            pairs = cmod.parse_sentences(fh)
        corpus = cmod.build_sentence_corpus(pairs)
        n_abstracts = len({d.record.pmid for d in corpus.documents})
        rel, irr = corpus.class_counts()
        print(f"{len(corpus)} sentences, {n_abstracts} abstracts")
        print(f"{rel} relevant, {irr} irrelevant")
    else:
        if not args.labels:
            _fail("ingest: --labels is required with --medline/--abstracts-tsv")
        with open(args.labels, encoding="utf-8") as fh:
            labels = cmod.parse_labels(fh)
        if args.medline:
            with open(args.medline, encoding="utf-8") as fh:
                records = cmod.parse_medline(fh, strict=args.strict)
        else:
            with open(args.abstracts_tsv, encoding="utf-8") as fh:
                records = cmod.parse_abstracts_tsv(fh)
        corpus, dropped = cmod.build_abstract_corpus(records, labels)
        rel, irr = corpus.class_counts()
        print(f"{len(corpus)} documents, {rel} relevant, {irr} irrelevant")
        if dropped:
            print(f"warning: {dropped} unlabeled records dropped")

    order = NgramOrder.UNIGRAM
    fs = FeatureSpace(corpus, order)
    rows = list(range(len(corpus)))
    vocab, _ = fs.vocabulary(rows, min_doc_freq=2)
    preview = ", ".join(vocab.features[:8])
    print(f"unigram vocabulary: {len(vocab)} features (doc_freq >= 2)")
    print(f"preview: {preview}")

    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        if args.sentences:
            with open(outdir / "sentences.tsv", "w", encoding="utf-8") as fh:
                cmod.write_sentences(
                    [(d.record, d.label) for d in corpus.documents], fh
                )
        else:
            with open(outdir / "corpus.medline", "w", encoding="utf-8") as fh:
                cmod.write_medline([d.record for d in corpus.documents], fh)
            with open(outdir / "labels.tsv", "w", encoding="utf-8") as fh:
                cmod.write_labels({d.doc_id: d.label for d in corpus.documents}, fh)
        with open(outdir / "vocabulary.tsv", "w", encoding="utf-8") as fh:
            export_vocabulary_tsv(vocab, fh)
        print(f"canonical corpus cache written to {outdir}")
    return 0


def cmd_synth(args) -> int:
    import yaml

    from .synth import SyntheticSpec, write_corpus

    kwargs = {}
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            kwargs.update(yaml.safe_load(fh) or {})
    for name in (
        "documents", "relevant_signal", "irrelevant_signal", "noise",
        "class_prior", "p_signal", "p_cross", "p_noise", "seed",
    ):
        value = getattr(args, name)
        if value is not None:
            kwargs[name] = value
    try:
        spec = SyntheticSpec(**kwargs)
    except (TypeError, ValueError) as exc:
        _fail(f"synth: {exc}")
    medline, labels = write_corpus(spec, args.out)
    print(f"wrote {medline} and {labels} ({spec.documents} documents)")
    return 0


def cmd_run(args) -> int:
    from .config import experiment_fingerprint, load_experiment_config
    from .classifiers import save_model
    from .corpus import Task
    from .evaluation import (
        build_run_context,
        make_fold_plan,
        run_grid,
        train_deployment_models,
        write_report,
    )
    from .plots import render_report_figures

    try:
        cfg = load_experiment_config(args.config)
    except (OSError, ValueError) as exc:
        _fail(f"run: invalid config: {exc}")
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_dir = Path(args.out)
    if args.threads is not None:
        cfg.threads = args.threads
    if args.stratify is not None:
        cfg.stratify = args.stratify == "on"
    if args.strict_paper_vocab:
        cfg.strict_paper_vocab = True
    try:
        cfg.validate_paths()
    except FileNotFoundError as exc:
        _fail(f"run: {exc}")

    try:
        corpus, dropped = _load_corpus_for(cfg)
        resources = _load_resources(cfg)
    except Exception as exc:  # noqa: BLE001 - surfaced as structured error
        _fail(f"run: corpus loading failed: {exc}")
    if dropped:
        print(f"warning: {dropped} unlabeled records dropped", file=sys.stderr)

    workers = cfg.threads or os.cpu_count() or 1
    plan = make_fold_plan(
        corpus.doc_ids, corpus.labels, cfg.seed, stratified=cfg.stratify
    )
    started = time.perf_counter()
    report = run_grid(
        corpus,
        cfg.configurations,
        plan,
        resources=resources,
        min_doc_freq=cfg.min_doc_freq,
        global_vocab_pruning=cfg.strict_paper_vocab,
        workers=workers,
        audit=args.audit,
    )
    elapsed = time.perf_counter() - started
    paths = write_report(report, cfg.output_dir)
    bundle_path = paths["bundle"]
    bundle = json.loads(bundle_path.read_text())
    bundle["meta"]["experiment_fingerprint"] = experiment_fingerprint(cfg)
    bundle["meta"]["elapsed_seconds"] = round(elapsed, 3)
    bundle_path.write_text(json.dumps(bundle, sort_keys=True, indent=1) + "\n")

    if args.save_models:
        ctx = build_run_context(
            corpus, cfg.configurations, plan,
            resources=resources, min_doc_freq=cfg.min_doc_freq,
        )
        models_dir = cfg.output_dir / "models"
        models_dir.mkdir(parents=True, exist_ok=True)
        for name, (model, vocab) in train_deployment_models(ctx, report).items():
            safe = name.replace("/", "_")
            save_model(models_dir / f"{safe}.npz", model, vocab)
    render_report_figures(bundle, cfg.output_dir)

    print(f"run complete in {elapsed:.1f}s; outputs in {cfg.output_dir}")
    for name in sorted(report.rank_products, key=lambda n: report.rank_products[n]):
        m = report.means[name]
        print(
            f"  {name}: F1={m['f1']:.3f} MCC={m['mcc']:.3f} "
            f"iAUC={m['iauc']:.3f} RP3={report.rank_products[name]}"
        )
    if report.failures:
        for name, msgs in report.failures.items():
            print(f"  FAILED {name}: {msgs[0]}", file=sys.stderr)
        return 1
    if args.audit and report.audit:
        print(
            f"audit: {report.audit['fit_calls']} fit calls, "
            f"{report.audit['violations']} leakage violations"
        )
        if report.audit["violations"]:
            return 1
    return 0


def cmd_compare(args) -> int:
    from .evaluation import compare_reports, read_report_bundle

    try:
        a = read_report_bundle(args.report_a)
        b = read_report_bundle(args.report_b)
        result = compare_reports(a, b, metric=args.metric, tails=args.tails)
    except (OSError, ValueError) as exc:
        _fail(f"compare: {exc}")
    out = Path(args.out) if args.out else None
    lines = ["config_a\tconfig_b\tp"]
    for pair in sorted(result["p"]):
        x, y = pair.split("|")
        lines.append(f"{x}\t{y}\t{result['p'][pair]:.6g}")
    text = "\n".join(lines) + "\n"
    if out:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        print(f"wrote {out}")
    else:
        print(text, end="")
    return 0


def cmd_top_features(args) -> int:
    from .analysis import top_features, write_top_features_tsv
    from .classifiers import load_model

    path = Path(args.model)
    if not path.exists():
        _fail(f"top-features: model file not found: {path}")
    model, vocab = load_model(path)
    if vocab is None:
        _fail(f"top-features: {path} carries no vocabulary")
    ranking = top_features(model, vocab, args.k)
    if args.out:
        outp = Path(args.out)
        outp.parent.mkdir(parents=True, exist_ok=True)
        with open(outp, "w", encoding="utf-8") as fh:
            write_top_features_tsv(ranking, fh)
        print(f"wrote {outp}")
    else:
        write_top_features_tsv(ranking, sys.stdout)
    return 0


def cmd_report(args) -> int:
    from .evaluation import read_report_bundle
    from .plots import render_report_figures

    try:
        bundle = read_report_bundle(args.run_dir)
    except OSError as exc:
        _fail(f"report: {exc}")
    outdir = Path(args.out) if args.out else Path(args.run_dir)
    written = render_report_figures(bundle, outdir)
    order = sorted(
        bundle["rank_products"], key=lambda n: (bundle["rank_products"][n], n)
    )
    print("config\tF1\tMCC\tiAUC\tRP3")
    for name in order:
        m = bundle["means"][name]
        print(
            f"{name}\t{m['f1']:.3f}\t{m['mcc']:.3f}\t{m['iauc']:.3f}"
            f"\t{bundle['rank_products'][name]}"
        )
    for p in written:
        print(f"figure: {p}")
    return 0


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pkddi",
        description="Literature mining pipeline for pharmacokinetic "
        "drug-drug-interaction evidence.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a corpus and write the canonical cache")
    p.add_argument("--medline", help="MEDLINE tagged abstract file")
    p.add_argument("--abstracts-tsv", help="abstract corpus in TSV form")
    p.add_argument("--labels", help="labels TSV (id, relevant/irrelevant)")
    p.add_argument("--sentences", help="sentence corpus TSV (pmid, index, label, text)")
    p.add_argument("--out", help="directory for the canonical corpus cache")
    p.add_argument("--strict", action="store_true",
                   help="fail on unknown MEDLINE tags instead of ignoring them")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic MEDLINE corpus")
    p.add_argument("--spec", help="YAML file with generator settings")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--documents", type=int)
    p.add_argument("--relevant-signal", dest="relevant_signal", type=int)
    p.add_argument("--irrelevant-signal", dest="irrelevant_signal", type=int)
    p.add_argument("--noise", type=int)
    p.add_argument("--class-prior", dest="class_prior", type=float)
    p.add_argument("--p-signal", dest="p_signal", type=float)
    p.add_argument("--p-cross", dest="p_cross", type=float)
    p.add_argument("--p-noise", dest="p_noise", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="execute an experiment configuration")
    p.add_argument("--config", required=True, help="experiment YAML")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--threads", type=int, help="worker processes")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--stratify", choices=("on", "off"),
                   help="override stratified fold construction")
    p.add_argument("--strict-paper-vocab", action="store_true",
                   help="prune vocabulary on corpus-global document frequency "
                        "(reproduction mode; leaks doc_freq across splits)")
    p.add_argument("--audit", action="store_true",
                   help="record every fit call and check train/test isolation")
    p.add_argument("--save-models", dest="save_models", action="store_true",
                   default=True)
    p.add_argument("--no-save-models", dest="save_models", action="store_false")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="paired permutation tests between two runs")
    p.add_argument("report_a", help="run directory or report.json")
    p.add_argument("report_b", help="run directory or report.json")
    p.add_argument("--metric", default="mcc", choices=("f1", "mcc", "iauc"))
    p.add_argument("--tails", default="two", choices=("one", "two"))
    p.add_argument("--out", help="output TSV path (default: stdout)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("top-features", help="rank features of a saved model")
    p.add_argument("--model", required=True, help="model .npz from a run")
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--out", help="output TSV path (default: stdout)")
    p.set_defaults(func=cmd_top_features)

    p = sub.add_parser("report", help="render figures and summary for a run")
    p.add_argument("run_dir", help="run output directory or report.json")
    p.add_argument("--out", help="directory for figures (default: run dir)")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
