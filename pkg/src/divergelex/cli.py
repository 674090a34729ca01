"""Command-line pipeline: preprocess -> train -> diverge, plus synth-eval.

Exit codes: 0 success, 1 usage error, 2 data error, 3 acceptance-threshold
failure. The DIVERGELEX_LOG environment variable (error/warn/info/debug)
controls log verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path

from . import corpus as corpus_mod
from . import report as report_mod
from . import synth as synth_mod
from .divergence import rank_divergences
from .embedding import TrainingConfig, load_space, save_space, train
from .errors import DivergelexError
from .pipeline import run_pipeline

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_THRESHOLD = 3

log = logging.getLogger("divergelex")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; this CLI reserves 2 for
    # data errors, so usage problems are re-raised and mapped to 1.
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    """Fully resolved configuration of one command, embedded in reports."""

    command: str
    dimension: int | None = None
    window: int | None = None
    negatives: int | None = None
    epochs: int | None = None
    initial_learning_rate: float | None = None
    min_count: int | None = None
    subsample_threshold: float | None = None
    unigram_power: float | None = None
    seed: int | None = None
    threads: int | None = None
    n: int | None = None
    top_k: int | None = None
    min_count_each: int | None = None
    group_a: str | None = None
    group_b: str | None = None
    inputs: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["inputs"] = list(self.inputs)
        return d

    def digest(self) -> str:
        return report_mod.config_digest(self.to_dict())


def _add_training_flags(p: argparse.ArgumentParser, dim_default: int = 100) -> None:
    p.add_argument("--dim", type=int, default=dim_default, help="vector dimension")
    p.add_argument("--window", type=int, default=5, help="max context offset")
    p.add_argument("--negatives", type=int, default=5, help="negatives per pair")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.025, help="initial learning rate")
    p.add_argument("--min-count", type=int, default=5, help="vocabulary threshold")
    p.add_argument(
        "--subsample", type=float, default=1e-4,
        help="frequent-word subsampling threshold (0 disables)",
    )
    p.add_argument("--unigram-power", type=float, default=0.75)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument(
        "--threads", type=int, default=1,
        help="trainer workers (>1 gives up bit-reproducibility)",
    )


def _training_config(args) -> TrainingConfig:
    return TrainingConfig(
        dimension=args.dim,
        window=args.window,
        negatives=args.negatives,
        epochs=args.epochs,
        initial_learning_rate=args.lr,
        min_count=args.min_count,
        subsample_threshold=args.subsample,
        unigram_power=args.unigram_power,
        seed=args.seed,
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="divergelex", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="clean labeled text into token files")
    p.add_argument(
        "--input", action="append", required=True,
        help="input file; repeat for two plain-text files (one per group)",
    )
    p.add_argument("--format", choices=["jsonl", "text"], default="jsonl")
    p.add_argument("--group-a", help="first group tag (file 1 in text mode)")
    p.add_argument("--group-b", help="second group tag (file 2 in text mode)")
    p.add_argument("--min-count", type=int, default=5, help="rare-word threshold")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train an embedding space from a token file")
    p.add_argument("--input", required=True, help="token file, one document per line")
    p.add_argument("--out", required=True, help="vector file to write")
    p.add_argument("--tag", help="space tag (default: input file stem)")
    _add_training_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("diverge", help="rank divergent words from three spaces")
    p.add_argument("space_1", help="group 1 vector file")
    p.add_argument("space_2", help="group 2 vector file")
    p.add_argument("global_space", help="combined-corpus vector file")
    p.add_argument("-n", type=int, default=20, help="interpreting-set size")
    p.add_argument("--top-k", type=int, default=100)
    p.add_argument("--min-count-each", type=int, default=5)
    p.add_argument("--out", required=True, help="report path prefix")
    p.add_argument("--no-figures", action="store_true", help="skip chart rendering")
    p.set_defaults(func=cmd_diverge)

    p = sub.add_parser(
        "synth-eval", help="planted-divergence recovery experiment"
    )
    p.add_argument("--vocab-size", type=int, default=2000)
    p.add_argument("--num-topics", type=int, default=10)
    p.add_argument("--planted", type=int, default=20)
    p.add_argument("--controls", type=int, default=20)
    p.add_argument("--docs-per-group", type=int, default=20000)
    p.add_argument("--doc-length", type=int, default=15)
    p.add_argument("--group-a", default="g1")
    p.add_argument("--group-b", default="g2")
    _add_training_flags(p, dim_default=50)
    p.add_argument("-n", type=int, default=20, help="interpreting-set size")
    p.add_argument("--min-count-each", type=int, default=5)
    p.add_argument("--min-auc", type=float, default=0.9,
                   help="exit 3 if the AUC falls below this")
    p.add_argument("--out", help="optional report path prefix")
    p.set_defaults(func=cmd_synth_eval)

    return parser


def cmd_preprocess(args) -> int:
    if args.format == "text":
        if len(args.input) != 2 or not (args.group_a and args.group_b):
            raise _UsageError(
                "text format needs exactly two --input files and both "
                "--group-a and --group-b"
            )
    elif len(args.input) != 1:
        raise _UsageError("jsonl format takes exactly one --input file")

    stats: Counter = Counter()
    cleaned = []
    if args.format == "jsonl":
        for lineno, doc, err in corpus_mod.iter_jsonl(args.input[0]):
            if err is not None:
                stats["malformed_records"] += 1
                log.warning("%s:%d: skipped record: %s", args.input[0], lineno, err)
                continue
            stats["documents_read"] += 1
            out = corpus_mod.clean_document(doc, stats)
            if out is not None:
                cleaned.append(out)
    else:
        for path, tag in zip(args.input, (args.group_a, args.group_b)):
            for doc in corpus_mod.iter_text_lines(path, tag):
                stats["documents_read"] += 1
                out = corpus_mod.clean_document(doc, stats)
                if out is not None:
                    cleaned.append(out)

    vocab = corpus_mod.build_vocabulary(cleaned, args.min_count)
    before = sum(len(d.tokens) for d in cleaned)
    kept_docs = corpus_mod.apply_vocabulary(cleaned, vocab)
    stats["rare_tokens_removed"] = before - sum(len(d.tokens) for d in kept_docs)
    stats["documents_below_two_tokens"] = len(cleaned) - len(kept_docs)
    grouped = corpus_mod.split_by_group(kept_docs)
    if args.group_a and args.group_b:
        declared = {args.group_a, args.group_b}
        if set(grouped.tags) != declared:
            raise DivergelexError(
                f"group tags in data {sorted(grouped.tags)} do not match "
                f"--group-a/--group-b {sorted(declared)}"
            )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for tag in grouped.tags:
        docs = grouped.per_group[tag]
        with open(out_dir / f"{tag}.tokens.txt", "w", encoding="utf-8",
                  newline="\n") as fh:
            for doc in docs:
                fh.write(" ".join(doc.tokens) + "\n")
        corpus_mod.build_vocabulary(docs, 1).save_tsv(out_dir / f"{tag}.vocab.tsv")
    with open(out_dir / "combined.tokens.txt", "w", encoding="utf-8",
              newline="\n") as fh:
        for doc in grouped.combined:
            fh.write(" ".join(doc.tokens) + "\n")
    vocab.save_tsv(out_dir / "combined.vocab.tsv")

    print(f"documents_read={stats['documents_read']}")
    print(f"documents_kept={len(kept_docs)}")
    for key in (
        "malformed_records",
        "retweet_documents",
        "short_documents",
        "documents_below_two_tokens",
        "hashtag_tokens",
        "mention_tokens",
        "url_tokens",
        "punctuation_only_tokens",
        "rare_tokens_removed",
    ):
        print(f"{key}={stats[key]}")
    print(f"vocabulary_size={len(vocab)}")
    print(f"tokens_written={sum(len(d.tokens) for d in kept_docs)}")
    return EXIT_OK


def _read_token_file(path) -> list[list[str]]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            tokens = line.split()
            if tokens:
                docs.append(tokens)
    return docs


def cmd_train(args) -> int:
    config = _training_config(args)
    tag = args.tag or Path(args.input).stem.replace(".tokens", "")
    docs = _read_token_file(args.input)
    log.info("training %r on %d documents from %s", tag, len(docs), args.input)
    space = train(docs, config, space_tag=tag, threads=args.threads)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    save_space(space, out)
    print(f"space_tag={tag}")
    print(f"vocabulary_size={len(space.vocab)}")
    print(f"dimension={space.dimension}")
    print(f"epoch_losses={','.join(f'{x:.6f}' for x in space.epoch_losses)}")
    print(f"saved={out}")
    return EXIT_OK


def cmd_diverge(args) -> int:
    space_1 = load_space(args.space_1)
    space_2 = load_space(args.space_2)
    global_space = load_space(args.global_space)
    report = rank_divergences(
        space_1,
        space_2,
        global_space,
        n=args.n,
        top_k=args.top_k,
        min_count_each=args.min_count_each,
    )
    run_config = RunConfig(
        command="diverge",
        n=args.n,
        top_k=args.top_k,
        min_count_each=args.min_count_each,
        inputs=(args.space_1, args.space_2, args.global_space),
    )
    report.metadata["space_configs"] = {
        s.space_tag: (s.config.to_dict() if s.config else None)
        for s in (space_1, space_2, global_space)
    }
    _finish_report(report, run_config, args.out, not args.no_figures)
    print(f"candidates={report.metadata['candidate_count']}")
    print(f"entries={len(report.entries)}")
    return EXIT_OK


def _finish_report(report, run_config: RunConfig, out_prefix, figures: bool) -> None:
    report.metadata["run_config"] = run_config.to_dict()
    report.metadata["config_digest"] = run_config.digest()
    out = Path(out_prefix)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    tsv = out.with_name(out.name + ".tsv")
    js = out.with_name(out.name + ".json")
    report_mod.write_tsv(report, tsv)
    report_mod.write_json(report, js)
    written = [str(tsv), str(js)]
    if figures:
        from . import figures as figures_mod

        written += [str(p) for p in figures_mod.render_report_figures(report, out)]
    for p in written:
        print(f"wrote={p}")


def cmd_synth_eval(args) -> int:
    spec = synth_mod.SynthSpec(
        vocab_size=args.vocab_size,
        num_topics=args.num_topics,
        planted_words=args.planted,
        control_words=args.controls,
        docs_per_group=args.docs_per_group,
        doc_length=args.doc_length,
        seed=args.seed,
    )
    config = _training_config(args)
    corpus_1, corpus_2, truth = synth_mod.generate(
        spec, (args.group_a, args.group_b)
    )
    labeled = synth_mod.as_labeled(corpus_1) + synth_mod.as_labeled(corpus_2)
    result = run_pipeline(
        labeled,
        config,
        n=args.n,
        top_k=None,
        min_count_each=args.min_count_each,
        threads=args.threads,
    )
    metrics = synth_mod.evaluate(result.report, truth)
    run_config = RunConfig(
        command="synth-eval",
        dimension=args.dim,
        window=args.window,
        negatives=args.negatives,
        epochs=args.epochs,
        initial_learning_rate=args.lr,
        min_count=args.min_count,
        subsample_threshold=args.subsample,
        unigram_power=args.unigram_power,
        seed=args.seed,
        threads=args.threads,
        n=args.n,
        min_count_each=args.min_count_each,
        group_a=args.group_a,
        group_b=args.group_b,
    )
    if args.out:
        result.report.metadata["synth_spec"] = asdict(spec)
        result.report.metadata["metrics"] = metrics.to_dict()
        _finish_report(result.report, run_config, args.out, figures=True)
        scores = result.report.scores()
        from . import figures as figures_mod

        out = Path(args.out)
        figures_mod.separation_plot(
            [scores[w] for w in truth.planted if w in scores],
            [scores[w] for w in truth.controls if w in scores],
            out.with_name(out.name + "_separation.png"),
        )
    for key, value in metrics.to_dict().items():
        if isinstance(value, float):
            print(f"{key}={value:.6f}")
        else:
            print(f"{key}={value}")
    if metrics.auc < args.min_auc:
        log.error("AUC %.4f below --min-auc %.4f", metrics.auc, args.min_auc)
        return EXIT_THRESHOLD
    return EXIT_OK


def main(argv=None) -> int:
    level = os.environ.get("DIVERGELEX_LOG", "warn").lower()
    logging.basicConfig(
        level=_LOG_LEVELS.get(level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except DivergelexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
