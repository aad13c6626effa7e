"""Command-line entry point for the distillation pipeline.

Subcommands: ingest, generate, stats, mine, learn, eval, split, simulate.
A flat key-value config file (``--config``) supplies defaults; explicit
flags win. Outputs are written atomically. Exit codes: 0 success, 2 usage
error, 3 data error, 4 backend error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .backend import BackendConfig, BackendError, SamplingParams, make_backend
from .catalog import CatalogError, load_catalog
from .evaluation import (
    EvaluationError,
    assemble_report,
    load_judgments,
    precision,
    recall,
    save_judgments,
)
from .generation import GeneratorConfig, corpus_stats, generate_corpus
from .mining import (
    BruteForceSizeError,
    SequenceDatabase,
    absolute_min_sup,
    brute_force_mine,
    gsp,
    pattern_report_tsv,
    spade,
)
from .store import (
    CorpusFormatError,
    SplitSpec,
    atomic_write_text,
    load_corpus,
    save_corpus,
    split,
    split_manifest,
)
from .summ import (
    SummConfig,
    learn,
    log_loss,
    markov_baseline,
    planted_binary_model,
    save_model,
    simulate,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_BACKEND = 4


def _parse_config_file(path: str) -> dict:
    """Flat ``key = value`` (or ``key: value``) pairs; '#' starts a comment."""
    values: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            for sep in ("=", ":"):
                if sep in line:
                    key, _, value = line.partition(sep)
                    break
            else:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key = key.strip().replace("-", "_")
            value = value.strip()
            if value.lower() in ("true", "false"):
                parsed: object = value.lower() == "true"
            else:
                try:
                    parsed = int(value)
                except ValueError:
                    try:
                        parsed = float(value)
                    except ValueError:
                        parsed = value
            values[key] = parsed
    return values


def _csv(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _read_triggers(args) -> list[str] | None:
    if args.triggers:
        return _csv(args.triggers)
    if args.triggers_file:
        with open(args.triggers_file, encoding="utf-8") as fh:
            return [line.strip() for line in fh if line.strip()]
    return None


def _load_script(path: str) -> list[str] | dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        decoded = json.loads(text)
    except json.JSONDecodeError:
        return [line for line in text.splitlines() if line.strip()]
    if isinstance(decoded, list) and all(isinstance(x, str) for x in decoded):
        return decoded
    if isinstance(decoded, dict) and all(
        isinstance(k, str) and isinstance(v, str) for k, v in decoded.items()
    ):
        return decoded
    raise ValueError(f"{path}: script must be a JSON string list or string map")


def _backend_from_args(parser, kind, endpoint, model, script_path, timeout, retries,
                       transcript=""):
    if kind == "scripted":
        if not script_path:
            parser.error("scripted backend requires --script")
        script = _load_script(script_path)
        return make_backend(
            BackendConfig(
                kind="scripted", model_name=model, script=script,
                transcript_path=transcript,
            )
        )
    if not endpoint:
        parser.error("http backend requires --endpoint")
    return make_backend(
        BackendConfig(
            kind="http",
            endpoint_url=endpoint,
            model_name=model,
            timeout=timeout,
            max_retries_transport=retries,
            transcript_path=transcript,
        )
    )


def _sampling_from_args(args) -> SamplingParams:
    return SamplingParams(
        top_k=args.top_k,
        top_p=args.top_p,
        max_new_tokens=args.max_new_tokens,
        temperature=args.temperature,
    )


def _print_kv(pairs) -> None:
    for key, value in pairs:
        print(f"{key}\t{value}")


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------


def cmd_ingest(parser, args) -> int:
    catalog = load_catalog(args.catalog)
    stats = catalog.stats()
    _print_kv(sorted(stats.items()))
    _print_kv([("digest", catalog.digest())])
    return EXIT_OK


def cmd_generate(parser, args) -> int:
    if not args.out:
        parser.error("generate requires --out")
    catalog = load_catalog(args.catalog)
    backend = _backend_from_args(
        parser, args.backend, args.endpoint, args.model, args.script,
        args.timeout, args.transport_retries, transcript=args.transcript,
    )
    cfg = GeneratorConfig(
        min_len=args.min_len,
        max_len=args.max_len,
        max_step_retries=args.retries,
        allow_consecutive_repeat=args.allow_consecutive_repeat,
        sampling=_sampling_from_args(args),
    )
    corpus = generate_corpus(
        catalog,
        cfg,
        backend,
        triggers=_read_triggers(args),
        samples_per_trigger=args.samples_per_trigger,
        jobs=args.jobs,
    )
    save_corpus(corpus, args.out)
    print(f"wrote {len(corpus.sequences)} sequence(s) to {args.out}")
    return EXIT_OK


def cmd_stats(parser, args) -> int:
    corpus = load_corpus(args.corpus)
    stats = corpus_stats(corpus)
    _print_kv(
        [
            ("count", stats["count"]),
            ("mean_len", f"{stats['mean_len']:.4f}"),
            ("below_min_len", stats["below_min_len"]),
        ]
    )
    _print_kv((f"len_{k}", v) for k, v in stats["len_histogram"].items())
    _print_kv((f"termination_{k}", v) for k, v in stats["terminations"].items())
    if args.report_dir:
        from .reporting import write_stats_report

        written = write_stats_report(stats, args.report_dir)
        print(f"report written to {args.report_dir} ({len(written)} file(s))")
    return EXIT_OK


def cmd_mine(parser, args) -> int:
    corpus = load_corpus(args.corpus)
    db = SequenceDatabase.from_sequences(corpus.label_sequences())
    if args.min_sup_frac is not None:
        min_sup = absolute_min_sup(len(db.sequences), args.min_sup_frac)
    else:
        min_sup = args.min_sup
    if args.algo == "gsp":
        mined = gsp(db, min_sup)
    elif args.algo == "spade":
        mined = spade(db, min_sup)
    else:
        mined = brute_force_mine(db, min_sup, args.max_len)
    atomic_write_text(args.out, pattern_report_tsv(mined))
    print(f"mined {len(mined)} pattern(s) at min_sup={min_sup}; wrote {args.out}")
    if args.figure:
        from .reporting import write_pattern_figure

        path = write_pattern_figure(mined, args.figure)
        if path is not None:
            print(f"figure written to {path}")
    return EXIT_OK


def cmd_learn(parser, args) -> int:
    corpus = load_corpus(args.corpus)
    db = SequenceDatabase.from_sequences(corpus.label_sequences())
    test_db = None
    if args.test:
        test_db = SequenceDatabase.from_sequences(
            load_corpus(args.test).label_sequences()
        )

    if args.kind == "markov":
        model = markov_baseline(db, order=args.order, alpha=args.alpha)
        print(f"fitted order-{args.order} baseline over {len(model.alphabet)} labels")
        if test_db is not None:
            interest = _interest_labels(parser, args, db)
            report = model.label_log_loss(test_db, interest)
            _print_loss(report)
        return EXIT_OK

    interest = _interest_labels(parser, args, db)
    config = SummConfig(
        alpha=args.alpha,
        gamma=args.gamma,
        kappa=args.kappa,
        kind="binary" if args.kind == "bsumm" else "ordinal",
    )
    model = learn(db, interest, config)
    print(f"influencing_set\t{','.join(model.influencing_set) or '(empty)'}")
    if args.out:
        save_model(model, args.out)
        print(f"model written to {args.out}")
    if test_db is not None:
        report = log_loss(model, test_db)
        _print_loss(report)
    return EXIT_OK


def _interest_labels(parser, args, db: SequenceDatabase) -> list[str]:
    if not args.interest:
        parser.error("this command requires --interest (label list or 'all')")
    if args.interest.strip().lower() == "all":
        return sorted(db.alphabet)
    labels = _csv(args.interest)
    if not labels:
        parser.error("--interest must name at least one label")
    return labels


def _print_loss(report) -> None:
    for label in sorted(report.per_label):
        print(f"log_loss[{label}]\t{report.per_label[label]:.6f}")
    print(f"log_loss_mean\t{report.mean:.6f}")
    print(f"signed_total_loglik\t{report.signed_total_loglik:.6f}")


def cmd_eval(parser, args) -> int:
    corpus = load_corpus(args.corpus)
    precision_result = None
    recall_result = None

    if args.eval_backend:
        backend = _backend_from_args(
            parser, args.eval_backend, args.eval_endpoint, args.eval_model,
            args.eval_script, args.timeout, args.transport_retries,
            transcript=args.transcript,
        )
        cache: dict = {}
        if args.judgments:
            try:
                cache = load_judgments(args.judgments)
            except FileNotFoundError:
                cache = {}
        precision_result = precision(
            corpus, backend, strict=args.strict, cache=cache, jobs=args.jobs
        )
        if args.judgments:
            save_judgments(cache, args.judgments)
        if precision_result.total_pairs and precision_result.completeness == 0.0:
            raise BackendError("evaluator backend produced no judgments")

    if args.catalog:
        catalog = load_catalog(args.catalog)
        reference = catalog.causal_reference()
        recall_result = recall(corpus, reference, catalog)

    if precision_result is None and recall_result is None:
        parser.error("eval needs --eval-backend (precision) and/or --catalog (recall)")

    report = assemble_report(precision_result, recall_result)
    for name, value in (("precision", report.precision), ("recall", report.recall), ("f1", report.f1)):
        if value is not None:
            print(f"{name}\t{value:.4f}")
    _print_kv(sorted(report.counts.items()))
    if args.report_dir:
        from .reporting import write_metrics_report

        written = write_metrics_report(report, args.report_dir)
        print(f"report written to {args.report_dir} ({len(written)} file(s))")
    return EXIT_OK


def cmd_split(parser, args) -> int:
    corpus = load_corpus(args.corpus)
    spec = SplitSpec(train=args.train, dev=args.dev, test=args.test, seed=args.seed)
    train_c, dev_c, test_c = split(corpus, spec)
    for name, part in (("train", train_c), ("dev", dev_c), ("test", test_c)):
        path = f"{args.out_prefix}.{name}.jsonl"
        save_corpus(part, path)
        print(f"{name}\t{len(part.sequences)}\t{path}")
    manifest = split_manifest(len(corpus.sequences), spec)
    manifest_path = f"{args.out_prefix}.manifest.json"
    atomic_write_text(manifest_path, json.dumps(manifest, ensure_ascii=False, indent=2) + "\n")
    print(f"manifest\t{manifest_path}")
    return EXIT_OK


def cmd_simulate(parser, args) -> int:
    if not args.out:
        parser.error("simulate requires --out")
    background_labels = _csv(args.background)
    if not background_labels:
        parser.error("simulate requires --background labels")
    weight = 1.0 / len(background_labels)
    background = {label: weight for label in background_labels}
    config = SummConfig(kappa=args.kappa, kind="binary")
    planted = planted_binary_model(
        args.interest,
        [args.influencer],
        {
            frozenset(): args.theta_absent,
            frozenset({args.influencer}): args.theta_present,
        },
        config,
    )
    db = simulate(planted, args.n, args.len, args.seed, background)
    from .generation import Corpus, GeneratedSequence

    sequences = [
        GeneratedSequence(
            trigger=seq[0],
            labels=list(seq),
            termination="max_len_reached",
            step_attempts=[1] * (len(seq) - 1),
            backend_id="planted-simulator",
        )
        for seq in db.sequences
    ]
    corpus = Corpus(
        sequences=sequences,
        catalog_digest="",
        config=GeneratorConfig(min_len=1, max_len=max(args.len, 1)),
    )
    save_corpus(corpus, args.out)
    print(f"wrote {len(sequences)} simulated sequence(s) to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_sampling_flags(sub) -> None:
    sub.add_argument("--top-k", type=int, default=50, help="top-k sampling cutoff")
    sub.add_argument("--top-p", type=float, default=0.95, help="nucleus sampling mass")
    sub.add_argument("--max-new-tokens", type=int, default=32, help="completion length cap")
    sub.add_argument("--temperature", type=float, default=1.0, help="sampling temperature")


def _add_backend_flags(sub, prefix: str = "") -> None:
    sub.add_argument(f"--{prefix}backend", choices=["http", "scripted"],
                     help="backend kind")
    sub.add_argument(f"--{prefix}endpoint", default="",
                     help="completion endpoint URL (http kind)")
    sub.add_argument(f"--{prefix}model", default="",
                     help="model name sent with requests")
    sub.add_argument(f"--{prefix}script", default="",
                     help="scripted responses: JSON list/map or text lines")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eventdistill",
        description="Distill event-sequence knowledge from generative language models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", default="", help="flat key=value config file of flag defaults")
    parser.add_argument("--log-level", default="WARNING", help="logging level name")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("ingest", help="load and validate a concept catalog")
    sub.add_argument("--catalog", required=True, help="catalog file (JSON lines)")
    sub.set_defaults(func=cmd_ingest)

    sub = commands.add_parser("generate", help="generate an event-sequence corpus")
    sub.add_argument("--catalog", required=True, help="catalog file (JSON lines)")
    sub.add_argument("--out", default="", help="corpus output path (JSON lines)")
    _add_backend_flags(sub)
    sub.add_argument("--timeout", type=float, default=30.0, help="http timeout in seconds")
    sub.add_argument("--transport-retries", type=int, default=2, help="http transport retries")
    sub.add_argument("--transcript", default="", help="append request/response records here")
    sub.add_argument("--triggers", default="", help="comma-separated trigger labels")
    sub.add_argument("--triggers-file", default="", help="file of trigger labels, one per line")
    sub.add_argument("--samples-per-trigger", type=int, default=1, help="sequences per trigger")
    sub.add_argument("--min-len", type=int, default=3, help="desired minimum sequence length")
    sub.add_argument("--max-len", type=int, default=10, help="maximum sequence length")
    sub.add_argument("--retries", type=int, default=3, help="semantic retry budget per step")
    sub.add_argument(
        "--allow-consecutive-repeat",
        action="store_true",
        help="accept a label equal to the previous one",
    )
    _add_sampling_flags(sub)
    sub.add_argument("--jobs", type=int, default=1, help="concurrent triggers")
    sub.set_defaults(func=cmd_generate)

    sub = commands.add_parser("stats", help="corpus statistics and report figures")
    sub.add_argument("--corpus", required=True, help="corpus file")
    sub.add_argument("--report-dir", default="", help="write TSV tables and figures here")
    sub.set_defaults(func=cmd_stats)

    sub = commands.add_parser("mine", help="mine frequent sequential patterns")
    sub.add_argument("--corpus", required=True, help="corpus file")
    sub.add_argument("--algo", choices=["gsp", "spade", "brute"], default="gsp",
                     help="mining algorithm")
    sub.add_argument("--min-sup", type=int, default=5, help="absolute support threshold")
    sub.add_argument("--min-sup-frac", type=float, default=None,
                     help="relative support threshold in (0,1]; overrides --min-sup")
    sub.add_argument("--max-len", type=int, default=4, help="pattern length cap (brute only)")
    sub.add_argument("--out", required=True, help="pattern TSV output path")
    sub.add_argument("--figure", default="", help="optional pattern support figure (PNG)")
    sub.set_defaults(func=cmd_mine)

    sub = commands.add_parser("learn", help="learn a summary Markov model or baseline")
    sub.add_argument("--corpus", required=True, help="training corpus file")
    sub.add_argument("--kind", choices=["bsumm", "osumm", "markov"], default="bsumm",
                     help="model family")
    sub.add_argument("--interest", default="", help="interest labels (comma list, or 'all')")
    sub.add_argument("--kappa", type=int, default=4, help="lookback window length")
    sub.add_argument("--alpha", type=float, default=0.1, help="smoothing pseudocount")
    sub.add_argument("--gamma", type=float, default=0.5, help="structure penalty weight")
    sub.add_argument("--order", type=int, default=4, help="Markov baseline order")
    sub.add_argument("--out", default="", help="model file output path")
    sub.add_argument("--test", default="", help="corpus to report test log loss on")
    sub.set_defaults(func=cmd_learn)

    sub = commands.add_parser("eval", help="precision/recall/F1 of a corpus")
    sub.add_argument("--corpus", required=True, help="corpus file")
    sub.add_argument("--catalog", default="", help="catalog file (enables recall)")
    _add_backend_flags(sub, prefix="eval-")
    sub.add_argument("--timeout", type=float, default=30.0, help="http timeout in seconds")
    sub.add_argument("--transport-retries", type=int, default=2, help="http transport retries")
    sub.add_argument("--transcript", default="", help="append request/response records here")
    sub.add_argument("--strict", action="store_true",
                     help="count unparseable verdicts as NO")
    sub.add_argument("--judgments", default="", help="judgment cache file (JSON lines)")
    sub.add_argument("--jobs", type=int, default=1, help="concurrent judgments")
    sub.add_argument("--report-dir", default="", help="write metrics report and figure here")
    sub.set_defaults(func=cmd_eval)

    sub = commands.add_parser("split", help="deterministic train/dev/test split")
    sub.add_argument("--corpus", required=True, help="corpus file")
    sub.add_argument("--train", type=float, default=0.70, help="train fraction")
    sub.add_argument("--dev", type=float, default=0.15, help="dev fraction")
    sub.add_argument("--test", type=float, default=0.15, help="test fraction")
    sub.add_argument("--seed", type=int, required=True, help="shuffle seed (required)")
    sub.add_argument("--out-prefix", required=True, help="output prefix for the three parts")
    sub.set_defaults(func=cmd_split)

    sub = commands.add_parser("simulate", help="sample sequences from a planted model")
    sub.add_argument("--interest", required=True, help="interest label")
    sub.add_argument("--influencer", required=True, help="influencing label")
    sub.add_argument("--theta-present", type=float, default=0.9,
                     help="occurrence probability with the influencer in window")
    sub.add_argument("--theta-absent", type=float, default=0.05,
                     help="occurrence probability without the influencer")
    sub.add_argument("--background", required=True,
                     help="comma-separated background labels (sampled uniformly)")
    sub.add_argument("--kappa", type=int, default=4, help="lookback window length")
    sub.add_argument("--n", type=int, required=True, help="number of sequences")
    sub.add_argument("--len", type=int, required=True, help="length of each sequence")
    sub.add_argument("--seed", type=int, required=True, help="simulation seed (required)")
    sub.add_argument("--out", default="", help="output corpus path")
    sub.set_defaults(func=cmd_simulate)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()

    config_path = ""
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif token.startswith("--config="):
            config_path = token.split("=", 1)[1]
    if config_path:
        try:
            defaults = _parse_config_file(config_path)
        except (OSError, ValueError) as exc:
            print(f"error: cannot read config file: {exc}", file=sys.stderr)
            return EXIT_DATA
        parser.set_defaults(**defaults)
        # subparsers parse into a fresh namespace, so they need the defaults too
        sub_action = next(
            a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
        )
        for sub in sub_action.choices.values():
            sub.set_defaults(**defaults)

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(parser, args)
    except BackendError as exc:
        logger.error("backend error: %s", exc)
        print(f"error: backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (
        CatalogError,
        CorpusFormatError,
        EvaluationError,
        BruteForceSizeError,
        ValueError,
        OSError,
    ) as exc:
        logger.error("data error: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
