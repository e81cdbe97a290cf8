"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .corpus import mix_corpora, read_corpus, write_corpus
from .errors import DataError, ParamineError, ValidationError
from .pipeline import (PipelineConfig, is_up_to_date, run_align_stage,
                       run_clean_stage, run_length_stats, run_lm_similarity,
                       run_pipeline, run_retrain_only, run_stats_stage,
                       split_fingerprint, write_stamp)
from .splitbuilder import (SplitConfig, SplitSession, emit_split,
                           load_ranked_documents)

log = logging.getLogger("paramine")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paramine",
        description="Mine parallel sentence pairs from document-aligned "
                    "bilingual text: clean, align, build judged splits, report.",
    )
    parser.add_argument("--version", action="version", version=f"paramine {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("clean", help="normalize, language-check and sentence-split raw documents")
    p.add_argument("--manifest", required=True, type=Path,
                   help="TSV: pair_id, source file, target file")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--meta-patterns", type=Path, default=None,
                   help="file of meta-token patterns, literal or re:-prefixed")
    p.add_argument("--lang-a", default="ja", help="expected source language")
    p.add_argument("--lang-b", default="en", help="expected target language")
    p.add_argument("--n", type=int, default=10, help="sentences sampled per document")
    p.add_argument("--m", type=int, default=8, help="sentences required to assign a language")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--imbalance-factor", type=float, default=2.0)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("align", help="score and align sentence pairs per document")
    p.add_argument("--manifest", required=True, type=Path,
                   help="TSV: pair_id, source, target[, translation sidecar]")
    p.add_argument("--measure", default="mt-bleu",
                   choices=["mt-bleu", "mt-cosine", "raw-cosine"])
    p.add_argument("--embeddings", type=Path, default=None,
                   help="word vectors, text format, needed by cosine measures")
    p.add_argument("--th", type=float, default=0.92, help="similarity threshold")
    p.add_argument("--k", type=float, default=2.0, help="length-ratio limit, exclusive")
    p.add_argument("--band", type=int, default=None,
                   help="restrict matches to a diagonal corridor this wide")
    p.add_argument("--provider", default="sidecar",
                   choices=["sidecar", "command", "identity"])
    p.add_argument("--translate-cmd", default=None,
                   help="shell command reading source lines on stdin")
    p.add_argument("--length-unit", default="tokens", choices=["tokens", "chars"])
    p.add_argument("--max-order", type=int, default=4)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("split", help="build judged test/dev/train splits")
    p.add_argument("--alignments", required=True, type=Path)
    p.add_argument("--volume-test", type=int, default=2000)
    p.add_argument("--volume-dev", type=int, default=500)
    p.add_argument("--ratio", type=float, default=0.5)
    p.add_argument("--log", required=True, type=Path, help="judgment log (JSON lines)")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--annotator", default="anonymous")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--serve", metavar="ADDR",
                      help="serve the judgment API (host:port)")
    mode.add_argument("--interactive", action="store_true",
                      help="judge pairs on this terminal")
    mode.add_argument("--retrain-only", action="store_true",
                      help="rebuild train from fresh alignments, keep pinned test/dev")
    p.add_argument("--pin-manifest", type=Path, default=None,
                   help="manifest.json whose test/dev assignments are frozen")
    p.add_argument("--ui", type=Path, default=None,
                   help="static directory served at / when using --serve")

    p = sub.add_parser("serve", help="serve the judgment API without emitting")
    p.add_argument("--alignments", required=True, type=Path)
    p.add_argument("--volume-test", type=int, default=2000)
    p.add_argument("--volume-dev", type=int, default=500)
    p.add_argument("--ratio", type=float, default=0.5)
    p.add_argument("--log", required=True, type=Path)
    p.add_argument("--out", type=Path, default=None,
                   help="emit splits here the moment the build completes")
    p.add_argument("--addr", default="127.0.0.1:8321")
    p.add_argument("--ui", type=Path, default=None)

    p = sub.add_parser("stats", help="corpus reports")
    stats_sub = p.add_subparsers(dest="stats_command", required=True)
    q = stats_sub.add_parser("length", help="token-count mean/median/stddev per side")
    q.add_argument("--corpus", required=True, type=Path,
                   help="corpus base path (expects .src/.tgt/.boundaries)")
    q = stats_sub.add_parser("lm-similarity",
                             help="cross log-likelihood table of n-gram models")
    q.add_argument("--corpora", required=True, nargs="+", type=Path,
                   help="token files, one sentence per line")
    q.add_argument("--order", type=int, default=4)
    q.add_argument("--discount", type=float, default=0.75)

    p = sub.add_parser("mix", help="oversample and concatenate corpora to a fixed size")
    p.add_argument("--corpora", required=True, nargs="+", type=Path,
                   help="corpus base paths")
    p.add_argument("--out", required=True, type=Path, help="output base path")

    p = sub.add_parser("pipeline", help="run clean, align, split emission and stats")
    p.add_argument("--config", required=True, type=Path, help="key=value file")
    p.add_argument("--manifest", type=Path, default=None)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--measure", default=None,
                   choices=["mt-bleu", "mt-cosine", "raw-cosine"])
    p.add_argument("--embeddings", type=Path, default=None)
    p.add_argument("--th", type=float, default=None)
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--band", type=int, default=None)
    p.add_argument("--log", type=Path, default=None)
    p.add_argument("--jobs", type=int, default=None)
    return parser


def _cmd_clean(args) -> int:
    print(run_clean_stage(
        args.manifest, args.out, args.lang_a, args.lang_b, args.n, args.m,
        args.seed, args.imbalance_factor, args.meta_patterns, args.jobs,
    ))
    return 0


def _cmd_align(args) -> int:
    print(run_align_stage(
        args.manifest, args.out, args.measure, args.th, args.k, args.band,
        args.embeddings, args.provider, args.translate_cmd, args.length_unit,
        args.max_order, args.jobs,
    ))
    return 0


def _print_pair(state, cand) -> None:
    progress = state.progress
    print(f"[{state.phase}] doc {cand.pair_id} "
          f"({progress.judged}/{progress.total} judged) score {cand.score:.4f}")
    print(f"  src: {cand.src_text}")
    print(f"  tgt: {cand.tgt_text}")


def _interactive_loop(session: SplitSession, annotator: str) -> bool:
    """Prompt loop on stdin; returns True when the build completed."""
    undo_doc: str | None = None
    undo_stack: list[tuple[str, int, int]] = []
    pending: tuple[str, int, int] | None = None
    while True:
        state = session.state()
        if state.complete:
            return True
        cand = session.candidate(pending) if pending else state.next_pair
        if cand.pair_id != undo_doc:
            undo_doc, undo_stack = cand.pair_id, []
        _print_pair(state, cand)
        try:
            answer = input("judge [g]ood / [b]ad / [u]ndo / [q]uit: ").strip().lower()
        except EOFError:
            answer = "q"
        if answer in ("g", "good", "b", "bad"):
            verdict = "good" if answer.startswith("g") else "bad"
            session.record_judgment(cand.pair_id, cand.src_index,
                                    cand.tgt_index, verdict, annotator)
            undo_stack.append(cand.key)
            pending = None
        elif answer in ("u", "undo"):
            if undo_stack:
                pending = undo_stack.pop()
                print("re-judging previous pair")
            else:
                print("nothing to undo in this document")
        elif answer in ("q", "quit"):
            print(f"suspended after {state.judged_count} judgments; "
                  "rerun to resume from the log")
            return False
        else:
            print(f"unrecognized answer {answer!r}")


def _print_manifest_summary(manifest) -> None:
    for name in ("test", "dev", "train"):
        c = manifest.counts[name]
        print(f"{name}: {c['documents']} documents, {c['kept_pairs']} pairs kept, "
              f"{c['deleted_pairs']} deleted")
    for warning in manifest.warnings:
        print(f"warning: {warning}")


def _cmd_split(args) -> int:
    if args.retrain_only:
        if args.pin_manifest is None:
            raise ValidationError("--retrain-only needs --pin-manifest")
        print(run_retrain_only(args.alignments, args.pin_manifest, args.out))
        return 0
    if args.pin_manifest is not None:
        raise ValidationError("--pin-manifest only applies with --retrain-only")

    cfg = SplitConfig(args.volume_test, args.volume_dev, args.ratio)
    log_path = args.log
    fp = split_fingerprint(args.alignments,
                           log_path if log_path.exists() else None,
                           cfg.volume_test, cfg.volume_dev, cfg.ratio)
    if is_up_to_date(args.out, "split", fp) and (args.out / "manifest.json").exists():
        print("split: up to date")
        return 0

    session = SplitSession(load_ranked_documents(args.alignments), cfg, log_path)
    for warning in session.replay_warnings:
        log.warning("%s", warning)

    if args.serve:
        from .service import serve

        serve(session, args.serve, out_dir=args.out, ui_dir=args.ui)
        return 0

    if not session.is_complete():
        if not args.interactive:
            nxt = session.next_unjudged()
            raise DataError(
                f"judgment log is incomplete (next unjudged: {nxt.key}); "
                "use --interactive or --serve to continue judging"
            )
        if not _interactive_loop(session, args.annotator):
            return 0

    manifest = emit_split(session, args.out)
    fp = split_fingerprint(args.alignments, log_path,
                           cfg.volume_test, cfg.volume_dev, cfg.ratio)
    write_stamp(args.out, "split", fp)
    _print_manifest_summary(manifest)
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    cfg = SplitConfig(args.volume_test, args.volume_dev, args.ratio)
    session = SplitSession(load_ranked_documents(args.alignments), cfg, args.log)
    serve(session, args.addr, out_dir=args.out, ui_dir=args.ui)
    return 0


def _cmd_stats(args) -> int:
    if args.stats_command == "length":
        print(run_length_stats(args.corpus))
    else:
        print(run_lm_similarity(args.corpora, order=args.order,
                                discount=args.discount))
    return 0


def _cmd_mix(args) -> int:
    corpora = [read_corpus(base) for base in args.corpora]
    mixed = mix_corpora(corpora)
    write_corpus(mixed, args.out)
    print(f"mix: {len(mixed)} pairs from {len(corpora)} corpora -> {args.out}")
    return 0


def _cmd_pipeline(args) -> int:
    overrides = {
        "manifest": str(args.manifest) if args.manifest else None,
        "out": str(args.out) if args.out else None,
        "measure": args.measure,
        "embeddings": str(args.embeddings) if args.embeddings else None,
        "th": args.th, "k": args.k, "band": args.band,
        "log": str(args.log) if args.log else None,
        "jobs": args.jobs,
    }
    for message in run_pipeline(PipelineConfig.from_file(args.config, overrides)):
        print(message)
    return 0


_COMMANDS = {
    "clean": _cmd_clean,
    "align": _cmd_align,
    "split": _cmd_split,
    "serve": _cmd_serve,
    "stats": _cmd_stats,
    "mix": _cmd_mix,
    "pipeline": _cmd_pipeline,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        log.error("%s", exc)
        return 1
    except DataError as exc:
        log.error("%s", exc)
        return 2
    except ParamineError as exc:
        log.error("%s", exc)
        return 3
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
