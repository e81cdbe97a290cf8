"""Stage orchestration: clean, align, split emission, stats.

Each stage writes its outputs plus a stamp file recording a fingerprint of
its inputs and parameters. Re-running with identical inputs is a no-op that
reports "up to date"; stages never modify their inputs.

Stage-to-stage file formats:
  - cleaned dir: <pair_id>.src.txt / <pair_id>.tgt.txt, manifest.tsv, report.jsonl
  - alignment dir: <pair_id>.align.tsv (src_index, tgt_index, score,
    src_text, tgt_text), summary.tsv (pair_id, num_matches, avg_score)
  - split dir: test/dev/train corpus files plus manifest.json
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import shutil
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

from .aligner import AlignerConfig, align
from .cleaning import (CleaningOptions, DetectorConfig, default_meta_patterns,
                       load_meta_patterns, profile_for, run_clean)
from .corpus import (Corpus, length_stats, load_document_pair, read_corpus,
                     read_pair_manifest, write_corpus)
from .embeddings import load_embeddings
from .errors import DataError, ValidationError
from .similarity import (CommandProvider, IdentityProvider, SidecarProvider,
                         make_measure, score_matrix)


def _hash_file(h, path: Path) -> None:
    with open(path, "rb") as fh:
        while True:
            chunk = fh.read(1 << 16)
            if not chunk:
                break
            h.update(chunk)


def stage_fingerprint(input_paths: Sequence[Path], params: dict) -> str:
    """sha256 over parameter json plus the content of every input file."""
    h = hashlib.sha256()
    h.update(json.dumps(params, sort_keys=True, default=str).encode("utf-8"))
    for path in sorted(Path(p) for p in input_paths):
        h.update(str(path.name).encode("utf-8"))
        if path.exists():
            _hash_file(h, path)
        else:
            h.update(b"<absent>")
    return h.hexdigest()


def _stamp_path(out_dir: Path, stage: str) -> Path:
    return Path(out_dir) / f".stamp.{stage}.json"


def is_up_to_date(out_dir: Path, stage: str, fingerprint: str) -> bool:
    stamp = _stamp_path(out_dir, stage)
    if not stamp.exists():
        return False
    try:
        rec = json.loads(stamp.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError):
        return False
    return rec.get("fingerprint") == fingerprint


def write_stamp(out_dir: Path, stage: str, fingerprint: str) -> None:
    stamp = _stamp_path(out_dir, stage)
    stamp.parent.mkdir(parents=True, exist_ok=True)
    stamp.write_text(
        json.dumps({"stage": stage, "fingerprint": fingerprint}) + "\n",
        encoding="utf-8",
    )


@dataclass
class PipelineConfig:
    """Flat pipeline settings; file keys use the same names as the fields."""

    manifest: Optional[str] = None
    out: Optional[str] = None
    measure: str = "mt_bleu"
    embeddings: Optional[str] = None
    provider: str = "sidecar"
    translate_cmd: Optional[str] = None
    lang_a: str = "ja"
    lang_b: str = "en"
    n: int = 10
    m: int = 8
    seed: int = 0
    imbalance_factor: float = 2.0
    meta_patterns: Optional[str] = None
    th: float = 0.92
    k: float = 2.0
    band: Optional[int] = None
    length_unit: str = "tokens"
    max_order: int = 4
    volume_test: int = 2000
    volume_dev: int = 500
    ratio: float = 0.5
    log: Optional[str] = None
    jobs: int = 1

    _INT_FIELDS = {"n", "m", "seed", "band", "max_order", "volume_test",
                   "volume_dev", "jobs"}
    _FLOAT_FIELDS = {"imbalance_factor", "th", "k", "ratio"}

    @classmethod
    def from_file(cls, path: Path, overrides: Optional[dict] = None) -> "PipelineConfig":
        """key=value lines; # comments and blank lines ignored; unknown keys
        rejected. Values from `overrides` (CLI flags) win."""
        known = {f.name for f in fields(cls) if not f.name.startswith("_")}
        raw: dict[str, str] = {}
        try:
            text = Path(path).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise DataError(f"config file not found: {path}")
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in known:
                raise ValidationError(f"{path}:{lineno}: unknown config key {key!r}")
            raw[key] = value.strip()
        cfg = cls()
        for key, value in raw.items():
            setattr(cfg, key, cls._coerce(key, value))
        for key, value in (overrides or {}).items():
            if value is not None:
                setattr(cfg, key, value)
        return cfg

    @classmethod
    def _coerce(cls, key: str, value: str):
        try:
            if key in cls._INT_FIELDS:
                return int(value)
            if key in cls._FLOAT_FIELDS:
                return float(value)
        except ValueError:
            raise ValidationError(f"config key {key}: expected a number, got {value!r}")
        return value


def make_provider(kind: str, translate_cmd: Optional[str] = None):
    if kind == "sidecar":
        return SidecarProvider()
    if kind == "command":
        if not translate_cmd:
            raise ValidationError("provider 'command' needs --translate-cmd")
        return CommandProvider(translate_cmd)
    if kind == "identity":
        return IdentityProvider()
    raise ValidationError(
        f"unknown provider {kind!r}; known: sidecar, command, identity"
    )


def run_clean_stage(manifest: Path, out_dir: Path, lang_a: str, lang_b: str,
                    n: int, m: int, seed: int, imbalance_factor: float,
                    meta_patterns_path: Optional[Path] = None,
                    jobs: int = 1) -> str:
    """Returns a one-line human report; skips work when already done."""
    entries = read_pair_manifest(manifest)
    inputs = [manifest]
    for e in entries:
        inputs.extend([e.src_path, e.tgt_path])
    if meta_patterns_path is not None:
        inputs.append(Path(meta_patterns_path))
    params = {"stage": "clean", "lang_a": lang_a, "lang_b": lang_b, "n": n,
              "m": m, "seed": seed, "imbalance_factor": imbalance_factor}
    fp = stage_fingerprint(inputs, params)
    if is_up_to_date(out_dir, "clean", fp):
        return "clean: up to date"

    patterns = (load_meta_patterns(meta_patterns_path)
                if meta_patterns_path is not None else default_meta_patterns())
    for label in (lang_a, lang_b):
        profile_for(label)  # fail fast on unknown language tags
    # the detector always weighs the same two charsets; lang-a/lang-b say
    # which label each side must come out as (they may be equal)
    detector = DetectorConfig(
        n=n, m=m, profiles=(profile_for("en"), profile_for("ja")),
        rng_seed=seed,
    )
    opts = CleaningOptions(
        detector=detector, src_label=lang_a, tgt_label=lang_b,
        meta_patterns=tuple(patterns), imbalance_factor=imbalance_factor,
    )
    report = run_clean(entries, opts, Path(out_dir), jobs=jobs)
    write_stamp(out_dir, "clean", fp)
    return (f"clean: {report.pairs_kept} pairs kept, "
            f"{report.language_mismatches_dropped} language mismatches, "
            f"{report.no_punctuation_dropped} without punctuation, "
            f"{report.imbalanced_pairs_dropped} imbalanced")


def run_align_stage(manifest: Path, out_dir: Path, measure_kind: str,
                    th: float, k: float, band: Optional[int] = None,
                    embeddings_path: Optional[Path] = None,
                    provider_kind: str = "sidecar",
                    translate_cmd: Optional[str] = None,
                    length_unit: str = "tokens", max_order: int = 4,
                    jobs: int = 1) -> str:
    """Score and align every manifest pair; writes per-pair files + summary."""
    kind = measure_kind.replace("-", "_")
    needs_table = kind in ("mt_cosine", "raw_cosine")
    if needs_table and embeddings_path is None:
        raise ValidationError(f"measure {measure_kind} needs --embeddings")

    entries = read_pair_manifest(manifest)
    # translations produced after cleaning can be dropped in next to the
    # cleaned files as <pair_id>.mt.txt instead of editing the manifest
    base = Path(manifest).parent
    entries = [
        e if e.translation_path is not None
        or not (base / f"{e.pair_id}.mt.txt").exists()
        else dataclasses.replace(e, translation_path=base / f"{e.pair_id}.mt.txt")
        for e in entries
    ]
    inputs = [manifest]
    for e in entries:
        inputs.extend([e.src_path, e.tgt_path])
        if e.translation_path is not None:
            inputs.append(e.translation_path)
    if embeddings_path is not None:
        inputs.append(Path(embeddings_path))
    params = {"stage": "align", "measure": kind, "th": th, "k": k,
              "band": band, "provider": provider_kind,
              "translate_cmd": translate_cmd, "length_unit": length_unit,
              "max_order": max_order}
    fp = stage_fingerprint(inputs, params)
    if is_up_to_date(out_dir, "align", fp):
        return "align: up to date"

    table = load_embeddings(embeddings_path) if needs_table else None
    provider = make_provider(provider_kind, translate_cmd)
    measure = make_measure(kind, provider=provider, table=table, max_order=max_order)
    cfg = AlignerConfig(th=th, k=k, band_width=band, length_unit=length_unit)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary_rows = []
    total_matches = 0
    for entry in entries:
        pair = load_document_pair(entry, src_language="src", tgt_language="tgt")
        result = align(pair, score_matrix(pair, measure), cfg)
        src_texts = pair.source.texts()
        tgt_texts = pair.target.texts()
        with open(out_dir / f"{entry.pair_id}.align.tsv", "w", encoding="utf-8") as fh:
            for match in result.matches:
                fh.write(f"{match.src_index}\t{match.tgt_index}\t"
                         f"{match.score:.6f}\t{src_texts[match.src_index]}\t"
                         f"{tgt_texts[match.tgt_index]}\n")
        summary_rows.append(
            f"{entry.pair_id}\t{len(result.matches)}\t{result.avg_score:.6f}"
        )
        total_matches += len(result.matches)
    with open(out_dir / "summary.tsv", "w", encoding="utf-8") as fh:
        for row in summary_rows:
            fh.write(row + "\n")
    write_stamp(out_dir, "align", fp)
    return f"align: {total_matches} matches across {len(entries)} document pairs"


def _split_inputs(align_dir: Path, log_path: Optional[Path]) -> list[Path]:
    inputs = sorted(Path(align_dir).glob("*.tsv"))
    if log_path is not None:
        inputs.append(Path(log_path))
    return inputs


def split_fingerprint(align_dir: Path, log_path: Optional[Path],
                      volume_test: int, volume_dev: int, ratio: float) -> str:
    params = {"stage": "split", "volume_test": volume_test,
              "volume_dev": volume_dev, "ratio": ratio}
    return stage_fingerprint(_split_inputs(align_dir, log_path), params)


def run_retrain_only(align_dir: Path, pin_manifest: Path, out_dir: Path) -> str:
    """Rebuild only the train split from fresh alignments, copying the
    pinned manifest's test/dev corpora and assignments unchanged."""
    from .splitbuilder import load_ranked_documents, rank_documents

    pin_manifest = Path(pin_manifest)
    pinned_dir = pin_manifest.parent
    try:
        pinned = json.loads(pin_manifest.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"pinned manifest not found: {pin_manifest}")
    except json.JSONDecodeError as exc:
        raise DataError(f"{pin_manifest}: not valid JSON: {exc}")
    assignments = dict(pinned.get("assignments", {}))
    frozen_ids = {pid for pid, split in assignments.items() if split != "train"}

    docs = rank_documents(load_ranked_documents(align_dir))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    new_assignments = {pid: split for pid, split in assignments.items()
                       if split != "train"}
    pairs: list[tuple[str, str]] = []
    boundaries: list[tuple[str, int, int]] = []
    for doc in docs:
        if doc.pair_id in frozen_ids:
            continue
        start = len(pairs)
        pairs.extend((c.src_text, c.tgt_text) for c in doc.candidates)
        boundaries.append((doc.pair_id, start, len(pairs)))
        new_assignments[doc.pair_id] = "train"

    write_corpus(Corpus("train", tuple(pairs), tuple(boundaries)), out_dir / "train")
    for name in ("test", "dev"):
        for ext in (".src", ".tgt", ".boundaries"):
            src = pinned_dir / f"{name}{ext}"
            if not src.exists():
                raise DataError(f"pinned split file missing: {src}")
            if src.resolve() != (out_dir / f"{name}{ext}").resolve():
                shutil.copy(src, out_dir / f"{name}{ext}")

    counts = {name: dict(pinned.get("counts", {}).get(name, {}))
              for name in ("test", "dev")}
    counts["train"] = {"documents": len(boundaries), "kept_pairs": len(pairs),
                       "deleted_pairs": 0}
    manifest = {
        "assignments": new_assignments,
        "counts": counts,
        "judged_candidates": pinned.get("judged_candidates", 0),
        "document_outcomes": pinned.get("document_outcomes", []),
        "warnings": pinned.get("warnings", []) + ["train rebuilt; test/dev pinned"],
        "config": pinned.get("config", {}),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")
    return (f"split: train rebuilt with {len(boundaries)} documents, "
            f"test/dev pinned from {pin_manifest}")


def format_length_report(name: str, src_stats, tgt_stats) -> str:
    lines = [f"{name}\tmean\tmedian\tstddev"]
    for side, st in (("source", src_stats), ("target", tgt_stats)):
        lines.append(f"{side}\t{st.mean:.2f}\t{st.median:.2f}\t{st.stddev:.2f}")
    return "\n".join(lines)


def run_length_stats(corpus_base: Path) -> str:
    corpus = read_corpus(Path(corpus_base))
    return format_length_report(
        corpus.name, length_stats(corpus, "source"), length_stats(corpus, "target")
    )


def run_lm_similarity(paths: Sequence[Path], order: int = 4,
                      discount: float = 0.75) -> str:
    """Token files, one sentence per line; prints the cross-likelihood table."""
    from .analysis import lm_similarity_matrix
    from .corpus import read_lines

    corpora = []
    for path in paths:
        path = Path(path)
        sents = [line.split() for line in read_lines(path) if line.strip()]
        if not sents:
            raise DataError(f"{path}: no sentences")
        corpora.append((path.stem, sents))
    names, rows = lm_similarity_matrix(corpora, order=order, discount=discount)
    width = max(len(n) for n in names)
    out = ["\t".join(["model".ljust(width)] + [n.ljust(10) for n in names])]
    for name, row in zip(names, rows):
        cells = [f"{v:.4f}".ljust(10) for v in row]
        out.append("\t".join([name.ljust(width)] + cells))
    return "\n".join(out)


def run_stats_stage(split_dir: Path, out_dir: Path, order: int = 4) -> str:
    """Length stats per split plus an LM cross-likelihood table over the
    target sides of the non-empty splits."""
    split_dir = Path(split_dir)
    inputs = [p for name in ("test", "dev", "train")
              for p in (split_dir / f"{name}.src", split_dir / f"{name}.tgt")]
    params = {"stage": "stats", "order": order}
    fp = stage_fingerprint(inputs, params)
    if is_up_to_date(out_dir, "stats", fp):
        return "stats: up to date"

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sections = []
    lm_inputs = []
    for name in ("test", "dev", "train"):
        corpus = read_corpus(split_dir / name, name=name)
        if len(corpus) == 0:
            sections.append(f"{name}: empty split, skipped")
            continue
        sections.append(format_length_report(
            name, length_stats(corpus, "source"), length_stats(corpus, "target")
        ))
        lm_inputs.append((name, [tgt.split() for _, tgt in corpus.pairs]))
    if len(lm_inputs) >= 2:
        from .analysis import lm_similarity_matrix

        names, rows = lm_similarity_matrix(lm_inputs, order=order)
        width = max(len(n) for n in names)
        table = ["\t".join(["model".ljust(width)] + [n.ljust(10) for n in names])]
        for name, row in zip(names, rows):
            table.append("\t".join([name.ljust(width)]
                                   + [f"{v:.4f}".ljust(10) for v in row]))
        sections.append("\n".join(table))
    report = "\n\n".join(sections) + "\n"
    (out_dir / "stats.txt").write_text(report, encoding="utf-8")
    write_stamp(out_dir, "stats", fp)
    return f"stats: report written to {out_dir / 'stats.txt'}"


def run_pipeline(cfg: PipelineConfig) -> list[str]:
    """clean → align → split emission → stats, each stage resumable.

    The split stage only emits when the judgment log already completes the
    build; otherwise the pipeline stops there and points at the judgment
    front-ends, which is the expected state on a first run.
    """
    if not cfg.manifest:
        raise ValidationError("pipeline: config needs manifest=<tsv>")
    if not cfg.out:
        raise ValidationError("pipeline: config needs out=<dir>")
    out = Path(cfg.out)
    cleaned = out / "cleaned"
    aligned = out / "aligned"
    splits = out / "splits"
    messages = []

    messages.append(run_clean_stage(
        Path(cfg.manifest), cleaned, cfg.lang_a, cfg.lang_b, cfg.n, cfg.m,
        cfg.seed, cfg.imbalance_factor,
        Path(cfg.meta_patterns) if cfg.meta_patterns else None, cfg.jobs,
    ))
    messages.append(run_align_stage(
        cleaned / "manifest.tsv", aligned, cfg.measure, cfg.th, cfg.k,
        cfg.band, Path(cfg.embeddings) if cfg.embeddings else None,
        cfg.provider, cfg.translate_cmd, cfg.length_unit, cfg.max_order,
        cfg.jobs,
    ))

    from .splitbuilder import SplitConfig, SplitSession, emit_split, load_ranked_documents

    log_path = Path(cfg.log) if cfg.log else out / "judgments.jsonl"
    fp = split_fingerprint(aligned, log_path if log_path.exists() else None,
                           cfg.volume_test, cfg.volume_dev, cfg.ratio)
    if is_up_to_date(splits, "split", fp):
        messages.append("split: up to date")
    else:
        session = SplitSession(
            load_ranked_documents(aligned),
            SplitConfig(cfg.volume_test, cfg.volume_dev, cfg.ratio),
            log_path,
        )
        if not session.is_complete():
            nxt = session.next_unjudged()
            messages.append(
                f"split: waiting for judgments (next: {nxt.key if nxt else '?'}); "
                f"run `paramine split --alignments {aligned} --log {log_path} "
                "--interactive` or `--serve HOST:PORT`"
            )
            return messages
        manifest = emit_split(session, splits)
        write_stamp(splits, "split", fp)
        counts = manifest.counts
        messages.append(
            "split: "
            + ", ".join(f"{name} {counts[name]['documents']} docs / "
                        f"{counts[name]['kept_pairs']} pairs"
                        for name in ("test", "dev", "train"))
        )

    messages.append(run_stats_stage(splits, out / "stats", order=cfg.max_order))
    return messages
