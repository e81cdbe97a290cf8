"""Core data model: documents, document pairs, alignment results, corpora.

All types are immutable after construction and safe to share between
threads. Tokenization happens upstream (external morphological analyzers);
a token here is a whitespace-delimited unit of the sentence text.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import DataError, ValidationError


@dataclass(frozen=True)
class Sentence:
    """One sentence of a document, with its 0-based position."""

    index: int
    text: str
    tokens: tuple[str, ...]

    def __post_init__(self):
        if not self.text.strip():
            raise ValidationError(f"sentence {self.index}: text is empty")
        if self.tokens != tuple(self.text.split()):
            raise ValidationError(
                f"sentence {self.index}: tokens are not the whitespace split of text"
            )

    @classmethod
    def from_text(cls, index: int, text: str) -> "Sentence":
        return cls(index=index, text=text, tokens=tuple(text.split()))


@dataclass(frozen=True)
class Document:
    """Ordered sentences in one language, with provenance metadata."""

    doc_id: str
    language: str
    sentences: tuple[Sentence, ...]

    def __post_init__(self):
        for pos, sent in enumerate(self.sentences):
            if sent.index != pos:
                raise ValidationError(
                    f"document {self.doc_id}: sentence index {sent.index} at position {pos}"
                )

    @classmethod
    def from_lines(cls, doc_id: str, language: str, lines: Iterable[str]) -> "Document":
        sentences = tuple(
            Sentence.from_text(i, line) for i, line in enumerate(lines)
        )
        return cls(doc_id=doc_id, language=language, sentences=sentences)

    def __len__(self) -> int:
        return len(self.sentences)

    def texts(self) -> list[str]:
        return [s.text for s in self.sentences]


@dataclass(frozen=True)
class DocumentPair:
    """Source/target document pair, optionally with a line-aligned
    machine translation of every source sentence (the sidecar)."""

    pair_id: str
    source: Document
    target: Document
    translations: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.translations is not None and len(self.translations) != len(self.source):
            raise DataError(
                f"pair {self.pair_id}: sidecar has {len(self.translations)} lines "
                f"but source document has {len(self.source)} sentences"
            )


@dataclass(frozen=True)
class Match:
    """A 1-1 sentence match with its similarity score."""

    src_index: int
    tgt_index: int
    score: float


@dataclass(frozen=True)
class AlignmentResult:
    """Monotonic 1-1 matches for one document pair; unmatched sentences are
    implicit 0-1/1-0 gaps."""

    pair_id: str
    matches: tuple[Match, ...]
    avg_score: float

    def __post_init__(self):
        prev_src, prev_tgt = -1, -1
        for m in self.matches:
            if m.src_index <= prev_src or m.tgt_index <= prev_tgt:
                raise ValidationError(
                    f"alignment {self.pair_id}: matches not strictly increasing"
                )
            prev_src, prev_tgt = m.src_index, m.tgt_index
        expected = (
            sum(m.score for m in self.matches) / len(self.matches) if self.matches else 0.0
        )
        if not math.isclose(self.avg_score, expected, rel_tol=0, abs_tol=1e-9):
            raise ValidationError(
                f"alignment {self.pair_id}: avg_score {self.avg_score} != mean {expected}"
            )

    @classmethod
    def from_matches(cls, pair_id: str, matches: Sequence[Match]) -> "AlignmentResult":
        matches = tuple(matches)
        avg = sum(m.score for m in matches) / len(matches) if matches else 0.0
        return cls(pair_id=pair_id, matches=matches, avg_score=avg)


@dataclass(frozen=True)
class Corpus:
    """Sentence pairs plus document boundaries, so downstream splits can stay
    document-aware."""

    name: str
    pairs: tuple[tuple[str, str], ...]
    doc_boundaries: tuple[tuple[str, int, int], ...]

    def __post_init__(self):
        cursor = 0
        for pair_id, start, end in self.doc_boundaries:
            if start != cursor or end < start:
                raise ValidationError(
                    f"corpus {self.name}: boundaries do not partition contiguously "
                    f"(doc {pair_id} spans [{start}, {end}), expected start {cursor})"
                )
            cursor = end
        if cursor != len(self.pairs):
            raise ValidationError(
                f"corpus {self.name}: boundaries cover {cursor} pairs, corpus has {len(self.pairs)}"
            )

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class LengthStats:
    mean: float
    median: float
    stddev: float


def oversample_factor(max_size: int, size: int) -> int:
    """Number of copies of a corpus of `size` pairs needed to reach `max_size`."""
    return math.ceil(max_size / size)


def mix_corpora(corpora: Sequence[Corpus]) -> Corpus:
    """Concatenate corpora, oversampling each smaller one to the largest size.

    Each corpus is repeated ceil(max_size / size) times and truncated to
    exactly max_size pairs, so every member contributes the same amount.
    Deterministic: input order, original pair order within each repetition.
    """
    if not corpora:
        raise ValidationError("mix_corpora: no corpora given")
    for c in corpora:
        if len(c) == 0:
            raise ValidationError(f"mix_corpora: corpus {c.name} is empty")

    max_size = max(len(c) for c in corpora)
    pairs: list[tuple[str, str]] = []
    boundaries: list[tuple[str, int, int]] = []
    offset = 0
    for c in corpora:
        factor = oversample_factor(max_size, len(c))
        repeated = (c.pairs * factor)[:max_size]
        pairs.extend(repeated)
        remaining = max_size
        while remaining > 0:
            for pair_id, start, end in c.doc_boundaries:
                size = min(end - start, remaining)
                if size == 0:
                    continue
                boundaries.append((pair_id, offset, offset + size))
                offset += size
                remaining -= size
                if remaining == 0:
                    break
    return Corpus(
        name="+".join(c.name for c in corpora),
        pairs=tuple(pairs),
        doc_boundaries=tuple(boundaries),
    )


def length_stats(corpus: Corpus, side: str) -> LengthStats:
    """Population mean/median/stddev of per-sentence token counts on one side."""
    if side not in ("source", "target"):
        raise ValidationError(f"length_stats: side must be source or target, got {side!r}")
    if len(corpus) == 0:
        raise ValidationError(f"length_stats: corpus {corpus.name} is empty")
    pos = 0 if side == "source" else 1
    counts = [len(p[pos].split()) for p in corpus.pairs]
    return LengthStats(
        mean=statistics.fmean(counts),
        median=float(statistics.median(counts)),
        stddev=statistics.pstdev(counts),
    )


# ---------------------------------------------------------------------------
# File formats: document files (one sentence per line), pair manifests
# (TSV: pair_id, src_path, tgt_path[, translation_path]), and corpus files
# (.src/.tgt plus a .boundaries file: pair_id TAB start TAB end).


@dataclass(frozen=True)
class ManifestEntry:
    pair_id: str
    src_path: Path
    tgt_path: Path
    translation_path: Optional[Path] = None


def read_lines(path: Path) -> list[str]:
    """Read a UTF-8 text file into lines; decoding errors become DataError."""
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except FileNotFoundError:
        raise DataError(f"file not found: {path}")
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not valid UTF-8 ({exc})")
    return text.splitlines()


def load_document(path: Path, doc_id: str, language: str = "und") -> Document:
    lines = [ln for ln in read_lines(path) if ln.strip()]
    return Document.from_lines(doc_id, language, lines)


def save_document(doc: Document, path: Path) -> None:
    Path(path).write_text(
        "".join(s.text + "\n" for s in doc.sentences), encoding="utf-8"
    )


def read_pair_manifest(path: Path) -> list[ManifestEntry]:
    """Parse a tab-separated pair manifest; relative paths resolve against
    the manifest's own directory."""
    path = Path(path)
    base = path.parent
    entries = []
    for lineno, line in enumerate(read_lines(path), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.rstrip("\n").split("\t")
        if len(cols) < 3:
            raise DataError(f"{path}:{lineno}: expected at least 3 tab-separated columns")
        translation = base / cols[3] if len(cols) > 3 and cols[3] else None
        entries.append(
            ManifestEntry(
                pair_id=cols[0],
                src_path=base / cols[1],
                tgt_path=base / cols[2],
                translation_path=translation,
            )
        )
    if not entries:
        raise DataError(f"{path}: manifest is empty")
    return entries


def load_document_pair(entry: ManifestEntry, src_language: str = "und",
                       tgt_language: str = "und") -> DocumentPair:
    source = load_document(entry.src_path, entry.pair_id, src_language)
    target = load_document(entry.tgt_path, entry.pair_id, tgt_language)
    translations = None
    if entry.translation_path is not None:
        translations = tuple(read_lines(entry.translation_path))
        if len(translations) != len(source):
            raise DataError(
                f"pair {entry.pair_id}: sidecar {entry.translation_path} has "
                f"{len(translations)} lines but source has {len(source)} sentences"
            )
    return DocumentPair(
        pair_id=entry.pair_id, source=source, target=target, translations=translations
    )


def write_corpus(corpus: Corpus, base: Path) -> None:
    base = Path(base)
    base.parent.mkdir(parents=True, exist_ok=True)
    with open(base.with_suffix(".src"), "w", encoding="utf-8") as src_f, \
         open(base.with_suffix(".tgt"), "w", encoding="utf-8") as tgt_f:
        for s, t in corpus.pairs:
            src_f.write(s + "\n")
            tgt_f.write(t + "\n")
    with open(base.with_suffix(".boundaries"), "w", encoding="utf-8") as bf:
        for pair_id, start, end in corpus.doc_boundaries:
            bf.write(f"{pair_id}\t{start}\t{end}\n")


def read_corpus(base: Path, name: Optional[str] = None) -> Corpus:
    base = Path(base)
    src_lines = read_lines(base.with_suffix(".src"))
    tgt_lines = read_lines(base.with_suffix(".tgt"))
    if len(src_lines) != len(tgt_lines):
        raise DataError(
            f"{base}: .src has {len(src_lines)} lines, .tgt has {len(tgt_lines)}"
        )
    boundaries = []
    for lineno, line in enumerate(read_lines(base.with_suffix(".boundaries")), start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 3:
            raise DataError(f"{base.with_suffix('.boundaries')}:{lineno}: expected 3 columns")
        boundaries.append((cols[0], int(cols[1]), int(cols[2])))
    return Corpus(
        name=name or base.name,
        pairs=tuple(zip(src_lines, tgt_lines)),
        doc_boundaries=tuple(boundaries),
    )
