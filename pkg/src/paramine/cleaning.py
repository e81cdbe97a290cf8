"""Cleaning of raw downloaded subtitle documents.

Five steps: encoding normalization (NFKC), rule-based language-mismatch
detection, sentence splitting on terminal punctuation (documents without any
punctuation are dropped), meta-token removal, and elimination of document
pairs whose sides differ too much in sentence count.
"""

from __future__ import annotations

import json
import math
import random
import re
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .corpus import Document, ManifestEntry, read_lines, save_document
from .errors import DataError, ValidationError

NOISE_LABEL = "Noise"

# Terminal punctuation: ASCII plus full-width counterparts. The ideographic
# full stop survives NFKC; the full-width ．！？ normalize to ASCII but are
# kept here so the splitter also works on un-normalized text.
DEFAULT_DELIMITERS = frozenset(".!?。．！？")

DEFAULT_META_PATTERNS = ("[Music]", "<<")


@dataclass(frozen=True)
class CharsetProfile:
    """A language label plus the set of codepoints that signal it."""

    language_label: str
    charset: frozenset[int]

    @classmethod
    def from_ranges(cls, label: str, ranges: Iterable[tuple[int, int]]) -> "CharsetProfile":
        chars = set()
        for lo, hi in ranges:
            if lo > hi:
                raise ValidationError(f"charset profile {label}: bad range {lo:#x}-{hi:#x}")
            chars.update(range(lo, hi + 1))
        return cls(language_label=label, charset=frozenset(chars))

    @classmethod
    def english(cls) -> "CharsetProfile":
        return cls.from_ranges("en", [(ord("a"), ord("z")), (ord("A"), ord("Z"))])

    @classmethod
    def japanese(cls) -> "CharsetProfile":
        # hiragana and katakana blocks
        return cls.from_ranges("ja", [(0x3040, 0x309F), (0x30A0, 0x30FF)])


BUILTIN_PROFILES = {
    "en": CharsetProfile.english,
    "ja": CharsetProfile.japanese,
}


def profile_for(label: str) -> CharsetProfile:
    try:
        return BUILTIN_PROFILES[label]()
    except KeyError:
        raise ValidationError(
            f"no built-in charset profile for language {label!r}; "
            f"known: {sorted(BUILTIN_PROFILES)}"
        )


@dataclass(frozen=True)
class DetectorConfig:
    n: int
    m: int
    profiles: tuple[CharsetProfile, CharsetProfile]
    rng_seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"detector: n must be positive, got {self.n}")
        if not 1 <= self.m <= self.n:
            raise ValidationError(f"detector: m must satisfy 1 <= m <= n, got m={self.m}")
        if len(self.profiles) != 2:
            raise ValidationError("detector: exactly two charset profiles required")
        a, b = self.profiles
        if not a.charset.isdisjoint(b.charset):
            raise ValidationError(
                f"detector: charsets for {a.language_label} and {b.language_label} overlap"
            )


def normalize_text(raw: str) -> str:
    """Unicode NFKC normalization; idempotent."""
    return unicodedata.normalize("NFKC", raw)


def detect_language(doc: Document, cfg: DetectorConfig) -> str:
    """Classify a document as one of the two profile labels or Noise.

    Samples min(n, len(doc)) distinct sentences with an RNG seeded from
    (rng_seed, doc_id), so the result does not depend on processing order.
    Each sentence goes to the first profile only if its character count
    strictly exceeds the second profile's count; ties go to the second.
    The document gets a profile's label iff that profile won at least m
    sentences (scaled proportionally when the document is shorter than n).
    """
    if len(doc) == 0:
        raise ValidationError(f"detect_language: document {doc.doc_id} is empty")

    if len(doc) > cfg.n:
        rng = random.Random(f"{cfg.rng_seed}:{doc.doc_id}")
        sampled = rng.sample(doc.sentences, cfg.n)
    else:
        sampled = doc.sentences

    first, second = cfg.profiles
    first_sentences = 0
    second_sentences = 0
    for sent in sampled:
        c_first = sum(1 for ch in sent.text if ord(ch) in first.charset)
        c_second = sum(1 for ch in sent.text if ord(ch) in second.charset)
        if c_first > c_second:
            first_sentences += 1
        else:
            second_sentences += 1

    threshold = cfg.m if len(doc) >= cfg.n else math.ceil(cfg.m * len(doc) / cfg.n)
    if first_sentences >= threshold:
        return first.language_label
    if second_sentences >= threshold:
        return second.language_label
    return NOISE_LABEL


def split_sentences(paragraph: str, delimiters: frozenset[str] = DEFAULT_DELIMITERS) -> list[str]:
    """Split after terminal punctuation followed by a space or end of line.

    The delimiter stays at the end of its sentence; empty segments are
    dropped. No non-whitespace character is ever lost.
    """
    sentences = []
    buf: list[str] = []
    for i, ch in enumerate(paragraph):
        buf.append(ch)
        if ch in delimiters:
            at_end = i + 1 == len(paragraph)
            if at_end or paragraph[i + 1].isspace():
                segment = "".join(buf).strip()
                if segment:
                    sentences.append(segment)
                buf = []
    segment = "".join(buf).strip()
    if segment:
        sentences.append(segment)
    return sentences


def has_punctuation(doc_text: str, delimiters: frozenset[str] = DEFAULT_DELIMITERS) -> bool:
    """True iff any splitting punctuation mark occurs in the text."""
    return any(ch in delimiters for ch in doc_text)


@dataclass(frozen=True)
class MetaPattern:
    """One meta-token pattern, literal by default or a user regex."""

    raw: str
    regex: re.Pattern

    @classmethod
    def literal(cls, text: str) -> "MetaPattern":
        return cls(raw=text, regex=re.compile(re.escape(text)))

    @classmethod
    def from_regex(cls, pattern: str) -> "MetaPattern":
        try:
            return cls(raw=f"re:{pattern}", regex=re.compile(pattern))
        except re.error as exc:
            raise ValidationError(f"bad meta-token regex {pattern!r}: {exc}")


def default_meta_patterns() -> list[MetaPattern]:
    return [MetaPattern.literal(p) for p in DEFAULT_META_PATTERNS]


def load_meta_patterns(path: Path) -> list[MetaPattern]:
    """Read a pattern file: one pattern per line, literal unless prefixed
    with "re:". Blank lines and lines starting with # are skipped."""
    patterns = []
    for line in read_lines(path):
        line = line.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        if line.startswith("re:"):
            patterns.append(MetaPattern.from_regex(line[3:]))
        else:
            patterns.append(MetaPattern.literal(line))
    return patterns


def remove_meta_tokens(sentence: str, patterns: Sequence[MetaPattern]) -> tuple[str, int]:
    """Strip all pattern occurrences and collapse whitespace.

    Returns the cleaned (possibly empty) string and the number of
    occurrences removed; the caller drops sentences that end up empty.
    """
    removed = 0
    for pat in patterns:
        sentence, n = pat.regex.subn(" ", sentence)
        removed += n
    return " ".join(sentence.split()), removed


def filter_imbalanced(src_count: int, tgt_count: int, factor: float = 2.0) -> bool:
    """True to keep the pair, False to drop it.

    Drops when one side has `factor` times or more sentences than the other
    (the boundary itself is a drop). Symmetric in source/target.
    """
    if src_count <= 0 or tgt_count <= 0:
        raise ValidationError("filter_imbalanced: empty document side")
    return max(src_count, tgt_count) < factor * min(src_count, tgt_count)


@dataclass
class CleaningReport:
    """Per-step counters, mergeable across parallel workers."""

    files_normalized: int = 0
    language_mismatches_dropped: int = 0
    no_punctuation_dropped: int = 0
    meta_tokens_removed: int = 0
    imbalanced_pairs_dropped: int = 0
    files_skipped: int = 0
    pairs_kept: int = 0

    def merge(self, other: "CleaningReport") -> "CleaningReport":
        return CleaningReport(
            **{k: getattr(self, k) + getattr(other, k) for k in self.__dataclass_fields__}
        )

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class CleaningOptions:
    detector: DetectorConfig
    src_label: str
    tgt_label: str
    meta_patterns: tuple[MetaPattern, ...] = ()
    imbalance_factor: float = 2.0
    delimiters: frozenset[str] = DEFAULT_DELIMITERS


@dataclass
class CleanedPair:
    pair_id: str
    source: Document
    target: Document


def _clean_side(path: Path, doc_id: str, expected_label: str, opts: CleaningOptions,
                report: CleaningReport, records: list[dict]) -> Optional[Document]:
    """Run steps 1-4 on one file; None means the pair must be dropped."""
    fname = str(path)
    try:
        raw_lines = read_lines(path)
    except DataError as exc:
        report.files_skipped += 1
        records.append({"file": fname, "step": "read", "kept": False, "error": str(exc)})
        return None

    lines = [normalize_text(ln) for ln in raw_lines if ln.strip()]
    report.files_normalized += 1
    records.append({"file": fname, "step": "normalize", "kept": True, "lines": len(lines)})
    if not lines:
        report.files_skipped += 1
        records.append({"file": fname, "step": "read", "kept": False, "error": "empty file"})
        return None

    line_doc = Document.from_lines(doc_id, "und", lines)
    label = detect_language(line_doc, opts.detector)
    if label != expected_label:
        report.language_mismatches_dropped += 1
        records.append({"file": fname, "step": "language", "kept": False,
                        "detected": label, "expected": expected_label})
        return None
    records.append({"file": fname, "step": "language", "kept": True, "detected": label})

    full_text = "\n".join(lines)
    if not has_punctuation(full_text, opts.delimiters):
        report.no_punctuation_dropped += 1
        records.append({"file": fname, "step": "punctuation", "kept": False})
        return None
    records.append({"file": fname, "step": "punctuation", "kept": True})

    sentences: list[str] = []
    removed_total = 0
    for line in lines:
        for sent in split_sentences(line, opts.delimiters):
            cleaned, removed = remove_meta_tokens(sent, opts.meta_patterns)
            removed_total += removed
            if cleaned:
                sentences.append(cleaned)
    report.meta_tokens_removed += removed_total
    records.append({"file": fname, "step": "meta_tokens", "kept": True,
                    "removed": removed_total, "sentences": len(sentences)})
    if not sentences:
        report.files_skipped += 1
        records.append({"file": fname, "step": "split", "kept": False,
                        "error": "no sentences left"})
        return None
    return Document.from_lines(doc_id, expected_label, sentences)


def clean_pair(entry: ManifestEntry, opts: CleaningOptions) -> tuple[Optional[CleanedPair], CleaningReport, list[dict]]:
    """Apply the full cleaning procedure to one document pair."""
    report = CleaningReport()
    records: list[dict] = []
    source = _clean_side(entry.src_path, entry.pair_id, opts.src_label, opts, report, records)
    target = _clean_side(entry.tgt_path, entry.pair_id, opts.tgt_label, opts, report, records)
    if source is None or target is None:
        return None, report, records

    if not filter_imbalanced(len(source), len(target), opts.imbalance_factor):
        report.imbalanced_pairs_dropped += 1
        records.append({"pair": entry.pair_id, "step": "imbalance", "kept": False,
                        "src_sentences": len(source), "tgt_sentences": len(target)})
        return None, report, records
    records.append({"pair": entry.pair_id, "step": "imbalance", "kept": True,
                    "src_sentences": len(source), "tgt_sentences": len(target)})
    report.pairs_kept += 1
    return CleanedPair(entry.pair_id, source, target), report, records


def run_clean(entries: Sequence[ManifestEntry], opts: CleaningOptions, out_dir: Path,
              jobs: int = 1) -> CleaningReport:
    """Clean every manifest pair, writing per-document sentence files, an
    output manifest for the aligner, and a line-delimited report."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda e: clean_pair(e, opts), entries))
    else:
        results = [clean_pair(e, opts) for e in entries]

    total = CleaningReport()
    manifest_rows = []
    with open(out_dir / "report.jsonl", "w", encoding="utf-8") as rf:
        for entry, (cleaned, report, records) in zip(entries, results):
            total = total.merge(report)
            for rec in records:
                rf.write(json.dumps(rec, ensure_ascii=False) + "\n")
            if cleaned is None:
                continue
            src_name = f"{cleaned.pair_id}.src.txt"
            tgt_name = f"{cleaned.pair_id}.tgt.txt"
            save_document(cleaned.source, out_dir / src_name)
            save_document(cleaned.target, out_dir / tgt_name)
            manifest_rows.append(f"{cleaned.pair_id}\t{src_name}\t{tgt_name}")
        rf.write(json.dumps({"step": "summary", **total.to_dict()}, ensure_ascii=False) + "\n")

    with open(out_dir / "manifest.tsv", "w", encoding="utf-8") as mf:
        for row in manifest_rows:
            mf.write(row + "\n")
    return total
