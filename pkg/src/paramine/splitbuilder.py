"""Evaluation-split construction driven by human judgments.

Documents are consumed in descending order of average alignment score. Every
candidate pair of a consumed document gets a good/bad verdict; the document's
good pairs enter the split only when good > candidates * ratio (strict). The
test split is filled first, then the dev split continues down the ranking.
Everything else, including consumed-but-rejected documents, goes to train.

Session state is a pure function of (ranked documents, judgment log, config):
the log is append-only JSON lines, later records supersede earlier ones, and
replaying it reconstructs the exact pre-crash state.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from .corpus import Corpus, write_corpus
from .errors import DataError, StateError, ValidationError

PHASE_TEST = "test"
PHASE_DEV = "dev"
PHASE_DONE = "done"

VERDICT_GOOD = "good"
VERDICT_BAD = "bad"

SPLIT_NAMES = ("test", "dev", "train")


@dataclass(frozen=True)
class SplitConfig:
    volume_test: int
    volume_dev: int
    ratio: float

    def __post_init__(self):
        if self.volume_test < 0 or self.volume_dev < 0:
            raise ValidationError("split: volumes must be >= 0")
        if not 0.0 <= self.ratio <= 1.0:
            raise ValidationError(f"split: ratio must be in [0, 1], got {self.ratio}")

    def volume_for(self, phase: str) -> int:
        return self.volume_test if phase == PHASE_TEST else self.volume_dev


@dataclass(frozen=True)
class CandidatePair:
    """One aligned sentence pair queued for judgment."""

    pair_id: str
    src_index: int
    tgt_index: int
    score: float
    src_text: str
    tgt_text: str

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.pair_id, self.src_index, self.tgt_index)


@dataclass(frozen=True)
class RankedDocument:
    """A document pair with its full list of aligned candidates."""

    pair_id: str
    avg_score: float
    candidates: tuple[CandidatePair, ...]


@dataclass(frozen=True)
class Judgment:
    pair_id: str
    src_index: int
    tgt_index: int
    verdict: str
    annotator: str
    timestamp: str

    def __post_init__(self):
        if self.verdict not in (VERDICT_GOOD, VERDICT_BAD):
            raise ValidationError(
                f"verdict must be {VERDICT_GOOD!r} or {VERDICT_BAD!r}, "
                f"got {self.verdict!r}"
            )

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.pair_id, self.src_index, self.tgt_index)

    def to_json(self) -> str:
        return json.dumps(
            {"pair_id": self.pair_id, "src_index": self.src_index,
             "tgt_index": self.tgt_index, "verdict": self.verdict,
             "annotator": self.annotator, "timestamp": self.timestamp},
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "Judgment":
        rec = json.loads(line)
        return cls(
            pair_id=str(rec["pair_id"]), src_index=int(rec["src_index"]),
            tgt_index=int(rec["tgt_index"]), verdict=str(rec["verdict"]),
            annotator=str(rec.get("annotator", "")),
            timestamp=str(rec.get("timestamp", "")),
        )


def rank_documents(docs: Sequence) -> list:
    """Descending by avg_score, ties by pair_id; works on anything carrying
    those two attributes."""
    return sorted(docs, key=lambda d: (-d.avg_score, d.pair_id))


@dataclass(frozen=True)
class DocOutcome:
    pair_id: str
    phase: str
    judged: int
    good: int
    bad: int
    accepted: bool

    def to_dict(self) -> dict:
        return {"pair_id": self.pair_id, "phase": self.phase, "judged": self.judged,
                "good": self.good, "bad": self.bad, "accepted": self.accepted}


@dataclass(frozen=True)
class DocProgress:
    pair_id: str
    judged: int
    total: int


@dataclass(frozen=True)
class BuildState:
    """Snapshot of the split build; recomputed from scratch on demand."""

    phase: str
    next_pair: Optional[CandidatePair]
    accepted_test: tuple[CandidatePair, ...]
    accepted_dev: tuple[CandidatePair, ...]
    outcomes: tuple[DocOutcome, ...]
    progress: Optional[DocProgress]
    judged_count: int
    exhausted: tuple[str, ...] = ()  # phases that ran out of documents

    @property
    def complete(self) -> bool:
        return self.phase == PHASE_DONE

    def accepted_for(self, phase: str) -> tuple[CandidatePair, ...]:
        return self.accepted_test if phase == PHASE_TEST else self.accepted_dev


def build_split(ranked: Sequence[RankedDocument],
                judgments: dict[tuple[str, int, int], Judgment],
                cfg: SplitConfig) -> BuildState:
    """Fold the judgment log over the ranking.

    Suspends (next_pair set) at the first candidate without a verdict. The
    volume check happens before consuming another document, so the last
    accepted document may overshoot the target.
    """
    accepted = {PHASE_TEST: [], PHASE_DEV: []}
    outcomes: list[DocOutcome] = []
    exhausted: list[str] = []
    judged_count = sum(
        1 for doc in ranked for c in doc.candidates if c.key in judgments
    )

    idx = 0
    for phase in (PHASE_TEST, PHASE_DEV):
        volume = cfg.volume_for(phase)
        while len(accepted[phase]) < volume:
            if idx >= len(ranked):
                exhausted.append(phase)
                break
            doc = ranked[idx]
            good: list[CandidatePair] = []
            bad = 0
            for cand in doc.candidates:
                verdict = judgments.get(cand.key)
                if verdict is None:
                    done_in_doc = sum(
                        1 for c in doc.candidates if c.key in judgments
                    )
                    return BuildState(
                        phase=phase, next_pair=cand,
                        accepted_test=tuple(accepted[PHASE_TEST]),
                        accepted_dev=tuple(accepted[PHASE_DEV]),
                        outcomes=tuple(outcomes),
                        progress=DocProgress(doc.pair_id, done_in_doc,
                                             len(doc.candidates)),
                        judged_count=judged_count,
                        exhausted=tuple(exhausted),
                    )
                if verdict.verdict == VERDICT_GOOD:
                    good.append(cand)
                else:
                    bad += 1
            is_accepted = len(good) > len(doc.candidates) * cfg.ratio
            outcomes.append(DocOutcome(
                pair_id=doc.pair_id, phase=phase, judged=len(doc.candidates),
                good=len(good), bad=bad, accepted=is_accepted,
            ))
            if is_accepted:
                accepted[phase].extend(good)
            idx += 1

    return BuildState(
        phase=PHASE_DONE, next_pair=None,
        accepted_test=tuple(accepted[PHASE_TEST]),
        accepted_dev=tuple(accepted[PHASE_DEV]),
        outcomes=tuple(outcomes), progress=None,
        judged_count=judged_count, exhausted=tuple(exhausted),
    )


class SplitSession:
    """Owns the ranking, the durable judgment log, and the derived state."""

    def __init__(self, docs: Sequence[RankedDocument], cfg: SplitConfig,
                 log_path: Path):
        self.cfg = cfg
        self.log_path = Path(log_path)
        self.ranked: list[RankedDocument] = rank_documents(docs)
        self._candidates: dict[tuple[str, int, int], CandidatePair] = {}
        for doc in self.ranked:
            for cand in doc.candidates:
                if cand.key in self._candidates:
                    raise ValidationError(f"duplicate candidate {cand.key}")
                self._candidates[cand.key] = cand
        self.judgments: dict[tuple[str, int, int], Judgment] = {}
        self.replay_warnings: list[str] = []
        self._state: Optional[BuildState] = None
        if self.log_path.exists():
            self._replay()

    def _replay(self) -> None:
        with open(self.log_path, "r", encoding="utf-8") as fh:
            lines = fh.read().split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                j = Judgment.from_json(line)
            except (json.JSONDecodeError, KeyError, TypeError,
                    ValueError, ValidationError) as exc:
                if lineno == len(lines):
                    # interrupted final write; drop it and keep going
                    self.replay_warnings.append(
                        f"{self.log_path}:{lineno}: dropped truncated record"
                    )
                    continue
                raise DataError(f"{self.log_path}:{lineno}: bad judgment record: {exc}")
            if j.key not in self._candidates:
                self.replay_warnings.append(
                    f"{self.log_path}:{lineno}: judgment for unknown candidate "
                    f"{j.key}, ignored"
                )
                continue
            self.judgments[j.key] = j

    def state(self) -> BuildState:
        if self._state is None:
            self._state = build_split(self.ranked, self.judgments, self.cfg)
        return self._state

    def candidate(self, key: tuple[str, int, int]) -> CandidatePair:
        try:
            return self._candidates[key]
        except KeyError:
            raise ValidationError(f"no candidate pair {key} in this session")

    def next_unjudged(self) -> Optional[CandidatePair]:
        return self.state().next_pair

    def record_judgment(self, pair_id: str, src_index: int, tgt_index: int,
                        verdict: str, annotator: str,
                        timestamp: Optional[str] = None) -> tuple[Judgment, Optional[str]]:
        """Append one verdict; returns (judgment, warning-or-None)."""
        key = (pair_id, src_index, tgt_index)
        if key not in self._candidates:
            raise ValidationError(f"no candidate pair {key} in this session")
        if timestamp is None:
            timestamp = datetime.now(timezone.utc).isoformat()
        j = Judgment(pair_id, src_index, tgt_index, verdict, annotator, timestamp)
        warning = None
        if key in self.judgments:
            warning = f"superseding earlier {self.judgments[key].verdict!r} verdict for {key}"
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(j.to_json() + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self.judgments[key] = j
        self._state = None
        return j, warning

    def is_complete(self) -> bool:
        return self.state().complete


@dataclass
class SplitManifest:
    assignments: dict[str, str]                 # pair_id -> test|dev|train
    counts: dict[str, dict[str, int]]           # split -> documents/kept/deleted
    judged_candidates: int
    document_outcomes: list[dict]
    warnings: list[str]
    config: dict

    def to_dict(self) -> dict:
        return {
            "assignments": self.assignments,
            "counts": self.counts,
            "judged_candidates": self.judged_candidates,
            "document_outcomes": self.document_outcomes,
            "warnings": self.warnings,
            "config": self.config,
        }


def _corpus_from_docs(name: str, docs: list[tuple[str, list[CandidatePair]]]) -> Corpus:
    pairs: list[tuple[str, str]] = []
    boundaries: list[tuple[str, int, int]] = []
    for pair_id, cands in docs:
        start = len(pairs)
        pairs.extend((c.src_text, c.tgt_text) for c in cands)
        boundaries.append((pair_id, start, len(pairs)))
    return Corpus(name=name, pairs=tuple(pairs), doc_boundaries=tuple(boundaries))


def build_manifest(session: SplitSession) -> tuple[SplitManifest, dict[str, Corpus]]:
    """Assignments, reconciled counts, and the three split corpora.

    Test and dev keep only good pairs of accepted documents; their judged bad
    pairs are the deleted lines. Train keeps every aligned pair of every
    remaining document, judged or not.
    """
    state = session.state()
    if not state.complete:
        raise StateError(
            "split build is not complete; "
            f"phase={state.phase}, next={state.next_pair.key if state.next_pair else None}"
        )

    outcome_by_id = {o.pair_id: o for o in state.outcomes}
    assignments: dict[str, str] = {}
    split_docs: dict[str, list[tuple[str, list[CandidatePair]]]] = {
        "test": [], "dev": [], "train": []
    }
    counts = {name: {"documents": 0, "kept_pairs": 0, "deleted_pairs": 0}
              for name in SPLIT_NAMES}

    for doc in session.ranked:
        outcome = outcome_by_id.get(doc.pair_id)
        if outcome is not None and outcome.accepted:
            split = outcome.phase
            kept = [c for c in doc.candidates
                    if session.judgments[c.key].verdict == VERDICT_GOOD]
            counts[split]["deleted_pairs"] += outcome.bad
        else:
            split = "train"
            kept = list(doc.candidates)
        assignments[doc.pair_id] = split
        split_docs[split].append((doc.pair_id, kept))
        counts[split]["documents"] += 1
        counts[split]["kept_pairs"] += len(kept)

    warnings = list(session.replay_warnings)
    for phase in (PHASE_TEST, PHASE_DEV):
        got = len(state.accepted_for(phase))
        want = session.cfg.volume_for(phase)
        if phase in state.exhausted and got < want:
            warnings.append(
                f"{phase} volume not reached: {got} of {want} pairs "
                "before documents ran out"
            )
        if got == 0:
            warnings.append(f"{phase} split is empty")

    manifest = SplitManifest(
        assignments=assignments,
        counts=counts,
        judged_candidates=state.judged_count,
        document_outcomes=[o.to_dict() for o in state.outcomes],
        warnings=warnings,
        config={"volume_test": session.cfg.volume_test,
                "volume_dev": session.cfg.volume_dev,
                "ratio": session.cfg.ratio},
    )
    corpora = {name: _corpus_from_docs(name, split_docs[name])
               for name in SPLIT_NAMES}
    return manifest, corpora


def emit_split(session: SplitSession, out_dir: Path) -> SplitManifest:
    """Write manifest.json and the three split corpora under out_dir."""
    manifest, corpora = build_manifest(session)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in SPLIT_NAMES:
        write_corpus(corpora[name], out_dir / name)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_ranked_documents(align_dir: Path) -> list[RankedDocument]:
    """Read an alignment directory: summary.tsv (pair_id, matches, avg score)
    plus one <pair_id>.align.tsv per document with the matched pairs."""
    align_dir = Path(align_dir)
    summary = align_dir / "summary.tsv"
    if not summary.exists():
        raise DataError(f"no alignment summary at {summary}")
    docs: list[RankedDocument] = []
    with open(summary, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{summary}:{lineno}: expected 3 columns, got {len(parts)}")
            pair_id, num_matches, avg_score = parts[0], int(parts[1]), float(parts[2])
            cands = _read_alignment_file(align_dir / f"{pair_id}.align.tsv", pair_id)
            if len(cands) != num_matches:
                raise DataError(
                    f"{summary}:{lineno}: {pair_id} lists {num_matches} matches "
                    f"but its file has {len(cands)}"
                )
            docs.append(RankedDocument(pair_id=pair_id, avg_score=avg_score,
                                       candidates=tuple(cands)))
    return docs


def _read_alignment_file(path: Path, pair_id: str) -> list[CandidatePair]:
    if not path.exists():
        raise DataError(f"missing alignment file {path}")
    cands: list[CandidatePair] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise DataError(f"{path}:{lineno}: expected 5 columns, got {len(parts)}")
            cands.append(CandidatePair(
                pair_id=pair_id, src_index=int(parts[0]), tgt_index=int(parts[1]),
                score=float(parts[2]), src_text=parts[3], tgt_text=parts[4],
            ))
    return cands
