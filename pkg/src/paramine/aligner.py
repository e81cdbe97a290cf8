"""Monotonic one-to-one sentence alignment by dynamic programming.

Each source sentence matches at most one target sentence and matches never
cross. Skipping a sentence costs nothing; a match contributes its similarity
score, and only cells passing the similarity threshold and the length-ratio
test may match at all. The table maximizes the total score of kept matches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .corpus import AlignmentResult, DocumentPair, Match
from .errors import ValidationError

LENGTH_UNITS = ("tokens", "chars")

# backtrace choices
_MATCH, _SKIP_SRC, _SKIP_TGT = 1, 2, 3


@dataclass(frozen=True)
class AlignerConfig:
    th: float
    k: float
    band_width: Optional[int] = None
    length_unit: str = "tokens"

    def __post_init__(self):
        if not self.k > 1.0:
            raise ValidationError(f"aligner: k must be > 1, got {self.k}")
        if self.band_width is not None and self.band_width < 1:
            raise ValidationError(
                f"aligner: band width must be positive, got {self.band_width}"
            )
        if self.length_unit not in LENGTH_UNITS:
            raise ValidationError(
                f"aligner: length unit must be one of {LENGTH_UNITS}, "
                f"got {self.length_unit!r}"
            )


def admissible(score: float, src_len: int, tgt_len: int, cfg: AlignerConfig) -> bool:
    """A cell may match iff its score reaches the threshold and neither side
    is k or more times longer than the other. Zero-length sentences never
    match."""
    if src_len <= 0 or tgt_len <= 0:
        return False
    if score < cfg.th:
        return False
    return max(src_len, tgt_len) < cfg.k * min(src_len, tgt_len)


def _lengths(sentences, unit: str) -> list[int]:
    if unit == "chars":
        return [len(s.text) for s in sentences]
    return [len(s.tokens) for s in sentences]


def align(pair: DocumentPair, matrix: np.ndarray, cfg: AlignerConfig) -> AlignmentResult:
    """Maximal-score monotonic matching for one document pair.

    Ties in the table are resolved deterministically: keeping a match beats
    skipping, and skipping a source sentence beats skipping a target one.
    An optional band restricts matches to a corridor around the diagonal;
    a band wide enough to cover the matrix changes nothing.
    """
    n, m = len(pair.source), len(pair.target)
    if matrix.shape != (n, m):
        raise ValidationError(
            f"pair {pair.pair_id}: score matrix {matrix.shape} does not match "
            f"documents of size ({n}, {m})"
        )

    src_len = _lengths(pair.source.sentences, cfg.length_unit)
    tgt_len = _lengths(pair.target.sentences, cfg.length_unit)
    scores = matrix.tolist()
    slope = m / n if n else 0.0

    ok = [[False] * m for _ in range(n)]
    for i in range(n):
        row_scores = scores[i]
        li = src_len[i]
        for j in range(m):
            if cfg.band_width is not None and abs(i * slope - j) > cfg.band_width:
                continue
            ok[i][j] = admissible(row_scores[j], li, tgt_len[j], cfg)

    # best[i][j]: best total over the first i source / j target sentences
    best = [[0.0] * (m + 1) for _ in range(n + 1)]
    move = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        best_prev = best[i - 1]
        best_row = best[i]
        move_row = move[i]
        ok_row = ok[i - 1]
        score_row = scores[i - 1]
        for j in range(1, m + 1):
            val = best_prev[j]
            choice = _SKIP_SRC
            left = best_row[j - 1]
            if left > val:
                val = left
                choice = _SKIP_TGT
            if ok_row[j - 1]:
                diag = best_prev[j - 1] + score_row[j - 1]
                if diag >= val:
                    val = diag
                    choice = _MATCH
            best_row[j] = val
            move_row[j] = choice

    matches: list[Match] = []
    i, j = n, m
    while i > 0 and j > 0:
        step = move[i][j]
        if step == _MATCH:
            matches.append(Match(i - 1, j - 1, scores[i - 1][j - 1]))
            i -= 1
            j -= 1
        elif step == _SKIP_SRC:
            i -= 1
        else:
            j -= 1
    matches.reverse()
    return AlignmentResult.from_matches(pair.pair_id, tuple(matches))


def align_all(pairs: Sequence[DocumentPair], measure, cfg: AlignerConfig,
              jobs: int = 1) -> list[AlignmentResult]:
    """Score and align a batch of document pairs, preserving input order."""
    from concurrent.futures import ThreadPoolExecutor

    from .similarity import score_matrix

    def one(pair: DocumentPair) -> AlignmentResult:
        return align(pair, score_matrix(pair, measure), cfg)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, pairs))
    return [one(p) for p in pairs]
