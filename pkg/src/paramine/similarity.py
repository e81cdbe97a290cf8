"""Sentence-pair similarity: translation providers and scoring measures.

Scores always compare a machine translation (or, for the raw variant, the
source itself) against a target-side sentence, so cross-language pairs are
scored in a single language.
"""

from __future__ import annotations

import math
import subprocess
from collections import Counter
from typing import Optional, Sequence

import numpy as np

from .corpus import DocumentPair, Sentence
from .embeddings import EmbeddingTable, sentence_embedding
from .errors import DataError, ValidationError


class SidecarProvider:
    """Translations come from the pair's sidecar file, one per source line."""

    mode = "sidecar-file"

    def __init__(self, pair: Optional[DocumentPair] = None):
        self._pair = pair

    def translate_document(self, pair: DocumentPair) -> list[str]:
        if pair.translations is None:
            raise DataError(
                f"pair {pair.pair_id}: this measure needs source translations, "
                "but the manifest row has no translation file"
            )
        return list(pair.translations)

    def translate(self, sentence: Sentence) -> str:
        if self._pair is None:
            raise ValidationError("sidecar provider was not bound to a document pair")
        return self.translate_document(self._pair)[sentence.index]


class CommandProvider:
    """Pipes source text through an external command, one line per sentence."""

    mode = "external-command"

    def __init__(self, command: str):
        if not command.strip():
            raise ValidationError("translation command is empty")
        self.command = command

    def _run(self, lines: list[str], context: str) -> list[str]:
        proc = subprocess.run(
            self.command, shell=True, input="\n".join(lines) + "\n",
            capture_output=True, text=True,
        )
        if proc.returncode != 0:
            raise DataError(
                f"translation command failed on {context} "
                f"(exit {proc.returncode}): {proc.stderr.strip()[:200]}"
            )
        out = proc.stdout.split("\n")
        if out and out[-1] == "":
            out.pop()
        if len(out) != len(lines):
            raise DataError(
                f"translation command returned {len(out)} lines for "
                f"{len(lines)} inputs on {context}"
            )
        return out

    def translate_document(self, pair: DocumentPair) -> list[str]:
        return self._run([s.text for s in pair.source.sentences], f"pair {pair.pair_id}")

    def translate(self, sentence: Sentence) -> str:
        return self._run([sentence.text], f"sentence {sentence.index}")[0]


class IdentityProvider:
    """Passes source text through unchanged; for same-language corpora and tests."""

    mode = "identity"

    def translate_document(self, pair: DocumentPair) -> list[str]:
        return [s.text for s in pair.source.sentences]

    def translate(self, sentence: Sentence) -> str:
        return sentence.text


def sim_bleu(hyp_tokens: Sequence[str], ref_tokens: Sequence[str], max_order: int = 4) -> float:
    """Smoothed sentence-level BLEU of a hypothesis against one reference.

    Both sides are lowercased. Order-1 precision is unsmoothed: no unigram
    match means a 0.0 score. Higher orders use add-one smoothing,
    (matches+1)/(candidates+1), which leaves exact matches at 1.0. Brevity
    penalty min(1, e^(1 - ref_len/hyp_len)) on token counts.
    """
    if max_order < 1:
        raise ValidationError(f"sim_bleu: max_order must be >= 1, got {max_order}")
    hyp = [t.lower() for t in hyp_tokens]
    ref = [t.lower() for t in ref_tokens]
    if not hyp or not ref:
        return 0.0

    log_sum = 0.0
    for n in range(1, max_order + 1):
        hyp_grams = Counter(tuple(hyp[i:i + n]) for i in range(len(hyp) - n + 1))
        ref_grams = Counter(tuple(ref[i:i + n]) for i in range(len(ref) - n + 1))
        matches = sum(min(c, ref_grams[g]) for g, c in hyp_grams.items())
        candidates = sum(hyp_grams.values())
        if n == 1:
            if matches == 0:
                return 0.0
            log_sum += math.log(matches / candidates)
        else:
            log_sum += math.log((matches + 1) / (candidates + 1))

    bp = min(1.0, math.exp(1.0 - len(ref) / len(hyp)))
    return bp * math.exp(log_sum / max_order)


def sim_emb(src_sentence: Sentence, tgt_sentence: Sentence, provider, table: EmbeddingTable) -> float:
    """Cosine between the embedding of the translated source sentence and
    the target sentence's embedding."""
    from .embeddings import cosine

    hyp = provider.translate(src_sentence)
    u = sentence_embedding(hyp.split(), table)
    v = sentence_embedding(tgt_sentence.tokens, table)
    return cosine(u, v)


def _normalized_rows(vectors: list[np.ndarray]) -> np.ndarray:
    mat = np.stack(vectors) if vectors else np.zeros((0, 0))
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0  # zero vectors stay zero, giving similarity 0
    return mat / norms


class MtBleuMeasure:
    """Smoothed BLEU of the translated source against each target sentence."""

    kind = "mt_bleu"

    def __init__(self, provider, max_order: int = 4):
        if max_order < 1:
            raise ValidationError(f"max_order must be >= 1, got {max_order}")
        self.provider = provider
        self.max_order = max_order

    def matrix(self, pair: DocumentPair) -> np.ndarray:
        hyp_tokens = [t.split() for t in self.provider.translate_document(pair)]
        refs = [s.tokens for s in pair.target.sentences]
        out = np.zeros((len(hyp_tokens), len(refs)), dtype=np.float64)
        for i, hyp in enumerate(hyp_tokens):
            for j, ref in enumerate(refs):
                out[i, j] = sim_bleu(hyp, ref, self.max_order)
        return out


class _CosineMeasureBase:
    def __init__(self, table: EmbeddingTable):
        self.table = table

    def _source_texts(self, pair: DocumentPair) -> list[str]:
        raise NotImplementedError

    def matrix(self, pair: DocumentPair) -> np.ndarray:
        src_vecs = [sentence_embedding(t.split(), self.table)
                    for t in self._source_texts(pair)]
        tgt_vecs = [sentence_embedding(s.tokens, self.table)
                    for s in pair.target.sentences]
        if not src_vecs or not tgt_vecs:
            return np.zeros((len(src_vecs), len(tgt_vecs)), dtype=np.float64)
        sims = _normalized_rows(src_vecs) @ _normalized_rows(tgt_vecs).T
        return np.clip(sims, -1.0, 1.0)


class MtCosineMeasure(_CosineMeasureBase):
    """Cosine of averaged word vectors, translated source vs. target."""

    kind = "mt_cosine"

    def __init__(self, provider, table: EmbeddingTable):
        super().__init__(table)
        self.provider = provider

    def _source_texts(self, pair: DocumentPair) -> list[str]:
        return self.provider.translate_document(pair)


class RawCosineMeasure(_CosineMeasureBase):
    """Cosine of averaged word vectors on the untranslated source; needs a
    shared embedding space and mainly serves as a degradation baseline."""

    kind = "raw_cosine"

    def _source_texts(self, pair: DocumentPair) -> list[str]:
        return [s.text for s in pair.source.sentences]


MEASURE_KINDS = ("mt_bleu", "mt_cosine", "raw_cosine")


def make_measure(kind: str, provider=None, table: Optional[EmbeddingTable] = None,
                 max_order: int = 4):
    """Build a measure by kind name; flags with hyphens are accepted too."""
    kind = kind.replace("-", "_")
    if kind == "mt_bleu":
        if provider is None:
            raise ValidationError("mt_bleu needs a translation provider")
        return MtBleuMeasure(provider, max_order=max_order)
    if kind == "mt_cosine":
        if provider is None or table is None:
            raise ValidationError("mt_cosine needs a translation provider and embeddings")
        return MtCosineMeasure(provider, table)
    if kind == "raw_cosine":
        if table is None:
            raise ValidationError("raw_cosine needs embeddings")
        return RawCosineMeasure(table)
    raise ValidationError(f"unknown measure kind {kind!r}; known: {MEASURE_KINDS}")


def score_matrix(pair: DocumentPair, measure) -> np.ndarray:
    """Score every source sentence against every target sentence.

    The provider is consulted once for the whole document, so external
    translation cost stays linear in document length.
    """
    mat = measure.matrix(pair)
    expected = (len(pair.source), len(pair.target))
    if mat.shape != expected:
        raise ValidationError(
            f"measure produced matrix {mat.shape}, expected {expected}"
        )
    return mat
