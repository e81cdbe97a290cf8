"""Corpus analysis: n-gram language models and length statistics.

The language model uses interpolated absolute discounting. Probabilities at
every level sum to one exactly (up to float error), because the mass removed
by discounting is exactly the mass handed to the shorter history.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Sequence

from .errors import ValidationError

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"


class NGramLM:
    """Lowercasing n-gram model; tokens seen once in training become <unk>.

    The predicted vocabulary contains the kept surface forms plus <unk> and
    the end-of-sentence symbol; the start symbol only ever appears in
    histories.
    """

    def __init__(self, order: int, discount: float, vocab: frozenset,
                 counts, totals, distinct):
        self.order = order
        self.discount = discount
        self.vocab = vocab
        self._counts = counts      # level -> history tuple -> Counter of words
        self._totals = totals      # level -> history tuple -> total count
        self._distinct = distinct  # level -> history tuple -> distinct words
        self._uniform = 1.0 / len(vocab)

    def map_token(self, token: str) -> str:
        token = token.lower()
        if token in self.vocab or token == BOS:
            return token
        return UNK

    def prob(self, word: str, history: tuple[str, ...]) -> float:
        """P(word | history) with histories up to order-1 symbols long.
        Inputs must already be mapped (see map_token)."""
        if len(history) > self.order - 1:
            history = history[-(self.order - 1):] if self.order > 1 else ()
        return self._prob(word, history)

    def _prob(self, word: str, history: tuple[str, ...]) -> float:
        level = len(history) + 1
        if level == 1:
            total = self._totals[1][()]
            c = self._counts[1][()].get(word, 0)
            n_distinct = self._distinct[1][()]
            return (max(c - self.discount, 0.0)
                    + self.discount * n_distinct * self._uniform) / total
        total = self._totals[level].get(history)
        shorter = self._prob(word, history[1:])
        if not total:
            return shorter
        c = self._counts[level][history].get(word, 0)
        n_distinct = self._distinct[level][history]
        return (max(c - self.discount, 0.0)
                + self.discount * n_distinct * shorter) / total

    def logprob(self, word: str, history: tuple[str, ...]) -> float:
        """Natural log of P(word | history); maps raw tokens first."""
        w = self.map_token(word)
        h = tuple(self.map_token(t) for t in history)
        return math.log(self.prob(w, h))

    def sentence_loglik(self, tokens: Sequence[str]) -> tuple[float, int]:
        """Total log-likelihood of a sentence including its end symbol, and
        the number of real tokens (the end symbol is scored, not counted)."""
        mapped = [self.map_token(t) for t in tokens]
        seq = [BOS] * (self.order - 1) + mapped + [EOS]
        start = self.order - 1
        total = 0.0
        for p in range(start, len(seq)):
            history = tuple(seq[p - self.order + 1:p])
            total += math.log(self._prob(seq[p], history))
        return total, len(tokens)


def train_lm(corpus: Sequence[Sequence[str]], order: int = 4,
             discount: float = 0.75) -> NGramLM:
    """Train on tokenized sentences. Pre: at least one non-empty sentence."""
    if order < 1:
        raise ValidationError(f"train_lm: order must be >= 1, got {order}")
    if not 0.0 < discount < 1.0:
        raise ValidationError(f"train_lm: discount must be in (0, 1), got {discount}")
    sentences = [[t.lower() for t in sent] for sent in corpus]
    surface_counts = Counter(t for sent in sentences for t in sent)
    if not surface_counts:
        raise ValidationError("train_lm: corpus has no tokens")

    keep = {t for t, c in surface_counts.items() if c > 1}
    vocab = frozenset(keep | {UNK, EOS})

    counts = {level: defaultdict(Counter) for level in range(1, order + 1)}
    for sent in sentences:
        mapped = [t if t in keep else UNK for t in sent]
        seq = [BOS] * (order - 1) + mapped + [EOS]
        for p in range(order - 1, len(seq)):
            word = seq[p]
            for level in range(1, order + 1):
                history = tuple(seq[p - level + 1:p])
                counts[level][history][word] += 1

    totals = {level: {h: sum(c.values()) for h, c in by_hist.items()}
              for level, by_hist in counts.items()}
    distinct = {level: {h: len(c) for h, c in by_hist.items()}
                for level, by_hist in counts.items()}
    plain_counts = {level: {h: dict(c) for h, c in by_hist.items()}
                    for level, by_hist in counts.items()}
    return NGramLM(order, discount, vocab, plain_counts, totals, distinct)


def per_token_loglik(lm: NGramLM, corpus: Sequence[Sequence[str]]) -> float:
    """Mean log-likelihood per token under the model; higher is closer."""
    total = 0.0
    tokens = 0
    for sent in corpus:
        ll, n = lm.sentence_loglik(sent)
        total += ll
        tokens += n
    if tokens == 0:
        raise ValidationError("per_token_loglik: corpus has no tokens")
    return total / tokens


def lm_similarity_matrix(corpora: Sequence[tuple[str, Sequence[Sequence[str]]]],
                         order: int = 4, discount: float = 0.75):
    """Cross log-likelihood table: entry [i][j] scores corpus j under the
    model trained on corpus i. Returns (names, rows)."""
    if not corpora:
        raise ValidationError("lm_similarity_matrix: no corpora given")
    names = [name for name, _ in corpora]
    models = [train_lm(sents, order=order, discount=discount) for _, sents in corpora]
    rows = [[per_token_loglik(model, sents) for _, sents in corpora]
            for model in models]
    return names, rows
