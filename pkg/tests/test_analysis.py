import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paramine.analysis import (BOS, EOS, UNK, NGramLM, lm_similarity_matrix,
                               per_token_loglik, train_lm)
from paramine.errors import ValidationError


class TestTraining:
    def test_empty_corpus_rejected(self):
        with pytest.raises(ValidationError):
            train_lm([])
        with pytest.raises(ValidationError):
            train_lm([[]])

    def test_count_one_words_become_unknown(self):
        lm = train_lm([["common", "common", "rare"]])
        assert "common" in lm.vocab
        assert "rare" not in lm.vocab
        assert lm.map_token("rare") == UNK
        assert lm.map_token("neverseen") == UNK

    def test_lowercasing(self):
        lm = train_lm([["Word", "word"]])
        assert lm.map_token("WORD") == "word"

    def test_bigram_probability_closed_form(self):
        # "a b" repeated 100 times; interpolated absolute discounting with
        # d = 0.75 gives P(b | a) = (100 - d + d * 1 * P1(b)) / 100
        lm = train_lm([["a", "b"]] * 100)
        assert lm.vocab == frozenset({"a", "b", UNK, EOS})
        p1_b = (100 - 0.75 + 0.75 * 3 * (1 / 4)) / 300
        expected = (100 - 0.75 + 0.75 * 1 * p1_b) / 100
        got = lm.prob("b", ("a",))
        assert math.isclose(got, expected, abs_tol=1e-12)
        assert got > 0.99

    def test_unseen_word_has_nonzero_probability(self):
        # every training word occurs twice, so <unk> has zero count but
        # still receives exactly d * distinct / (total * V) at the unigram level
        lm = train_lm([["x", "y"], ["x", "y"]])
        total, distinct, v = 6, 3, 4  # x,y,</s> counted; vocab adds <unk>
        expected = 0.75 * distinct / (total * v)
        assert math.isclose(lm.prob(UNK, ()), expected, abs_tol=1e-12)
        assert math.isclose(math.exp(lm.logprob("zebra", ())),
                            expected, abs_tol=1e-12)


def _normalization(lm, context):
    return sum(lm.prob(w, context) for w in lm.vocab)


class TestNormalization:
    def test_sums_to_one_across_context_lengths(self):
        corpus = [["the", "cat", "sat"], ["the", "dog", "sat"],
                  ["the", "cat", "ran"], ["a", "dog", "ran"]] * 3
        lm = train_lm(corpus)
        contexts = [
            (),
            ("the",),
            (BOS, BOS, "the"),
            ("the", "cat"),
            (BOS, "the", "cat"),
            ("cat", "sat", EOS),          # impossible context, backs off
            ("unseenhistory", "the", "cat"),
        ]
        for ctx in contexts:
            mapped = tuple(lm.map_token(t) for t in ctx)
            assert math.isclose(_normalization(lm, mapped), 1.0, abs_tol=1e-9), ctx

    def test_sums_to_one_on_random_contexts(self):
        rng = random.Random(17)
        words = ["alpha", "beta", "gamma", "delta"]
        corpus = [[rng.choice(words) for _ in range(rng.randint(1, 6))]
                  for _ in range(60)]
        lm = train_lm(corpus)
        pool = list(lm.vocab) + [BOS]
        for _ in range(100):
            ctx = tuple(rng.choice(pool) for _ in range(rng.randint(0, 3)))
            assert math.isclose(_normalization(lm, ctx), 1.0, abs_tol=1e-9)


class TestScoring:
    def test_boundary_scored_but_not_counted(self):
        lm = train_lm([["a", "b"]] * 10)
        ll, count = lm.sentence_loglik(["a", "b"])
        assert count == 2
        manual = (lm.logprob("a", (BOS, BOS, BOS))
                  + lm.logprob("b", (BOS, BOS, "a"))
                  + lm.logprob(EOS, (BOS, "a", "b")))
        assert math.isclose(ll, manual, abs_tol=1e-12)

    def test_per_token_loglik_is_mean(self):
        lm = train_lm([["a", "b"]] * 10)
        corpus = [["a", "b"], ["a"]]
        total = sum(lm.sentence_loglik(s)[0] for s in corpus)
        assert math.isclose(per_token_loglik(lm, corpus), total / 3, abs_tol=1e-12)

    def test_self_likelihood_beats_shuffled_vocab(self):
        lm = train_lm([["a", "b", "c"]] * 20)
        same = per_token_loglik(lm, [["a", "b", "c"]])
        other = per_token_loglik(lm, [["c", "a", "b"]])
        assert same > other

    @given(seed=st.integers(min_value=0, max_value=9999))
    @settings(max_examples=40, deadline=None)
    def test_sentence_order_invariance(self, seed):
        rng = random.Random(seed)
        words = ["u", "v", "w"]
        corpus = [[rng.choice(words) for _ in range(rng.randint(1, 4))]
                  for _ in range(8)]
        lm = train_lm([["u", "v"], ["v", "w"], ["u", "w"]] * 4)
        shuffled = corpus[:]
        rng.shuffle(shuffled)
        assert math.isclose(per_token_loglik(lm, corpus),
                            per_token_loglik(lm, shuffled), abs_tol=1e-12)


def themed_corpus(words, rng, sentences=40):
    return [[rng.choice(words) for _ in range(rng.randint(3, 8))]
            for _ in range(sentences)]


class TestSimilarityMatrix:
    def test_diagonal_dominates_each_row(self):
        rng = random.Random(23)
        corpora = [
            ("law", themed_corpus(["court", "judge", "appeal", "ruling",
                                   "verdict", "case"], rng)),
            ("bio", themed_corpus(["cell", "protein", "enzyme", "gene",
                                   "tissue", "membrane"], rng)),
            ("astro", themed_corpus(["star", "orbit", "galaxy", "planet",
                                     "comet", "nebula"], rng)),
        ]
        names, rows = lm_similarity_matrix(corpora)
        assert names == ["law", "bio", "astro"]
        for i, row in enumerate(rows):
            for j, value in enumerate(row):
                if i != j:
                    assert row[i] > value

    def test_empty_input_rejected(self):
        with pytest.raises(ValidationError):
            lm_similarity_matrix([])
