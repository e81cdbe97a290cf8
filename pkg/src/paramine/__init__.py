"""paramine: mine parallel sentence pairs from document-aligned bilingual text.

The workflow is clean (normalize, language-check, sentence-split), align
(similarity-scored monotonic matching per document pair), split (human
good/bad judgments build test/dev sets, the rest trains), and stats
(length and language-model reports). Each stage is a library call with a
matching CLI subcommand; the judgment queue is also served over HTTP for
the browser annotation UI.
"""

__version__ = "0.1.0"

from .aligner import AlignerConfig, align
from .analysis import NGramLM, per_token_loglik, train_lm
from .cleaning import CharsetProfile, DetectorConfig, detect_language
from .corpus import (AlignmentResult, Corpus, Document, DocumentPair, Match,
                     Sentence, mix_corpora)
from .errors import DataError, ParamineError, StateError, ValidationError
from .similarity import score_matrix, sim_bleu, sim_emb
from .splitbuilder import (Judgment, SplitConfig, SplitSession, build_split,
                           emit_split, rank_documents)

__all__ = [
    "__version__",
    "AlignerConfig", "align",
    "NGramLM", "per_token_loglik", "train_lm",
    "CharsetProfile", "DetectorConfig", "detect_language",
    "AlignmentResult", "Corpus", "Document", "DocumentPair", "Match",
    "Sentence", "mix_corpora",
    "DataError", "ParamineError", "StateError", "ValidationError",
    "score_matrix", "sim_bleu", "sim_emb",
    "Judgment", "SplitConfig", "SplitSession", "build_split", "emit_split",
    "rank_documents",
]
