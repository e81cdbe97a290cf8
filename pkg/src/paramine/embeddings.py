"""Word embedding table: text-format load, sentence vectors, cosine."""

from __future__ import annotations

import gzip
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError, ValidationError

# Fraction of data lines allowed to be malformed before the load is refused.
MAX_SKIPPED_FRACTION = 0.10


class EmbeddingTable:
    """Token -> vector lookup, float32 storage, first occurrence wins."""

    def __init__(self, dim: int, tokens: Sequence[str], vectors: np.ndarray,
                 skipped_lines: int = 0):
        if vectors.shape != (len(tokens), dim):
            raise ValidationError(
                f"embedding table shape {vectors.shape} does not match "
                f"{len(tokens)} tokens of dim {dim}"
            )
        self.dim = dim
        self.skipped_lines = skipped_lines
        self._vectors = np.asarray(vectors, dtype=np.float32)
        self._index: dict[str, int] = {}
        for i, tok in enumerate(tokens):
            self._index.setdefault(tok, i)

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, token: str) -> bool:
        return token in self._index or token.lower() in self._index

    def lookup(self, token: str) -> Optional[np.ndarray]:
        """Exact match first, lowercase fallback, None when absent."""
        i = self._index.get(token)
        if i is None:
            i = self._index.get(token.lower())
        if i is None:
            return None
        return self._vectors[i]


def load_embeddings(path: Path) -> EmbeddingTable:
    """Load a text-format table: header "count dim", then one token and dim
    floats per line. Malformed lines are skipped and counted; more than 10%
    of them fails the load. Transparent gzip for .gz paths."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    try:
        fh = opener(path, "rt", encoding="utf-8", errors="strict")
    except FileNotFoundError:
        raise DataError(f"embeddings file not found: {path}")

    with fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DataError(f"{path}: malformed embeddings header {header!r}")
        try:
            declared_count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise DataError(f"{path}: malformed embeddings header {header!r}")
        if dim < 1:
            raise DataError(f"{path}: embedding dimension must be positive, got {dim}")

        tokens: list[str] = []
        rows: list[np.ndarray] = []
        skipped = 0
        data_lines = 0
        for line in fh:
            if not line.strip():
                continue
            data_lines += 1
            parts = line.rstrip("\n").split(" ")
            if parts and parts[-1] == "":
                parts.pop()  # trailing space, common in exported tables
            if len(parts) != dim + 1:
                skipped += 1
                continue
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float32)
            except ValueError:
                skipped += 1
                continue
            tokens.append(parts[0])
            rows.append(vec)

    if data_lines and skipped > MAX_SKIPPED_FRACTION * data_lines:
        raise DataError(
            f"{path}: {skipped} of {data_lines} lines malformed, refusing to load"
        )
    if not rows:
        raise DataError(f"{path}: no usable embedding rows (declared {declared_count})")
    vectors = np.stack(rows)
    return EmbeddingTable(dim=dim, tokens=tokens, vectors=vectors, skipped_lines=skipped)


def sentence_embedding(tokens: Sequence[str], table: EmbeddingTable) -> np.ndarray:
    """Average of the vectors of in-vocabulary tokens, float64.

    Out-of-vocabulary tokens are skipped; a sentence with no known token
    gets the zero vector. Order does not matter.
    """
    found = [table.lookup(t) for t in tokens]
    found = [v for v in found if v is not None]
    if not found:
        return np.zeros(table.dim, dtype=np.float64)
    return np.mean(np.stack(found).astype(np.float64), axis=0)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; zero-norm input gives 0.0."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValidationError(f"cosine: shape mismatch {u.shape} vs {v.shape}")
    nu = math.sqrt(float(u @ u))
    nv = math.sqrt(float(v @ v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return max(-1.0, min(1.0, float(u @ v) / (nu * nv)))
