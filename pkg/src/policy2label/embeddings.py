"""Word-vector store, mean-pooled sentence embeddings, and cosine similarity."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DimensionMismatch, FormatError

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase tokens split on non-alphanumeric boundaries."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class WordVectorStore:
    """Immutable lowercase-token -> vector table with one shared dimension.

    Safe for concurrent readers once constructed.
    """

    dimension: int
    entries: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.dimension <= 0:
            raise ValueError("dimension must be positive")

    def get(self, token: str) -> np.ndarray | None:
        return self.entries.get(token)

    def __contains__(self, token: str) -> bool:
        return token in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def load_vectors(path: str | Path) -> WordVectorStore:
    """Load the plain-text word-vector format.

    Format (bit-exact): a header line ``<count> <dim>``, then one line per
    word consisting of the token followed by ``dim`` space-separated decimal
    reals, newline-terminated. Raises FormatError with the offending line
    number on a dimension mismatch, an unparsable or non-finite real, or a
    bad header. I/O failures propagate as OSError.
    """
    entries: dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise FormatError("header must be '<count> <dim>'", line=1)
        try:
            _count, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError("header must be '<count> <dim>'", line=1) from None
        if dim <= 0:
            raise FormatError("dimension must be positive", line=1)
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split(" ")
            token, values = cols[0], cols[1:]
            if len(values) != dim:
                raise FormatError(
                    f"expected {dim} components for {token!r}, got {len(values)}",
                    line=lineno,
                )
            try:
                vec = np.array([float(v) for v in values], dtype=float)
            except ValueError:
                raise FormatError(f"unparsable real in row for {token!r}", line=lineno) from None
            if not np.all(np.isfinite(vec)):
                raise FormatError(f"non-finite component in row for {token!r}", line=lineno)
            entries[token.lower()] = vec
    return WordVectorStore(dimension=dim, entries=entries)


def embed_sentence(store: WordVectorStore, text: str) -> np.ndarray:
    """Mean of the vectors of in-vocabulary tokens; zero vector if none are.

    Tokenization lowercases and splits on non-alphanumeric boundaries, so the
    result is invariant to token order and to out-of-vocabulary noise.
    """
    vectors = [store.entries[t] for t in tokenize(text) if t in store.entries]
    if not vectors:
        return np.zeros(store.dimension, dtype=float)
    return np.mean(vectors, axis=0)


def cosine_similarity(a, b) -> float:
    """dot(a, b) / (|a| |b|), with the convention that a zero norm gives 0.0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cosine of shapes {a.shape} and {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return float(np.dot(a, b) / (norm_a * norm_b))


class SentenceEmbedder(BaseEstimator, TransformerMixin):
    """Sentence-embedding provider over a word-vector store.

    A stateless transformer: ``fit`` is a no-op and ``transform`` maps a
    sequence of strings to an (n, dimension) matrix. ``embed`` is the
    single-sentence entry point used by the segmenter. With no store, every
    sentence embeds to the zero vector (the all-out-of-vocabulary case),
    which never merges under any positive similarity threshold.
    """

    def __init__(self, store: WordVectorStore | None = None, dimension: int = 8):
        self.store = store
        self.dimension = dimension

    def _effective_store(self) -> WordVectorStore:
        if self.store is not None:
            return self.store
        return WordVectorStore(dimension=self.dimension)

    def embed(self, text: str) -> np.ndarray:
        return embed_sentence(self._effective_store(), text)

    def fit(self, X, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        store = self._effective_store()
        texts = list(X)
        if not texts:
            return np.empty((0, store.dimension), dtype=float)
        return np.vstack([embed_sentence(store, t) for t in texts])
