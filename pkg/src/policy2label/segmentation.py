"""Greedy similarity-threshold segmentation of sentences into 1-4 sentence runs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .documents import Segment, Sentence
from .embeddings import SentenceEmbedder, cosine_similarity
from .errors import EmbeddingUnavailable

MAX_SENTENCES_PER_SEGMENT = 4


@dataclass(frozen=True)
class SegmenterConfig:
    """Merge threshold for the greedy pass; the 4-sentence cap is fixed."""

    similarity_threshold: float = 0.85
    max_sentences_per_segment: int = MAX_SENTENCES_PER_SEGMENT

    def __post_init__(self):
        if not -1.0 <= self.similarity_threshold <= 1.0:
            raise ValueError("similarity_threshold must lie in [-1, 1]")
        if self.max_sentences_per_segment != MAX_SENTENCES_PER_SEGMENT:
            raise ValueError("max_sentences_per_segment is fixed at 4")


def _as_embed_fn(embedder) -> Callable[[str], np.ndarray]:
    if hasattr(embedder, "embed"):
        return embedder.embed
    if callable(embedder):
        return embedder
    raise TypeError("embedder must be callable or expose an embed(text) method")


def segment(
    sentences: Sequence[Sentence],
    embedder,
    config: SegmenterConfig | None = None,
) -> list[Segment]:
    """Partition sentences into segments with a greedy left-to-right pass.

    The running segment absorbs the next sentence iff the cosine similarity
    between the embedding of the segment's full text so far and the next
    sentence's embedding reaches the threshold, and the segment still holds
    fewer than 4 sentences. Each emitted segment carries the embedding of its
    full text. The output is always a disjoint, contiguous, order-preserving
    partition of the input.
    """
    if config is None:
        config = SegmenterConfig()
    if not sentences:
        return []
    embed = _as_embed_fn(embedder)

    def embed_text(text: str) -> np.ndarray:
        try:
            return np.asarray(embed(text), dtype=float)
        except Exception as exc:
            raise EmbeddingUnavailable(f"embedding provider failed: {exc}") from exc

    segments: list[Segment] = []
    current: list[Sentence] = [sentences[0]]
    current_embedding = embed_text(current[0].text)

    def close():
        segments.append(
            Segment(
                segment_id=len(segments),
                sentence_indices=tuple(s.index for s in current),
                sentences=tuple(s.text for s in current),
                embedding=current_embedding,
            )
        )

    for sentence in sentences[1:]:
        sentence_embedding = embed_text(sentence.text)
        merge = (
            len(current) < config.max_sentences_per_segment
            and cosine_similarity(current_embedding, sentence_embedding)
            >= config.similarity_threshold
        )
        if merge:
            current.append(sentence)
            current_embedding = embed_text(" ".join(s.text for s in current))
        else:
            close()
            current = [sentence]
            current_embedding = sentence_embedding
    close()
    return segments


class PolicySegmenter(BaseEstimator, TransformerMixin):
    """Transformer wrapper around the greedy segmenter.

    ``transform`` maps a sequence of Sentence objects to Segment objects.
    With no embedder every sentence embeds to the zero vector, so segments
    degenerate to singletons (the conservative hermetic default).
    """

    def __init__(self, embedder=None, tau: float = 0.85):
        self.embedder = embedder
        self.tau = tau

    def fit(self, X, y=None):
        return self

    def transform(self, X: Sequence[Sentence]) -> list[Segment]:
        embedder = self.embedder if self.embedder is not None else SentenceEmbedder()
        return segment(X, embedder, SegmenterConfig(similarity_threshold=self.tau))
