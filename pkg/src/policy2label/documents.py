"""Document processing: fetch, clean, language-filter, gate, and sentence-split.

Turns a raw policy source (URL, HTML bytes, or plain text) into the ordered
sentence list that segmentation consumes. All functions are pure given their
inputs; documents can be processed in parallel with no shared mutable state.
"""

from __future__ import annotations

import enum
import re
import urllib.parse
from dataclasses import dataclass, field
from html.parser import HTMLParser
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np
import requests

from .categories import DataPracticeCategory
from .errors import (
    EmptyDocument,
    HttpError,
    NetworkError,
    NonPrimaryLanguageDocument,
)
from .language import detect_language

MIN_WORDS = 200
MIN_BYTES = 2048

TOO_SHORT = "TooShort"
TOO_SMALL = "TooSmall"


class MediaKind(enum.Enum):
    HTML = "html"
    PLAIN_TEXT = "text"


@dataclass
class RawDocument:
    """A policy as obtained, before any cleaning."""

    source_id: str
    content: bytes
    media_kind: MediaKind
    fetched_from: str | None = None

    def __post_init__(self):
        if not self.content:
            raise ValueError("RawDocument content must be non-empty")


@dataclass
class CleanText:
    """Markup-free paragraph blocks plus the size figures the gates check.

    byte_size is the UTF-8 length of the blocks joined by blank lines, so it
    is recomputed consistently whenever blocks are dropped.
    """

    source_id: str
    blocks: list[str]
    word_count: int
    byte_size: int

    @classmethod
    def from_blocks(cls, source_id: str, blocks: list[str]) -> "CleanText":
        return cls(
            source_id=source_id,
            blocks=list(blocks),
            word_count=sum(len(b.split()) for b in blocks),
            byte_size=len("\n\n".join(blocks).encode("utf-8")),
        )


@dataclass(frozen=True)
class Sentence:
    index: int
    text: str


@dataclass
class Segment:
    """An ordered run of 1-4 consecutive sentences from one policy.

    ``categories`` starts empty and is filled in by classification.
    """

    segment_id: int
    sentence_indices: tuple[int, ...]
    sentences: tuple[str, ...]
    embedding: np.ndarray | None = None
    categories: set[DataPracticeCategory] = field(default_factory=set)

    def __post_init__(self):
        if not 1 <= len(self.sentences) <= 4:
            raise ValueError("a segment holds between 1 and 4 sentences")
        if len(self.sentence_indices) != len(self.sentences):
            raise ValueError("sentence_indices and sentences must align")

    @property
    def text(self) -> str:
        return " ".join(self.sentences)


@dataclass(frozen=True)
class QualityVerdict:
    accepted: bool
    reason: str | None = None


def fetch_policy(url: str, timeout: float = 30.0) -> RawDocument:
    """Fetch a policy over http(s).

    Media kind comes from the Content-Type header (text/plain means plain
    text, anything else defaults to HTML). Unreachable hosts and timeouts
    raise NetworkError; non-2xx statuses raise HttpError with the status.
    """
    parsed = urllib.parse.urlparse(url)
    if parsed.scheme not in ("http", "https") or not parsed.netloc:
        raise ValueError(f"not a valid http(s) URL: {url!r}")
    try:
        response = requests.get(url, timeout=timeout)
    except requests.RequestException as exc:
        raise NetworkError(f"fetching {url}: {exc}") from exc
    if not 200 <= response.status_code < 300:
        raise HttpError(response.status_code)
    content_type = response.headers.get("Content-Type", "")
    kind = MediaKind.PLAIN_TEXT if "text/plain" in content_type else MediaKind.HTML
    return RawDocument(
        source_id=url, content=response.content, media_kind=kind, fetched_from=url
    )


_SKIP_TAGS = frozenset({"script", "style", "head", "nav", "header", "footer"})
_BLOCK_TAGS = frozenset(
    {
        "p", "div", "section", "article", "main", "aside", "blockquote", "pre",
        "ul", "ol", "li", "dl", "dt", "dd", "table", "tr", "td", "th",
        "h1", "h2", "h3", "h4", "h5", "h6", "figure", "figcaption", "form",
        "br", "hr", "body", "html", "title",
    }
)

_WS_RE = re.compile(r"\s+")


def _normalize_ws(text: str) -> str:
    return _WS_RE.sub(" ", text).strip()


class _TextExtractor(HTMLParser):
    """Collects text blocks in document order, skipping non-content elements."""

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.blocks: list[str] = []
        self._buffer: list[str] = []
        self._skip_depth = 0

    def _flush(self):
        block = _normalize_ws("".join(self._buffer))
        self._buffer.clear()
        if block:
            self.blocks.append(block)

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP_TAGS:
            self._skip_depth += 1
        elif tag in _BLOCK_TAGS:
            self._flush()

    def handle_endtag(self, tag):
        if tag in _SKIP_TAGS:
            self._skip_depth = max(0, self._skip_depth - 1)
        elif tag in _BLOCK_TAGS:
            self._flush()

    def handle_startendtag(self, tag, attrs):
        if tag in _BLOCK_TAGS:
            self._flush()

    def handle_data(self, data):
        if self._skip_depth == 0 and data:
            self._buffer.append(data)

    def close(self):
        super().close()
        self._flush()


def clean_html(doc: RawDocument) -> CleanText:
    """Strip markup down to ordered text blocks.

    Contents of script, style, head, nav, header, and footer elements are
    removed; entities are decoded; whitespace inside a block collapses to
    single spaces. Plain-text documents pass through as one block per
    blank-line-separated paragraph. Raises EmptyDocument if nothing remains.

    Idempotent: re-cleaning the output (re-wrapped as plain text) is the
    identity.
    """
    text = doc.content.decode("utf-8", errors="replace")
    if doc.media_kind is MediaKind.PLAIN_TEXT:
        blocks = [_normalize_ws(b) for b in re.split(r"\n\s*\n", text)]
        blocks = [b for b in blocks if b]
    else:
        extractor = _TextExtractor()
        extractor.feed(text)
        extractor.close()
        blocks = extractor.blocks
    if not blocks:
        raise EmptyDocument(f"no text blocks left in {doc.source_id}")
    return CleanText.from_blocks(doc.source_id, blocks)


def filter_language(
    text: CleanText,
    primary: str = "en",
    min_block_confidence: float = 0.5,
    detector: Callable[[str], tuple[str, float]] = detect_language,
) -> CleanText:
    """Drop blocks confidently detected as a non-primary language.

    A block is removed only when the detector names another language with
    confidence at or above the floor; undecidable blocks are kept. Blocks
    under 5 words inherit the previous block's verdict because detectors are
    unreliable on tiny fragments (the first block defaults to kept). Raises
    NonPrimaryLanguageDocument if no block survives.
    """
    if not re.fullmatch(r"[a-z]{2}", primary):
        raise ValueError(f"primary must be a two-letter language code, got {primary!r}")
    kept: list[str] = []
    previous_keep = True
    for block in text.blocks:
        if len(block.split()) < 5:
            keep = previous_keep
        else:
            lang, confidence = detector(block)
            keep = not (lang != primary and confidence >= min_block_confidence)
        if keep:
            kept.append(block)
        previous_keep = keep
    if not kept:
        raise NonPrimaryLanguageDocument(
            f"no {primary} blocks in {text.source_id}"
        )
    return CleanText.from_blocks(text.source_id, kept)


def quality_check(text: CleanText) -> QualityVerdict:
    """Accept unless the document is under 200 words or under 2048 bytes.

    Total function; when both gates fail, TooShort is reported.
    """
    if text.word_count < MIN_WORDS:
        return QualityVerdict(accepted=False, reason=TOO_SHORT)
    if text.byte_size < MIN_BYTES:
        return QualityVerdict(accepted=False, reason=TOO_SMALL)
    return QualityVerdict(accepted=True)


_ABBREVIATIONS_RESOURCE = "abbreviations.txt"
_BOUNDARY_RE = re.compile(r"([.!?]+)(\s+)(?=[A-Z0-9])")
_default_abbreviations: frozenset[str] | None = None


def load_abbreviations(path: str | Path | None = None) -> frozenset[str]:
    """Load the abbreviation exception list (one per line, '#' comments)."""
    if path is None:
        content = (
            resources.files("policy2label.data") / _ABBREVIATIONS_RESOURCE
        ).read_text(encoding="utf-8")
    else:
        content = Path(path).read_text(encoding="utf-8")
    entries = set()
    for line in content.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            entries.add(line.casefold())
    return frozenset(entries)


def _abbreviations() -> frozenset[str]:
    global _default_abbreviations
    if _default_abbreviations is None:
        _default_abbreviations = load_abbreviations()
    return _default_abbreviations


def _split_block(block: str, abbreviations: frozenset[str]) -> list[str]:
    pieces = []
    start = 0
    for match in _BOUNDARY_RE.finditer(block):
        end = match.end(1)
        token = block[start:end].rsplit(None, 1)[-1].lstrip("([\"'")
        if token.casefold() in abbreviations:
            continue
        pieces.append(block[start:end])
        start = match.end(2)
    pieces.append(block[start:])
    return [p.strip() for p in pieces if p.strip()]


def split_sentences(
    text: CleanText, abbreviations: frozenset[str] | None = None
) -> list[Sentence]:
    """Rule-based sentence splitting with an abbreviation exception list.

    A boundary is terminal punctuation (. ! ?) followed by whitespace and an
    uppercase letter or digit, unless the word ending at the punctuation is a
    known abbreviation. Block boundaries always end a sentence. Aside from
    whitespace adjustments no characters are dropped; indices are contiguous
    from 0.
    """
    if abbreviations is None:
        abbreviations = _abbreviations()
    sentences: list[Sentence] = []
    for block in text.blocks:
        for piece in _split_block(block, abbreviations):
            sentences.append(Sentence(index=len(sentences), text=piece))
    return sentences
