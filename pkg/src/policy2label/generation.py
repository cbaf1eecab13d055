"""Label generation: prompt construction, chunking, answering, and cost accounting.

The hybrid path feeds each attribute's question the classified segments its
section maps to; the fully-LLM path first asks a retrieval model to copy out
relevant sentences per question, then answers over those. Both aggregate per
chunk with OR (any yes means Present), record provenance, and count cost in
words.
"""

from __future__ import annotations

import enum
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .documents import Segment, Sentence
from .errors import LlmError, LlmTransientError, TemplateError
from .llm import LlmClient
from .schema import (
    Attribute,
    LabelOrigin,
    LabelSchema,
    Presence,
    PrivacyLabel,
    ProvenanceEntry,
    Section,
    select_segments,
)


class Strategy(enum.Enum):
    HYBRID = "hybrid"
    FULL_LLM = "full-llm"


@dataclass
class GenerationConfig:
    strategy: Strategy = Strategy.HYBRID
    context_word_limit: int = 1200
    max_concurrent_requests: int = 4
    retries: int = 2
    retry_backoff: float = 0.5
    max_answer_words: int = 40

    def __post_init__(self):
        if self.context_word_limit <= 0:
            raise ValueError("context_word_limit must be positive")
        if self.max_concurrent_requests < 1:
            raise ValueError("max_concurrent_requests must be at least 1")
        if self.retries < 0:
            raise ValueError("retries must be non-negative")


@dataclass
class CostStats:
    """Word-denominated usage totals for one run; updates are atomic."""

    strategy: Strategy
    prompts_sent: int = 0
    prompt_words: int = 0
    answer_words: int = 0
    retrieval_unmatched_lines: int = 0
    _lock: threading.Lock = field(
        default_factory=threading.Lock, repr=False, compare=False
    )

    def record(self, prompt: str, answer: str) -> None:
        with self._lock:
            self.prompts_sent += 1
            self.prompt_words += len(prompt.split())
            self.answer_words += len(answer.split())

    def count_unmatched_line(self) -> None:
        with self._lock:
            self.retrieval_unmatched_lines += 1

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "prompts_sent": self.prompts_sent,
            "prompt_words": self.prompt_words,
            "answer_words": self.answer_words,
            "retrieval_unmatched_lines": self.retrieval_unmatched_lines,
        }


EMPTY_CONTEXT_NOTE = "(no relevant statements found)"

_PROMPT_TEMPLATE = (
    "App name: {app_name}.\n"
    "Privacy policy excerpts:\n"
    "{context}\n"
    "Question: {question} Answer yes or no."
)

_RETRIEVAL_TEMPLATE = (
    "Here is part {part} of {parts} of a privacy policy.\n"
    "{chunk}\n"
    "Question: {question}\n"
    "Copy verbatim the sentences relevant to answering this question, or reply NONE."
)


@dataclass(frozen=True)
class Prompt:
    app_name: str
    context: str
    question: str
    rendered: str

    @property
    def word_count(self) -> int:
        return len(self.rendered.split())


class _StrictContext(dict):
    def __missing__(self, key):
        raise TemplateError(f"question template references unknown placeholder {{{key}}}")


def render_question(section: Section, attr: Attribute, app_name: str) -> str:
    context = _StrictContext(
        app_name=app_name,
        attribute_name=attr.name,
        attribute_description=attr.description,
    )
    return section.question_template.format_map(context)


def build_prompt(
    app_name: str,
    segments: Sequence[Segment],
    section: Section,
    attr: Attribute,
) -> Prompt:
    """Render the full yes/no prompt for one attribute over the given segments.

    Segment texts are joined by blank lines in document order; with no
    segments the context carries a placeholder note, though callers normally
    short-circuit to Absent instead of asking.
    """
    context = "\n\n".join(s.text for s in segments) if segments else EMPTY_CONTEXT_NOTE
    question = render_question(section, attr, app_name)
    rendered = _PROMPT_TEMPLATE.format(app_name=app_name, context=context, question=question)
    return Prompt(app_name=app_name, context=context, question=question, rendered=rendered)


def parse_answer(text: str) -> Presence:
    """Present iff the first word of the answer is "yes", after stripping
    leading whitespace/punctuation and case-folding. Hedges count as Absent."""
    match = re.match(r"[\W_]*(\w+)", text, re.UNICODE)
    if match and match.group(1).casefold() == "yes":
        return Presence.PRESENT
    return Presence.ABSENT


@dataclass(frozen=True)
class _Chunk:
    text: str
    segments: tuple[Segment, ...]

    @property
    def segment_ids(self) -> tuple[int, ...]:
        return tuple(s.segment_id for s in self.segments)


def _word_windows(words: list[str], limit: int) -> list[str]:
    return [" ".join(words[i : i + limit]) for i in range(0, len(words), limit)]


def _split_oversize_segment(segment: Segment, limit: int) -> list[str]:
    """Sentence-boundary pieces of one segment, hard-splitting oversize sentences."""
    pieces: list[str] = []
    for sentence in segment.sentences:
        words = sentence.split()
        if len(words) > limit:
            pieces.extend(_word_windows(words, limit))
        else:
            pieces.append(sentence)
    # Re-pack sentence pieces greedily so each stays under the limit.
    packed: list[str] = []
    current: list[str] = []
    current_words = 0
    for piece in pieces:
        n = len(piece.split())
        if current and current_words + n > limit:
            packed.append(" ".join(current))
            current, current_words = [], 0
        current.append(piece)
        current_words += n
    if current:
        packed.append(" ".join(current))
    return packed


def _plan_chunks(segments: Sequence[Segment], word_limit: int) -> list[_Chunk]:
    chunks: list[_Chunk] = []
    current_texts: list[str] = []
    current_segments: list[Segment] = []
    current_words = 0

    def flush():
        nonlocal current_texts, current_segments, current_words
        if current_texts:
            chunks.append(_Chunk("\n\n".join(current_texts), tuple(current_segments)))
            current_texts, current_segments, current_words = [], [], 0

    for segment in segments:
        n = len(segment.text.split())
        if n > word_limit:
            flush()
            for piece in _split_oversize_segment(segment, word_limit):
                chunks.append(_Chunk(piece, (segment,)))
        elif current_words + n > word_limit:
            flush()
            current_texts, current_segments, current_words = [segment.text], [segment], n
        else:
            current_texts.append(segment.text)
            current_segments.append(segment)
            current_words += n
    flush()
    return chunks


def chunk_context(segments: Sequence[Segment], word_limit: int) -> list[str]:
    """Greedily pack whole segments into context strings of at most word_limit
    words. A segment over the limit is split at sentence boundaries, and a
    single oversize sentence is hard-split at word boundaries. Concatenating
    the chunks preserves all text in order.
    """
    if word_limit <= 0:
        raise ValueError("word_limit must be positive")
    return [c.text for c in _plan_chunks(segments, word_limit)]


GROUP_MARKERS = ("child", "under 13", "california", "eea", "european")


def _group_specific(text: str) -> bool:
    folded = text.casefold()
    return any(marker in folded for marker in GROUP_MARKERS)


def _complete_with_retries(
    llm: LlmClient, prompt: str, cfg: GenerationConfig, stats: CostStats
) -> str:
    """One completion with exponential backoff on transient failures only.

    Only completed request/response pairs are billed into the stats.
    """
    last: LlmTransientError | None = None
    for attempt in range(cfg.retries + 1):
        try:
            answer = llm.complete(prompt, cfg.max_answer_words)
        except LlmTransientError as exc:
            last = exc
            if attempt < cfg.retries and cfg.retry_backoff > 0:
                time.sleep(cfg.retry_backoff * (2**attempt))
            continue
        stats.record(prompt, answer)
        return answer
    assert last is not None
    raise last


_AttributeResult = tuple[Presence, list[ProvenanceEntry]]


def _answer_over_chunks(
    chunks: Sequence[_Chunk],
    app_name: str,
    section: Section,
    attr: Attribute,
    cfg: GenerationConfig,
    llm: LlmClient,
    stats: CostStats,
) -> _AttributeResult:
    present = False
    entries: list[ProvenanceEntry] = []
    for chunk in chunks:
        prompt = build_prompt(app_name, chunk.segments, section, attr)
        answer = _complete_with_retries(llm, prompt.rendered, cfg, stats)
        if parse_answer(answer) is Presence.PRESENT:
            present = True
        for segment in chunk.segments:
            entries.append(
                ProvenanceEntry(
                    segment_id=segment.segment_id,
                    answer=answer,
                    group_specific=_group_specific(segment.text),
                )
            )
    return (Presence.PRESENT if present else Presence.ABSENT), entries


def generate_label(
    segments: Sequence[Segment],
    app_name: str,
    schema: LabelSchema,
    cfg: GenerationConfig | None = None,
    llm: LlmClient | None = None,
) -> tuple[PrivacyLabel, CostStats]:
    """Hybrid-strategy label generation over classified segments.

    For every (section, attribute) pair: select the section's mapped
    segments; with none, the value is Absent with zero LLM calls; otherwise
    the segments are chunked to the context word limit, one question is asked
    per chunk, and chunk answers OR-aggregate. Transport failures raise
    LlmError (annotated with partial progress), never a silent Absent.
    """
    if llm is None:
        raise ValueError("an LlmClient is required")
    cfg = cfg if cfg is not None else GenerationConfig()
    stats = CostStats(strategy=Strategy.HYBRID)

    section_chunks = {
        section.name: _plan_chunks(
            select_segments(schema, section, segments), cfg.context_word_limit
        )
        for section in schema.sections
    }
    jobs = [(section, attr) for section in schema.sections for attr in section.attributes]

    def worker(job) -> _AttributeResult:
        section, attr = job
        chunks = section_chunks[section.name]
        if not chunks:
            return Presence.ABSENT, []
        return _answer_over_chunks(chunks, app_name, section, attr, cfg, llm, stats)

    results = _collect(jobs, worker, cfg)
    return _assemble_label(schema, jobs, results), stats


def _collect(jobs, worker, cfg: GenerationConfig) -> list[_AttributeResult]:
    results: list[_AttributeResult] = []
    with ThreadPoolExecutor(max_workers=cfg.max_concurrent_requests) as executor:
        result_iterator = executor.map(worker, jobs)
        for index, (section, attr) in enumerate(jobs):
            try:
                results.append(next(result_iterator))
            except LlmError as exc:
                raise LlmError(
                    f"LLM backend failed for {section.name}/{attr.name}: {exc}",
                    section=section.name,
                    attribute=attr.name,
                    completed=index,
                    total=len(jobs),
                ) from exc
    return results


def _assemble_label(schema, jobs, results) -> PrivacyLabel:
    values: dict[tuple[str, str], Presence] = {}
    provenance: dict[tuple[str, str], list[ProvenanceEntry]] = {}
    for (section, attr), (presence, entries) in zip(jobs, results):
        values[(section.name, attr.name)] = presence
        if entries:
            provenance[(section.name, attr.name)] = entries
    return PrivacyLabel(
        schema_ref=schema.ref,
        origin=LabelOrigin.GENERATED,
        values=values,
        provenance=provenance or None,
    )


def _plan_sentence_chunks(
    sentences: Sequence[Sentence], word_limit: int
) -> list[tuple[str, tuple[Sentence, ...]]]:
    chunks: list[tuple[str, tuple[Sentence, ...]]] = []
    current: list[Sentence] = []
    current_words = 0

    def flush():
        nonlocal current, current_words
        if current:
            chunks.append((" ".join(s.text for s in current), tuple(current)))
            current, current_words = [], 0

    for sentence in sentences:
        n = len(sentence.text.split())
        if n > word_limit:
            flush()
            for window in _word_windows(sentence.text.split(), word_limit):
                chunks.append((window, (sentence,)))
        elif current_words + n > word_limit:
            flush()
            current, current_words = [sentence], n
        else:
            current.append(sentence)
            current_words += n
    flush()
    return chunks


def _match_line_to_sentences(line: str, members: Sequence[Sentence]) -> list[Sentence]:
    normalized_line = _normalize_for_match(line)
    if not normalized_line:
        return []
    hits = []
    line_words = len(normalized_line.split())
    for sentence in members:
        normalized_sentence = _normalize_for_match(sentence.text)
        if normalized_sentence and normalized_sentence in normalized_line:
            hits.append(sentence)
        elif line_words >= 3 and normalized_line in normalized_sentence:
            hits.append(sentence)
    return hits


_MATCH_NORM_RE = re.compile(r"[^0-9a-z]+")


def _normalize_for_match(text: str) -> str:
    return _MATCH_NORM_RE.sub(" ", text.casefold()).strip()


def retrieve_relevant(
    sentences: Sequence[Sentence],
    question: str,
    cfg: GenerationConfig,
    llm: LlmClient,
    stats: CostStats | None = None,
) -> list[Segment]:
    """Fully-LLM retrieval stage: ask for verbatim relevant sentences per chunk.

    The raw document (not classified segments) is chunked to the word limit;
    each returned non-NONE line is matched back to the chunk's source
    sentences by normalized substring, and matches become single-sentence
    synthetic segments in document order (segment_id = sentence index).
    Unmatched lines are discarded and counted on the stats.
    """
    if stats is None:
        stats = CostStats(strategy=Strategy.FULL_LLM)
    chunks = _plan_sentence_chunks(sentences, cfg.context_word_limit)
    matched: dict[int, Sentence] = {}
    total = len(chunks)
    for part, (chunk_text, members) in enumerate(chunks, start=1):
        prompt = _RETRIEVAL_TEMPLATE.format(
            part=part, parts=total, chunk=chunk_text, question=question
        )
        answer = _complete_with_retries(llm, prompt, cfg, stats)
        for line in answer.splitlines():
            line = line.strip()
            if not line or line.upper() == "NONE":
                continue
            hits = _match_line_to_sentences(line, members)
            if not hits:
                stats.count_unmatched_line()
                continue
            for sentence in hits:
                matched[sentence.index] = sentence
    return [
        Segment(
            segment_id=index,
            sentence_indices=(index,),
            sentences=(matched[index].text,),
        )
        for index in sorted(matched)
    ]


def generate_label_full_llm(
    sentences: Sequence[Sentence],
    app_name: str,
    schema: LabelSchema,
    cfg: GenerationConfig | None = None,
    retrieval_llm: LlmClient | None = None,
    answer_llm: LlmClient | None = None,
) -> tuple[PrivacyLabel, CostStats]:
    """Fully-LLM-strategy generation: retrieval per question, then answering.

    Retrieval scans every document chunk for every attribute, so the prompt
    word total always dominates the hybrid strategy's on the same document.
    """
    if retrieval_llm is None or answer_llm is None:
        raise ValueError("both a retrieval and an answering LlmClient are required")
    cfg = cfg if cfg is not None else GenerationConfig()
    stats = CostStats(strategy=Strategy.FULL_LLM)
    jobs = [(section, attr) for section in schema.sections for attr in section.attributes]

    def worker(job) -> _AttributeResult:
        section, attr = job
        question = render_question(section, attr, app_name)
        relevant = retrieve_relevant(sentences, question, cfg, retrieval_llm, stats=stats)
        if not relevant:
            return Presence.ABSENT, []
        chunks = _plan_chunks(relevant, cfg.context_word_limit)
        return _answer_over_chunks(chunks, app_name, section, attr, cfg, answer_llm, stats)

    results = _collect(jobs, worker, cfg)
    return _assemble_label(schema, jobs, results), stats
