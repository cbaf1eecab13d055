"""LLM client backends: HTTP completion, deterministic keyword mock, and replay.

Every backend implements ``complete(prompt, max_answer_words) -> str`` and is
total: failures surface as typed LlmError subclasses, never as free text. All
backends are safe for concurrent calls.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from pathlib import Path
from typing import Mapping, Protocol

import requests

from .errors import FormatError, LlmError, LlmTransientError, ReplayMiss

API_KEY_ENV = "POLICY2LABEL_API_KEY"

_QUESTION_MARKER = "\nQuestion: "
_RETRIEVAL_MARKER = "Copy verbatim the sentences relevant"
_CONTEXT_HEADER = "Privacy policy excerpts:\n"
_NON_ALNUM_RE = re.compile(r"[^0-9a-z]+")


class LlmClient(Protocol):
    def complete(self, prompt: str, max_answer_words: int) -> str:
        ...


class HttpCompletionClient:
    """Generic completion-protocol client.

    POSTs ``{"model", "prompt", "max_tokens", "temperature": 0}`` as JSON and
    expects ``{"choices": [{"text": ...}]}`` back. Temperature is pinned to 0
    for determinism. The credential comes from the POLICY2LABEL_API_KEY
    environment variable unless passed explicitly.

    Transport failures and 5xx responses raise LlmTransientError (the
    orchestrator retries those); 4xx and malformed responses raise LlmError
    and are terminal.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        timeout: float = 60.0,
        api_key: str | None = None,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self._session = session

    def complete(self, prompt: str, max_answer_words: int) -> str:
        payload = {
            "model": self.model,
            "prompt": prompt,
            "max_tokens": max_answer_words,
            "temperature": 0,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        poster = self._session if self._session is not None else requests
        try:
            response = poster.post(
                self.endpoint, json=payload, headers=headers, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise LlmTransientError(f"completion request failed: {exc}") from exc
        if response.status_code >= 500:
            raise LlmTransientError(f"completion endpoint returned {response.status_code}")
        if not 200 <= response.status_code < 300:
            raise LlmError(f"completion endpoint returned {response.status_code}")
        try:
            body = response.json()
            text = body["choices"][0]["text"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise LlmError(f"malformed completion response: {exc}") from exc
        if not isinstance(text, str):
            raise LlmError("completion text is not a string")
        return text


def _normalize(text: str) -> str:
    return _NON_ALNUM_RE.sub(" ", text.casefold()).strip()


def _split_prompt(prompt: str) -> tuple[str, str]:
    """(context part, question part); prompts without the marker are all question."""
    if _QUESTION_MARKER not in prompt:
        return "", prompt
    before, question = prompt.rsplit(_QUESTION_MARKER, 1)
    if _CONTEXT_HEADER in before:
        before = before.split(_CONTEXT_HEADER, 1)[1]
    elif "\n" in before:
        # Retrieval prompts carry a one-line preamble before the chunk.
        before = before.split("\n", 1)[1]
    return before, question


_NAIVE_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+")


class KeywordMockLlm:
    """Deterministic offline stand-in for a completion model.

    Two modes. With ``rules`` (a mapping of question marker -> required
    context keyword), the answer is yes iff some marker occurring in the
    question has its keyword in the context; an empty mapping answers no to
    everything. Without rules, the double-quoted attribute name is parsed out
    of the question and echoed: yes iff the normalized name occurs in the
    normalized context (the bundled question templates quote the name).

    Retrieval-style prompts (recognized by their copy-verbatim instruction)
    return the chunk sentences containing a keyword, one per line, or NONE.
    """

    def __init__(self, rules: Mapping[str, str] | None = None):
        self.rules = dict(rules) if rules is not None else None

    def _keywords(self, question: str) -> list[str]:
        if self.rules is None:
            return [_normalize(q) for q in re.findall(r'"([^"]+)"', question)]
        normalized_question = _normalize(question)
        return [
            _normalize(keyword)
            for marker, keyword in self.rules.items()
            if _normalize(marker) in normalized_question
        ]

    def complete(self, prompt: str, max_answer_words: int) -> str:
        context, question = _split_prompt(prompt)
        keywords = [k for k in self._keywords(question) if k]
        if _RETRIEVAL_MARKER in prompt:
            lines = []
            for sentence in _NAIVE_SENTENCE_RE.split(context):
                sentence = sentence.strip()
                if sentence and any(k in _normalize(sentence) for k in keywords):
                    lines.append(sentence)
            return "\n".join(lines) if lines else "NONE"
        normalized_context = _normalize(context)
        if any(k in normalized_context for k in keywords):
            return "Yes."
        return "No."


def prompt_key(prompt: str) -> str:
    """SHA-256 hex digest used as the replay lookup key."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class ReplayLlm:
    """Answers recorded prompts byte-deterministically; misses are errors.

    Fixture format: a JSON list of ``{"prompt_sha256": hex, "answer": str}``.
    """

    def __init__(self, answers: Mapping[str, str]):
        self._answers = dict(answers)

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayLlm":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"not valid JSON: {exc}") from exc
        if not isinstance(raw, list):
            raise FormatError("replay fixture must be a JSON list")
        answers: dict[str, str] = {}
        for i, entry in enumerate(raw):
            if (
                not isinstance(entry, dict)
                or not isinstance(entry.get("prompt_sha256"), str)
                or not isinstance(entry.get("answer"), str)
            ):
                raise FormatError(
                    f"replay entry {i} must have string prompt_sha256 and answer"
                )
            answers[entry["prompt_sha256"]] = entry["answer"]
        return cls(answers)

    @classmethod
    def from_prompts(cls, pairs: Mapping[str, str]) -> "ReplayLlm":
        """Build from literal prompt -> answer pairs (hashing for the caller)."""
        return cls({prompt_key(p): a for p, a in pairs.items()})

    def complete(self, prompt: str, max_answer_words: int) -> str:
        key = prompt_key(prompt)
        try:
            return self._answers[key]
        except KeyError:
            raise ReplayMiss(f"no replay entry for prompt hash {key}") from None
