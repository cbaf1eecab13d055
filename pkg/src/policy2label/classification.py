"""Multi-label data-practice classification with pluggable backends.

Three backends share one duck-typed surface: ``score_segment(segment)``
returning a probability for every category, plus a ``threshold``. A segment
is labeled with exactly the categories scoring strictly above the threshold.

- OneVsRestPracticeClassifier: reference trainable model over embeddings.
- KeywordPracticeClassifier: deterministic indicator-phrase rules, used for
  hermetic tests and offline runs.
- ExternalScoresClassifier: scores read from a sidecar file keyed by
  segment_id, so any externally run model can plug in.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .categories import CATEGORIES, DataPracticeCategory, category_from_name
from .documents import Segment
from .errors import DimensionMismatch, FormatError, InsufficientData, MissingEmbedding

CategoryScores = dict[DataPracticeCategory, float]

MODEL_FORMAT = "policy2label-linear-classifier"


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -60.0, 60.0)))


def _as_matrix(X) -> np.ndarray:
    try:
        X = np.asarray(X, dtype=float)
    except ValueError as exc:
        raise DimensionMismatch(f"embeddings do not share one dimension: {exc}") from exc
    if X.ndim != 2:
        raise DimensionMismatch("embeddings must form a 2-D matrix of one shared dimension")
    if not np.all(np.isfinite(X)):
        raise ValueError("embeddings must be finite")
    return X


def _as_category(value) -> DataPracticeCategory:
    if isinstance(value, DataPracticeCategory):
        return value
    return category_from_name(str(value))


class OneVsRestPracticeClassifier(BaseEstimator):
    """Reference one-vs-rest logistic regression over segment embeddings.

    Twelve independent logistic regressors fit by full-batch gradient descent
    from zero-initialized weights, so training is byte-deterministic given
    the example order, with no random state at all.
    """

    def __init__(
        self,
        threshold: float = 0.5,
        learning_rate: float = 0.5,
        epochs: int = 200,
        l2: float = 0.0,
    ):
        self.threshold = threshold
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.l2 = l2

    def fit(self, X, y: Iterable[Iterable]) -> "OneVsRestPracticeClassifier":
        """Fit on an (n, d) embedding matrix and per-example category sets.

        Category sets may contain DataPracticeCategory members or their
        serialized names. Raises InsufficientData on an empty example list
        and DimensionMismatch on ragged embeddings.
        """
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie strictly between 0 and 1")
        y = [frozenset(_as_category(c) for c in labels) for labels in y]
        X = _as_matrix(X)
        if X.shape[0] == 0 or not y:
            raise InsufficientData("at least one training example is required")
        if X.shape[0] != len(y):
            raise ValueError("X and y differ in length")

        n, d = X.shape
        targets = np.zeros((n, len(CATEGORIES)), dtype=float)
        for row, labels in enumerate(y):
            for category in labels:
                targets[row, CATEGORIES.index(category)] = 1.0

        weights = np.zeros((len(CATEGORIES), d), dtype=float)
        biases = np.zeros(len(CATEGORIES), dtype=float)
        for _ in range(self.epochs):
            probabilities = _sigmoid(X @ weights.T + biases)
            residual = (probabilities - targets) / n
            weights -= self.learning_rate * (residual.T @ X + self.l2 * weights)
            biases -= self.learning_rate * residual.sum(axis=0)

        self.classes_ = CATEGORIES
        self.weights_ = weights
        self.biases_ = biases
        self.n_features_in_ = d
        return self

    def _check_fitted(self):
        if not hasattr(self, "weights_"):
            raise NotFittedError("classifier is not fitted; call fit() or load()")

    def predict_proba(self, X) -> np.ndarray:
        """Per-category probabilities, shape (n, 12), columns in CATEGORIES order."""
        self._check_fitted()
        X = _as_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(
                f"model expects dimension {self.n_features_in_}, got {X.shape[1]}"
            )
        return _sigmoid(X @ self.weights_.T + self.biases_)

    def predict(self, X) -> list[set[DataPracticeCategory]]:
        probabilities = self.predict_proba(X)
        return [
            {c for c, p in zip(CATEGORIES, row) if p > self.threshold}
            for row in probabilities
        ]

    def score_segment(self, segment: Segment) -> CategoryScores:
        if segment.embedding is None:
            raise MissingEmbedding(f"segment {segment.segment_id} has no embedding")
        row = self.predict_proba(np.asarray(segment.embedding, dtype=float)[None, :])[0]
        return {c: float(p) for c, p in zip(CATEGORIES, row)}

    def save(self, path: str | Path) -> None:
        self._check_fitted()
        payload = {
            "format": MODEL_FORMAT,
            "dimension": int(self.n_features_in_),
            "threshold": self.threshold,
            "categories": [c.value for c in CATEGORIES],
            "weights": self.weights_.tolist(),
            "biases": self.biases_.tolist(),
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "OneVsRestPracticeClassifier":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"not valid JSON: {exc}") from exc
        if payload.get("format") != MODEL_FORMAT:
            raise FormatError(f"not a {MODEL_FORMAT} file")
        if payload.get("categories") != [c.value for c in CATEGORIES]:
            raise FormatError("category list does not match this build")
        model = cls(threshold=float(payload["threshold"]))
        weights = np.asarray(payload["weights"], dtype=float)
        biases = np.asarray(payload["biases"], dtype=float)
        dimension = int(payload["dimension"])
        if weights.shape != (len(CATEGORIES), dimension) or biases.shape != (len(CATEGORIES),):
            raise FormatError("weight shapes do not match the declared dimension")
        model.classes_ = CATEGORIES
        model.weights_ = weights
        model.biases_ = biases
        model.n_features_in_ = dimension
        return model


_C = DataPracticeCategory
#: Indicator phrase -> category. Matching is casefolded substring containment.
DEFAULT_KEYWORD_RULES: tuple[tuple[str, DataPracticeCategory], ...] = (
    ("we collect", _C.FIRST_PARTY_COLLECTION_USE),
    ("we gather", _C.FIRST_PARTY_COLLECTION_USE),
    ("we obtain", _C.FIRST_PARTY_COLLECTION_USE),
    ("we use your", _C.FIRST_PARTY_COLLECTION_USE),
    ("we share", _C.THIRD_PARTY_SHARING_COLLECTION),
    ("we disclose", _C.THIRD_PARTY_SHARING_COLLECTION),
    ("third part", _C.THIRD_PARTY_SHARING_COLLECTION),
    ("encrypt", _C.DATA_SECURITY),
    ("secure socket", _C.DATA_SECURITY),
    ("delet", _C.USER_ACCESS_EDIT_DELETION),
    ("correct your", _C.USER_ACCESS_EDIT_DELETION),
    ("retain", _C.DATA_RETENTION),
    ("retention", _C.DATA_RETENTION),
    ("do not track", _C.DO_NOT_TRACK),
    ("opt out", _C.USER_CHOICE_CONTROL),
    ("opt-out", _C.USER_CHOICE_CONTROL),
    ("under 13", _C.INTERNATIONAL_SPECIFIC_AUDIENCES),
    ("children", _C.INTERNATIONAL_SPECIFIC_AUDIENCES),
    ("california resident", _C.INTERNATIONAL_SPECIFIC_AUDIENCES),
    ("changes to this policy", _C.POLICY_CHANGE),
    ("update this policy", _C.POLICY_CHANGE),
    ("contact us at", _C.PRIVACY_CONTACT_INFORMATION),
)


class KeywordPracticeClassifier:
    """Deterministic rule-table backend over segment text.

    Each category scores 1.0 when any of its indicator phrases occurs in the
    casefolded segment text, else 0.0. Output depends only on the text, never
    on embedding availability.
    """

    def __init__(
        self,
        rules: Iterable[tuple[str, DataPracticeCategory]] | None = None,
        threshold: float = 0.5,
    ):
        self.rules = tuple(rules) if rules is not None else DEFAULT_KEYWORD_RULES
        self.threshold = threshold

    def score_segment(self, segment: Segment) -> CategoryScores:
        text = segment.text.casefold()
        scores = {c: 0.0 for c in CATEGORIES}
        for phrase, category in self.rules:
            if phrase.casefold() in text:
                scores[category] = 1.0
        return scores


class ExternalScoresClassifier:
    """Scores read from a sidecar JSON map {segment_id: {category: prob}}.

    Segments missing from the sidecar score 0.0 everywhere (no prediction).
    """

    def __init__(self, scores: Mapping[int, Mapping[DataPracticeCategory, float]], threshold: float = 0.5):
        self._scores = {int(k): dict(v) for k, v in scores.items()}
        self.threshold = threshold

    @classmethod
    def from_file(cls, path: str | Path, threshold: float = 0.5) -> "ExternalScoresClassifier":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise FormatError("sidecar must be a JSON object keyed by segment_id")
        scores: dict[int, dict[DataPracticeCategory, float]] = {}
        for key, row in raw.items():
            try:
                segment_id = int(key)
            except ValueError:
                raise FormatError(f"segment_id key {key!r} is not an integer") from None
            if not isinstance(row, dict):
                raise FormatError(f"scores for segment {key} must be an object")
            parsed: dict[DataPracticeCategory, float] = {}
            for name, probability in row.items():
                try:
                    category = category_from_name(name)
                except ValueError as exc:
                    raise FormatError(str(exc)) from None
                probability = float(probability)
                if not 0.0 <= probability <= 1.0:
                    raise FormatError(
                        f"probability {probability} for {name!r} outside [0, 1]"
                    )
                parsed[category] = probability
            scores[segment_id] = parsed
        return cls(scores, threshold=threshold)

    def score_segment(self, segment: Segment) -> CategoryScores:
        row = self._scores.get(segment.segment_id, {})
        return {c: float(row.get(c, 0.0)) for c in CATEGORIES}


def classify(model, segment: Segment) -> tuple[CategoryScores, set[DataPracticeCategory]]:
    """Score one segment and select categories strictly above the threshold.

    Multi-label: the selected set may be empty or have several members. The
    segment's ``categories`` field is populated with the selection.
    """
    scores = model.score_segment(segment)
    selected = {c for c in CATEGORIES if scores[c] > model.threshold}
    segment.categories = set(selected)
    return scores, selected


def classify_segments(model, segments: Iterable[Segment]) -> list[set[DataPracticeCategory]]:
    """Classify segments in place, returning the selected set per segment."""
    return [classify(model, s)[1] for s in segments]
