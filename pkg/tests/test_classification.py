import json

import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from policy2label.categories import CATEGORIES, DataPracticeCategory
from policy2label.classification import (
    ExternalScoresClassifier,
    KeywordPracticeClassifier,
    OneVsRestPracticeClassifier,
    classify,
    classify_segments,
)
from policy2label.errors import (
    DimensionMismatch,
    FormatError,
    InsufficientData,
    MissingEmbedding,
)

from conftest import make_segment

FP = DataPracticeCategory.FIRST_PARTY_COLLECTION_USE
TP = DataPracticeCategory.THIRD_PARTY_SHARING_COLLECTION
DS = DataPracticeCategory.DATA_SECURITY


class FixedScores:
    """Backend stub returning a frozen score map."""

    def __init__(self, scores, threshold=0.5):
        self.scores = {c: 0.0 for c in CATEGORIES} | scores
        self.threshold = threshold

    def score_segment(self, segment):
        return dict(self.scores)


class TestCategoryEnum:
    def test_exactly_twelve(self):
        assert len(CATEGORIES) == 12

    def test_serialized_names_stable(self):
        assert FP.value == "First-Party Collection/Use"
        assert DataPracticeCategory.PRACTICE_NOT_COVERED.value == "Practice not covered"
        assert {c.value for c in CATEGORIES} == {
            "First-Party Collection/Use",
            "Third-Party Sharing/Collection",
            "User Access, Edit and Deletion",
            "Data Retention",
            "Data Security",
            "International & Specific Audiences",
            "Do Not Track",
            "Policy Change",
            "User Choice/Control",
            "Introductory/Generic",
            "Practice not covered",
            "Privacy contact information",
        }


def separable_two_category_set():
    X, y = [], []
    for j in range(10):
        X.append([1.0 + 0.01 * j, 0.0])
        y.append({FP})
        X.append([0.0, 1.0 + 0.01 * j])
        y.append({TP})
    return np.array(X), y


def training_f1(model, X, y):
    predictions = model.predict(X)
    scores = {}
    for category in CATEGORIES:
        tp = fp = fn = 0
        for truth, got in zip(y, predictions):
            if category in truth and category in got:
                tp += 1
            elif category in got:
                fp += 1
            elif category in truth:
                fn += 1
        if tp + fp + fn == 0:
            continue
        scores[category] = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    return scores


class TestOneVsRestTrainer:
    def test_first_epoch_matches_closed_form(self):
        # 1-D oracle, one category: with zero init every probability is 0.5,
        # so after one step w = lr * mean(x * (y - 0.5)) summed over rows:
        # rows (x=1, y=1) and (x=-1, y=0) give gradW = -0.5, w = 0.5, b = 0.
        X = np.array([[1.0], [-1.0]])
        y = [{FP}, set()]
        model = OneVsRestPracticeClassifier(learning_rate=1.0, epochs=1).fit(X, y)
        row = CATEGORIES.index(FP)
        assert model.weights_[row, 0] == pytest.approx(0.5, abs=1e-12)
        assert model.biases_[row] == pytest.approx(0.0, abs=1e-12)

    def test_separable_set_reaches_perfect_training_f1(self):
        X, y = separable_two_category_set()
        model = OneVsRestPracticeClassifier().fit(X, y)
        scores = training_f1(model, X, y)
        assert scores == {FP: 1.0, TP: 1.0}

    def test_empty_examples_rejected(self):
        with pytest.raises(InsufficientData):
            OneVsRestPracticeClassifier().fit(np.empty((0, 3)), [])

    def test_contradictory_duplicates_train_with_bounded_probabilities(self):
        X = np.array([[1.0, 0.0]] * 4)
        y = [{FP}, set(), {FP}, set()]
        model = OneVsRestPracticeClassifier().fit(X, y)
        probabilities = model.predict_proba(X)
        assert np.all((probabilities >= 0.0) & (probabilities <= 1.0))

    def test_ragged_embeddings_rejected(self):
        with pytest.raises(DimensionMismatch):
            OneVsRestPracticeClassifier().fit([[1.0, 2.0], [1.0]], [{FP}, {TP}])

    def test_training_is_deterministic(self):
        X, y = separable_two_category_set()
        a = OneVsRestPracticeClassifier().fit(X, y)
        b = OneVsRestPracticeClassifier().fit(X, y)
        assert np.array_equal(a.weights_, b.weights_)
        assert np.array_equal(a.biases_, b.biases_)

    def test_category_names_accepted_in_y(self):
        X = np.array([[1.0], [-1.0]])
        model = OneVsRestPracticeClassifier(epochs=5).fit(
            X, [["First-Party Collection/Use"], []]
        )
        assert model.n_features_in_ == 1

    def test_unfitted_predict_raises(self):
        with pytest.raises(NotFittedError):
            OneVsRestPracticeClassifier().predict(np.ones((1, 2)))

    def test_predict_dimension_checked(self):
        X, y = separable_two_category_set()
        model = OneVsRestPracticeClassifier(epochs=5).fit(X, y)
        with pytest.raises(DimensionMismatch):
            model.predict(np.ones((1, 3)))

    def test_save_load_roundtrip(self, tmp_path):
        X, y = separable_two_category_set()
        model = OneVsRestPracticeClassifier().fit(X, y)
        path = tmp_path / "model.json"
        model.save(path)
        restored = OneVsRestPracticeClassifier.load(path)
        assert np.array_equal(restored.weights_, model.weights_)
        assert restored.predict(X) == model.predict(X)
        assert restored.threshold == model.threshold

    def test_load_rejects_foreign_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"format": "something-else"}), encoding="utf-8")
        with pytest.raises(FormatError):
            OneVsRestPracticeClassifier.load(path)

    def test_get_params(self):
        params = OneVsRestPracticeClassifier(learning_rate=0.1).get_params()
        assert params["learning_rate"] == 0.1
        assert params["threshold"] == 0.5


class TestClassifyThresholding:
    def test_high_score_selected(self):
        model = FixedScores({FP: 0.9, TP: 0.4})
        scores, selected = classify(model, make_segment(0, "text"))
        assert selected == {FP}
        assert scores[FP] == 0.9
        assert len(scores) == 12

    def test_exactly_threshold_excluded(self):
        model = FixedScores({FP: 0.5})
        _, selected = classify(model, make_segment(0, "text"))
        assert selected == set()

    def test_multi_label(self):
        model = FixedScores({FP: 0.6, DS: 0.7})
        _, selected = classify(model, make_segment(0, "text"))
        assert selected == {FP, DS}

    def test_segment_categories_populated(self):
        segment = make_segment(0, "text")
        classify(FixedScores({TP: 0.8}), segment)
        assert segment.categories == {TP}

    def test_raising_score_never_removes(self):
        segment = make_segment(0, "text")
        for score in (0.51, 0.7, 0.99):
            _, selected = classify(FixedScores({FP: score}), segment)
            assert FP in selected

    def test_selection_subset_of_enumeration(self):
        model = FixedScores({c: 0.9 for c in CATEGORIES})
        _, selected = classify(model, make_segment(0, "text"))
        assert selected == set(CATEGORIES)


class TestLinearScoreSegment:
    def test_missing_embedding_raises(self):
        X, y = separable_two_category_set()
        model = OneVsRestPracticeClassifier(epochs=5).fit(X, y)
        with pytest.raises(MissingEmbedding):
            model.score_segment(make_segment(0, "text", embedding=None))

    def test_scores_cover_all_categories(self):
        X, y = separable_two_category_set()
        model = OneVsRestPracticeClassifier().fit(X, y)
        scores = model.score_segment(make_segment(0, "t", embedding=np.array([1.0, 0.0])))
        assert set(scores) == set(CATEGORIES)
        assert scores[FP] > 0.5


class TestKeywordBackend:
    def test_default_rules_fire(self):
        segment = make_segment(0, "We collect your email address.")
        scores, selected = classify(KeywordPracticeClassifier(), segment)
        assert selected == {FP}

    def test_output_ignores_embedding_availability(self):
        model = KeywordPracticeClassifier()
        with_embedding = make_segment(0, "We encrypt data.", embedding=np.ones(3))
        without_embedding = make_segment(0, "We encrypt data.", embedding=None)
        assert model.score_segment(with_embedding) == model.score_segment(without_embedding)

    def test_multiple_rules_multi_label(self):
        segment = make_segment(0, "We share data with third parties and we collect names.")
        _, selected = classify(KeywordPracticeClassifier(), segment)
        assert selected == {FP, TP}

    def test_custom_rules(self):
        model = KeywordPracticeClassifier(rules=(("banana", DS),))
        _, selected = classify(model, make_segment(0, "Banana security."))
        assert selected == {DS}

    def test_deterministic(self):
        segment = make_segment(0, "You can delete your data; we retain logs.")
        model = KeywordPracticeClassifier()
        assert model.score_segment(segment) == model.score_segment(segment)


class TestExternalBackend:
    def test_sidecar_roundtrip(self, tmp_path):
        path = tmp_path / "scores.json"
        path.write_text(
            json.dumps({"0": {FP.value: 0.9}, "1": {TP.value: 0.2}}), encoding="utf-8"
        )
        model = ExternalScoresClassifier.from_file(path)
        _, selected = classify(model, make_segment(0, "t"))
        assert selected == {FP}
        _, selected = classify(model, make_segment(1, "t"))
        assert selected == set()

    def test_missing_segment_scores_zero(self, tmp_path):
        path = tmp_path / "scores.json"
        path.write_text(json.dumps({"0": {FP.value: 0.9}}), encoding="utf-8")
        model = ExternalScoresClassifier.from_file(path)
        scores = model.score_segment(make_segment(7, "t"))
        assert all(v == 0.0 for v in scores.values())

    def test_unknown_category_rejected(self, tmp_path):
        path = tmp_path / "scores.json"
        path.write_text(json.dumps({"0": {"Nonsense": 0.9}}), encoding="utf-8")
        with pytest.raises(FormatError):
            ExternalScoresClassifier.from_file(path)

    def test_out_of_range_probability_rejected(self, tmp_path):
        path = tmp_path / "scores.json"
        path.write_text(json.dumps({"0": {FP.value: 1.5}}), encoding="utf-8")
        with pytest.raises(FormatError):
            ExternalScoresClassifier.from_file(path)


def test_classify_segments_sets_all():
    segments = [
        make_segment(0, "We collect your name."),
        make_segment(1, "The weather is nice."),
    ]
    selected = classify_segments(KeywordPracticeClassifier(), segments)
    assert selected == [{FP}, set()]
    assert segments[0].categories == {FP}
    assert segments[1].categories == set()
