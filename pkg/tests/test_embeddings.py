import math

import numpy as np
import pytest

from policy2label.embeddings import (
    SentenceEmbedder,
    cosine_similarity,
    embed_sentence,
    load_vectors,
    tokenize,
)
from policy2label.errors import DimensionMismatch, FormatError


@pytest.fixture
def tiny_store(tmp_path):
    path = tmp_path / "vectors.vec"
    path.write_text("3 2\na 1 0\nb 0 1\nc 1 1\n", encoding="utf-8")
    return load_vectors(path)


class TestLoadVectors:
    def test_parses_header_and_rows(self, tiny_store):
        assert tiny_store.dimension == 2
        assert len(tiny_store) == 3
        assert np.array_equal(tiny_store.get("a"), [1.0, 0.0])

    def test_absent_token_has_no_vector(self, tiny_store):
        assert tiny_store.get("zzz") is None
        assert "zzz" not in tiny_store

    def test_dimension_mismatch_reports_line(self, tmp_path):
        path = tmp_path / "bad.vec"
        path.write_text("2 2\na 1 0\nb 0\n", encoding="utf-8")
        with pytest.raises(FormatError) as excinfo:
            load_vectors(path)
        assert excinfo.value.line == 3

    def test_unparsable_real_reports_line(self, tmp_path):
        path = tmp_path / "bad.vec"
        path.write_text("1 2\na 1 oops\n", encoding="utf-8")
        with pytest.raises(FormatError) as excinfo:
            load_vectors(path)
        assert excinfo.value.line == 2

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.vec"
        path.write_text("not a header\n", encoding="utf-8")
        with pytest.raises(FormatError) as excinfo:
            load_vectors(path)
        assert excinfo.value.line == 1

    def test_missing_file_is_oserror(self, tmp_path):
        with pytest.raises(OSError):
            load_vectors(tmp_path / "absent.vec")

    def test_tokens_are_lowercased(self, tmp_path):
        path = tmp_path / "v.vec"
        path.write_text("1 2\nHELLO 1 2\n", encoding="utf-8")
        assert "hello" in load_vectors(path)


class TestEmbedSentence:
    def test_mean_of_two_vectors(self, tiny_store):
        # (1,0) and (0,1) average to (0.5, 0.5)
        assert np.allclose(embed_sentence(tiny_store, "a b"), [0.5, 0.5])

    def test_all_oov_is_zero_vector(self, tiny_store):
        assert np.array_equal(embed_sentence(tiny_store, "zzz yyy"), [0.0, 0.0])

    def test_single_word_is_identity(self, tiny_store):
        assert np.array_equal(embed_sentence(tiny_store, "b"), [0.0, 1.0])

    def test_order_invariant(self, tiny_store):
        forward = embed_sentence(tiny_store, "a b c")
        backward = embed_sentence(tiny_store, "c b a")
        assert np.array_equal(forward, backward)

    def test_oov_tokens_skipped_not_averaged(self, tiny_store):
        with_noise = embed_sentence(tiny_store, "a zzz b")
        assert np.allclose(with_noise, [0.5, 0.5])

    def test_tokenizer_lowercases_and_splits_on_punctuation(self):
        assert tokenize("We Collect: e-mail!") == ["we", "collect", "e", "mail"]


class TestCosineSimilarity:
    def test_self_similarity(self):
        assert cosine_similarity([3.0, 4.0], [3.0, 4.0]) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_45_degrees_is_inverse_sqrt2(self):
        # 1/sqrt(2) = 0.7071067811865475...
        value = cosine_similarity([1.0, 0.0], [1.0, 1.0])
        assert abs(value - 1.0 / math.sqrt(2.0)) < 1e-12
        assert value == pytest.approx(0.7071067811865475, abs=1e-12)

    def test_zero_vector_convention(self):
        assert cosine_similarity([0.0, 0.0], [1.0, 2.0]) == 0.0
        assert cosine_similarity([0.0, 0.0], [0.0, 0.0]) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cosine_similarity([1.0], [1.0, 2.0])

    def test_symmetry_and_range_randomized(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a = rng.normal(size=5)
            b = rng.normal(size=5)
            ab = cosine_similarity(a, b)
            assert ab == cosine_similarity(b, a)
            assert -1.0 - 1e-12 <= ab <= 1.0 + 1e-12

    def test_positive_scaling_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            v = rng.normal(size=4)
            if np.linalg.norm(v) == 0:
                continue
            c = float(rng.uniform(0.01, 100.0))
            assert abs(cosine_similarity(v, c * v) - 1.0) < 1e-12


class TestSentenceEmbedder:
    def test_embed_matches_function(self, tiny_store):
        embedder = SentenceEmbedder(store=tiny_store)
        assert np.array_equal(embedder.embed("a c"), embed_sentence(tiny_store, "a c"))

    def test_transform_stacks_rows(self, tiny_store):
        matrix = SentenceEmbedder(store=tiny_store).transform(["a", "b"])
        assert matrix.shape == (2, 2)
        assert np.array_equal(matrix[0], [1.0, 0.0])

    def test_default_store_embeds_to_zero(self):
        embedder = SentenceEmbedder()
        assert not embedder.embed("anything at all").any()

    def test_transform_empty_input(self, tiny_store):
        assert SentenceEmbedder(store=tiny_store).transform([]).shape == (0, 2)

    def test_get_params_roundtrip(self, tiny_store):
        embedder = SentenceEmbedder(store=tiny_store, dimension=2)
        params = embedder.get_params()
        assert params["store"] is tiny_store
        assert type(embedder)(**params).embed("a").tolist() == [1.0, 0.0]
