import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from emocast.embed import (
    EmbeddingTable,
    TokenPipeline,
    _strip_suffixes,
    default_stopwords,
    encode_utterance,
    load_embeddings,
    preprocess,
    random_embeddings,
)
from emocast.errors import CorpusFormatError

VEC_FILE = "hello 1.0 2.0 3.0\nworld -1.0 0.5 0.25\n"


def test_load_two_line_file():
    table = load_embeddings(io.StringIO(VEC_FILE), dim=3)
    assert len(table) == 2
    assert np.array_equal(table.lookup("hello"), [1.0, 2.0, 3.0])
    assert np.array_equal(table.lookup("world"), [-1.0, 0.5, 0.25])


def test_wrong_float_count_reports_line():
    bad = "hello 1.0 2.0 3.0\nworld 1.0 2.0\n"
    with pytest.raises(CorpusFormatError, match="line 2"):
        load_embeddings(io.StringIO(bad), dim=3)


def test_duplicate_token_keeps_first_with_warning():
    dup = "tok 1.0 2.0\ntok 9.0 9.0\n"
    with pytest.warns(UserWarning, match="duplicate"):
        table = load_embeddings(io.StringIO(dup), dim=2)
    assert np.array_equal(table.lookup("tok"), [1.0, 2.0])


def test_oov_policies():
    table = load_embeddings(io.StringIO(VEC_FILE), dim=3, oov_policy="zero")
    assert np.array_equal(table.lookup("missing"), np.zeros(3))
    table_mean = load_embeddings(io.StringIO(VEC_FILE), dim=3, oov_policy="mean")
    assert np.allclose(table_mean.lookup("missing"), [0.0, 1.25, 1.625])


def test_vocab_filter():
    table = load_embeddings(io.StringIO(VEC_FILE), dim=3, vocab_filter={"world"})
    assert len(table) == 1
    assert "hello" not in table.vocab


def test_tokens_containing_spaces():
    # some released vector files carry multi-word tokens; the last dim
    # fields are always the vector
    table = load_embeddings(io.StringIO(". . . 1.0 2.0\nhi 3.0 4.0\n"), dim=2)
    assert np.array_equal(table.lookup(". . ."), [1.0, 2.0])
    assert np.array_equal(table.lookup("hi"), [3.0, 4.0])


def test_preprocess_default_pipeline_example():
    assert preprocess("Is everything alright?") == ["everything", "alright"]


def test_preprocess_empty_string():
    assert preprocess("") == []


def test_preprocess_accepts_token_sequences():
    assert preprocess(("Is", "everything", "alright?")) == ["everything", "alright"]


def test_preprocess_stages_togglable():
    pipeline = TokenPipeline(lowercase=False, strip_punctuation=False,
                             stopwords=frozenset(), stemmer="none")
    assert preprocess("Is everything alright?", pipeline) == ["Is", "everything", "alright?"]


def test_suffix_stripper_examples():
    pipeline = TokenPipeline(stopwords=frozenset(), stemmer="suffix")
    assert preprocess("studies cats wanted really", pipeline) == ["study", "cat", "want", "real"]


@given(st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=15))
def test_suffix_stripper_idempotent(word):
    once = _strip_suffixes(word)
    assert _strip_suffixes(once) == once


@given(st.lists(st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=12),
                max_size=8))
def test_pipeline_idempotent_on_own_output(tokens):
    pipeline = TokenPipeline(stemmer="suffix")
    once = preprocess(tokens, pipeline)
    assert preprocess(once, pipeline) == once


def test_encode_zero_tokens_all_zero():
    table = load_embeddings(io.StringIO(VEC_FILE), dim=3)
    flat = encode_utterance([], table, max_tokens=20)
    assert flat.shape == (60,)
    assert np.all(flat == 0.0)


def test_encode_single_token_position():
    table = load_embeddings(io.StringIO(VEC_FILE), dim=3)
    flat = encode_utterance(["hello"], table, max_tokens=4)
    assert np.array_equal(flat[:3], [1.0, 2.0, 3.0])
    assert np.all(flat[3:] == 0.0)


def test_encode_truncates_to_max_tokens():
    table = load_embeddings(io.StringIO(VEC_FILE), dim=3)
    tokens = ["hello"] * 30
    flat = encode_utterance(tokens, table, max_tokens=20)
    assert flat.shape == (60,)
    # all 20 retained positions carry the hello vector
    assert np.allclose(flat.reshape(20, 3), np.tile([1.0, 2.0, 3.0], (20, 1)))


def test_encode_norm_concatenation_law():
    rng = np.random.default_rng(4)
    tokens = [f"t{i}" for i in range(6)]
    table = random_embeddings(tokens, dim=5, seed=1)
    chosen = list(rng.choice(tokens, size=4))
    flat = encode_utterance(chosen, table, max_tokens=10)
    expected = math.sqrt(sum(np.sum(table.lookup(t) ** 2) for t in chosen))
    assert np.linalg.norm(flat) == pytest.approx(expected, rel=1e-12)


def test_encode_length_constant():
    table = random_embeddings(["a", "b"], dim=4, seed=0)
    for tokens in ([], ["a"], ["a", "b"], ["b"] * 50):
        assert encode_utterance(tokens, table, max_tokens=7).shape == (28,)


def test_default_stopwords_cover_common_words():
    stops = default_stopwords()
    assert {"is", "the", "and", "you"} <= stops
    assert len(stops) >= 140


def test_pipeline_validation():
    with pytest.raises(ValueError):
        TokenPipeline(max_tokens=0)
    with pytest.raises(ValueError):
        TokenPipeline(stemmer="porter")
    with pytest.raises(ValueError):
        EmbeddingTable(dim=0, vocab={}, vectors=np.zeros((0, 0)))
    with pytest.raises(ValueError):
        EmbeddingTable(dim=2, vocab={}, vectors=np.zeros((0, 2)), oov_policy="random")
