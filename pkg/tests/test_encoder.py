import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgalign.encoder import VectorTable, encode, encode_many, hash_ngram_encode, load_vectors, save_vectors
from kgalign.errors import ParseError


def test_load_simple(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("2 3\nfoo 1 0 0\nbar\\sbaz 0 2 0\n", encoding="utf-8")
    t = load_vectors(str(p))
    assert t.dim == 3 and len(t) == 2
    assert "bar baz" in t


def test_short_row(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("1 3\nfoo 1 0\n", encoding="utf-8")
    with pytest.raises(ParseError) as err:
        load_vectors(str(p))
    assert err.value.line == 2


def test_empty_file(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("", encoding="utf-8")
    with pytest.raises(ParseError):
        load_vectors(str(p))


def test_duplicate_key(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("2 1\nfoo 1\nfoo 2\n", encoding="utf-8")
    with pytest.raises(ParseError, match="duplicate"):
        load_vectors(str(p))


def test_save_load_round_trip(tmp_path):
    t = VectorTable(2, {"a b": np.array([0.1, -3.0]), "c\\d": np.array([1e-300, 2.5])})
    save_vectors(str(tmp_path / "v.txt"), t)
    back = load_vectors(str(tmp_path / "v.txt"))
    assert back.entries.keys() == t.entries.keys()
    for k in t.entries:
        np.testing.assert_array_equal(back.entries[k], t.entries[k])


def test_table_lookup_is_normalized():
    t = VectorTable(8, {"abc": np.arange(8, dtype=float)})
    v = encode("abc", t, dim=8)
    np.testing.assert_allclose(v, np.arange(8) / np.linalg.norm(np.arange(8)))


def test_dim_mismatch():
    with pytest.raises(ValueError):
        encode("x", VectorTable(8, {}), dim=16)


def test_empty_text_is_zero():
    assert not hash_ngram_encode("", 64).any()
    assert not encode("", dim=64).any()


def test_deterministic():
    np.testing.assert_array_equal(encode("abc"), encode("abc"))


def test_similar_strings_are_closer():
    a, b, c = encode("abc"), encode("abd"), encode("xyz")
    assert np.dot(a, c) < np.dot(a, b) < np.dot(a, a)


def test_order_sensitive():
    assert not np.array_equal(encode("ab cd"), encode("cd ab"))


def test_case_insensitive():
    np.testing.assert_array_equal(encode("Paris"), encode("PARIS"))


def test_rejects_tiny_dim():
    with pytest.raises(ValueError):
        hash_ngram_encode("abc", 4)


@settings(max_examples=100, deadline=None)
@given(st.text(min_size=1, max_size=40))
def test_unit_norm(text):
    assert np.linalg.norm(encode(text, dim=64)) == pytest.approx(1.0)


def test_encode_many_rows():
    M = encode_many(["a", "b", ""], dim=32)
    assert M.shape == (3, 32)
    np.testing.assert_array_equal(M[0], encode("a", dim=32))
