import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgalign.errors import DatasetFormatError, ParseError, ReferentialError
from kgalign.kg import (
    KnowledgeGraph,
    SeedAlignment,
    graph_stats,
    load_openea_dataset,
    save_openea_dataset,
    split_seed,
)


def write_dataset(root, files):
    for name in ("rel_triples_1", "rel_triples_2", "attr_triples_1", "attr_triples_2", "ent_links"):
        with open(os.path.join(root, name), "w", encoding="utf-8") as fh:
            fh.write(files.get(name, ""))


@pytest.fixture
def small_dataset(tmp_path):
    write_dataset(
        tmp_path,
        {
            "rel_triples_1": "a\tr\tb\nb\tr\tc\n",
            "rel_triples_2": "x\tp\ty\n",
            "attr_triples_1": "a\tname\tAlpha\n",
            "attr_triples_2": "z\tlabel\tZed\n",
            "ent_links": "a\tx\nb\ty\n",
        },
    )
    return tmp_path


def test_load_counts(small_dataset):
    kg1, kg2, al = load_openea_dataset(str(small_dataset))
    assert len(kg1.entities) == 3
    assert len(kg2.entities) == 3
    assert len(al.matches) == 2
    assert len(kg1.relation_triples) + len(kg2.relation_triples) == 3
    assert len(kg1.attribute_triples) + len(kg2.attribute_triples) == 2


def test_empty_links_is_fine(tmp_path):
    write_dataset(tmp_path, {"rel_triples_1": "a\tr\tb\n", "rel_triples_2": "x\tp\ty\n"})
    _, _, al = load_openea_dataset(str(tmp_path))
    assert al.matches == ()


def test_short_line_reports_line_number(tmp_path):
    write_dataset(tmp_path, {"rel_triples_1": "a\tr\tb\na\tb\n"})
    with pytest.raises(ParseError) as err:
        load_openea_dataset(str(tmp_path))
    assert err.value.line == 2
    assert "rel_triples_1" in str(err.value)


def test_missing_file(tmp_path):
    write_dataset(tmp_path, {})
    os.remove(tmp_path / "attr_triples_2")
    with pytest.raises(DatasetFormatError, match="attr_triples_2"):
        load_openea_dataset(str(tmp_path))


def test_link_to_unknown_entity(tmp_path):
    write_dataset(tmp_path, {"rel_triples_1": "a\tr\tb\n", "rel_triples_2": "x\tp\ty\n", "ent_links": "a\tq\n"})
    with pytest.raises(ReferentialError):
        load_openea_dataset(str(tmp_path))


def test_round_trip(small_dataset, tmp_path_factory):
    kg1, kg2, al = load_openea_dataset(str(small_dataset))
    out = tmp_path_factory.mktemp("copy")
    save_openea_dataset(str(out), kg1, kg2, al)
    again = load_openea_dataset(str(out))
    assert again[0] == kg1 and again[1] == kg2 and again[2].matches == al.matches


def test_unicode_literals_survive(tmp_path):
    write_dataset(tmp_path, {"attr_triples_1": "a\tname\tZürich – 東京\n", "attr_triples_2": "b\tname\tx\n"})
    kg1, _, _ = load_openea_dataset(str(tmp_path))
    assert kg1.attribute_triples[0][2] == "Zürich – 東京"


def test_kg_derived_sets():
    kg = KnowledgeGraph([("a", "r", "b"), ("b", "s", "c"), ("c", "r", "c")], [("a", "name", "A"), ("d", "age", "3")])
    assert kg.entities == ("a", "b", "c", "d")
    assert kg.relations == {"r", "s"}
    assert kg.literals == {"A", "3"}
    assert kg.neighbors("b") == {"a", "c"}
    assert kg.neighbors("c") == {"b"}  # self-loops are not neighbors
    assert kg.degree.sum() == 2 * len(kg.relation_triples)


def test_split_sizes():
    al = SeedAlignment(matches=tuple((f"a{i}", f"b{i}") for i in range(100)))
    s = split_seed(al, 0.2, 0.1, 7)
    assert (len(s.train), len(s.val), len(s.test)) == (20, 10, 70)
    assert split_seed(al, 0.2, 0.1, 7) == s
    assert set(s.train) | set(s.val) | set(s.test) == set(al.matches)


def test_split_empty():
    s = split_seed(SeedAlignment(matches=()), 0.2, 0.1, 0)
    assert s.train == s.val == s.test == ()


@settings(max_examples=50, deadline=None)
@given(n=st.integers(0, 60), tf=st.floats(0, 0.6), vf=st.floats(0, 0.4), seed=st.integers(0, 1000))
def test_split_is_a_partition(n, tf, vf, seed):
    al = SeedAlignment(matches=tuple((f"a{i}", f"b{i}") for i in range(n)))
    s = split_seed(al, tf, vf, seed)
    parts = list(s.train) + list(s.val) + list(s.test)
    assert sorted(parts) == sorted(al.matches)


def test_stats_path_graph():
    kg = KnowledgeGraph([("a", "r", "b"), ("b", "r", "c"), ("c", "r", "d")], [])
    st_ = graph_stats(kg)
    assert st_.max_cs == 1.0 and st_.wcc_r == 0.25 and st_.mean_degree == 1.5


def test_stats_isolated():
    kg = KnowledgeGraph([], [], entities=["a", "b", "c", "d"])
    st_ = graph_stats(kg)
    assert (st_.max_cs, st_.wcc_r, st_.mean_degree) == (0.25, 1.0, 0.0)


def test_stats_two_components():
    kg = KnowledgeGraph([("a", "r", "b"), ("b", "r", "c")], [], entities=["a", "b", "c", "d"])
    st_ = graph_stats(kg)
    assert st_.max_cs == 0.75 and st_.num_wcc == 2


def test_adjacency_symmetric():
    kg = KnowledgeGraph([("a", "r", "b"), ("b", "r", "c")], [])
    A = kg.adjacency().toarray()
    np.testing.assert_array_equal(A, A.T)
