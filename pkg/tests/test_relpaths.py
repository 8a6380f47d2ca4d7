import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import D1, D2, random_document, random_pattern
from pathsum.errors import InvariantViolation, TupleExplosion
from pathsum.ingest import read_events
from pathsum.pattern import QueryPattern, parse_pattern, parse_xpath
from pathsum.relpaths import (compute_relevant_paths, enumerate_tuples, find_relevant,
                              oracle_relevant_paths)
from pathsum.summary import build_summary


def summary_of(doc):
    return build_summary(read_events(doc))


@pytest.fixture(scope="module")
def s1():
    return summary_of(D1)


@pytest.fixture(scope="module")
def s2():
    return summary_of(D2)


def as_set(tuples):
    return {tuple(sorted(t.items())) for t in tuples}


def test_spine_with_useless_ancestor(s1):
    f = compute_relevant_paths(s1, parse_xpath("//asia//item/name"))
    assert f.status == ["useless", "kept", "kept"]
    assert f.paths(1) == [3] and f.paths(2) == [4]
    assert as_set(enumerate_tuples(f)) == {((1, 3), (2, 4))}


def test_guaranteed_existential_is_trivial(s1):
    f = compute_relevant_paths(s1, parse_xpath("//item[name]"))
    assert f.status == ["kept", "trivial"]
    assert f.paths(0) == [3, 8]
    assert f.describe() == "item: 3, 8\n  name: (trivial)"


def test_unguaranteed_existential_kept(s1):
    f = compute_relevant_paths(s1, parse_xpath("//item[desc]"))
    assert f.status == ["kept", "kept"]
    assert f.paths(0) == [3] and f.paths(1) == [6]


def test_optional_only_entry_survives(s1):
    q = parse_pattern("(node tag=item axis=desc ret (node tag=desc axis=child opt ret))")
    f = compute_relevant_paths(s1, q)
    assert f.paths(0) == [3, 8] and f.paths(1) == [6]
    assert as_set(enumerate_tuples(f)) == {((0, 3), (1, 6)), ((0, 8), (1, None))}


def test_child_edge_depth_mismatch(s1):
    f = compute_relevant_paths(s1, parse_xpath("//site/item"))
    assert not f.satisfiable
    assert enumerate_tuples(f) == []
    f = compute_relevant_paths(s1, parse_xpath("/asia"))
    assert not f.satisfiable


def test_recursive_tag_tuples(s2):
    q = parse_pattern("(node tag=b axis=desc ret (node tag=c axis=desc ret))")
    expected = {((0, 2), (1, 3)), ((0, 2), (1, 5)), ((0, 4), (1, 5))}
    for flag in (False, True):
        f = compute_relevant_paths(s2, q, minimize_paths=flag)
        assert as_set(enumerate_tuples(f)) == expected
    f = compute_relevant_paths(s2, parse_xpath("//b//c"), minimize_paths=False)
    assert as_set(enumerate_tuples(f)) == expected


def test_inherited_descendant_match(s2):
    # the outer b (path 2) reaches c on path 5 only through the nested b
    state = find_relevant(s2, parse_xpath("//b//c"))
    outer = next(e for e in state.stacks[0] if e.path == 2)
    inner = next(e for e in state.stacks[0] if e.path == 4)
    assert inner.selfparent is outer
    got = {k.path for k in state.children_of(outer, state.q.nodes[1])}
    assert got == {3, 5}


def test_variable_chain_collapses(s2):
    f = compute_relevant_paths(s2, parse_xpath("//a//b//c"))
    assert f.status == ["useless", "useless", "kept"]
    assert as_set(enumerate_tuples(f)) == {((2, 3),), ((2, 5),)}


def test_unminimized_keeps_everything(s1):
    f = compute_relevant_paths(s1, parse_xpath("//asia//item[name]"), minimize_paths=False)
    assert set(f.status) == {"kept"}


def test_tuple_cap(s2, monkeypatch):
    q = parse_pattern("(node tag=b axis=desc ret (node tag=c axis=desc ret))")
    f = compute_relevant_paths(s2, q)
    with pytest.raises(TupleExplosion):
        enumerate_tuples(f, cap=2)
    monkeypatch.setenv("XSUM_TUPLE_CAP", "1")
    with pytest.raises(TupleExplosion):
        enumerate_tuples(f)
    with pytest.raises(TupleExplosion):
        oracle_relevant_paths(s2, q, cap=2)


def _random_case(seed):
    rng = random.Random(seed)
    summary = summary_of(random_document(rng).encode())
    root = random_pattern(rng, values=False)
    try:
        return summary, QueryPattern(root)
    except InvariantViolation:
        return summary, None


@pytest.mark.parametrize("flag", [False, True])
def test_matches_oracle_on_random_cases(flag):
    checked = 0
    for seed in range(400):
        summary, q = _random_case(seed)
        if q is None:
            continue
        f = compute_relevant_paths(summary, q, flag)
        assert as_set(enumerate_tuples(f)) == as_set(oracle_relevant_paths(summary, q, flag)), seed
        checked += 1
    assert checked >= 100


@given(st.integers(0, 10 ** 9))
@settings(max_examples=150, deadline=None)
def test_space_bounds(seed):
    summary, q = _random_case(seed)
    if q is None:
        return
    f = compute_relevant_paths(summary, q)
    assert f.entry_count <= len(summary) * q.node_count
    assert f.state.pushed <= len(summary) * q.node_count
    assert f.state.max_frames <= summary.height


@given(st.integers(0, 10 ** 9))
@settings(max_examples=150, deadline=None)
def test_minimization_never_adds_paths(seed):
    summary, q = _random_case(seed)
    if q is None:
        return
    full = compute_relevant_paths(summary, q, False)
    small = compute_relevant_paths(summary, q, True)
    for n in q.nodes:
        if small.status[n.index] == "kept":
            assert set(small.paths(n)) <= set(full.paths(n))
    assert small.satisfiable == full.satisfiable
