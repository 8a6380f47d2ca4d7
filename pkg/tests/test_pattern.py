import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_pattern
from pathsum.errors import InvariantViolation, PatternSyntaxError, UnsupportedFeature
from pathsum.pattern import (Axis, PatternNode, Predicate, QueryPattern, check_invariants,
                             format_pattern, parse_any, parse_pattern, parse_xpath)


def shape(q):
    return [(n.label, n.axis, n.returned, n.existential, n.optional) for n in q.nodes]


def test_spine_pattern():
    q = parse_xpath("//asia//item/name")
    assert shape(q) == [("asia", Axis.DESC, False, False, False),
                        ("item", Axis.DESC, False, False, False),
                        ("name", Axis.CHILD, True, False, False)]
    assert q.node_count == 3


def test_existential_predicate():
    q = parse_xpath("//item[desc]")
    item, desc = q.nodes
    assert item.returned and not item.existential
    assert desc.parent is item and desc.existential and desc.axis is Axis.CHILD


def test_value_predicates():
    q = parse_xpath("//item[name='n1']")
    assert q.nodes[1].predicate == Predicate("eq", "n1") and q.nodes[1].existential
    q = parse_xpath('//item[desc//x~"n"]')
    assert q.nodes[-1].label == "x" and q.nodes[-1].predicate == Predicate("contains", "n")
    assert q.nodes[-1].axis is Axis.DESC and q.nodes[-1].existential


def test_value_steps():
    q = parse_xpath("/site/@id")
    assert q.nodes[0].axis is Axis.CHILD and q.nodes[1].label == "@id"
    q = parse_xpath("//name/text()")
    assert q.nodes[1].label == "#text" and q.nodes[1].returned


def test_several_predicates_and_wildcard():
    q = parse_xpath("//*[a][b/c='v']/d")
    assert [n.label for n in q.nodes] == ["*", "a", "b", "c", "d"]
    assert q.nodes[3].predicate.text == "v"


@pytest.mark.parametrize("text", ["//child::a", "//a[1]", "//a[count(b)]", "//a/..", "//a|//b",
                                  "//a[b>1]", "//@*"])
def test_unsupported(text):
    with pytest.raises(UnsupportedFeature):
        parse_xpath(text)


@pytest.mark.parametrize("text,pos", [("a", 0), ("//", 2), ("//a[", 4), ("//a[b", 5),
                                      ("//a[b='x]", 6), ("//a b", 4)])
def test_syntax_errors_carry_positions(text, pos):
    with pytest.raises(PatternSyntaxError) as exc:
        parse_xpath(text)
    assert exc.value.position == pos
    assert isinstance(exc.value, SyntaxError)


def test_sexpr_examples():
    q = parse_pattern("(node tag=item axis=desc ret (node tag=emph axis=desc opt ret))")
    item, emph = q.nodes
    assert item.returned and emph.optional and emph.returned and emph.parent is item
    q = parse_pattern("(node tag=a axis=child)")
    assert q.node_count == 1 and not q.root.returned


def test_sexpr_quoting():
    q = parse_pattern(r'(node tag=a axis=desc ret (node tag=b axis=child exist eq="x \"y\" \\z"))')
    assert q.nodes[1].predicate == Predicate("eq", 'x "y" \\z')
    assert parse_pattern(format_pattern(q)) == q


@pytest.mark.parametrize("text", [
    "(node tag=a axis=child exist ret)",
    "(node tag=a axis=desc (node tag=b axis=child exist (node tag=c axis=child ret)))",
    "(node tag=a axis=desc (node tag=#text axis=child ret (node tag=b axis=child)))",
    "(node tag=a axis=desc (node tag=b axis=child opt (node tag=c axis=child ret)))",
    "(node tag=a axis=desc (node tag=b axis=child exist (node tag=c axis=child)))",
])
def test_invariant_violations(text):
    with pytest.raises(InvariantViolation):
        parse_pattern(text)


@pytest.mark.parametrize("text", ["(node tag=a)", "(node axis=desc)", "(node tag=a axis=up)",
                                  "(node tag=a axis=desc", "(node tag=a axis=desc) x",
                                  "(leaf tag=a axis=desc)", '(node tag=a axis=desc foo="x")'])
def test_sexpr_syntax_errors(text):
    with pytest.raises(PatternSyntaxError):
        parse_pattern(text)


def test_parse_any_dispatch():
    assert parse_any(" (node tag=a axis=desc ret)") == parse_xpath("//a")


@given(st.integers(0, 10 ** 9))
@settings(max_examples=200, deadline=None)
def test_format_parse_fixpoint(seed):
    root = random_pattern(random.Random(seed), max_depth=4)
    try:
        q = QueryPattern(root)
    except InvariantViolation:
        return
    text = format_pattern(q)
    again = parse_pattern(text)
    assert again == q
    assert format_pattern(again) == text


@given(st.integers(0, 10 ** 9))
@settings(max_examples=200, deadline=None)
def test_parsed_patterns_satisfy_invariants(seed):
    root = random_pattern(random.Random(seed), max_depth=4)
    # break invariants on purpose half of the time
    rng = random.Random(seed + 1)
    nodes = list(root.walk())
    victim = rng.choice(nodes)
    if rng.random() < 0.5:
        victim.returned = True
        victim.existential = victim.existential or rng.random() < 0.5
    text = format_pattern(root)
    try:
        q = parse_pattern(text)
    except InvariantViolation:
        return
    check_invariants(q)
    for n in q.nodes:
        assert not (n.returned and n.existential)
        if n.existential:
            assert all(d.existential or d.optional for d in n.walk())


def test_xpath_normal_form_round_trip():
    for text in ["//asia//item/name", "//item[name='n1']", "/a/b[c][d~'x']/e", "//x/@k"]:
        q = parse_xpath(text)
        assert parse_pattern(format_pattern(q)) == q
