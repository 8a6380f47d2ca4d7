import io
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings

from conftest import D1, D2, rich_documents, xml_documents
from pathsum.errors import EmptyDocument, MalformedXml
from pathsum.ingest import (EventKind, StructuralId, ancestor, assign_ids, order_key, parent,
                            parse_document, read_events)


def kinds(events):
    return [(e.kind, e.label) for e in events]


def test_d1_event_counts():
    evs = list(parse_document(D1))
    count = {k: sum(1 for e in evs if e.kind is k) for k in EventKind}
    assert count[EventKind.ELEMENT_START] == 10
    assert count[EventKind.TEXT] == 3
    assert count[EventKind.ELEMENT_END] == 10
    assert count[EventKind.ATTRIBUTE] == 0


def test_empty_element():
    assert kinds(parse_document(b"<a/>")) == [(EventKind.ELEMENT_START, "a"), (EventKind.ELEMENT_END, "a")]


def test_mismatched_tag_reports_offset():
    with pytest.raises(MalformedXml) as exc:
        list(parse_document(b"<a><b></a>"))
    assert exc.value.offset is not None
    assert "byte offset" in str(exc.value)


@pytest.mark.parametrize("doc", [b"", b"   ", b"<!-- only a comment -->"])
def test_empty_document(doc):
    with pytest.raises(EmptyDocument):
        list(parse_document(doc))


def test_bad_encoding_is_malformed():
    with pytest.raises(MalformedXml):
        list(parse_document(b"<a>\xff\xfe</a>"))


def test_comments_pi_and_whitespace_dropped():
    evs = list(parse_document(b"<a>\n  <!-- c --><?pi x?><b> t </b>\n</a>"))
    assert [e.value for e in evs if e.kind is EventKind.TEXT] == [" t "]


def test_attributes_precede_children_and_are_prefixed():
    evs = list(parse_document(b'<a x="1" y="2"><b/>t</a>'))
    assert kinds(evs)[:3] == [(EventKind.ELEMENT_START, "a"), (EventKind.ATTRIBUTE, "@x"),
                             (EventKind.ATTRIBUTE, "@y")]
    assert evs[1].value == "1"


def test_text_coalesced_across_entities_and_chunks():
    doc = b"<a>x &amp; y &lt;z&gt;</a>"
    for chunk in (1, 3, 1 << 16):
        evs = list(parse_document(doc, chunk_size=chunk))
        assert [e.value for e in evs if e.kind is EventKind.TEXT] == ["x & y <z>"]


def test_file_objects_and_paths(tmp_path):
    f = tmp_path / "d1.xml"
    f.write_bytes(D1)
    assert len(list(parse_document(str(f)))) == len(list(parse_document(io.BytesIO(D1))))


def test_d1_element_ids():
    evs = list(read_events(D1))
    ids = [e.id.astuple() for e in evs if e.kind is EventKind.ELEMENT_START]
    assert ids == [(1, 10, 1), (2, 6, 2), (3, 3, 3), (4, 1, 4), (5, 2, 4), (6, 5, 3), (7, 4, 4),
                   (8, 9, 2), (9, 8, 3), (10, 7, 4)]


def test_single_element_id():
    ev = list(read_events(b"<a/>"))[0]
    assert ev.id == (1, 1, 1)


def test_post_is_completed_at_the_end_tag():
    it = read_events(b"<a><b/></a>")
    first = next(it)
    assert first.id.post == 0
    list(it)
    assert first.id == (1, 2, 1)


def test_value_stamps():
    texts = [e.id.astuple() for e in read_events(D1) if e.kind is EventKind.TEXT]
    # the next element pre, post := pre, owner depth + 1
    assert texts == [(5, 5, 5), (8, 8, 5), (11, 11, 5)]


def test_end_events_carry_no_id():
    assert all(e.id is None for e in read_events(D1) if e.kind is EventKind.ELEMENT_END)


def test_ancestor_and_parent_examples():
    site, asia, item1, item2 = (StructuralId(1, 10, 1), StructuralId(2, 6, 2),
                                StructuralId(3, 3, 3), StructuralId(6, 5, 3))
    assert ancestor(site, item1)
    assert not ancestor(item1, item2)
    assert parent(asia, item1)
    assert not parent(site, item1)
    assert not ancestor(site, site)


def test_order_key_places_values_before_the_next_element():
    elem = order_key(StructuralId(5, 2, 4))
    text_deep = order_key(StructuralId(5, 5, 5), "#text")
    text_shallow = order_key(StructuralId(5, 5, 4), "#text")
    attr = order_key(StructuralId(5, 5, 5), "@k")
    assert attr < text_deep < text_shallow < elem


def etree_ids(doc: bytes):
    """Independent numbering: recursive walk over an ElementTree."""
    root = ET.fromstring(doc)
    out = []
    pre = post = 0

    def walk(el, depth):
        nonlocal pre, post
        pre += 1
        rec = [pre, None, depth]
        out.append(rec)
        for c in el:
            walk(c, depth + 1)
        post += 1
        rec[1] = post

    walk(root, 1)
    return [tuple(r) for r in out]


@given(xml_documents())
@settings(max_examples=60, deadline=None)
def test_ids_match_tree_walk(doc):
    evs = list(read_events(doc))
    ids = [e.id.astuple() for e in evs if e.kind is EventKind.ELEMENT_START]
    assert ids == etree_ids(doc)
    n = len(ids)
    assert sorted(i[0] for i in ids) == list(range(1, n + 1))
    assert sorted(i[1] for i in ids) == list(range(1, n + 1))


@given(xml_documents())
@settings(max_examples=40, deadline=None)
def test_ancestor_agrees_with_tree(doc):
    root = ET.fromstring(doc)
    elems = list(root.iter())
    anc = {(id(a), id(d)) for a in elems for d in a.iter() if d is not a}
    ids = [e.id for e in read_events(doc) if e.kind is EventKind.ELEMENT_START]
    for x, ex in zip(ids, elems):
        for y, ey in zip(ids, elems):
            assert ancestor(x, y) == ((id(ex), id(ey)) in anc)


@given(rich_documents())
@settings(max_examples=60, deadline=None)
def test_events_well_nested_with_text_verbatim(doc):
    depth = 0
    texts = []
    for e in read_events(doc):
        if e.kind is EventKind.ELEMENT_START:
            depth += 1
        elif e.kind is EventKind.ELEMENT_END:
            depth -= 1
            assert depth >= 0
        else:
            assert depth >= 1 and e.id.depth == depth + 1
            if e.kind is EventKind.TEXT:
                texts.append(e.value)
    assert depth == 0
    root = ET.fromstring(doc)
    expected = []
    for el in root.iter():
        for piece in [el.text] + [c.tail for c in el]:
            if piece and piece.strip():
                expected.append(piece)
    assert sorted(texts) == sorted(expected)


def test_assign_ids_memory_is_open_stack():
    # a flat sibling list never keeps more than root + one child open
    doc = b"<r>" + b"<x/>" * 5000 + b"</r>"
    count = sum(1 for e in assign_ids(parse_document(doc)) if e.kind is EventKind.ELEMENT_START)
    assert count == 5001
