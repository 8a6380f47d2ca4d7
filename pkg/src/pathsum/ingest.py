"""Streaming XML parsing and (pre, post, depth) structural identifiers.

Elements are numbered with two independent 1-based counters: ``pre`` in
begin-tag order and ``post`` in end-tag order.  Text and attribute nodes do
not consume either counter; they are stamped with the *next* element pre
value (the pre the next element to begin would receive), ``post := pre`` and
``depth = owner depth + 1``.  That stamp orders a value node before any
element that begins after it, which is all reconstruction needs to interleave
mixed content.
"""

from __future__ import annotations

import enum
import io
from typing import IO, Iterable, Iterator, NamedTuple, Optional, Union
from xml.parsers import expat

from .errors import EmptyDocument, MalformedXml

TEXT = "#text"
CHUNK = 1 << 16
_XML_SPACE = " \t\r\n"


class StructuralId:
    """A (pre, post, depth) triple.

    ``post`` of an element is only known once its end tag has been read, so
    ids handed out on ``ElementStart`` are completed in place by
    :func:`assign_ids`.  Identity for hashing is ``pre`` (fixed at creation).
    """

    __slots__ = ("pre", "post", "depth")

    def __init__(self, pre: int, post: int, depth: int):
        self.pre = pre
        self.post = post
        self.depth = depth

    def __iter__(self):
        return iter((self.pre, self.post, self.depth))

    def astuple(self) -> tuple[int, int, int]:
        return (self.pre, self.post, self.depth)

    def __eq__(self, other):
        if isinstance(other, StructuralId):
            return (self.pre, self.post, self.depth) == (other.pre, other.post, other.depth)
        if isinstance(other, tuple):
            return (self.pre, self.post, self.depth) == other
        return NotImplemented

    def __hash__(self):
        return hash(self.pre)

    def __lt__(self, other):
        return (self.pre, self.depth) < (other.pre, other.depth)

    def __repr__(self):
        return f"({self.pre},{self.post},{self.depth})"


def ancestor(x: StructuralId, y: StructuralId) -> bool:
    """True iff element ``x`` is a proper ancestor of element ``y``."""
    return x.pre < y.pre and x.post > y.post


def parent(x: StructuralId, y: StructuralId) -> bool:
    return x.pre < y.pre and x.post > y.post and y.depth == x.depth + 1


def order_key(sid: StructuralId, label: Optional[str] = None) -> tuple:
    """Document-order sort key over elements and value nodes.

    A value node carries the pre of the next element to start, so several
    value nodes can share a stamp.  Among them the deeper ones come first
    (they precede the end tags that lead back up), attributes precede text
    at equal depth, and all precede the element that owns that pre.
    ``label`` is None for elements.
    """
    if label is None:
        return (sid.pre, 1, 0, 0, "")
    return (sid.pre, 0, -sid.depth, 1 if label == TEXT else 0, label)


class EventKind(enum.Enum):
    ELEMENT_START = "start"
    ELEMENT_END = "end"
    ATTRIBUTE = "attr"
    TEXT = "text"


class NodeEvent(NamedTuple):
    kind: EventKind
    label: str
    id: Optional[StructuralId] = None
    value: Optional[str] = None

    def __repr__(self):
        parts = [self.kind.name, self.label]
        if self.id is not None:
            parts.append(repr(self.id))
        if self.value is not None:
            parts.append(repr(self.value))
        return "NodeEvent(" + " ".join(parts) + ")"


Source = Union[bytes, bytearray, str, IO[bytes]]


def _open_source(source: Source) -> IO[bytes]:
    if isinstance(source, (bytes, bytearray)):
        return io.BytesIO(bytes(source))
    if isinstance(source, str):
        return open(source, "rb")
    return source


def parse_document(source: Source, chunk_size: int = CHUNK) -> Iterator[NodeEvent]:
    """Pull-parse ``source`` into a stream of :class:`NodeEvent` (ids unset).

    ``source`` is raw bytes, a binary file object, or a filesystem path.
    Comments and processing instructions are dropped, adjacent character data
    is coalesced into one text node, and whitespace-only text is dropped.
    """
    stream = _open_source(source)
    owns = isinstance(source, str)
    try:
        yield from _parse(stream, chunk_size)
    finally:
        if owns:
            stream.close()


def _parse(stream: IO[bytes], chunk_size: int) -> Iterator[NodeEvent]:
    parser = expat.ParserCreate(encoding="UTF-8")
    parser.ordered_attributes = True
    parser.buffer_text = True
    pending: list[NodeEvent] = []
    text: list[str] = []
    seen_root = False

    def flush_text():
        if text:
            value = "".join(text)
            text.clear()
            if value.strip(_XML_SPACE):
                pending.append(NodeEvent(EventKind.TEXT, TEXT, None, value))

    def start(name, attrs):
        nonlocal seen_root
        seen_root = True
        flush_text()
        pending.append(NodeEvent(EventKind.ELEMENT_START, name))
        for i in range(0, len(attrs), 2):
            pending.append(NodeEvent(EventKind.ATTRIBUTE, "@" + attrs[i], None, attrs[i + 1]))

    def end(name):
        flush_text()
        pending.append(NodeEvent(EventKind.ELEMENT_END, name))

    def chars(data):
        text.append(data)

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chars

    while True:
        chunk = stream.read(chunk_size)
        final = not chunk
        try:
            parser.Parse(chunk, final)
        except expat.ExpatError as exc:
            if not seen_root and exc.code == expat.errors.codes[expat.errors.XML_ERROR_NO_ELEMENTS]:
                raise EmptyDocument("document has no root element") from None
            raise MalformedXml(expat.errors.messages[exc.code], parser.ErrorByteIndex) from None
        if pending:
            yield from pending
            pending.clear()
        if final:
            break


def assign_ids(events: Iterable[NodeEvent]) -> Iterator[NodeEvent]:
    """Stamp structural ids onto a well-nested event stream in one pass.

    Memory is the open-element stack.  Element ids are yielded on
    ``ElementStart`` with ``post == 0`` and completed when the matching
    ``ElementEnd`` goes by.
    """
    next_pre = 1
    next_post = 1
    stack: list[StructuralId] = []
    for ev in events:
        kind = ev.kind
        if kind is EventKind.ELEMENT_START:
            sid = StructuralId(next_pre, 0, len(stack) + 1)
            next_pre += 1
            stack.append(sid)
            yield NodeEvent(kind, ev.label, sid)
        elif kind is EventKind.ELEMENT_END:
            sid = stack.pop()
            sid.post = next_post
            next_post += 1
            yield NodeEvent(kind, ev.label)
        else:
            if not stack:
                raise MalformedXml("value node outside the root element")
            yield NodeEvent(kind, ev.label, StructuralId(next_pre, next_pre, len(stack) + 1), ev.value)


def read_events(source: Source) -> Iterator[NodeEvent]:
    """``parse_document`` followed by ``assign_ids``."""
    return assign_ids(parse_document(source))
