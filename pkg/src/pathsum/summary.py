"""Path summaries: construction, cardinality annotations, encodings, I/O.

A summary node stands for one distinct root-to-node label path.  PathIds are
1-based pre-order ranks, children ordered by first appearance in the
document, so ancestor tests on PathIds reduce to interval checks.
"""

from __future__ import annotations

import enum
import io
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence
from xml.sax.saxutils import quoteattr

from . import varint
from .errors import (BadMagic, CorruptSummary, EmptyDocument, NotAncestor,
                     TruncatedInput, UnsupportedVersion)
from .ingest import TEXT, EventKind, NodeEvent


class Annotation(enum.IntEnum):
    ONE = 0
    PLUS = 1
    STAR = 2

    @property
    def symbol(self) -> str:
        return "1+*"[self]

    @classmethod
    def from_symbol(cls, sym: str) -> "Annotation":
        return cls("1+*".index(sym))


class Encoding(enum.Enum):
    DIRECT = "direct"
    PRECOMPUTED = "precomputed"


class SerialFormat(enum.Enum):
    XML_DIRECT = "xml-direct"
    XML_PRECOMPUTED = "xml-precomputed"
    BINARY_DIRECT = "binary-direct"
    BINARY_PRECOMPUTED = "binary-precomputed"

    @property
    def precomputed(self) -> bool:
        return self in (SerialFormat.XML_PRECOMPUTED, SerialFormat.BINARY_PRECOMPUTED)

    @property
    def binary(self) -> bool:
        return self in (SerialFormat.BINARY_DIRECT, SerialFormat.BINARY_PRECOMPUTED)


@dataclass
class SummaryNode:
    id: int
    label: str
    parent: Optional[int]
    annotation: Annotation
    depth: int
    children: list[int] = field(default_factory=list)
    # instance count; known after build, not serialized
    count: int = 0

    @property
    def is_value(self) -> bool:
        return self.label == TEXT or self.label.startswith("@")


class PathSummary:
    """Immutable-after-build path summary.

    ``nodes[pid - 1]`` is the node with PathId ``pid``.  ``n1``/``nplus`` are
    indexed by PathId (slot 0 unused) and only present once precomputed.
    ``visits`` counts summary nodes touched by :func:`all1` /
    :func:`all1orplus` (instrumentation for the constant-time claim).
    """

    def __init__(self, nodes: list[SummaryNode], encoding: Encoding = Encoding.DIRECT,
                 n1: Optional[list[int]] = None, nplus: Optional[list[int]] = None):
        self.nodes = nodes
        self.encoding = encoding
        self.n1 = n1
        self.nplus = nplus
        self.visits = 0
        self.build_stats: dict = {}
        self.tag_dictionary: dict[str, int] = {}
        for node in nodes:
            self.tag_dictionary.setdefault(node.label, len(self.tag_dictionary))
        # last[pid]: largest PathId in the subtree of pid
        self.last = [0] * (len(nodes) + 1)
        for node in reversed(nodes):
            self.last[node.id] = max(node.id, self.last[node.id])
            if node.parent is not None:
                self.last[node.parent] = max(self.last[node.parent], self.last[node.id])
        self._child_by_label = [dict() for _ in range(len(nodes) + 1)]
        for node in nodes:
            if node.parent is not None:
                self._child_by_label[node.parent][node.label] = node.id

    def __len__(self):
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    def node(self, pid: int) -> SummaryNode:
        if not 1 <= pid <= len(self.nodes):
            raise KeyError(pid)
        return self.nodes[pid - 1]

    @property
    def root(self) -> SummaryNode:
        return self.nodes[0]

    def is_ancestor_or_self(self, px: int, py: int) -> bool:
        return px <= py <= self.last[px]

    def is_ancestor(self, px: int, py: int) -> bool:
        return px < py <= self.last[px]

    def child(self, pid: int, label: str) -> Optional[int]:
        return self._child_by_label[pid].get(label)

    @property
    def height(self) -> int:
        return max(n.depth for n in self.nodes)

    def structure(self) -> tuple:
        """Hashable view used for equality checks (labels, parents, annotations, clusters)."""
        base = tuple((n.label, n.parent, n.annotation) for n in self.nodes)
        if self.encoding is Encoding.PRECOMPUTED:
            return base, tuple(self.n1[1:]), tuple(self.nplus[1:])
        return (base,)

    def __eq__(self, other):
        if not isinstance(other, PathSummary):
            return NotImplemented
        return self.encoding == other.encoding and self.structure() == other.structure()

    def __repr__(self):
        return f"PathSummary({len(self.nodes)} nodes, {self.encoding.value})"


class _Proto:
    __slots__ = ("label", "children", "by_label", "count", "with_parent", "multi", "parent")

    def __init__(self, label, parent):
        self.label = label
        self.parent = parent
        self.children = []
        self.by_label = {}
        self.count = 0
        self.with_parent = 0
        self.multi = False

    def child(self, label):
        node = self.by_label.get(label)
        if node is None:
            node = _Proto(label, self)
            self.by_label[label] = node
            self.children.append(node)
        return node


def build_summary(events: Iterable[NodeEvent]) -> PathSummary:
    """Build the Direct-encoded summary from one pass over ``events``.

    Working state is the summary under construction plus, for each open
    element, a child-path counter; the latter is keyed by children of
    distinct summary nodes, so it never exceeds |PS| entries in total.
    """
    root: Optional[_Proto] = None
    frames: list[tuple[_Proto, dict]] = []
    n_proto = 0
    tracked = 0
    peak = 0
    height = 0
    n_events = 0
    for ev in events:
        kind = ev.kind
        if kind is EventKind.ELEMENT_START:
            if frames:
                parent, counts = frames[-1]
                node = parent.child(ev.label)
                before = len(counts)
                counts[node] = counts.get(node, 0) + 1
                tracked += len(counts) - before
            else:
                if root is not None:
                    raise EmptyDocument("multiple root elements")
                node = root = _Proto(ev.label, None)
            if node.count == 0:
                n_proto += 1
            node.count += 1
            frames.append((node, {}))
            tracked += 1
            height = max(height, len(frames))
            n_events += 1
        elif kind is EventKind.ELEMENT_END:
            node, counts = frames.pop()
            tracked -= 1 + len(counts)
            for child, cnt in counts.items():
                child.with_parent += 1
                if cnt > 1:
                    child.multi = True
        else:
            parent, counts = frames[-1]
            node = parent.child(ev.label)
            if node.count == 0:
                n_proto += 1
            node.count += 1
            before = len(counts)
            counts[node] = counts.get(node, 0) + 1
            tracked += len(counts) - before
            n_events += 1
        if tracked + n_proto > peak:
            peak = tracked + n_proto
    if root is None:
        raise EmptyDocument("document has no root element")

    nodes: list[SummaryNode] = []
    stack = [(root, None, 1)]
    while stack:
        proto, parent_id, depth = stack.pop()
        if parent_id is None:
            ann = Annotation.ONE
        elif proto.with_parent < proto.parent.count:
            ann = Annotation.STAR
        elif proto.multi:
            ann = Annotation.PLUS
        else:
            ann = Annotation.ONE
        node = SummaryNode(len(nodes) + 1, proto.label, parent_id, ann, depth, count=proto.count)
        nodes.append(node)
        if parent_id is not None:
            nodes[parent_id - 1].children.append(node.id)
        for child in reversed(proto.children):
            stack.append((child, node.id, depth + 1))
    summary = PathSummary(nodes)
    summary.build_stats = {"peak_tracked": peak, "height": height, "nodes": n_events,
                           "summary_nodes": len(nodes)}
    return summary


def _clusters(summary: PathSummary, joinable) -> list[int]:
    labels = [0] * (len(summary) + 1)
    fresh = 0
    for node in summary.nodes:
        if node.parent is not None and node.annotation in joinable:
            labels[node.id] = labels[node.parent]
        else:
            labels[node.id] = fresh
            fresh += 1
    return labels


def precompute(summary: PathSummary) -> PathSummary:
    """Return a Precomputed copy carrying n1 / n+ cluster labels.

    Direct annotations are kept alongside the cluster labels.
    """
    n1 = _clusters(summary, (Annotation.ONE,))
    nplus = _clusters(summary, (Annotation.ONE, Annotation.PLUS))
    out = PathSummary(summary.nodes, Encoding.PRECOMPUTED, n1, nplus)
    out.build_stats = dict(summary.build_stats)
    return out


def _check_pair(summary: PathSummary, px: int, py: int) -> None:
    if not summary.is_ancestor_or_self(px, py):
        raise NotAncestor(f"path {px} is not an ancestor-or-self of path {py}")


def _walk(summary: PathSummary, px: int, py: int, allowed) -> bool:
    node = summary.node(py)
    while node.id != px:
        summary.visits += 1
        if node.annotation not in allowed:
            return False
        node = summary.nodes[node.parent - 1]
    return True


def all1(summary: PathSummary, px: int, py: int) -> bool:
    """Every element on path ``px`` has exactly one descendant on path ``py``."""
    _check_pair(summary, px, py)
    if summary.encoding is Encoding.PRECOMPUTED:
        summary.visits += 2
        return summary.n1[px] == summary.n1[py]
    return _walk(summary, px, py, (Annotation.ONE,))


def all1orplus(summary: PathSummary, px: int, py: int) -> bool:
    """Every element on path ``px`` has at least one descendant on path ``py``."""
    _check_pair(summary, px, py)
    if summary.encoding is Encoding.PRECOMPUTED:
        summary.visits += 2
        return summary.nplus[px] == summary.nplus[py]
    return _walk(summary, px, py, (Annotation.ONE, Annotation.PLUS))


def lookup(summary: PathSummary, labels: Sequence[str]) -> Optional[int]:
    if not labels or labels[0] != summary.root.label:
        return None
    pid = 1
    for label in labels[1:]:
        pid = summary.child(pid, label)
        if pid is None:
            return None
    return pid


def label_path(summary: PathSummary, pid: int) -> list[str]:
    out = []
    node = summary.node(pid)
    while True:
        out.append(node.label)
        if node.parent is None:
            break
        node = summary.nodes[node.parent - 1]
    out.reverse()
    return out


def export_dot(summary: PathSummary) -> str:
    lines = ["digraph summary {"]
    for node in summary.nodes:
        label = f"{node.id}:{node.label}[{node.annotation.symbol}]"
        lines.append(f"  n{node.id} [label={_dot_quote(label)}];")
    for node in summary.nodes:
        if node.parent is not None:
            lines.append(f"  n{node.parent} -> n{node.id};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


# -- serialization -----------------------------------------------------------

MAGIC = b"XSUM"
VERSION = 1
_RESERVED = {"attr", "text", "elem", "xsum"}


def _with_clusters(summary: PathSummary) -> PathSummary:
    return summary if summary.encoding is Encoding.PRECOMPUTED else precompute(summary)


def serialize(summary: PathSummary, fmt: SerialFormat = SerialFormat.BINARY_DIRECT) -> bytes:
    src = _with_clusters(summary) if fmt.precomputed else summary
    if fmt.binary:
        return _to_binary(src, fmt.precomputed)
    return _to_xml(src, fmt.precomputed)


def _to_binary(summary: PathSummary, precomputed: bool) -> bytes:
    buf = bytearray(MAGIC)
    buf.append(VERSION)
    buf.append(1 if precomputed else 0)
    labels = list(summary.tag_dictionary)
    varint.write(buf, len(labels))
    for label in labels:
        raw = label.encode("utf-8")
        varint.write(buf, len(raw))
        buf += raw
    varint.write(buf, len(summary))
    for node in summary.nodes:
        varint.write(buf, summary.tag_dictionary[node.label])
        varint.write(buf, node.parent or 0)
        buf.append(int(node.annotation))
        if precomputed:
            varint.write(buf, summary.n1[node.id])
            varint.write(buf, summary.nplus[node.id])
    return bytes(buf)


def _to_xml(summary: PathSummary, precomputed: bool) -> bytes:
    out = io.StringIO()
    enc = "precomputed" if precomputed else "direct"
    out.write(f'<xsum version="{VERSION}" encoding="{enc}">')

    def open_tag(pid: int) -> str:
        node = summary.node(pid)
        if node.label == TEXT:
            tag, extra = "text", ""
        elif node.label.startswith("@"):
            tag, extra = "attr", f" name={quoteattr(node.label[1:])}"
        elif node.label in _RESERVED or ":" in node.label:
            tag, extra = "elem", f" name={quoteattr(node.label)}"
        else:
            tag, extra = node.label, ""
        out.write(f'<{tag}{extra} a="{node.annotation.symbol}"')
        if precomputed:
            out.write(f' c1="{summary.n1[pid]}" cp="{summary.nplus[pid]}"')
        if not node.children:
            out.write("/>")
            return ""
        out.write(">")
        return f"</{tag}>"

    # explicit stack: chain summaries can be deeper than the recursion limit
    todo: list = [1]
    while todo:
        item = todo.pop()
        if isinstance(item, str):
            out.write(item)
            continue
        close = open_tag(item)
        if close:
            todo.append(close)
            todo.extend(reversed(summary.node(item).children))

    out.write("</xsum>")
    return out.getvalue().encode("utf-8")


def deserialize(data: bytes) -> PathSummary:
    if data and len(data) < len(MAGIC) and MAGIC.startswith(data):
        raise TruncatedInput("input ends inside the magic number")
    if data[:4] == MAGIC:
        return _from_binary(data)
    if data.lstrip()[:1] == b"<":
        return _from_xml(data)
    raise BadMagic("not a serialized path summary")


def _from_binary(data: bytes) -> PathSummary:
    if len(data) < 6:
        raise TruncatedInput("summary header truncated")
    if data[4] != VERSION:
        raise UnsupportedVersion(f"summary version {data[4]}")
    precomputed = bool(data[5] & 1)
    pos = 6
    try:
        count, pos = varint.decode(data, pos)
        labels = []
        for _ in range(count):
            size, pos = varint.decode(data, pos)
            if pos + size > len(data):
                raise TruncatedInput("label truncated")
            labels.append(data[pos:pos + size].decode("utf-8"))
            pos += size
        n, pos = varint.decode(data, pos)
        rows = []
        for _ in range(n):
            tag, pos = varint.decode(data, pos)
            par, pos = varint.decode(data, pos)
            ann = data[pos]
            pos += 1
            c1 = cp = None
            if precomputed:
                c1, pos = varint.decode(data, pos)
                cp, pos = varint.decode(data, pos)
            rows.append((tag, par, ann, c1, cp))
    except IndexError:
        raise TruncatedInput("summary body truncated") from None
    try:
        rows = [(labels[t], p, Annotation(a), c1, cp) for t, p, a, c1, cp in rows]
    except (IndexError, ValueError) as exc:
        raise CorruptSummary(str(exc)) from None
    return _assemble(rows, precomputed)


def _assemble(rows, precomputed: bool) -> PathSummary:
    if not rows:
        raise CorruptSummary("summary has no nodes")
    nodes: list[SummaryNode] = []
    n1 = [0] * (len(rows) + 1) if precomputed else None
    nplus = [0] * (len(rows) + 1) if precomputed else None
    open_path: list[int] = []  # current rightmost root-to-node chain
    for i, (label, par, ann, c1, cp) in enumerate(rows, start=1):
        if i == 1:
            if par != 0:
                raise CorruptSummary("first node must be the root")
            depth = 1
            parent = None
        else:
            while open_path and open_path[-1] != par:
                open_path.pop()
            if not open_path:
                raise CorruptSummary(f"node {i} breaks pre-order (parent {par})")
            depth = len(open_path) + 1
            parent = par
        node = SummaryNode(i, label, parent, ann, depth)
        nodes.append(node)
        if parent is not None:
            nodes[parent - 1].children.append(i)
        open_path.append(i)
        if precomputed:
            n1[i] = c1
            nplus[i] = cp
    enc = Encoding.PRECOMPUTED if precomputed else Encoding.DIRECT
    return PathSummary(nodes, enc, n1, nplus)


def _from_xml(data: bytes) -> PathSummary:
    try:
        top = ET.fromstring(data)
    except ET.ParseError as exc:
        raise TruncatedInput(f"summary XML unreadable: {exc}") from None
    if top.tag != "xsum":
        raise BadMagic("XML summary must have an <xsum> root")
    if top.get("version") != str(VERSION):
        raise UnsupportedVersion(f"summary version {top.get('version')}")
    precomputed = top.get("encoding") == "precomputed"
    if len(top) != 1:
        raise CorruptSummary("XML summary must hold exactly one root node")
    rows = []
    todo = [(top[0], 0)]
    while todo:
        el, parent_id = todo.pop()
        if el.tag == "text":
            label = TEXT
        elif el.tag == "attr":
            label = "@" + el.get("name")
        elif el.tag == "elem":
            label = el.get("name")
        else:
            label = el.tag
        try:
            ann = Annotation.from_symbol(el.get("a"))
            c1 = int(el.get("c1")) if precomputed else None
            cp = int(el.get("cp")) if precomputed else None
        except (TypeError, ValueError) as exc:
            raise CorruptSummary(f"bad node attributes: {exc}") from None
        rows.append((label, parent_id, ann, c1, cp))
        me = len(rows)
        todo.extend((child, me) for child in reversed(list(el)))

    return _assemble(rows, precomputed)


# -- fan-in statistics ---------------------------------------------------------

@dataclass
class FanInReport:
    """Per-tag fan-in (distinct paths ending in the tag) and node counts."""
    per_tag: dict[str, tuple[int, int]]
    total_nodes: int
    mf: float

    @property
    def max_fanin(self) -> int:
        return max(fin for fin, _ in self.per_tag.values())

    def format(self) -> str:
        lines = [f"{'tag':<24} {'fin':>6} {'nodes':>10}"]
        for tag in sorted(self.per_tag, key=lambda t: (-self.per_tag[t][0], t)):
            fin, n = self.per_tag[tag]
            lines.append(f"{tag:<24} {fin:>6} {n:>10}")
        lines.append(f"N = {self.total_nodes}")
        lines.append(f"max fin = {self.max_fanin}")
        lines.append(f"mf = {self.mf:g}")
        return "\n".join(lines)


def fanin_report(summary: PathSummary, tag_counts: dict[str, int]) -> FanInReport:
    fin: dict[str, int] = {}
    for node in summary.nodes:
        if node.label == TEXT:
            continue
        fin[node.label] = fin.get(node.label, 0) + 1
    total = sum(n for tag, n in tag_counts.items() if tag != TEXT)
    if total == 0:
        raise EmptyDocument("no element or attribute nodes")
    per_tag = {tag: (fin.get(tag, 0), tag_counts.get(tag, 0)) for tag in fin}
    mf = sum(f * n for f, n in per_tag.values()) / total
    return FanInReport(per_tag, total, mf)


def summary_tag_counts(summary: PathSummary) -> dict[str, int]:
    """Per-label node counts recorded during :func:`build_summary`."""
    counts: dict[str, int] = {}
    for node in summary.nodes:
        if node.label != TEXT:
            counts[node.label] = counts.get(node.label, 0) + node.count
    return counts
