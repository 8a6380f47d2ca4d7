"""In-memory reference model: a plain tree, its serialization, and a
brute-force pattern evaluator.  Used as the oracle for plans and
reconstruction; it shares only the id numbering with the engine."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

from .ingest import TEXT, EventKind, Source, StructuralId, read_events
from .pattern import Axis, PatternNode, QueryPattern
from .xmltext import escape


@dataclass(eq=False)
class Node:
    label: str
    id: StructuralId
    value: Optional[str] = None
    parent: Optional["Node"] = None
    children: list["Node"] = field(default_factory=list)

    @property
    def is_value(self) -> bool:
        return self.label == TEXT or self.label.startswith("@")

    def iter(self) -> Iterator["Node"]:
        """Self and all descendants in document order."""
        yield self
        for c in self.children:
            yield from c.iter()

    def descendants(self) -> Iterator["Node"]:
        for c in self.children:
            yield from c.iter()

    def text(self) -> str:
        return "".join(c.value for c in self.children if c.label == TEXT)

    def key(self) -> tuple:
        return (self.label, *self.id.astuple(), self.value if self.is_value else None)


def build_tree(source: Source) -> Node:
    root = None
    stack: list[Node] = []
    for ev in read_events(source):
        if ev.kind is EventKind.ELEMENT_START:
            node = Node(ev.label, ev.id, parent=stack[-1] if stack else None)
            if stack:
                stack[-1].children.append(node)
            else:
                root = node
            stack.append(node)
        elif ev.kind is EventKind.ELEMENT_END:
            stack.pop()
        else:
            stack[-1].children.append(Node(ev.label, ev.id, ev.value, stack[-1]))
    return root


def serialize(node: Node) -> str:
    """Canonical form: attributes sorted by name, explicit end tags."""
    out: list[str] = []
    _emit(node, out)
    return "".join(out)


def _emit(node: Node, out: list[str]) -> None:
    if node.label == TEXT:
        out.append(escape(node.value))
        return
    if node.label.startswith("@"):
        out.append(escape(node.value))
        return
    attrs = sorted((c for c in node.children if c.label.startswith("@")), key=lambda c: c.label)
    out.append("<" + node.label)
    for a in attrs:
        out.append(f' {a.label[1:]}="{escape(a.value)}"')
    out.append(">")
    for c in node.children:
        if not c.label.startswith("@"):
            _emit(c, out)
    out.append(f"</{node.label}>")


def canonical(source: Source) -> str:
    return serialize(build_tree(source))


def _matches(pn: PatternNode, node: Node) -> bool:
    if not pn.matches_label(node.label):
        return False
    if pn.predicate is None:
        return True
    value = node.value if node.is_value else node.text()
    return pn.predicate.matches(value)


def _returned_in(pn: PatternNode) -> list[int]:
    return [m.index for m in pn.walk() if m.returned]


def evaluate(root: Node, q: QueryPattern) -> set[tuple]:
    """All embeddings projected on returned nodes, as row-key tuples."""
    cols = [n.index for n in q.nodes if n.returned]

    def rows(pn: PatternNode, node: Node) -> list[dict]:
        partial = [{pn.index: node} if pn.returned else {}]
        for c in pn.children:
            cands = node.children if c.axis is Axis.CHILD else list(node.descendants())
            sub: dict = {}
            for y in cands:
                if _matches(c, y):
                    for r in rows(c, y):
                        sub.setdefault(tuple(sorted((k, id(v)) for k, v in r.items())), r)
            if not sub:
                if not c.optional:
                    return []
                sub = {(): dict.fromkeys(_returned_in(c))}
            partial = [{**p, **o} for p in partial for o in sub.values()]
        return partial

    starts = [root] if q.root.axis is Axis.CHILD else list(root.iter())
    out = set()
    for x in starts:
        if _matches(q.root, x):
            for r in rows(q.root, x):
                out.add(tuple(None if r.get(c) is None else r[c].key() for c in cols))
    return out
