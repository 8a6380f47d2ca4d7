"""Serializing stored subtrees back to XML.

``reconstruct`` streams: one cursor per summary path under the roots, each
holding a single current item, merged under the nesting discipline the
summary dictates.  ``sorted_outer_union`` is the materializing baseline:
every node becomes a row keyed by its ancestor chain, rows are sorted and a
tagger turns them into markup.  Both produce the canonical serialization
(attributes sorted by name, explicit end tags, five entities escaped).
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from .errors import CorruptStore, OutOfBudget
from .execution import Binding, ResultTable, needs_dup_elim
from .ingest import TEXT, StructuralId, ancestor, order_key
from .store import PathStore, ValueEntry
from .summary import PathSummary
from .xmltext import escape


@dataclass
class ReconstructStats:
    cursors: int = 0
    peak_buffers: int = 0
    emitted: int = 0
    max_open: int = 0
    materialized_rows: int = 0


def _is_value_path(summary: PathSummary, pid: int) -> bool:
    label = summary.node(pid).label
    return label == TEXT or label.startswith("@")


def subtree_paths(summary: PathSummary, pid: int) -> list[int]:
    out, todo = [], [pid]
    while todo:
        p = todo.pop()
        out.append(p)
        todo.extend(reversed(summary.node(p).children))
    return out


def _check_antichain(summary: PathSummary, root_paths: Iterable[int]) -> list[int]:
    roots = sorted(set(root_paths))
    verdict = needs_dup_elim(roots, summary)
    if not verdict.safe:
        raise ValueError(f"root paths are not an antichain: {verdict.witness}")
    for p in roots:
        if _is_value_path(summary, p):
            raise ValueError(f"root path {p} is not an element path")
    return roots


class _Cursor:
    """One buffer slot over one path's sequence."""

    __slots__ = ("path", "label", "is_value", "is_attr", "seq", "pos", "end", "cur")

    def __init__(self, path: int, label: str, seq: list, start: int = 0, end: Optional[int] = None):
        self.path = path
        self.label = label
        self.is_value = label == TEXT or label.startswith("@")
        self.is_attr = label.startswith("@")
        self.seq = seq
        self.pos = start
        self.end = len(seq) if end is None else end
        self.cur = seq[start] if start < self.end else None

    def advance(self) -> None:
        self.pos += 1
        self.cur = self.seq[self.pos] if self.pos < self.end else None

    def key(self) -> tuple:
        if self.is_value:
            return order_key(self.cur.self, self.label)
        return order_key(self.cur)


def _open_cursors(store: PathStore, roots: list[int], within: Optional[StructuralId] = None) -> dict[int, _Cursor]:
    summary = store.summary
    cursors = {}
    for r in roots:
        for p in subtree_paths(summary, r):
            label = summary.node(p).label
            if label == TEXT or label.startswith("@"):
                seq = store.values(p) if store.has_values(p) else []
            else:
                seq = store.ids(p) if store.has_ids(p) else []
            start, end = 0, len(seq)
            if within is not None:
                start, end = _slice(seq, within, label == TEXT or label.startswith("@"), p == r)
            cursors[p] = _Cursor(p, label, seq, start, end)
    return cursors


def _slice(seq: list, e: StructuralId, is_value: bool, is_root: bool) -> tuple[int, int]:
    """Contiguous range of ``seq`` lying in the subtree of element ``e``."""
    if is_root:
        lo = bisect_right(seq, e.pre - 1, key=lambda x: x.pre)
        return (lo, lo + 1) if lo < len(seq) and seq[lo].pre == e.pre else (lo, lo)
    if is_value:
        lo = bisect_right(seq, e.pre, key=lambda v: v.self.pre)
        hi = lo
        while hi < len(seq) and (seq[hi].owner.pre == e.pre or ancestor(e, seq[hi].owner)):
            hi += 1
        return lo, hi
    lo = bisect_right(seq, e.pre, key=lambda x: x.pre)
    hi = lo
    while hi < len(seq) and ancestor(e, seq[hi]):
        hi += 1
    return lo, hi


def _stream(store: PathStore, roots: list[int], cursors: dict[int, _Cursor],
            stats: ReconstructStats) -> Iterator[str]:
    summary = store.summary
    stats.cursors += len(cursors)
    stats.peak_buffers = max(stats.peak_buffers, len(cursors))
    kids = {p: [cursors[c] for c in summary.node(p).children if c in cursors] for p in cursors}
    root_cursors = [cursors[r] for r in roots]
    stack: list[tuple[StructuralId, int, str]] = []

    def open_element(c: _Cursor) -> Iterator[str]:
        e = c.cur
        if stack and e.post > stack[-1][0].post:
            raise CorruptStore(f"element {e} overlaps its parent {stack[-1][0]}")
        c.advance()
        parts = ["<", c.label]
        attrs = sorted((k for k in kids[c.path] if k.is_attr), key=lambda k: k.label)
        for a in attrs:
            if a.cur is not None and a.cur.owner.pre == e.pre:
                parts.append(f' {a.label[1:]}="{escape(a.cur.value)}"')
                a.advance()
                stats.emitted += 1
        parts.append(">")
        stack.append((e, c.path, c.label))
        stats.max_open = max(stats.max_open, len(stack))
        stats.emitted += 1
        yield "".join(parts)

    while True:
        if not stack:
            live = [c for c in root_cursors if c.cur is not None]
            if not live:
                break
            yield from open_element(min(live, key=_Cursor.key))
            continue
        top, path, label = stack[-1]
        best = None
        best_key = None
        for c in kids[path]:
            if c.cur is None or c.is_attr:
                continue
            if c.is_value:
                ok = c.cur.owner.pre == top.pre
            else:
                ok = ancestor(top, c.cur)
            if ok:
                k = c.key()
                if best is None or k < best_key:
                    best, best_key = c, k
        if best is None:
            stack.pop()
            yield f"</{label}>"
            continue
        if best.is_value:
            stats.emitted += 1
            text = best.cur.value
            best.advance()
            yield escape(text)
        else:
            yield from open_element(best)
    leftover = [c.path for c in cursors.values() if c.cur is not None]
    if leftover:
        raise CorruptStore(f"cursors on paths {leftover} hold items outside the nesting")


def reconstruct(store: PathStore, root_paths: Iterable[int],
                stats: Optional[ReconstructStats] = None) -> str:
    """Stream the serialization of every element on ``root_paths``."""
    stats = stats if stats is not None else ReconstructStats()
    roots = _check_antichain(store.summary, root_paths)
    return "".join(_stream(store, roots, _open_cursors(store, roots), stats))


def reconstruct_element(store: PathStore, path: int, element: StructuralId,
                        stats: Optional[ReconstructStats] = None) -> str:
    """Serialization of one element, seeking each cursor to its subtree."""
    stats = stats if stats is not None else ReconstructStats()
    cursors = _open_cursors(store, [path], within=element)
    return "".join(_stream(store, [path], cursors, stats))


def sorted_outer_union(store: PathStore, root_paths: Iterable[int],
                       budget: Optional[int] = None,
                       stats: Optional[ReconstructStats] = None) -> str:
    """Materializing baseline: one row per node, keyed by its ancestor chain."""
    from .execution import Variant, struct_join
    from .pattern import Axis

    stats = stats if stats is not None else ReconstructStats()
    summary = store.summary
    roots = _check_antichain(summary, root_paths)
    rows: list[tuple[tuple, str, str, Optional[str]]] = []

    def add(row) -> None:
        rows.append(row)
        stats.materialized_rows = len(rows)
        if budget is not None and len(rows) > budget:
            raise OutOfBudget(f"materialized more than {budget} rows")

    # worklist of (element path, its materialized (id, key vector) pairs)
    todo: list[tuple[int, list[tuple[StructuralId, tuple]]]] = []
    for r in roots:
        label = summary.node(r).label
        table = []
        for sid in store.ids(r):
            vec = (order_key(sid),)
            add((vec, "elem", label, None))
            table.append((sid, vec))
        todo.append((r, table))
    while todo:
        pid, table = todo.pop()
        vectors = {sid.pre: vec for sid, vec in table}
        parents = [sid for sid, _ in table]
        for c in summary.node(pid).children:
            label = summary.node(c).label
            if label == TEXT or label.startswith("@"):
                if not store.has_values(c):
                    continue
                for a, v in struct_join(parents, store.values(c), Axis.CHILD, Variant.INNER):
                    vec = vectors[a.pre] + (order_key(v.self, label),)
                    add((vec, "attr" if label.startswith("@") else "text", label, v.value))
                continue
            if not store.has_ids(c):
                continue
            child_table = []
            for a, d in struct_join(parents, store.ids(c), Axis.CHILD, Variant.INNER):
                vec = vectors[a.pre] + (order_key(d),)
                add((vec, "elem", label, None))
                child_table.append((d, vec))
            todo.append((c, child_table))

    rows.sort(key=lambda row: row[0])
    return "".join(_tagger(rows))


def _tagger(rows: list) -> Iterator[str]:
    open_tags: list[tuple[tuple, str]] = []
    start_pending = False
    for vec, kind, label, value in rows:
        while open_tags and vec[:len(open_tags[-1][0])] != open_tags[-1][0]:
            if start_pending:
                yield ">"
                start_pending = False
            yield f"</{open_tags.pop()[1]}>"
        if kind == "attr":
            yield f' {label[1:]}="{escape(value)}"'
            continue
        if start_pending:
            yield ">"
            start_pending = False
        if kind == "text":
            yield escape(value)
        else:
            yield "<" + label
            start_pending = True
            open_tags.append((vec, label))
    if start_pending:
        yield ">"
    while open_tags:
        yield f"</{open_tags.pop()[1]}>"


def xmlize(results: ResultTable, forest, store: PathStore, wrapper_tag: str = "res",
           stats: Optional[ReconstructStats] = None) -> str:
    """Wrap each result row, serializing every returned binding in turn."""
    out = []
    for row in results.rows:
        out.append(f"<{wrapper_tag}>")
        for b in row:
            if b is None:
                continue
            if b.is_value:
                out.append(escape(b.value))
            else:
                out.append(reconstruct_element(store, b.path, b.id, stats))
        out.append(f"</{wrapper_tag}>")
    return "".join(out)
