"""Physical operators and plans over the path-partitioned store.

Streams are iterators of items sorted in document order.  An item is a
``StructuralId`` (plain id scans), a ``ValueEntry`` or a ``Binding`` (what
plans pass around: id, path, and optionally owner and value).

Plans are built in two passes over the minimized pattern:

* bottom-up, every kept node gets a *filter* stream: its relevant paths
  merged, predicates applied, and an ancestor-side semijoin for each
  required child;
* top-down along the nodes that lead to returned nodes, inner joins narrow
  each node to the bindings reachable from the top.

Joins compare (parent path, child path) against the pairs admitted by the
relevant-path forest, which keeps them exact after useless nodes have been
bypassed.
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Optional

from .errors import MissingColumn, Unsatisfiable, UnsortedInput
from .ingest import TEXT, StructuralId, ancestor, order_key
from .pattern import Axis, PatternNode, Predicate, QueryPattern
from .relpaths import RelevantPathForest
from .store import PathStore, ValueEntry, scan_ids, scan_values
from .summary import PathSummary


class Binding(NamedTuple):
    id: StructuralId
    path: int
    label: str
    owner: Optional[StructuralId] = None
    value: Optional[str] = None

    @property
    def is_value(self) -> bool:
        return self.owner is not None

    @property
    def key(self) -> tuple:
        return order_key(self.id, self.label if self.owner is not None else None)

    def csv(self) -> str:
        base = f"{self.id.pre},{self.id.post},{self.id.depth}"
        return base if self.value is None or self.owner is None else f"{base},{self.value}"


def _key(item) -> tuple:
    if isinstance(item, Binding):
        return item.key
    if isinstance(item, ValueEntry):
        return order_key(item.self, TEXT)
    return order_key(item)


def _position(item):
    """(element id, owner) used for containment tests."""
    if isinstance(item, Binding):
        return item.id, item.owner
    if isinstance(item, ValueEntry):
        return item.self, item.owner
    return item, None


def checked(stream: Iterable, allow_dups: bool = False) -> Iterator:
    """Pass items through, raising UnsortedInput on order violations."""
    last = None
    for item in stream:
        k = _key(item)
        if last is not None and (k < last or (k == last and not allow_dups)):
            raise UnsortedInput(f"stream out of order at {k} after {last}")
        last = k
        yield item


def merge(streams: list[Iterable]) -> Iterator:
    """k-way merge of sorted, disjoint streams."""
    if not streams:
        return iter(())
    if len(streams) == 1:
        return checked(streams[0])
    return checked(heapq.merge(*[checked(s) for s in streams], key=_key))


class Variant(enum.Enum):
    INNER = "inner"
    SEMI = "semi"
    LEFT_OUTER = "leftouter"
    ANCESTOR_SEMI = "ancsemi"


def _covers(a: StructuralId, d_id: StructuralId, d_owner: Optional[StructuralId]) -> bool:
    """``a`` encloses the position of d (descendant-or-self of owner for values)."""
    if d_owner is None:
        return ancestor(a, d_id)
    return a.pre == d_owner.pre or ancestor(a, d_owner)


def _related(a: StructuralId, d_id, d_owner, axis: Axis) -> bool:
    if axis is Axis.DESC:
        return True
    if d_owner is None:
        return d_id.depth == a.depth + 1
    return a.pre == d_owner.pre


def _path(item) -> Optional[int]:
    return item.path if isinstance(item, Binding) else None


def _stack_tree(outer: Iterable, inner: Iterable, axis: Axis, pairs) -> Iterator[tuple]:
    """StackTreeDesc: (a, d) pairs ordered by d; the stack never exceeds h."""
    outer_it = iter(checked(outer))
    pending = next(outer_it, None)
    stack: list = []
    for d in checked(inner):
        d_id, d_owner = _position(d)
        while pending is not None and _position(pending)[0].pre < d_id.pre:
            a_id = _position(pending)[0]
            while stack and not ancestor(_position(stack[-1])[0], a_id):
                stack.pop()
            stack.append(pending)
            pending = next(outer_it, None)
        while stack and not _covers(_position(stack[-1])[0], d_id, d_owner):
            stack.pop()
        d_path = _path(d)
        for a in stack:
            a_id = _position(a)[0]
            if not _related(a_id, d_id, d_owner, axis):
                continue
            if pairs is not None and (_path(a), d_path) not in pairs:
                continue
            yield a, d


def struct_join(outer: Iterable, inner: Iterable, axis: Axis = Axis.DESC,
                variant: Variant = Variant.INNER, pairs: Optional[set] = None,
                passthrough: Optional[set] = None) -> Iterator:
    """Structural join of an ancestor stream with a descendant stream.

    INNER yields (a, d) ordered by d; SEMI yields each qualifying d once;
    LEFT_OUTER yields (a, d) or (a, None) ordered by a; ANCESTOR_SEMI yields
    each a having a match (or whose path is in ``passthrough``), ordered by a.
    """
    variant = Variant(variant)
    if variant is Variant.INNER:
        return _stack_tree(outer, inner, axis, pairs)
    if variant is Variant.SEMI:
        return _desc_semi(outer, inner, axis, pairs)
    outer = list(outer)
    if variant is Variant.LEFT_OUTER:
        return _left_outer(outer, inner, axis, pairs)
    return _anc_semi(outer, inner, axis, pairs, passthrough or set())


def _desc_semi(outer, inner, axis, pairs):
    last = None
    for _, d in _stack_tree(outer, inner, axis, pairs):
        if d is not last:
            last = d
            yield d


def _left_outer(outer, inner, axis, pairs):
    # reorder from descendant order back to ancestor order
    matched: dict[int, list] = {}
    for a, d in _stack_tree(outer, inner, axis, pairs):
        matched.setdefault(id(a), []).append(d)
    for a in outer:
        ds = matched.get(id(a))
        if ds:
            for d in ds:
                yield a, d
        else:
            yield a, None


def _anc_semi(outer, inner, axis, pairs, passthrough):
    free = [a for a in outer if _path(a) in passthrough]
    rest = [a for a in outer if _path(a) not in passthrough]
    hit = {id(a) for a, _ in _stack_tree(rest, inner, axis, pairs)} if rest else set()
    keep = {id(a) for a in free} | hit
    for a in outer:
        if id(a) in keep:
            yield a


@dataclass(frozen=True)
class DupSafety:
    safe: bool
    witness: Optional[tuple[int, int]] = None

    def __bool__(self):
        return self.safe


def needs_dup_elim(paths: Iterable[int], summary: PathSummary) -> DupSafety:
    """Safe iff no path of the outer input is a summary ancestor of another."""
    ps = sorted(set(paths))
    for i, p in enumerate(ps):
        for q in ps[i + 1:]:
            if summary.is_ancestor(p, q):
                return DupSafety(False, (p, q))
    return DupSafety(True)


def select(stream: Iterable, predicate: Predicate) -> Iterator:
    for item in stream:
        value = getattr(item, "value", None)
        if value is None:
            raise MissingColumn("selection needs a value column")
        if predicate.matches(value):
            yield item


def dup_elim(stream: Iterable) -> Iterator:
    """Sort-then-unique; inputs arrive sorted so this is adjacent-unique."""
    items = sorted(stream, key=_key)
    last = None
    for item in items:
        k = (_key(item), _path(item))
        if k != last:
            last = k
            yield item


# -- plans --------------------------------------------------------------------------------

@dataclass
class PlanNode:
    kind: str
    children: list["PlanNode"] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def walk(self) -> Iterator["PlanNode"]:
        yield self
        for c in self.children:
            yield from c.walk()

    def label(self) -> str:
        i = self.info
        if self.kind in ("Scan", "ValScan"):
            return f"{self.kind}({i['path']})"
        if self.kind == "StructJoin":
            extra = ""
            if i.get("passthrough"):
                extra = f" passthrough={sorted(i['passthrough'])}"
            return f"StructJoin[{i['axis'].value},{i['variant'].value}] {i['outer']}->{i['inner']}{extra}"
        if self.kind == "Select":
            return f"Select({i['predicate']})"
        if self.kind == "TextOf":
            return f"TextOf({','.join(map(str, i['paths'])) or '-'})"
        if self.kind == "Project":
            verdict = i["safety"]
            tag = "dup-safe" if verdict.safe else f"dup-unsafe witness={verdict.witness}"
            return f"Project({i['node']}) {tag}"
        if self.kind == "Output":
            return f"Output[{','.join(i['names'])}] mode={i['mode']}"
        if self.kind == "Materialize":
            return f"Materialize({i['node']})"
        return self.kind


def _edge_axis(forest: RelevantPathForest, node: PatternNode) -> Axis:
    return node.axis if node.parent is not None and node.parent.index == forest.up[node.index] else Axis.DESC


def _scan_node(forest: RelevantPathForest, node: PatternNode) -> PlanNode:
    kind = "ValScan" if node.is_value else "Scan"
    scans = [PlanNode(kind, info={"path": p}) for p in forest.paths(node)]
    if len(scans) == 1:
        base = scans[0]
    else:
        base = PlanNode("Merge", scans)
    if node.predicate is not None:
        if not node.is_value:
            summary = forest.summary
            tpaths = [t for t in (summary.child(p, TEXT) for p in forest.paths(node)) if t]
            base = PlanNode("TextOf", [base], {"paths": tpaths})
        base = PlanNode("Select", [base], {"predicate": node.predicate})
    return base


def build_plan(q: QueryPattern, forest: RelevantPathForest, store: Optional[PathStore] = None) -> PlanNode:
    """Compile the minimized pattern into an operator tree."""
    returned = [n for n in q.nodes if n.returned]
    if not returned:
        raise ValueError("pattern has no returned node")
    top = forest.top
    if top is None or not forest.entries[top.index]:
        raise Unsatisfiable("no relevant path for the topmost pattern node")
    summary = forest.summary
    kids = {n.index: forest.kept_children(n) for n in forest.kept}

    skeleton = {n.index for n in forest.kept
                if any(r.index == n.index or _below(r, n) for r in returned)}
    chain = len(returned) == 1 and not any(q.nodes[i].optional for i in skeleton)

    filters: dict[int, PlanNode] = {}
    for n in reversed(forest.kept):
        plan = _scan_node(forest, n)
        for c in kids[n.index]:
            # on a single returned chain the top-down inner join already
            # enforces the skeleton child
            if c.optional or (chain and c.index in skeleton):
                continue
            plan = PlanNode("StructJoin", [plan, filters[c.index]], {
                "axis": _edge_axis(forest, c), "variant": Variant.ANCESTOR_SEMI,
                "pairs": forest.allowed_pairs(c),
                "passthrough": forest.passthrough_paths(c) if c.existential else set(),
                "outer": n.name(), "inner": c.name()})
        filters[n.index] = plan

    reach: dict[int, PlanNode] = {top.index: filters[top.index]}
    for n in forest.kept:
        if n.index not in skeleton or n.index == top.index:
            continue
        up = forest.up[n.index]
        join = PlanNode("StructJoin", [reach[up], filters[n.index]], {
            "axis": _edge_axis(forest, n), "variant": Variant.INNER,
            "pairs": forest.allowed_pairs(n), "outer": q.nodes[up].name(), "inner": n.name()})
        safety = needs_dup_elim(forest.paths(up), summary)
        reach[n.index] = PlanNode("Project", [join], {"node": n.name(), "safety": safety})

    names = [r.name() for r in returned]
    if chain:
        return PlanNode("Output", [reach[returned[0].index]],
                        {"mode": "stream", "names": names, "columns": [r.index for r in returned]})
    mats = []
    for i in sorted(skeleton):
        n = q.nodes[i]
        if n.index == top.index:
            continue
        up = forest.up[n.index]
        mats.append(PlanNode("Materialize", [PlanNode("StructJoin", [reach[up], filters[n.index]], {
            "axis": _edge_axis(forest, n),
            "variant": Variant.LEFT_OUTER if n.optional else Variant.INNER,
            "pairs": forest.allowed_pairs(n), "outer": q.nodes[up].name(), "inner": n.name()})],
            {"node": n.name(), "index": n.index, "up": up}))
    return PlanNode("Output", [reach[top.index]] + mats, {
        "mode": "table", "names": names, "columns": [r.index for r in returned],
        "top": top.index, "skeleton": skeleton, "kids": {i: [c.index for c in kids[i] if c.index in skeleton]
                                                           for i in skeleton}})


def _below(node: PatternNode, anc: PatternNode) -> bool:
    cur = node.parent
    while cur is not None:
        if cur is anc:
            return True
        cur = cur.parent
    return False


@dataclass
class ResultTable:
    names: list[str]
    rows: list[tuple]

    def __len__(self):
        return len(self.rows)

    def csv_lines(self) -> list[str]:
        return [";".join("" if b is None else b.csv() for b in row) for row in self.rows]

    def keys(self) -> list[tuple]:
        """Comparable row identities (label, pre, post, depth, value)."""
        return [tuple(None if b is None else (b.label, *b.id.astuple(), b.value if b.is_value else None)
                      for b in row) for row in self.rows]


def _run(node: PlanNode, store: PathStore) -> Iterator:
    k = node.kind
    i = node.info
    summary = store.summary
    if k == "Scan":
        label = summary.node(i["path"]).label
        return (Binding(sid, i["path"], label) for sid in scan_ids(store, i["path"]))
    if k == "ValScan":
        label = summary.node(i["path"]).label
        return (Binding(e.self, i["path"], label, e.owner, e.value) for e in scan_values(store, i["path"]))
    if k == "Merge":
        return merge([_run(c, store) for c in node.children])
    if k == "TextOf":
        return _text_of(_run(node.children[0], store), i["paths"], store)
    if k == "Select":
        return select(_run(node.children[0], store), i["predicate"])
    if k == "StructJoin":
        return struct_join(_run(node.children[0], store), _run(node.children[1], store),
                           i["axis"], i["variant"], i.get("pairs"), i.get("passthrough"))
    if k == "Project":
        ds = (d for _, d in _run(node.children[0], store))
        return ds if i["safety"].safe else dup_elim(ds)
    raise ValueError(f"operator {k} is not a stream")


def _text_of(stream: Iterable[Binding], paths: list[int], store: PathStore) -> Iterator[Binding]:
    texts: dict[int, list[str]] = {}
    for p in paths:
        for e in scan_values(store, p):
            texts.setdefault(e.owner.pre, []).append(e.value)
    for b in stream:
        yield b._replace(value="".join(texts.get(b.id.pre, ())))


def execute(plan: PlanNode, store: PathStore) -> ResultTable:
    if plan.kind != "Output":
        raise ValueError("execute expects an Output plan")
    info = plan.info
    if info["mode"] == "stream":
        rows = [(b,) for b in checked(_run(plan.children[0], store))]
        return ResultTable(info["names"], rows)
    top = info["top"]
    columns = info["columns"]
    kids = info["kids"]
    tops = list(checked(_run(plan.children[0], store)))
    groups: dict[int, dict[tuple, list]] = {}
    for mat in plan.children[1:]:
        g: dict[tuple, list] = {}
        for a, d in _run(mat.children[0], store):
            g.setdefault((a.id.pre, a.path), [])
            if d is not None:
                g[(a.id.pre, a.path)].append(d)
        groups[mat.info["index"]] = g

    def subtree_cols(idx: int) -> list[int]:
        out = [idx] if idx in columns else []
        for c in kids[idx]:
            out.extend(subtree_cols(c))
        return out

    memo: dict = {}

    def rows_for(idx: int, b: Binding) -> list[dict]:
        key = (idx, b.id.pre, b.path)
        if key in memo:
            return memo[key]
        partial = [{idx: b} if idx in columns else {}]
        for c in kids[idx]:
            options = []
            seen = set()
            for d in groups[c].get((b.id.pre, b.path), ()):
                for r in rows_for(c, d):
                    sig = tuple((k, None if v is None else (v.key, v.path)) for k, v in sorted(r.items()))
                    if sig not in seen:
                        seen.add(sig)
                        options.append(r)
            if not options:
                options = [dict.fromkeys(subtree_cols(c))]
            partial = [{**p, **o} for p in partial for o in options]
        memo[key] = partial
        return partial

    table = {}
    for b in tops:
        for r in rows_for(top, b):
            row = tuple(r.get(c) for c in columns)
            sig = tuple(None if x is None else (x.key, x.path) for x in row)
            table.setdefault(sig, row)
    ordered = sorted(table.items(), key=lambda kv: tuple((0,) if x is None else (1, x[0]) for x in kv[0]))
    return ResultTable(info["names"], [row for _, row in ordered])


def explain(plan: PlanNode) -> str:
    lines = []

    def emit(node: PlanNode, depth: int) -> None:
        lines.append("  " * depth + node.label())
        for c in node.children:
            emit(c, depth + 1)

    emit(plan, 0)
    return "\n".join(lines)


def run_query(q: QueryPattern, store: PathStore, minimize_paths: bool = True) -> ResultTable:
    """Relevant paths, plan and execution in one call."""
    from .relpaths import compute_relevant_paths
    forest = compute_relevant_paths(store.summary, q, minimize_paths)
    return execute(build_plan(q, forest, store), store)
