"""Minimal relevant path sets for tree patterns, computed on the summary.

Phase 1 is one depth-first pass over the summary.  Every pattern node owns a
stack of candidate entries; an entry is pushed when a summary node matches the
node's label in the right context (an open entry for the pattern parent) and
is checked for its required pattern children when the summary node is left.
``selfparent`` links chain an entry to the open entry of the same stack whose
path is an ancestor; descendant-edge children of an entry are inherited along
those links, which keeps the encoding at O(|PS|·|q|) entries even when the
number of path combinations is combinatorial.

Phase 2 drops *trivial* existential entries (presence guaranteed by 1/+
annotations, no value predicate) and bypasses *useless* variable nodes (every
parent binding has exactly one binding for the node).  Two choices keep the
result usable by plans:

* triviality is recorded per (parent entry, existential child): a parent
  entry whose existential child is guaranteed gets that requirement removed
  as a whole, so its remaining candidates never turn into a wrong semijoin;
* a node is bypassed only when *all* of its entries are useless, and a
  node only when it has at most one kept child, which must not be optional
  (siblings would lose their shared binding, optional children their empty
  rows); a topmost node needs exactly one such child.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .errors import TupleExplosion
from .pattern import Axis, PatternNode, QueryPattern
from .summary import Annotation, PathSummary, all1, all1orplus

DEFAULT_TUPLE_CAP = 10 ** 6


def tuple_cap() -> int:
    raw = os.environ.get("XSUM_TUPLE_CAP")
    return int(raw) if raw else DEFAULT_TUPLE_CAP


class StackEntry:
    __slots__ = ("path", "node", "parent", "selfparent", "open", "children", "alive",
                 "inherited", "satisfied", "serial")

    def __init__(self, path: int, node: PatternNode, parent, selfparent, serial: int):
        self.path = path
        self.node = node
        self.parent: Optional[StackEntry] = parent
        self.selfparent: Optional[StackEntry] = selfparent
        self.open = True
        self.children: dict[int, list[StackEntry]] = {c.index: [] for c in node.children}
        self.alive = True
        # descendant-edge pattern children found under selfparent-descendants
        self.inherited: set[int] = set()
        # existential pattern children guaranteed by annotations (phase 2)
        self.satisfied: set[int] = set()
        self.serial = serial

    def __repr__(self):
        state = "open" if self.open else ("closed" if self.alive else "dead")
        return f"<{self.node.label}:{self.path} {state}>"


class MatchState:
    """Phase-1 state: one append-only stack plus an open frontier per pattern node."""

    def __init__(self, summary: PathSummary, q: QueryPattern):
        self.summary = summary
        self.q = q
        self.stacks: list[list[StackEntry]] = [[] for _ in q.nodes]
        self.open: list[list[StackEntry]] = [[] for _ in q.nodes]
        self.created: dict[int, list[StackEntry]] = {}
        self.sp_children: dict[int, list[StackEntry]] = {}
        self.order = list(reversed(q.nodes))
        self.serial = 0
        self.frames = 0
        self.max_frames = 0
        self.pushed = 0

    # selfparent bookkeeping -------------------------------------------------

    def _link_sp(self, entry: StackEntry, sp: Optional[StackEntry]) -> None:
        entry.selfparent = sp
        if sp is not None:
            self.sp_children.setdefault(sp.serial, []).append(entry)

    def sp_descendants(self, entry: StackEntry) -> Iterator[StackEntry]:
        """Alive entries whose selfparent chain reaches ``entry``."""
        todo = [entry]
        while todo:
            cur = todo.pop()
            for x in self.sp_children.get(cur.serial, ()):
                if x.selfparent is cur:
                    if x.alive:
                        yield x
                    todo.append(x)

    def children_of(self, entry: StackEntry, child: PatternNode) -> list[StackEntry]:
        """Explicit children plus, for descendant edges, inherited ones."""
        out = [k for k in entry.children[child.index] if k.alive]
        if child.axis is Axis.DESC:
            for x in self.sp_descendants(entry):
                out.extend(k for k in x.children[child.index] if k.alive)
        return out


def begin_summary_node(state: MatchState, path: int, label: str) -> None:
    depth = state.summary.node(path).depth
    state.frames += 1
    state.max_frames = max(state.max_frames, state.frames)
    made = state.created.setdefault(path, [])
    # children before parents: a parent's entry for this very path must not
    # become the context of its own child
    for n in state.order:
        if not n.matches_label(label):
            continue
        if n.parent is None:
            if n.axis is Axis.CHILD and depth != 1:
                continue
            par = None
        else:
            frontier = state.open[n.parent.index]
            if not frontier:
                continue
            par = frontier[-1]
            if n.axis is Axis.CHILD and state.summary.node(par.path).depth != depth - 1:
                continue
        own = state.open[n.index]
        state.serial += 1
        entry = StackEntry(path, n, par, None, state.serial)
        state._link_sp(entry, own[-1] if own else None)
        if par is not None:
            par.children[n.index].append(entry)
        state.stacks[n.index].append(entry)
        own.append(entry)
        made.append(entry)
        state.pushed += 1


def _has_child(state: MatchState, entry: StackEntry, child: PatternNode) -> bool:
    if any(k.alive for k in entry.children[child.index]):
        return True
    return child.axis is Axis.DESC and child.index in entry.inherited


def _discard(state: MatchState, entry: StackEntry) -> None:
    """Drop ``entry``; hand its descendant-edge children to its selfparent."""
    entry.alive = False
    entry.open = False
    sp = entry.selfparent
    for x in state.sp_children.get(entry.serial, ()):
        if x.selfparent is entry:
            state._link_sp(x, sp)
    if sp is not None:
        sp.inherited |= entry.inherited
    for child in entry.node.children:
        kids = entry.children[child.index]
        entry.children[child.index] = []
        for k in kids:
            if not k.alive:
                continue
            if sp is not None and child.axis is Axis.DESC:
                k.parent = sp
                sp.children[child.index].append(k)
            else:
                _discard(state, k)


def end_summary_node(state: MatchState, path: int) -> None:
    state.frames -= 1
    for entry in state.created.pop(path, ()):
        frontier = state.open[entry.node.index]
        if frontier and frontier[-1] is entry:
            frontier.pop()
        entry.open = False
        if not entry.alive:
            continue
        required = [c for c in entry.node.children if not c.optional]
        if all(_has_child(state, entry, c) for c in required):
            sp = entry.selfparent
            if sp is not None:
                for c in entry.node.children:
                    if c.axis is Axis.DESC and _has_child(state, entry, c):
                        sp.inherited.add(c.index)
        else:
            _discard(state, entry)


def find_relevant(summary: PathSummary, q: QueryPattern) -> MatchState:
    """Phase 1: a single depth-first traversal of the summary."""
    state = MatchState(summary, q)
    stack: list[tuple[int, int]] = [(1, 0)]
    begin_summary_node(state, 1, summary.node(1).label)
    while stack:
        pid, i = stack[-1]
        kids = summary.node(pid).children
        if i < len(kids):
            stack[-1] = (pid, i + 1)
            child = kids[i]
            begin_summary_node(state, child, summary.node(child).label)
            stack.append((child, 0))
        else:
            stack.pop()
            end_summary_node(state, pid)
    return state


# -- the forest -------------------------------------------------------------------

@dataclass
class RelevantPathForest:
    """Surviving entries per pattern node plus the minimized pattern shape.

    ``status[i]`` is one of ``kept``, ``useless`` (bypassed), ``trivial``
    (every requirement it expressed is guaranteed) or ``pruned`` (no entry
    reachable).  ``up[i]`` is the nearest kept ancestor of a kept node.
    """
    pattern: QueryPattern
    summary: PathSummary
    state: MatchState
    entries: list[list[StackEntry]]
    status: list[str]
    up: list[Optional[int]]
    minimized: bool = True
    stats: dict = field(default_factory=dict)

    @property
    def kept(self) -> list[PatternNode]:
        return [n for n in self.pattern.nodes if self.status[n.index] == "kept"]

    @property
    def top(self) -> Optional[PatternNode]:
        for n in self.kept:
            if self.up[n.index] is None:
                return n
        return None

    @property
    def satisfiable(self) -> bool:
        top = self.top
        return top is not None and bool(self.entries[top.index])

    def paths(self, node) -> list[int]:
        idx = node if isinstance(node, int) else node.index
        return sorted(e.path for e in self.entries[idx])

    def kept_children(self, node: PatternNode) -> list[PatternNode]:
        return [n for n in self.kept if self.up[n.index] == node.index]

    @property
    def entry_count(self) -> int:
        return sum(len(es) for es in self.entries)

    def _route(self, upper: PatternNode, lower: PatternNode) -> list[PatternNode]:
        route = []
        node = lower
        while node is not upper:
            route.append(node)
            node = node.parent
        route.reverse()
        return route

    def related(self, entry: StackEntry, node: PatternNode) -> list[StackEntry]:
        """Entries of kept ``node`` bound together with ``entry`` (its kept parent's)."""
        frontier = [entry]
        for step in self._route(entry.node, node):
            nxt = {}
            for f in frontier:
                if step.index in f.satisfied:
                    continue
                for k in self.state.children_of(f, step):
                    nxt[k.serial] = k
            frontier = list(nxt.values())
        return sorted((k for k in frontier if k.alive), key=lambda k: k.path)

    def passthrough(self, entry: StackEntry, node: PatternNode) -> bool:
        """True when the existential ``node`` is guaranteed for ``entry``'s path."""
        route = self._route(entry.node, node)
        frontier = [entry]
        for step in route[:-1]:
            nxt = {}
            for f in frontier:
                for k in self.state.children_of(f, step):
                    nxt[k.serial] = k
            frontier = list(nxt.values())
        return any(node.index in f.satisfied for f in frontier)

    def allowed_pairs(self, node: PatternNode) -> set[tuple[int, int]]:
        up = self.up[node.index]
        pairs = set()
        for e in self.entries[up]:
            for k in self.related(e, node):
                pairs.add((e.path, k.path))
        return pairs

    def passthrough_paths(self, node: PatternNode) -> set[int]:
        up = self.up[node.index]
        return {e.path for e in self.entries[up] if self.passthrough(e, node)}

    def describe(self) -> str:
        lines = []

        def emit(node: PatternNode, depth: int) -> None:
            st = self.status[node.index]
            pad = "  " * depth
            if st == "kept":
                paths = self.paths(node)
                body = ", ".join(map(str, paths)) if paths else "(none)"
            else:
                body = f"({st})"
            lines.append(f"{pad}{node.label}: {body}")
            for c in node.children:
                emit(c, depth + 1)

        emit(self.pattern.root, 0)
        return "\n".join(lines)


def _subtree_has_predicate(node: PatternNode) -> bool:
    return any(n.predicate is not None for n in node.walk())


def _is_variable(node: PatternNode) -> bool:
    return not (node.returned or node.existential or node.optional or node.predicate is not None)


def minimize(state: MatchState, q: QueryPattern, enabled: bool = True) -> RelevantPathForest:
    """Phase 2: trivial existential entries, then useless variable nodes."""
    summary = state.summary
    if enabled:
        for x in reversed(q.nodes):
            if not x.existential or x.parent is None:
                continue
            clean = not _subtree_has_predicate(x)
            required = [w.index for w in x.children if not w.optional]
            for e in state.stacks[x.parent.index]:
                if not e.alive or not clean:
                    continue
                for k in state.children_of(e, x):
                    if all(w in k.satisfied for w in required) and all1orplus(summary, e.path, k.path):
                        e.satisfied.add(x.index)
                        break

    # keep only what is reachable through requirements that still stand
    reach: dict[int, StackEntry] = {}
    todo = [e for e in state.stacks[q.root.index] if e.alive]
    for e in todo:
        reach[e.serial] = e
    while todo:
        e = todo.pop()
        for c in e.node.children:
            if c.index in e.satisfied:
                continue
            for k in state.children_of(e, c):
                if k.serial not in reach:
                    reach[k.serial] = k
                    todo.append(k)
    entries = [[e for e in state.stacks[n.index] if e.serial in reach] for n in q.nodes]

    status = ["kept"] * len(q.nodes)
    for n in q.nodes:
        if not entries[n.index] and n.existential:
            status[n.index] = "trivial" if enabled else "pruned"
    for n in q.nodes:
        anc = n.parent
        while anc is not None and status[n.index] == "kept":
            if status[anc.index] in ("trivial", "pruned"):
                status[n.index] = status[anc.index]
            anc = anc.parent
    up: list[Optional[int]] = [None] * len(q.nodes)

    def nearest_kept(node: PatternNode) -> Optional[int]:
        anc = node.parent
        while anc is not None and status[anc.index] != "kept":
            anc = anc.parent
        return None if anc is None else anc.index

    for n in q.nodes:
        up[n.index] = nearest_kept(n)

    forest = RelevantPathForest(q, summary, state, entries, status, up, enabled)

    if enabled:
        for x in q.nodes:
            if status[x.index] != "kept" or not _is_variable(x) or not entries[x.index]:
                continue
            parent_idx = up[x.index]
            live_children = forest.kept_children(x)
            # one plain child at most: siblings would lose their common
            # binding, optional children their per-binding empty rows
            if len(live_children) > 1 or any(c.optional for c in live_children):
                continue
            if parent_idx is None:
                if not live_children or live_children[0].existential:
                    continue
                useless = all(all1(summary, 1, e.path) for e in entries[x.index])
            else:
                useless = True
                for e in entries[parent_idx]:
                    for k in forest.related(e, x):
                        if not all1(summary, e.path, k.path):
                            useless = False
                            break
                    if not useless:
                        break
            if useless:
                status[x.index] = "useless"
                for n in q.nodes:
                    up[n.index] = nearest_kept(n)
        for n in q.nodes:
            if status[n.index] != "kept":
                forest.entries[n.index] = []

    forest.stats = {
        "pushed": state.pushed,
        "max_frames": state.max_frames,
        "entries": forest.entry_count,
    }
    return forest


def compute_relevant_paths(summary: PathSummary, q: QueryPattern,
                           minimize_paths: bool = True) -> RelevantPathForest:
    """Phase 1 followed by Phase 2 (skipped when ``minimize_paths`` is false)."""
    state = find_relevant(summary, q)
    return minimize(state, q, enabled=minimize_paths)


def enumerate_tuples(forest: RelevantPathForest, cap: Optional[int] = None) -> list[dict[int, Optional[int]]]:
    """Expand the compact encoding into explicit pattern-node -> path tuples.

    Keys are indices of kept pattern nodes; ``None`` marks an optional node
    with no binding.
    """
    cap = tuple_cap() if cap is None else cap
    top = forest.top
    if top is None:
        return []
    kept_children = {n.index: forest.kept_children(n) for n in forest.kept}
    out: list[dict] = []

    def subtree_nodes(node: PatternNode) -> list[int]:
        res = [node.index]
        for c in kept_children[node.index]:
            res.extend(subtree_nodes(c))
        return res

    def expand(entry: StackEntry) -> list[dict]:
        partial = [{entry.node.index: entry.path}]
        for c in kept_children[entry.node.index]:
            options = []
            for k in forest.related(entry, c):
                options.extend(expand(k))
            if not options or (c.existential and forest.passthrough(entry, c)):
                options.append(dict.fromkeys(subtree_nodes(c)))
            if len(partial) * len(options) > cap:
                raise TupleExplosion(f"more than {cap} relevant path tuples")
            partial = [{**p, **o} for p in partial for o in options]
        return partial

    for e in forest.entries[top.index]:
        out.extend(expand(e))
        if len(out) > cap:
            raise TupleExplosion(f"more than {cap} relevant path tuples")
    return out


# -- independent oracle --------------------------------------------------------------

def _walk_ok(summary: PathSummary, px: int, py: int, allowed) -> bool:
    node = summary.nodes[py - 1]
    while node.id != px:
        if node.annotation not in allowed:
            return False
        node = summary.nodes[node.parent - 1]
    return True


def oracle_relevant_paths(summary: PathSummary, q: QueryPattern, minimize_paths: bool = True,
                          cap: Optional[int] = None) -> list[dict[int, Optional[int]]]:
    """Relevant-path tuples by exhaustive recursion over the summary tree.

    Shares nothing with the stack algorithm: candidates are enumerated by
    walking subtrees, annotation chains are checked by direct walks, and
    the minimization rules are applied to the explicit tuple set.
    """
    cap = tuple_cap() if cap is None else cap
    nodes = summary.nodes
    one = (Annotation.ONE,)
    one_plus = (Annotation.ONE, Annotation.PLUS)

    def below(pid: int, axis: Axis) -> list[int]:
        if axis is Axis.CHILD:
            return list(nodes[pid - 1].children)
        out, todo = [], list(nodes[pid - 1].children)
        while todo:
            c = todo.pop()
            out.append(c)
            todo.extend(nodes[c - 1].children)
        return sorted(out)

    def candidates(n: PatternNode, p: Optional[int]) -> list[int]:
        if p is None:
            pool = [1] if n.axis is Axis.CHILD else [x.id for x in nodes]
        else:
            pool = below(p, n.axis)
        return [c for c in pool if n.matches_label(nodes[c - 1].label) and valid(n, c)]

    valid_memo: dict = {}

    def valid(n: PatternNode, p: int) -> bool:
        key = (n.index, p)
        if key not in valid_memo:
            valid_memo[key] = True  # no cycles: children are strictly deeper
            valid_memo[key] = all(any(True for _ in candidates(c, p))
                                  for c in n.children if not c.optional)
        return valid_memo[key]

    sat_memo: dict = {}

    def satisfied(p: int, x: PatternNode) -> bool:
        if not minimize_paths or _subtree_has_predicate(x):
            return False
        key = (p, x.index)
        if key not in sat_memo:
            sat_memo[key] = any(
                _walk_ok(summary, p, k, one_plus)
                and all(satisfied(k, w) for w in x.children if not w.optional)
                for k in candidates(x, p))
        return sat_memo[key]

    def subtree(n: PatternNode) -> list[int]:
        return [m.index for m in n.walk()]

    def expand(n: PatternNode, p: int) -> list[dict]:
        partial = [{n.index: p}]
        for c in n.children:
            if c.existential and satisfied(p, c):
                options = [dict.fromkeys(subtree(c))]
            else:
                options = [t for k in candidates(c, p) for t in expand(c, k)]
                if not options:
                    options = [dict.fromkeys(subtree(c))]
            if len(partial) * len(options) > cap:
                raise TupleExplosion(f"more than {cap} relevant path tuples")
            partial = [{**a, **b} for a in partial for b in options]
        return partial

    tuples = [t for p in candidates(q.root, None) for t in expand(q.root, p)]
    if len(tuples) > cap:
        raise TupleExplosion(f"more than {cap} relevant path tuples")
    if not tuples:
        return []

    dropped: set[int] = set()
    for n in q.nodes:
        if n.existential and all(t[n.index] is None for t in tuples):
            dropped.update(subtree(n))

    def kept_parent(n: PatternNode) -> Optional[PatternNode]:
        anc = n.parent
        while anc is not None and anc.index in dropped:
            anc = anc.parent
        return anc

    if minimize_paths:
        for x in q.nodes:
            if x.index in dropped or not _is_variable(x):
                continue
            values = [t[x.index] for t in tuples if t[x.index] is not None]
            if not values:
                continue
            up = kept_parent(x)
            kids = [c for c in q.nodes if c.index not in dropped and kept_parent(c) is x]
            if len(kids) > 1 or any(c.optional for c in kids):
                continue
            if up is None:
                if not kids or kids[0].existential:
                    continue
                ok = all(_walk_ok(summary, 1, v, one) for v in values)
            else:
                ok = all(_walk_ok(summary, t[up.index], t[x.index], one)
                         for t in tuples
                         if t[up.index] is not None and t[x.index] is not None)
            if ok:
                dropped.add(x.index)

    seen = set()
    out = []
    for t in tuples:
        proj = {k: v for k, v in t.items() if k not in dropped}
        key = tuple(sorted(proj.items()))
        if key not in seen:
            seen.add(key)
            out.append(proj)
    return out
