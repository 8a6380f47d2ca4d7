"""Tree-pattern queries and their two surface syntaxes.

XPath subset::

    path      := ('/' | '//') step (('/' | '//') step)*
    step      := (NCName | '*' | '@' NCName | 'text()') predicate*
    predicate := '[' relpath (('=' | '~') literal)? ']'
    relpath   := step (('/' | '//') step)*

``~`` is substring containment.  S-expressions cover optional edges and
several returned nodes::

    (node tag=<label> axis=child|desc [opt] [exist] [ret]
          [eq="..." | contains="..."] child*)
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .errors import InvariantViolation, PatternSyntaxError, UnsupportedFeature
from .ingest import TEXT


class Axis(enum.Enum):
    CHILD = "child"
    DESC = "desc"


@dataclass(frozen=True)
class Predicate:
    kind: str  # "eq" | "contains"
    text: str

    def __post_init__(self):
        if self.kind not in ("eq", "contains"):
            raise ValueError(f"unknown predicate kind {self.kind!r}")

    def matches(self, value: str) -> bool:
        if self.kind == "eq":
            return value == self.text
        return self.text in value

    def __str__(self):
        op = "=" if self.kind == "eq" else "~"
        return f"{op}{_quote(self.text)}"


@dataclass(eq=True)
class PatternNode:
    label: str
    axis: Axis = Axis.DESC
    optional: bool = False
    existential: bool = False
    returned: bool = False
    predicate: Optional[Predicate] = None
    children: list["PatternNode"] = field(default_factory=list)
    # filled in by QueryPattern
    index: int = field(default=-1, compare=False, repr=False)
    parent: Optional["PatternNode"] = field(default=None, compare=False, repr=False)

    @property
    def is_value(self) -> bool:
        return self.label == TEXT or self.label.startswith("@")

    def matches_label(self, label: str) -> bool:
        if self.label == "*":
            return label != TEXT and not label.startswith("@")
        return self.label == label

    def walk(self) -> Iterator["PatternNode"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def name(self) -> str:
        return f"{self.label}#{self.index}"


class QueryPattern:
    """A pattern tree with nodes indexed in pre-order."""

    def __init__(self, root: PatternNode, check: bool = True):
        self.root = root
        self.nodes: list[PatternNode] = []
        for node in root.walk():
            node.index = len(self.nodes)
            self.nodes.append(node)
            for child in node.children:
                child.parent = node
        root.parent = None
        if check:
            check_invariants(self)

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def __len__(self):
        return len(self.nodes)

    def __eq__(self, other):
        return isinstance(other, QueryPattern) and self.root == other.root

    @property
    def returned(self) -> list[PatternNode]:
        return [n for n in self.nodes if n.returned]

    def __repr__(self):
        return f"QueryPattern({format_pattern(self)})"


def check_invariants(q: QueryPattern) -> None:
    root = q.root
    if root.optional or root.existential:
        raise InvariantViolation("the pattern root cannot be optional or existential")
    for node in q.nodes:
        if node.returned and node.existential:
            raise InvariantViolation(f"{node.label}: returned node cannot be existential")
        if node.is_value and node.children:
            raise InvariantViolation(f"{node.label}: value nodes cannot have children")
        anc = node.parent
        under_exist = False
        under_opt = False
        while anc is not None:
            under_exist |= anc.existential
            under_opt |= anc.optional
            anc = anc.parent
        if under_exist and node.returned:
            raise InvariantViolation(f"{node.label}: returned node under an existential node")
        if under_exist and not (node.existential or node.optional):
            raise InvariantViolation(
                f"{node.label}: descendants of existential nodes must be existential or optional")
        if node.returned and not node.optional and under_opt:
            raise InvariantViolation(
                f"{node.label}: non-optional returned node below an optional edge")


# -- XPath subset ------------------------------------------------------------

_NAME = re.compile(r"[A-Za-z_][\w.\-]*(?::[A-Za-z_][\w.\-]*)?")


class _XPathParser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, msg: str):
        raise PatternSyntaxError(msg, self.pos)

    def unsupported(self, what: str):
        raise UnsupportedFeature(f"{what} at position {self.pos} is outside the supported XPath subset")

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self, n: int = 1) -> str:
        return self.text[self.pos:self.pos + n]

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def slashes(self) -> Optional[Axis]:
        self.skip_ws()
        if self.peek(2) == "//":
            self.pos += 2
            return Axis.DESC
        if self.peek() == "/":
            self.pos += 1
            return Axis.CHILD
        return None

    def parse(self) -> PatternNode:
        axis = self.slashes()
        if axis is None:
            if self.peek() == ".":
                self.unsupported("relative path")
            self.error("path must start with '/' or '//'")
        root = node = self.step(axis, existential=False)
        while not self.at_end():
            axis = self.slashes()
            if axis is None:
                self.unexpected()
            child = self.step(axis, existential=False)
            node.children.append(child)
            node = child
        node.returned = True
        return root

    def unexpected(self):
        ch = self.peek()
        if ch and ch in "|,()$":
            self.unsupported(f"{ch!r}")
        if ch and ch in "!<>":
            self.unsupported("comparison operator")
        self.error(f"unexpected {ch!r}" if ch else "unexpected end of input")

    def step(self, axis: Axis, existential: bool) -> PatternNode:
        self.skip_ws()
        start = self.pos
        ch = self.peek()
        if ch == "*":
            self.pos += 1
            label = "*"
        elif ch == "@":
            self.pos += 1
            m = _NAME.match(self.text, self.pos)
            if not m:
                if self.peek() == "*":
                    self.unsupported("attribute wildcard")
                self.error("attribute name expected")
            self.pos = m.end()
            label = "@" + m.group()
        elif ch == ".":
            self.unsupported("'.' / '..' step")
        else:
            m = _NAME.match(self.text, self.pos)
            if not m:
                self.error("step expected" if ch else "step expected at end of input")
            self.pos = m.end()
            label = m.group()
            if self.peek(2) == "::":
                self.pos = start
                self.unsupported("explicit axis")
            if self.peek() == "(":
                if label == "text" and self.peek(2) == "()":
                    self.pos += 2
                    label = TEXT
                else:
                    self.pos = start
                    self.unsupported("function call")
        node = PatternNode(label, axis, existential=existential)
        while True:
            self.skip_ws()
            if self.peek() != "[":
                break
            self.pos += 1
            node.children.append(self.predicate())
        return node

    def predicate(self) -> PatternNode:
        self.skip_ws()
        if self.peek().isdigit():
            self.unsupported("positional predicate")
        if self.peek() in ("/", "."):
            self.unsupported("absolute or self-relative predicate path")
        first = node = self.step(Axis.CHILD, existential=True)
        while True:
            self.skip_ws()
            ch = self.peek()
            if ch == "/":
                axis = self.slashes()
                child = self.step(axis, existential=True)
                node.children.append(child)
                node = child
            elif ch in ("=", "~"):
                self.pos += 1
                node.predicate = Predicate("eq" if ch == "=" else "contains", self.literal())
            elif ch == "]":
                self.pos += 1
                return first
            else:
                self.unexpected()

    def literal(self) -> str:
        self.skip_ws()
        quote = self.peek()
        if quote not in ("'", '"'):
            if quote.isdigit():
                self.unsupported("numeric literal")
            self.error("string literal expected")
        end = self.text.find(quote, self.pos + 1)
        if end < 0:
            self.error("unterminated string literal")
        value = self.text[self.pos + 1:end]
        self.pos = end + 1
        self.skip_ws()
        if self.peek() != "]":
            self.unexpected()
        return value


def parse_xpath(text: str) -> QueryPattern:
    return QueryPattern(_XPathParser(text).parse())


# -- s-expressions -----------------------------------------------------------

_TOKEN = re.compile(r'\s*(?:(\()|(\))|([A-Za-z_]+)="((?:[^"\\]|\\.)*)"|([^\s()]+))')


def _tokens(text: str):
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            return
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise PatternSyntaxError(f"unexpected {text[pos]!r}", pos)
        if m.group(1):
            yield pos, "(", None
        elif m.group(2):
            yield pos, ")", None
        elif m.group(3):
            yield pos, "kv", (m.group(3), re.sub(r"\\(.)", r"\1", m.group(4)))
        else:
            yield pos, "word", m.group(5)
        pos = m.end()


def parse_pattern(text: str) -> QueryPattern:
    toks = list(_tokens(text))
    i = 0

    def tok(k):
        return toks[k] if k < len(toks) else (len(text), "eof", None)

    def node_expr() -> PatternNode:
        nonlocal i
        pos, kind, val = tok(i)
        if kind != "(":
            raise PatternSyntaxError("'(' expected", pos)
        pos, kind, val = tok(i + 1)
        if kind != "word" or val != "node":
            raise PatternSyntaxError("'node' expected", pos)
        i += 2
        label = None
        axis = None
        node = PatternNode("?")
        while True:
            pos, kind, val = tok(i)
            if kind == ")":
                i += 1
                break
            if kind == "(":
                node.children.append(node_expr())
                continue
            if kind == "eof":
                raise PatternSyntaxError("unbalanced '('", pos)
            i += 1
            if kind == "kv":
                key, value = val
                if key in ("eq", "contains"):
                    if node.predicate is not None:
                        raise PatternSyntaxError("at most one value predicate per node", pos)
                    node.predicate = Predicate(key, value)
                    continue
                raise PatternSyntaxError(f"unknown quoted attribute {key!r}", pos)
            if val in ("opt", "exist", "ret"):
                setattr(node, {"opt": "optional", "exist": "existential", "ret": "returned"}[val], True)
            elif val.startswith("tag="):
                label = val[4:]
                if not label:
                    raise PatternSyntaxError("empty tag", pos)
            elif val.startswith("axis="):
                try:
                    axis = Axis(val[5:])
                except ValueError:
                    raise PatternSyntaxError(f"bad axis {val[5:]!r}", pos) from None
            else:
                raise PatternSyntaxError(f"unexpected {val!r}", pos)
        if label is None:
            raise PatternSyntaxError("node without tag=", pos)
        if axis is None:
            raise PatternSyntaxError("node without axis=", pos)
        node.label = label
        node.axis = axis
        return node

    root = node_expr()
    if i != len(toks):
        raise PatternSyntaxError("trailing input after pattern", tok(i)[0])
    return QueryPattern(root)


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def format_pattern(q) -> str:
    """Syntactic normal form (s-expression) of a pattern or pattern node."""
    node = q.root if isinstance(q, QueryPattern) else q
    parts = [f"node tag={node.label} axis={node.axis.value}"]
    if node.optional:
        parts.append("opt")
    if node.existential:
        parts.append("exist")
    if node.returned:
        parts.append("ret")
    if node.predicate is not None:
        parts.append(f"{node.predicate.kind}={_quote(node.predicate.text)}")
    parts.extend(format_pattern(c) for c in node.children)
    return "(" + " ".join(parts) + ")"


def parse_any(text: str) -> QueryPattern:
    """S-expression if the text starts with '(', XPath otherwise."""
    return parse_pattern(text) if text.lstrip().startswith("(") else parse_xpath(text)
