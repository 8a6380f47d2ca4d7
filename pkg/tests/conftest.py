import random

import pytest
from hypothesis import strategies as st

from pathsum.pattern import Axis, PatternNode, Predicate
from pathsum.store import build_store

D1 = (b"<site><asia><item><name>n1</name><desc/></item><item><name>n2</name></item></asia>"
      b"<europe><item><name>n3</name></item></europe></site>")
D2 = b"<a><b><c/><b><c/></b></b></a>"
MIXED = b'<doc k="v&amp;w"><p>one <b>two</b> three<i j="1" a="2">four</i></p><p/>tail<q>x</q></doc>'

FIXTURES = {"D1": D1, "D2": D2, "MIXED": MIXED, "TINY": b"<a/>"}


@pytest.fixture
def d1():
    return D1


@pytest.fixture
def d2():
    return D2


@pytest.fixture
def d1_store():
    return build_store(D1)


@pytest.fixture
def d2_store():
    return build_store(D2)


# -- random documents ------------------------------------------------------------------

def random_document(rng: random.Random, tags="abc", max_depth=4, max_kids=3,
                    text_prob=0.3, attr_prob=0.3) -> str:
    def element(depth):
        tag = rng.choice(tags)
        attrs = ""
        if rng.random() < attr_prob:
            attrs += f' k="{rng.choice(["x", "y", "x&amp;y"])}"'
        if rng.random() < attr_prob / 2:
            attrs += ' j="q"'
        parts = []
        for _ in range(rng.randint(0, max_kids if depth < max_depth else 0)):
            if rng.random() < text_prob:
                parts.append(rng.choice(["x", "y", "xy", "a&lt;b"]))
            parts.append(element(depth + 1))
        if rng.random() < text_prob:
            parts.append(rng.choice(["x", "y"]))
        return f"<{tag}{attrs}>{''.join(parts)}</{tag}>"

    return "<r>" + "".join(element(1) for _ in range(rng.randint(1, 3))) + "</r>"


def random_pattern(rng: random.Random, tags="abc", max_depth=3, max_kids=2, values=True):
    """A random tree pattern obeying the node invariants (may return nothing)."""
    def node(depth, exist, under_opt):
        leaf_value = values and depth > 0 and rng.random() < 0.15
        label = rng.choice(["#text", "@k"]) if leaf_value else rng.choice(list(tags) + ["*"])
        n = PatternNode(label, rng.choice([Axis.CHILD, Axis.DESC]))
        n.existential = exist
        n.optional = depth > 0 and not exist and rng.random() < 0.25
        opt = under_opt or n.optional
        n.returned = not exist and (not opt or n.optional) and rng.random() < 0.4
        if rng.random() < 0.15:
            n.predicate = Predicate(rng.choice(["eq", "contains"]), rng.choice(["x", "y", ""]))
        if depth < max_depth and not leaf_value:
            for _ in range(rng.randint(0, max_kids)):
                n.children.append(node(depth + 1, exist or rng.random() < 0.4, opt))
        return n

    return node(0, False, False)


@st.composite
def xml_documents(draw, tags="abc", max_depth=4):
    seed = draw(st.integers(0, 2 ** 32 - 1))
    return random_document(random.Random(seed), tags=tags, max_depth=max_depth).encode()


names = st.sampled_from(["a", "b", "c", "item", "x1"])
texts = st.text(alphabet=st.sampled_from(list("ab <&>'\"é")), min_size=1, max_size=6).filter(
    lambda s: s.strip() != "")


@st.composite
def rich_documents(draw, depth=0):
    """Documents with arbitrary text, entities and attribute sets."""
    def esc(s):
        return (s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
                .replace('"', "&quot;").replace("'", "&apos;"))

    def element(d):
        tag = draw(names)
        attr_names = draw(st.lists(st.sampled_from(["k", "j", "id"]), unique=True, max_size=2))
        attrs = "".join(f' {a}="{esc(draw(texts))}"' for a in attr_names)
        parts = []
        for _ in range(draw(st.integers(0, 3 if d < 4 else 0))):
            if draw(st.booleans()):
                parts.append(esc(draw(texts)))
            parts.append(element(d + 1))
        if draw(st.booleans()):
            parts.append(esc(draw(texts)))
        return f"<{tag}{attrs}>{''.join(parts)}</{tag}>"

    return element(depth).encode()
