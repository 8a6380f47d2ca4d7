"""Seeded synthetic documents for experiments and tests."""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass

from .errors import SpecTooLarge

MAX_NODES = 10 ** 6


class Shape(enum.Enum):
    CHAIN = "chain"
    FANOUT = "fanout"
    RECURSIVE = "recursive"
    TEXT_HEAVY = "textheavy"


@dataclass(frozen=True)
class GenSpec:
    shape: Shape = Shape.FANOUT
    depth: int = 3
    fanout: int = 10
    recursion_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if self.fanout < 1 and self.shape is not Shape.CHAIN:
            raise ValueError("fanout must be at least 1")
        if not 0.0 <= self.recursion_prob <= 1.0:
            raise ValueError("recursion_prob must lie in [0, 1]")

    def element_count(self) -> int:
        if self.shape is Shape.CHAIN:
            return self.depth
        return sum(self.fanout ** level for level in range(self.depth))


def generate(spec: GenSpec) -> str:
    """XML text for ``spec``; identical specs give identical text."""
    n = spec.element_count()
    if n > MAX_NODES:
        raise SpecTooLarge(f"{n} elements requested, limit is {MAX_NODES}")
    out: list[str] = []
    if spec.shape is Shape.CHAIN:
        for level in range(spec.depth):
            out.append(f"<t{level + 1}>")
        for level in reversed(range(spec.depth)):
            out.append(f"</t{level + 1}>")
        return "".join(out)

    rng = random.Random(spec.seed)
    text = spec.shape is Shape.TEXT_HEAVY
    counter = 0

    def element(level: int, tag: str) -> None:
        nonlocal counter
        counter += 1
        if text:
            out.append(f'<{tag} id="n{counter}">')
        else:
            out.append(f"<{tag}>")
        if level + 1 < spec.depth:
            for i in range(spec.fanout):
                if text:
                    out.append(f"w{rng.randrange(1000)} ")
                if spec.shape is Shape.RECURSIVE and level > 0 and rng.random() < spec.recursion_prob:
                    child = tag
                else:
                    child = f"t{level + 1}"
                element(level + 1, child)
        if text:
            out.append(f"end{counter}")
        out.append(f"</{tag}>")

    element(0, "t0")
    return "".join(out)
