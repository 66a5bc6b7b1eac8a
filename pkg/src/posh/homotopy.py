"""h-signatures from upward rays anchored at obstacle centres.

A letter is ``(k, +1)`` for a left-to-right crossing of obstacle ``k``'s ray and
``(k, -1)`` for right-to-left. A point is on the "right" side of a ray when its
x-coordinate is at least the centre's; a segment crosses when it changes side,
which makes touching a ray and turning back cancel out after reduction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HSignature:
    word: tuple = ()

    def __post_init__(self):
        for a, b in zip(self.word, self.word[1:]):
            if a[0] == b[0] and a[1] == -b[1]:
                raise ValueError(f"word is not reduced: {self.word}")

    def __str__(self):
        return format_word(self.word)

    def __len__(self):
        return len(self.word)

    @classmethod
    def parse(cls, text: str) -> "HSignature":
        return cls(tuple(parse_word(text)))

    def inverse(self) -> "HSignature":
        return HSignature(tuple((k, -s) for k, s in reversed(self.word)))


def format_word(word) -> str:
    return " ".join(f"t{k}" if s > 0 else f"~t{k}" for k, s in word)


def parse_word(text: str) -> list:
    out = []
    for tok in text.split():
        sign = -1 if tok.startswith("~") else 1
        out.append((int(tok.lstrip("~").lstrip("t")), sign))
    return out


def _centers(obstacles):
    out = []
    for ob in obstacles:
        if hasattr(ob, "center"):
            out.append((int(ob.id), float(ob.center[0]), float(ob.center[1])))
        else:
            k, c = ob
            out.append((int(k), float(c[0]), float(c[1])))
    return out


def raw_signature(path, obstacles) -> list:
    """Unreduced crossing word of a polyline.

    ``obstacles`` holds :class:`~posh.environment.Obstacle` instances or
    ``(id, center)`` pairs.
    """
    pts = np.asarray(path, dtype=float).reshape(-1, 2)
    centers = _centers(obstacles)
    word = []
    for (x1, y1), (x2, y2) in zip(pts[:-1], pts[1:]):
        hits = []
        for k, cx, cy in centers:
            if x1 < cx <= x2:
                sign = 1
            elif x2 < cx <= x1:
                sign = -1
            else:
                continue
            # interpolate from the left endpoint so a reversed segment gives the same y
            (xl, yl), (xr, yr) = ((x1, y1), (x2, y2)) if sign > 0 else ((x2, y2), (x1, y1))
            y = yl + (cx - xl) / (xr - xl) * (yr - yl)
            if y > cy:
                hits.append(((cx - x1) / (x2 - x1), k, sign))
        hits.sort()
        word.extend((k, s) for _, k, s in hits)
    return word


def reduce(word) -> HSignature:
    """Free-group normal form: cancel adjacent ``t_k ~t_k`` pairs."""
    stack = []
    for k, s in word:
        if stack and stack[-1][0] == k and stack[-1][1] == -s:
            stack.pop()
        else:
            stack.append((int(k), int(s)))
    return HSignature(tuple(stack))


def signature(path, obstacles) -> HSignature:
    return reduce(raw_signature(path, obstacles))


def count_switches(signatures) -> int:
    sigs = list(signatures)
    return sum(1 for a, b in zip(sigs[:-1], sigs[1:]) if a != b)
