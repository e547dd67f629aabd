"""Directed acyclic graph families that host trickle-down chains.

Three substrates are supported: the complete binary tree, the Harris-Ulam
tree (optionally with a cap on child indices) and the two-dimensional grid.
Vertices are plain tuples. Tree vertices are words of child indices and
grid vertices are coordinate pairs ``(i, j)``.

Every vertex owns a set of child *slots*. A slot is the integer used as the
coordinate of a routing state, so slot ``0`` of a binary vertex ``u`` is the
child ``u + (0,)`` and slot ``0`` of a grid vertex ``(i, j)`` is ``(i+1, j)``.
"""
from __future__ import annotations

import itertools
from math import comb
from typing import Iterator

Vertex = tuple


class SubstrateError(ValueError):
    pass


class GraphKind:
    """Common interface of the substrates."""

    name = "abstract"
    is_tree = True

    @property
    def root(self) -> Vertex:
        return ()

    def validate(self, u: Vertex) -> None:
        raise NotImplementedError

    def slots(self, u: Vertex):
        """Child slots of ``u`` in canonical order (may be lazy)."""
        raise NotImplementedError

    def child(self, u: Vertex, slot: int) -> Vertex:
        raise NotImplementedError

    def children(self, u: Vertex, limit: int | None = None):
        self.validate(u)
        kids = (self.child(u, s) for s in self.slots(u))
        if limit is not None:
            return list(itertools.islice(kids, limit))
        if self.max_slots is None:
            return kids
        return list(kids)

    @property
    def max_slots(self) -> int | None:
        """Number of child slots per vertex, ``None`` when unbounded."""
        raise NotImplementedError

    def parents(self, u: Vertex) -> list:
        raise NotImplementedError

    def slot_of(self, parent: Vertex, v: Vertex) -> int:
        """Slot of ``parent`` that leads to ``v``."""
        raise NotImplementedError

    def depth(self, u: Vertex) -> int:
        return len(u)

    def is_leq(self, u: Vertex, v: Vertex) -> bool:
        raise NotImplementedError

    def count_paths(self, u: Vertex, v: Vertex) -> int:
        return 1 if self.is_leq(u, v) else 0

    def format_vertex(self, u: Vertex) -> str:
        raise NotImplementedError

    def parse_vertex(self, text: str) -> Vertex:
        raise NotImplementedError

    def vertices_to_depth(self, depth: int, width: int | None = None) -> Iterator[Vertex]:
        """All vertices of depth at most ``depth``; ``width`` bounds lazy fan-out."""
        layer = [self.root]
        for _ in range(depth + 1):
            yield from layer
            nxt = []
            for u in layer:
                kids = self.children(u, limit=width) if self.max_slots is None else self.children(u)
                for v in kids:
                    if v not in nxt:
                        nxt.append(v)
            layer = nxt

    def __eq__(self, other):
        return type(self) is type(other) and self.__dict__ == other.__dict__

    def __hash__(self):
        return hash((type(self).__name__, tuple(sorted(self.__dict__.items()))))


class _WordTree(GraphKind):
    first_letter = 0

    def parents(self, u):
        self.validate(u)
        return [] if not u else [u[:-1]]

    def child(self, u, slot):
        return u + (slot,)

    def slot_of(self, parent, v):
        if len(v) != len(parent) + 1 or v[:-1] != parent:
            raise SubstrateError(f"{v!r} is not a child of {parent!r}")
        return v[-1]

    def is_leq(self, u, v):
        return len(u) <= len(v) and v[: len(u)] == u

    def format_vertex(self, u):
        if not u:
            return "e"
        if all(0 <= a < 10 for a in u):
            return "".join(str(a) for a in u)
        return ".".join(str(a) for a in u)

    def parse_vertex(self, text):
        text = text.strip()
        if text in ("e", "", "∅"):
            return ()
        if "." in text:
            u = tuple(int(a) for a in text.split("."))
        else:
            u = tuple(int(a) for a in text)
        self.validate(u)
        return u


class BinaryTree(_WordTree):
    name = "binary"
    max_slots = 2

    def validate(self, u):
        if not isinstance(u, tuple) or any(a not in (0, 1) for a in u):
            raise SubstrateError(f"not a binary word: {u!r}")

    def slots(self, u):
        return (0, 1)

    def __repr__(self):
        return "BinaryTree()"


class HarrisUlam(_WordTree):
    """Words over the positive integers, children ``u1, u2, ...``."""

    name = "harris-ulam"

    def __init__(self, cap: int | None = None):
        if cap is not None and cap < 1:
            raise SubstrateError("cap must be positive")
        self.cap = cap

    @property
    def max_slots(self):
        return self.cap

    def validate(self, u):
        if not isinstance(u, tuple):
            raise SubstrateError(f"not a word: {u!r}")
        for a in u:
            if not isinstance(a, int) or a < 1 or (self.cap is not None and a > self.cap):
                raise SubstrateError(f"invalid Harris-Ulam word: {u!r}")

    def slots(self, u):
        if self.cap is None:
            return itertools.count(1)
        return range(1, self.cap + 1)

    def __repr__(self):
        return f"HarrisUlam(cap={self.cap})"


class Grid2D(GraphKind):
    """The quadrant lattice; ``(i, j)`` has children ``(i+1, j)`` then ``(i, j+1)``."""

    name = "grid"
    is_tree = False
    max_slots = 2

    @property
    def root(self):
        return (0, 0)

    def validate(self, u):
        if (
            not isinstance(u, tuple)
            or len(u) != 2
            or not all(isinstance(a, int) and a >= 0 for a in u)
        ):
            raise SubstrateError(f"not a grid vertex: {u!r}")

    def slots(self, u):
        return (0, 1)

    def child(self, u, slot):
        i, j = u
        return (i + 1, j) if slot == 0 else (i, j + 1)

    def parents(self, u):
        self.validate(u)
        i, j = u
        out = []
        if i > 0:
            out.append((i - 1, j))
        if j > 0:
            out.append((i, j - 1))
        return out

    def slot_of(self, parent, v):
        if v == (parent[0] + 1, parent[1]):
            return 0
        if v == (parent[0], parent[1] + 1):
            return 1
        raise SubstrateError(f"{v!r} is not a child of {parent!r}")

    def depth(self, u):
        return u[0] + u[1]

    def is_leq(self, u, v):
        return u[0] <= v[0] and u[1] <= v[1]

    def count_paths(self, u, v):
        if not self.is_leq(u, v):
            return 0
        di, dj = v[0] - u[0], v[1] - u[1]
        return comb(di + dj, di)

    def format_vertex(self, u):
        return f"({u[0]},{u[1]})"

    def parse_vertex(self, text):
        body = text.strip().strip("()")
        try:
            i, j = (int(a) for a in body.split(","))
        except ValueError as exc:
            raise SubstrateError(f"bad grid vertex {text!r}") from exc
        u = (i, j)
        self.validate(u)
        return u

    def __repr__(self):
        return "Grid2D()"


def kind_from_name(name: str) -> GraphKind:
    if name == "binary":
        return BinaryTree()
    if name == "grid":
        return Grid2D()
    if name.startswith("harris-ulam"):
        _, _, cap = name.partition(":")
        return HarrisUlam(int(cap) if cap else None)
    raise SubstrateError(f"unknown substrate {name!r}")
