"""Permutation encodings of growing trees and the composition chain."""
from __future__ import annotations

from fractions import Fraction
from itertools import permutations
from typing import Sequence

import numpy as np

from .graph_substrate import BinaryTree, HarrisUlam
from .routing_chains import as_rational
from .trickle_engine import Tree


class ListingError(ValueError):
    pass


def check_listing(r: Sequence[int]) -> tuple:
    r = tuple(int(x) for x in r)
    if sorted(r) != list(range(1, len(r) + 1)):
        raise ListingError(f"not a listing of 1..{len(r)}: {r!r}")
    return r


def positions(r: Sequence[int]) -> dict:
    """Map each value to its 1-based position in the listing."""
    return {v: k for k, v in enumerate(r, start=1)}


def format_listing(r: Sequence[int]) -> str:
    return ",".join(str(x) for x in r)


def parse_listing(text: str) -> tuple:
    return check_listing(int(x) for x in text.split(",") if x.strip())


def format_labels(kind, labels: dict) -> str:
    """One ``vertex-word : label`` line per vertex, in canonical vertex order."""
    rows = sorted(labels.items(), key=lambda kv: (len(kv[1]), kv[1]))
    return "\n".join(f"{kind.format_vertex(u)} : {lab}" for lab, u in rows)


# ---------------------------------------------------------------- BST

def listing_to_bst(r: Sequence[int]) -> dict:
    """Insert ``1, 2, ...`` in turn, going left when the new value sits earlier in the listing.

    Returns the map from label to vertex word.
    """
    r = check_listing(r)
    if not r:
        return {}
    pos = positions(r)
    at: dict = {(): 1}
    where = {1: ()}
    for label in range(2, len(r) + 1):
        u: tuple = ()
        while u in at:
            u = u + ((0,) if pos[label] < pos[at[u]] else (1,))
        at[u] = label
        where[label] = u
    return where


def bst_to_listing(where: dict) -> tuple:
    """Read the labels of a labelled binary tree in symmetric (left, root, right) order."""
    at = {u: lab for lab, u in where.items()}
    out: list = []

    def visit(u):
        if u not in at:
            return
        visit(u + (0,))
        out.append(at[u])
        visit(u + (1,))

    visit(())
    return tuple(out)


def bst_shape(r: Sequence[int]) -> Tree:
    return Tree(BinaryTree(), listing_to_bst(r).values())


# ------------------------------------------------------ recursive trees

def listing_to_rrt(r: Sequence[int]) -> dict:
    """Attach ``i`` below the last earlier entry smaller than ``i`` (the root if none).

    The root carries label 0. Returns the map from label to Harris-Ulam word.
    """
    r = check_listing(r)
    pos = positions(r)
    where = {0: ()}
    kids = {0: 0}
    for i in range(1, len(r) + 1):
        parent = 0
        for k in range(pos[i] - 1, 0, -1):
            if r[k - 1] < i:
                parent = r[k - 1]
                break
        kids[parent] += 1
        where[i] = where[parent] + (kids[parent],)
        kids[i] = 0
    return where


def rrt_to_listing(where: dict) -> tuple:
    """Invert :func:`listing_to_rrt`: youngest children first, each followed by its own block."""
    children: dict = {}
    for lab, u in where.items():
        if u:
            parent = next(l for l, w in where.items() if w == u[:-1])
            children.setdefault(parent, []).append(lab)
    out: list = []

    def visit(lab):
        for c in sorted(children.get(lab, []), reverse=True):
            out.append(c)
            visit(c)

    visit(0)
    return tuple(out)


def rrt_shape(r: Sequence[int]) -> Tree:
    return Tree(HarrisUlam(), listing_to_rrt(r).values())


# ---------------------------------------------------------- samplers

def grow_uniform_listing(r: Sequence[int], rng: np.random.Generator) -> tuple:
    """Insert ``n + 1`` into one of the ``n + 1`` gaps, uniformly."""
    r = list(check_listing(r))
    slot = int(rng.integers(len(r) + 1))
    r.insert(slot, len(r) + 1)
    return tuple(r)


def uniform_listing(n: int, rng: np.random.Generator) -> tuple:
    r: tuple = ()
    for _ in range(n):
        r = grow_uniform_listing(r, rng)
    return r


def _mallows_gap(p: float, vacant: int | None, rng: np.random.Generator) -> int:
    if vacant is None:
        return int(rng.geometric(p)) - 1
    # truncated geometric on {0, ..., vacant - 1}
    u = rng.random() * (1.0 - (1.0 - p) ** vacant)
    k = 0
    acc = p
    while u >= acc and k < vacant - 1:
        k += 1
        acc += p * (1.0 - p) ** k
    return k


def sample_mallows_positions(n: int, p, rng: np.random.Generator, infinite: bool = False) -> list:
    """Slots taken by ``1, ..., n``: each value skips a geometric number of vacant slots."""
    pf = float(as_rational(p))
    if not 0 < pf < 1:
        raise ListingError("p must lie in (0, 1)")
    taken: list = []
    out = []
    for _ in range(n):
        vacant = None if infinite else n - len(taken)
        k = _mallows_gap(pf, vacant, rng)
        # the (k+1)-th vacant slot, counting from 1
        slot, skipped = 0, -1
        taken_set = set(taken)
        while skipped < k:
            slot += 1
            if slot not in taken_set:
                skipped += 1
        taken.append(slot)
        out.append(slot)
    return out


def sample_mallows_listing(n: int, p, rng: np.random.Generator, infinite: bool = False) -> tuple:
    """Listing of ``1..n`` (for the infinite case, their relative order in the infinite permutation)."""
    slots = sample_mallows_positions(n, p, rng, infinite=infinite)
    return tuple(v for _, v in sorted(zip(slots, range(1, n + 1))))


def mallows_listing_law(n: int, p) -> dict:
    """Exact law of the finite Mallows listing, by enumerating the gap choices."""
    p = as_rational(p)
    law: dict = {}

    def rec(taken, mass):
        if len(taken) == n:
            r = tuple(v for _, v in sorted(zip(taken, range(1, n + 1))))
            law[r] = law.get(r, Fraction(0)) + mass
            return
        vacant = [s for s in range(1, n + 1) if s not in taken]
        norm = 1 - (1 - p) ** len(vacant)
        for k, s in enumerate(vacant):
            rec(taken + [s], mass * (1 - p) ** k * p / norm)

    rec([], Fraction(1))
    return law


def all_listings(n: int):
    return permutations(range(1, n + 1))


# --------------------------------------------------------- compositions

def composition_step(word: Sequence[int], rng: np.random.Generator) -> tuple:
    return tuple(word) + (int(rng.integers(2)),)


def composition_decode(word: Sequence[int]) -> tuple:
    """Read left to right from ``(1)``: 1 opens a new part, 0 grows the last part."""
    parts = [1]
    for letter in word:
        if letter == 1:
            parts.append(1)
        elif letter == 0:
            parts[-1] += 1
        else:
            raise ValueError(f"letters must be 0 or 1, got {letter!r}")
    return tuple(parts)


def composition_encode(parts: Sequence[int]) -> tuple:
    if not parts or any(p < 1 for p in parts):
        raise ValueError("a composition has positive parts")
    word = [0] * (parts[0] - 1)
    for p in parts[1:]:
        word += [1] + [0] * (p - 1)
    return tuple(word)


def word_to_path_tree(word: Sequence[int]) -> Tree:
    w = tuple(word)
    return Tree(BinaryTree(), [w[:k] for k in range(len(w) + 1)])


def path_tree_to_word(t: Tree) -> tuple:
    deepest = max(t.vertices, key=len)
    if len(t) != len(deepest) + 1:
        raise ValueError("tree is not a single path")
    return deepest
