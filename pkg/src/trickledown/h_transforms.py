"""Doob h-transforms and trickle-up samplers."""
from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .boundary_limits import BoundaryMeasure, CEMETERY, DepthError, KilledPath
from .exact_oracle import successors
from .graph_substrate import GraphKind
from .routing_chains import RoutingChainSpec, RoutingState
from .trickle_engine import Tree, state_to_tree, tree_to_state


class HTransformError(ValueError):
    pass


class NotHarmonic(HTransformError):
    pass


Transitions = Callable[[object], Iterable[tuple]]


def h_transform(P: Transitions, h: Callable[[object], Fraction], check: bool = True) -> Transitions:
    """Transition function ``(i, j) -> P(i, j) h(j) / h(i)`` restricted to ``h > 0``.

    When ``check`` is set, every produced row must sum to exactly one.
    """

    def row(i):
        hi = h(i)
        if not hi:
            raise HTransformError(f"h vanishes at the source state {i!r}")
        out = []
        for j, pij in P(i):
            hj = h(j)
            if pij and hj:
                out.append((j, pij * hj / hi))
        if check and sum((w for _, w in out), Fraction(0)) != 1:
            raise NotHarmonic(f"row at {i!r} sums to {sum(w for _, w in out)}")
        return out

    return row


def routing_transitions(spec: RoutingChainSpec) -> Transitions:
    """Routing-chain rows on ``(i, j)`` pairs (or block tuples for the restaurant)."""

    def rows(x):
        if isinstance(x, RoutingState):
            return [(x.add(s), p) for s, p in spec.transitions(x)]
        if spec.two_slot:
            state = RoutingState.pair(*x)
            return [(state.add(s).as_pair(), p) for s, p in spec.transitions(state)]
        state = RoutingState.blocks(x)
        return [(state.add(s).as_blocks(), p) for s, p in spec.transitions(state)]

    return rows


def tree_transitions(kind: GraphKind, spec: RoutingChainSpec) -> Transitions:
    """Rows of the tree-valued trickle-down chain."""

    def rows(t: Tree):
        state = tree_to_state(kind, t)
        return [(state_to_tree(s), p) for s, p in successors(kind, spec, state).items()]

    return rows


def dst_transition(s: Tree, mu: BoundaryMeasure) -> dict:
    """The conditioned BST step: external vertex ``u`` is added with probability ``mu_u``."""
    if getattr(mu, "mode", None) != "exact":
        raise HTransformError("transitions need an exact measure")
    ext = s.external()
    if max(len(u) for u in ext) > mu.depth:
        raise DepthError(f"measure depth {mu.depth} too shallow for {s!r}")
    for u in s.vertices:
        if not mu.mass(u):
            raise HTransformError(f"mu vanishes at {u!r}")
    out = {u: mu.mass(u) for u in ext}
    if sum(out.values()) != 1:
        raise HTransformError("external masses must sum to one")
    return out


# -------------------------------------------------------------- trickle-up

def trickle_up_bst(W: Tree, V: Sequence[int] | KilledPath) -> Tree:
    """Add ``V_1 ... V_{H+1}`` where ``V_1 ... V_H`` is the longest prefix of ``V`` in ``W``."""
    letters = V.prefix if isinstance(V, KilledPath) else tuple(V)
    h = 0
    while h < len(letters) and letters[: h + 1] in W:
        h += 1
    if h >= len(letters):
        raise HTransformError("path too short to leave the tree")
    return W.add(letters[: h + 1])


def trickle_up_harris_ulam(W: Tree, V: KilledPath) -> Tree:
    """Climb along ``V`` while inside ``W`` and attach a new youngest child there."""
    h = 0
    while True:
        try:
            nxt = V.letter(h + 1)
        except DepthError as exc:
            raise HTransformError("path too short to leave the tree") from exc
        if nxt == CEMETERY or V.prefix[: h + 1] not in W:
            break
        h += 1
    base = V.prefix[:h]
    m = 0
    while base + (m + 1,) in W:
        m += 1
    return W.add(base + (m + 1,))


def crp_htransform_step(a: Sequence[int], v) -> tuple:
    """Increment block ``v`` if it exists, otherwise open a new block."""
    a = tuple(a)
    if isinstance(v, int) and 1 <= v <= len(a):
        return a[: v - 1] + (a[v - 1] + 1,) + a[v:]
    return a + (1,)


def sample_rho_index(rho: Sequence[Fraction], rng: np.random.Generator):
    """Draw ``k`` with probability ``rho[k-1]``, or ``None`` for the leftover mass."""
    x = rng.random()
    acc = 0.0
    for k, w in enumerate(rho, start=1):
        acc += float(w)
        if x < acc:
            return k
    return None


def run_trickle_up(W: Tree, mu: BoundaryMeasure, steps: int, rng: np.random.Generator) -> Tree:
    for _ in range(steps):
        W = trickle_up_bst(W, mu.sample_path(rng, W.depth() + 1))
    return W


def trickle_up_frequencies(s: Tree, mu: BoundaryMeasure, samples: int, rng: np.random.Generator) -> dict:
    """Empirical law of the vertex added by one trickle-up step from ``s``."""
    counts: dict = {}
    need = s.depth() + 1
    for _ in range(samples):
        t = trickle_up_bst(s, mu.sample_path(rng, need))
        (u,) = t.vertices - s.vertices
        counts[u] = counts.get(u, 0) + 1
    return counts


def follow(row: Transitions, start, steps: int) -> list:
    """Path of a deterministic chain; raises if a row is not a point mass."""
    path = [start]
    for _ in range(steps):
        r = row(path[-1])
        if len(r) != 1 or r[0][1] != 1:
            raise HTransformError(f"row at {path[-1]!r} is not deterministic: {r!r}")
        path.append(r[0][0])
    return path
