"""Brute-force exact reference computations.

Everything here works from the one-step transition law of the routing
chains and nothing else. Closed forms elsewhere in the package are checked
against these routines, so this module must never import them.
"""
from __future__ import annotations

import os
from fractions import Fraction

from .graph_substrate import GraphKind, HarrisUlam
from .routing_chains import RoutingChainSpec, RoutingState, ZERO
from .trickle_engine import TrickleState, Tree

DEFAULT_BUDGET = 10**6


class BudgetExceeded(RuntimeError):
    pass


class OracleMismatch(AssertionError):
    pass


def budget() -> int:
    raw = os.environ.get("TRICKLE_BUDGET")
    if raw:
        return int(float(raw))
    return DEFAULT_BUDGET


def _guard(count: int, limit: int | None) -> None:
    if count > (limit or budget()):
        raise BudgetExceeded(f"enumeration exceeded budget of {limit or budget()} states")


def successors(kind: GraphKind, spec: RoutingChainSpec, state: TrickleState) -> dict:
    """One-step law of the full chain: successor state -> probability."""
    if state.fed == 0:
        return {TrickleState.initial(kind): Fraction(1)}
    occupied = state.occupied()
    out: dict = {}

    def walk(u, per, mass):
        if u not in occupied:
            nxt = TrickleState(kind, per, fed=state.fed + 1)
            out[nxt] = out.get(nxt, Fraction(0)) + mass
            return
        x = per.get(u, ZERO)
        for slot, prob in spec.transitions(x):
            changed = dict(per)
            changed[u] = x.add(slot)
            walk(kind.child(u, slot), changed, mass * prob)

    walk(kind.root, dict(state.per_vertex), Fraction(1))
    return out


def evolve(kind, spec, start: dict, steps: int, keep=None, limit: int | None = None) -> dict:
    layer = dict(start)
    for _ in range(steps):
        nxt: dict = {}
        for state, mass in layer.items():
            for succ, prob in successors(kind, spec, state).items():
                if keep is not None and not keep(succ):
                    continue
                nxt[succ] = nxt.get(succ, Fraction(0)) + mass * prob
        _guard(len(nxt), limit)
        layer = nxt
    return layer


def exact_distribution(kind: GraphKind, spec: RoutingChainSpec, n: int, limit: int | None = None) -> dict:
    """Law of ``X_n`` started from the root alone."""
    return evolve(kind, spec, {TrickleState.initial(kind): Fraction(1)}, n, limit=limit)


def routing_hit(spec: RoutingChainSpec, x: RoutingState, y: RoutingState) -> Fraction:
    """Hitting probability of a single routing chain by path enumeration."""
    if not x.leq(y):
        return Fraction(0)
    layer = {x: Fraction(1)}
    for _ in range(y.size - x.size):
        nxt: dict = {}
        for s, mass in layer.items():
            for slot, prob in spec.transitions(s):
                t = s.add(slot)
                if t.leq(y):
                    nxt[t] = nxt.get(t, Fraction(0)) + mass * prob
        layer = nxt
    return layer.get(y, Fraction(0))


def product_hit(kind, spec, x: TrickleState, y: TrickleState) -> Fraction:
    if not x.leq(y):
        return Fraction(0)
    out = Fraction(1)
    for u in set(x.per_vertex) | set(y.per_vertex):
        out *= routing_hit(spec, x.at(u), y.at(u))
        if not out:
            break
    return out


def chain_hit(kind, spec, x: TrickleState, y: TrickleState, limit: int | None = None) -> Fraction:
    """Hitting probability on the full chain by a forward sweep pruned to states below ``y``."""
    if not x.leq(y):
        return Fraction(0)
    layer = evolve(kind, spec, {x: Fraction(1)}, y.fed - x.fed, keep=lambda s: s.leq(y), limit=limit)
    return layer.get(y, Fraction(0))


def hitting_from(kind, spec, x: TrickleState, horizon: int, limit: int | None = None) -> dict:
    """Hitting probabilities from ``x`` of every state with at most ``horizon`` particles.

    Each state is visited at a single time, so its hitting probability is its
    mass in the forward sweep.
    """
    out = {x: Fraction(1)}
    layer = {x: Fraction(1)}
    for _ in range(horizon - x.fed):
        layer = evolve(kind, spec, layer, 1, limit=limit)
        out.update(layer)
    return out


def exact_hit_probability(kind, spec, x: TrickleState, y: TrickleState, limit: int | None = None) -> Fraction:
    """Probability that the chain started at ``x`` ever visits ``y``, computed two ways."""
    via_product = product_hit(kind, spec, x, y)
    via_chain = chain_hit(kind, spec, x, y, limit=limit)
    if via_product != via_chain:
        raise OracleMismatch(f"product {via_product} != chain {via_chain} for {x!r} -> {y!r}")
    return via_chain


def oracle_kernel(kind, spec, x: TrickleState, y: TrickleState) -> Fraction:
    """Ratio of hitting probabilities from ``x`` and from the root-only state."""
    den = exact_hit_probability(kind, spec, TrickleState.initial(kind), y)
    if not den:
        raise ZeroDivisionError("target unreachable from the reference state")
    return exact_hit_probability(kind, spec, x, y) / den


def enumerate_trees(kind: GraphKind, n: int, limit: int | None = None) -> list:
    """All trees with ``n`` vertices, sorted canonically."""
    if n < 1:
        return [Tree(kind, [])] if n == 0 else []
    if isinstance(kind, HarrisUlam) and kind.cap is None and n > 8:
        raise BudgetExceeded("Harris-Ulam enumeration is limited to 8 vertices")
    layer = {frozenset([()])}
    for _ in range(n - 1):
        nxt = set()
        for vs in layer:
            t = Tree(kind, vs, check=False)
            for v in t.external():
                nxt.add(vs | {v})
        _guard(len(nxt), limit)
        layer = nxt
    trees = [Tree(kind, vs) for vs in layer]
    return sorted(trees, key=lambda t: list(t))


def routing_states(spec: RoutingChainSpec, size: int) -> list:
    """All routing states of total ``size`` reachable from zero."""
    layer = {ZERO}
    for _ in range(size):
        layer = {s.add(slot) for s in layer for slot, _ in spec.transitions(s)}
    return sorted(layer, key=lambda s: s.items())
