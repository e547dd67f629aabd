"""Martin kernels: per-family closed forms, boundary extensions and the product kernel.

A kernel ``K(x, y)`` is the probability of reaching ``y`` from ``x`` divided
by the probability of reaching ``y`` from the reference (empty) state.
Everything is exact rational arithmetic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial
from typing import Callable, Mapping, Sequence

from .graph_substrate import BinaryTree
from .routing_chains import (
    BernoulliWalk,
    CatalanUrn,
    CrpBlocks,
    DirichletUrn,
    MallowsUrn,
    QBinomialUrn,
    RoutingChainSpec,
    RoutingState,
    SingleTrailHalf,
    ZERO,
    as_rational,
    catalan_number,
    crp_admissible,
    multinomial,
    path_sum_hit,
    rising,
)
from .trickle_engine import TrickleState, Tree


class KernelError(ValueError):
    pass


class DepthError(KernelError):
    pass


@dataclass(frozen=True)
class Finite:
    """Boundary point ``k`` of the Mallows and q-binomial urns."""

    k: int


@dataclass(frozen=True)
class _Infinity:
    def __repr__(self):
        return "INFINITY"


INFINITY = _Infinity()


# --------------------------------------------------------- routing kernels

def _q_fall(q: Fraction, lo: int, hi: int) -> Fraction:
    """Product of ``1 - q^m`` for ``lo <= m <= hi``."""
    out = Fraction(1)
    for m in range(lo, hi + 1):
        out *= 1 - q**m
    return out


def dirichlet_kernel(x: RoutingState, y: RoutingState, weights: Mapping) -> Fraction:
    if not x.leq(y):
        return Fraction(0)
    slots = sorted(weights)
    total = sum(weights.values())
    num = rising(total, y.size) * multinomial(y[s] - x[s] for s in slots)
    den = rising(total + x.size, y.size - x.size) * multinomial(y[s] for s in slots)
    for s in slots:
        num *= rising(weights[s] + x[s], y[s] - x[s])
        den *= rising(weights[s], y[s])
    return num / den


def bernoulli_kernel(x: RoutingState, y: RoutingState, probs: Mapping) -> Fraction:
    if not x.leq(y):
        return Fraction(0)
    out = Fraction(multinomial(y[s] - x[s] for s in probs), multinomial(y[s] for s in probs))
    for s, p in probs.items():
        out /= p ** x[s]
    return out


def crp_kernel(a: Sequence[int], b: Sequence[int], alpha, theta) -> Fraction:
    """Block-size kernel of the two-parameter restaurant process."""
    alpha, theta = as_rational(alpha), as_rational(theta)
    a, b = tuple(a), tuple(b)
    if not a:
        return Fraction(1)
    m, p, q = len(a), sum(a), sum(b)
    if len(b) < m or any(b[k] < a[k] for k in range(m)):
        return Fraction(0)
    out = Fraction(1)
    for x in range(1, p):
        out *= theta + x
    for i in range(1, m):
        out /= theta + i * alpha
    for ak in a:
        for x in range(1, ak):
            out /= x - alpha
    for x in range(q - p + 1, q):
        out /= x
    for ak, bk in zip(a, b):
        for x in range(bk - ak + 1, bk):
            out *= x
    run = 0
    for k in range(m - 1):
        run += b[k]
        out *= q - run
    return out


def mallows_urn_kernel(x: tuple, target, p) -> Fraction:
    """Kernel of the Mallows urn at an interior state ``(k, l)`` or a boundary point."""
    p = as_rational(p)
    i, j = x
    if target is INFINITY:
        return (1 - p) ** -i if j == 0 else Fraction(0)
    if isinstance(target, Finite):
        k = target.k
        if j == 0 and i <= k:
            return (1 - p) ** -i
        if j >= 1 and i == k:
            return (1 - p) ** -i / p
        return Fraction(0)
    k, l = target
    if j == 0 and i <= k:
        return (1 - p) ** -i
    if i == k and 1 <= j <= l:
        return (1 - p) ** -i / p
    return Fraction(0)


def qbinomial_urn_kernel(x: tuple, target, q, r) -> Fraction:
    """Kernel of the q-binomial urn at an interior state or a boundary point."""
    q, r = as_rational(q), as_rational(r)
    i, j = x
    tail = r**-i / _q_fall_r(q, r, j)
    if target is INFINITY:
        return r**-i if j == 0 else Fraction(0)
    if isinstance(target, Finite):
        k = target.k
        if i > k:
            return Fraction(0)
        return _q_fall(q, k - i + 1, k) * q ** (j * (k - i)) * tail
    k, l = target
    if i > k or j > l:
        return Fraction(0)
    ratio = _q_fall(q, k - i + 1, k) * _q_fall(q, l - j + 1, l) / _q_fall(q, (k - i) + (l - j) + 1, k + l)
    return ratio * q ** (j * (k - i)) * tail


def _q_fall_r(q, r, j):
    out = Fraction(1)
    for m in range(j):
        out *= 1 - r * q**m
    return out


def catalan_kernel(x: RoutingState, y: RoutingState, spec: CatalanUrn) -> Fraction:
    k, l = y.as_pair()
    from_zero = Fraction(catalan_number(k) * catalan_number(l), catalan_number(k + l + 1))
    return path_sum_hit(spec, x, y) / from_zero


def routing_kernel(spec: RoutingChainSpec, x: RoutingState, y: RoutingState) -> Fraction:
    """Per-vertex kernel ``K^u(x, y)`` in closed form where one is known."""
    if not x:
        return Fraction(1) if spec.hit(ZERO, y) else Fraction(0)
    if not x.leq(y):
        return Fraction(0)
    if isinstance(spec, DirichletUrn):
        return dirichlet_kernel(x, y, spec.weights)
    if isinstance(spec, BernoulliWalk):
        return bernoulli_kernel(x, y, spec.probs)
    if isinstance(spec, CrpBlocks):
        return crp_kernel(x.as_blocks(), y.as_blocks(), spec.alpha, spec.theta)
    if isinstance(spec, MallowsUrn):
        return mallows_urn_kernel(x.as_pair(), y.as_pair(), spec.p)
    if isinstance(spec, QBinomialUrn):
        return qbinomial_urn_kernel(x.as_pair(), y.as_pair(), spec.q, spec.r)
    if isinstance(spec, CatalanUrn):
        return catalan_kernel(x, y, spec)
    if isinstance(spec, SingleTrailHalf):
        return spec.hit(x, y) / spec.hit(ZERO, y)
    raise KernelError(f"no kernel for {spec.describe()}")


def product_martin_kernel(kind, spec: RoutingChainSpec, x: TrickleState, y: TrickleState) -> Fraction:
    """Product over vertices of the routing kernels; zero unless ``x`` lies below ``y``."""
    if not x.leq(y):
        return Fraction(0)
    out = Fraction(1)
    for u in x.sorted_vertices():
        out *= routing_kernel(spec, x.at(u), y.at(u))
        if not out:
            return out
    return out


# ----------------------------------------------------------- BST and DST

def bst_kernel(s: Tree, t: Tree) -> Fraction:
    if not s.vertices <= t.vertices:
        return Fraction(0)
    out = Fraction(1, comb(len(t), len(s)))
    for u in s.vertices:
        out *= t.count(u)
    return out


def bst_extended_kernel(s: Tree, mu) -> Fraction:
    """``(#s)!`` times the product of cylinder masses over the vertices of ``s``."""
    if getattr(mu, "mode", None) != "exact":
        raise KernelError("extended kernels need an exact measure")
    if s.depth() > mu.depth:
        raise DepthError(f"measure known to depth {mu.depth}, tree reaches depth {s.depth()}")
    out = Fraction(factorial(len(s)))
    for u in s.vertices:
        out *= mu.mass(u)
    return out


def dirichlet_extended_kernel(xi: RoutingState, rho: Mapping, weights) -> Fraction:
    if not isinstance(weights, Mapping):
        weights = dict(enumerate(weights))
    weights = {s: as_rational(w) for s, w in weights.items()}
    out = rising(sum(weights.values()), xi.size)
    for s, w in weights.items():
        out /= rising(w, xi[s])
        out *= as_rational(rho.get(s, 0)) ** xi[s]
    return out


def spacetime_extended_kernel(xi: RoutingState, rho: Mapping, probs) -> Fraction:
    if not isinstance(probs, Mapping):
        probs = dict(enumerate(probs))
    out = Fraction(1)
    for s, p in probs.items():
        out *= (as_rational(rho.get(s, 0)) / as_rational(p)) ** xi[s]
    return out


def crp_extended_kernel(a: Sequence[int], rho: Sequence, alpha, theta) -> Fraction:
    """Kernel of the block-size chain at a limiting frequency vector ``rho``."""
    alpha, theta = as_rational(alpha), as_rational(theta)
    if not crp_admissible(alpha, theta):
        raise KernelError("inadmissible CRP parameters")
    rho = [as_rational(v) for v in rho]
    if any(v < 0 for v in rho) or sum(rho) > 1:
        raise KernelError("rho must be a sub-probability vector")
    a = tuple(a)
    if not a:
        return Fraction(1)
    m, p = len(a), sum(a)
    freq = lambda k: rho[k] if k < len(rho) else Fraction(0)
    out = Fraction(1)
    for x in range(1, p):
        out *= theta + x
    for i in range(1, m):
        out /= theta + i * alpha
    for k, ak in enumerate(a):
        for x in range(1, ak):
            out /= x - alpha
        out *= freq(k) ** (ak - 1)
    run = Fraction(0)
    for k in range(m - 1):
        run += freq(k)
        out *= 1 - run
    return out


# ----------------------------------------------------------------- Mallows

@dataclass
class SpineTree:
    """An infinite binary tree with one infinite path and finite left hangers.

    ``spine`` is the path known to a finite depth. ``hangers[v]`` is the
    finite subtree rooted at ``v0`` (as words relative to ``v0``) for spine
    vertices ``v`` where the spine turns right.
    """

    spine: tuple
    hangers: dict = field(default_factory=dict)

    def __post_init__(self):
        self.spine = tuple(self.spine)
        for v, h in list(self.hangers.items()):
            v = tuple(v)
            if not (len(v) < len(self.spine) and self.spine[: len(v)] == v and self.spine[len(v)] == 1):
                raise KernelError(f"hanger at {v!r} is not at a right turn of the spine")
            self.hangers[v] = frozenset(tuple(w) for w in h)
            if self.hangers[v] and () not in self.hangers[v]:
                raise KernelError("hanger must be empty or contain its root")

    @property
    def depth(self) -> int:
        return len(self.spine)

    def _split(self, w: tuple):
        if len(w) > self.depth:
            raise DepthError(f"{w!r} lies below the stored spine depth {self.depth}")
        k = 0
        while k < len(w) and w[k] == self.spine[k]:
            k += 1
        return k

    def __contains__(self, w) -> bool:
        w = tuple(w)
        k = self._split(w)
        if k == len(w):
            return True
        if self.spine[k] == 1 and w[k] == 0:
            return w[k + 1 :] in self.hangers.get(w[:k], frozenset())
        return False

    def below(self, v: tuple):
        """Finite subtree at ``v`` as relative words, or ``None`` when it is infinite."""
        v = tuple(v)
        k = self._split(v)
        if k == len(v):
            return None
        if self.spine[k] == 1 and v[k] == 0:
            rest = v[k + 1 :]
            h = self.hangers.get(v[:k], frozenset())
            return frozenset(w[len(rest) :] for w in h if w[: len(rest)] == rest)
        return frozenset()

    def truncate(self, n: int) -> Tree:
        """Finite approximant: spine to depth ``n`` plus the hangers above it."""
        vs = {self.spine[:k] for k in range(min(n, self.depth) + 1)}
        for v, h in self.hangers.items():
            if len(v) < n:
                vs |= {v + (0,) + w for w in h}
        return Tree(BinaryTree(), vs)


def mallows_tree_kernel(s: Tree, t, p) -> Fraction:
    """``(1-p)^(-L(s)) p^(-N(s))`` times the frozen-left-subtree indicator."""
    p = as_rational(p)
    if isinstance(t, SpineTree) and s.depth() > t.depth:
        raise DepthError(f"spine known to depth {t.depth}, tree reaches depth {s.depth()}")
    if any(u not in t for u in s.vertices):
        return Fraction(0)
    left_mass = sum(s.count(u + (0,)) for u in s.vertices)
    switches = [u for u in s.vertices if u + (1,) in s]
    for u in switches:
        mine = s.below(u + (0,))
        theirs = t.below(u + (0,))
        if theirs is None or mine != theirs:
            return Fraction(0)
    return (1 - p) ** -left_mass * p ** -len(switches)


# ------------------------------------------------------------ perfect memory

def prefix_chain_kernel(rho_of: Callable, i, j, leq: Callable) -> Fraction:
    """Kernel of a chain whose states remember their whole past."""
    if not leq(i, j):
        return Fraction(0)
    return 1 / Fraction(rho_of(i))


def check_perfect_memory(successors: Callable, start, depth: int) -> None:
    """Raise if two distinct states of the same generation share a successor."""
    layer = {start}
    for _ in range(depth):
        parent_of: dict = {}
        for s in layer:
            for t in successors(s):
                if parent_of.setdefault(t, s) != s:
                    raise KernelError(f"states {parent_of[t]!r} and {s!r} both lead to {t!r}")
        layer = set(parent_of)
