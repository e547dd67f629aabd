"""Boundary objects: measures on killed paths, labelings, ratio estimators and stick-breaking samplers.

Exact measures (``BoundaryMeasure``) hold rational cylinder masses and feed
kernels and h-transforms. Sampled measures (``SampledMeasure``) hold floats
and are only used for statistics; the two types do not mix.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping

import numpy as np

from .graph_substrate import BinaryTree, GraphKind
from .routing_chains import as_rational, crp_admissible, format_rational
from .trickle_engine import Tree

DEFAULT_DEPTH = 8
CEMETERY = "⋄"


class BoundaryError(ValueError):
    pass


class DepthError(BoundaryError):
    pass


@dataclass(frozen=True)
class KilledPath:
    """A root path, either infinite (known through ``prefix``) or absorbed after ``prefix``."""

    prefix: tuple
    killed: bool = False

    def letter(self, k: int):
        """The ``k``-th letter (1-based); the cemetery symbol after a kill."""
        if k <= len(self.prefix):
            return self.prefix[k - 1]
        if self.killed:
            return CEMETERY
        raise DepthError(f"path known to length {len(self.prefix)} only")

    def __len__(self):
        return len(self.prefix)


def _children_words(kind: GraphKind, u: tuple, known: Iterable[tuple]):
    if kind.max_slots is not None:
        return list(kind.children(u))
    return sorted({v for v in known if len(v) == len(u) + 1 and v[:-1] == u})


class BoundaryMeasure:
    """Exact cylinder masses ``mu[u]`` for ``|u| <= depth`` and killed masses for ``|u| < depth``."""

    mode = "exact"

    def __init__(self, depth: int, masses: Mapping[tuple, Fraction], killed: Mapping[tuple, Fraction] | None = None,
                 kind: GraphKind | None = None, check: bool = True):
        self.depth = depth
        self.kind = kind or BinaryTree()
        self.masses = {tuple(u): as_rational(m) for u, m in masses.items() if m}
        self.killed = {tuple(u): as_rational(m) for u, m in (killed or {}).items() if m}
        if check:
            self.check()

    def mass(self, u: tuple) -> Fraction:
        if len(u) > self.depth:
            raise DepthError(f"measure known to depth {self.depth}, asked for {u!r}")
        return self.masses.get(tuple(u), Fraction(0))

    def killed_mass(self, u: tuple) -> Fraction:
        if len(u) >= self.depth:
            raise DepthError(f"killed mass known above depth {self.depth} only")
        return self.killed.get(tuple(u), Fraction(0))

    def children(self, u: tuple) -> list:
        return _children_words(self.kind, u, self.masses)

    def check(self) -> None:
        if self.masses.get((), 0) != 1:
            raise BoundaryError("root mass must be 1")
        for u, m in self.masses.items():
            if m < 0:
                raise BoundaryError(f"negative mass at {u!r}")
            if len(u) > self.depth:
                raise BoundaryError(f"mass stored below depth at {u!r}")
            if len(u) < self.depth:
                below = sum((self.mass(v) for v in self.children(u)), Fraction(0))
                if m != self.killed_mass(u) + below:
                    raise BoundaryError(f"masses at {u!r} do not add up")
        for u in self.killed:
            if u not in self.masses:
                raise BoundaryError(f"killed mass at a null vertex {u!r}")

    @classmethod
    def fair(cls, depth: int = DEFAULT_DEPTH) -> "BoundaryMeasure":
        """Uniform coin-tossing measure: ``mu_u = 2^-|u|``."""
        kind = BinaryTree()
        return cls(depth, {u: Fraction(1, 2 ** len(u)) for u in kind.vertices_to_depth(depth)}, kind=kind)

    @classmethod
    def from_splits(cls, depth: int, split: Callable[[tuple], Fraction]) -> "BoundaryMeasure":
        """Binary measure with ``mu_{u0} = split(u) mu_u``."""
        masses = {(): Fraction(1)}
        for u in BinaryTree().vertices_to_depth(depth - 1):
            s = as_rational(split(u))
            masses[u + (0,)] = masses[u] * s
            masses[u + (1,)] = masses[u] * (1 - s)
        return cls(depth, masses)

    def sample_path(self, rng: np.random.Generator, length: int) -> KilledPath:
        """Draw a path from the measure, known through ``length`` letters or until killed."""
        if length > self.depth:
            raise DepthError(f"cannot sample {length} letters from a depth-{self.depth} measure")
        u: tuple = ()
        while len(u) < length:
            here = self.mass(u)
            x = rng.random() * float(here)
            acc = float(self.killed_mass(u))
            if x < acc:
                return KilledPath(u, killed=True)
            nxt = None
            for v in self.children(u):
                acc += float(self.mass(v))
                if x < acc:
                    nxt = v
                    break
            if nxt is None:
                nxt = max(self.children(u), key=self.mass)
            u = nxt
        return KilledPath(u)

    def format(self) -> str:
        lines = [f"# depth={self.depth} mode={self.mode}"]
        for u in sorted(self.masses, key=lambda w: (len(w), w)):
            k = self.killed.get(u, Fraction(0)) if len(u) < self.depth else Fraction(0)
            lines.append(f"{self.kind.format_vertex(u)}\t{format_rational(self.masses[u])}\t{format_rational(k)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str, kind: GraphKind | None = None) -> "BoundaryMeasure":
        kind = kind or BinaryTree()
        depth, masses, killed = None, {}, {}
        for line in text.splitlines():
            if line.startswith("#"):
                for tok in line[1:].split():
                    key, _, val = tok.partition("=")
                    if key == "depth":
                        depth = int(val)
                    elif key == "mode" and val != "exact":
                        raise BoundaryError("only exact measures can be parsed")
                continue
            if not line.strip():
                continue
            word, mass, kill = line.split("\t")
            u = kind.parse_vertex(word)
            masses[u] = Fraction(mass)
            killed[u] = Fraction(kill)
        if depth is None:
            raise BoundaryError("missing depth header")
        return cls(depth, masses, killed, kind=kind)

    def __eq__(self, other):
        return (isinstance(other, BoundaryMeasure) and self.depth == other.depth
                and self.masses == other.masses and self.killed == other.killed)


@dataclass
class SampledMeasure:
    """Floating-point cylinder masses of a sampled random measure on binary paths."""

    depth: int
    masses: dict = field(default_factory=dict)
    mode = "sampled"

    def mass(self, u: tuple) -> float:
        if len(u) > self.depth:
            raise DepthError(f"measure known to depth {self.depth}")
        return self.masses.get(tuple(u), 0.0)


# ---------------------------------------------------------------- labelings

@dataclass
class AdmissibleLabeling:
    """Vertices marked as passing mass on, with their routing sub-probabilities.

    ``down`` lists the vertices (to depth ``depth``) that receive mass. For
    each ``u`` in ``down`` above ``depth``, ``routes[u]`` maps child slots to
    the fraction of mass passed to that child; the rest is killed at ``u``.
    """

    depth: int
    down: frozenset
    routes: dict
    kind: GraphKind = field(default_factory=BinaryTree)

    def check(self) -> None:
        kind = self.kind
        if () not in self.down:
            raise BoundaryError("the root must be marked")
        for u in self.down:
            if u and u[:-1] not in self.down:
                raise BoundaryError(f"{u!r} is marked but its parent is not")
        for u in self.down:
            if len(u) >= self.depth:
                continue
            r = self.routes.get(u, {})
            if any(as_rational(v) < 0 for v in r.values()) or sum(map(as_rational, r.values())) > 1:
                raise BoundaryError(f"routes at {u!r} are not a sub-probability")
            for slot, w in r.items():
                v = kind.child(u, slot)
                if (w > 0) != (v in self.down):
                    raise BoundaryError(f"labeling and routes disagree at {v!r}")
            for v in self.down:
                if len(v) == len(u) + 1 and v[:-1] == u and not r.get(kind.slot_of(u, v), 0):
                    raise BoundaryError(f"{v!r} marked but receives no mass")


def path_measure(lab: AdmissibleLabeling) -> BoundaryMeasure:
    lab.check()
    masses = {(): Fraction(1)}
    killed = {}
    for u in sorted(lab.down, key=lambda w: (len(w), w)):
        if len(u) >= lab.depth:
            continue
        r = {s: as_rational(w) for s, w in lab.routes.get(u, {}).items() if w}
        for s, w in r.items():
            masses[lab.kind.child(u, s)] = masses[u] * w
        killed[u] = masses[u] * (1 - sum(r.values(), Fraction(0)))
    return BoundaryMeasure(lab.depth, masses, killed, kind=lab.kind)


def recover_labeling(mu: BoundaryMeasure) -> AdmissibleLabeling:
    """Invert :func:`path_measure` through ratios of cylinder masses."""
    down = frozenset(u for u, m in mu.masses.items() if m > 0)
    routes = {}
    for u in down:
        if len(u) < mu.depth:
            routes[u] = {mu.kind.slot_of(u, v): mu.mass(v) / mu.mass(u) for v in mu.children(u) if mu.mass(v)}
    return AdmissibleLabeling(mu.depth, down, routes, mu.kind)


# ----------------------------------------------------------------- ratios

def empirical_ratios(t: Tree, depth: int) -> dict:
    """``#t(u) / #t`` for every vertex of depth at most ``depth``."""
    if not len(t):
        raise BoundaryError("empty tree")
    n = len(t)
    if t.kind.max_slots is None:
        words = [u for u in t if len(u) <= depth]
    else:
        words = list(t.kind.vertices_to_depth(depth))
    return {u: Fraction(t.count(u), n) for u in words}


def product_uniform_cdf(x, k: int):
    """CDF of a product of ``k`` independent uniforms."""
    x = np.clip(np.asarray(x, dtype=float), 1e-300, 1.0)
    lx = -np.log(x)
    total = np.zeros_like(x)
    term = np.ones_like(x)
    for i in range(k):
        if i:
            term = term * lx / i
        total = total + term
    return np.where(np.asarray(x) >= 1.0, 1.0, x * total)


# ---------------------------------------------------------------- samplers

def sample_dirichlet_measure(params: Callable[[tuple], tuple] | tuple, rng: np.random.Generator,
                             depth: int = DEFAULT_DEPTH) -> SampledMeasure:
    """Random binary measure with ``mu_{u0} / mu_u ~ Beta(params(u))`` independently."""
    get = params if callable(params) else (lambda u: params)
    masses = {(): 1.0}
    for u in BinaryTree().vertices_to_depth(depth - 1):
        a, b = get(u)
        if a <= 0 or b <= 0:
            raise BoundaryError("beta parameters must be positive")
        s = rng.beta(float(a), float(b))
        masses[u + (0,)] = masses[u] * s
        masses[u + (1,)] = masses[u] * (1.0 - s)
    return SampledMeasure(depth, masses)


def sample_bst_limit_measure(rng: np.random.Generator, depth: int = DEFAULT_DEPTH) -> SampledMeasure:
    """Uniform stick-breaking at every vertex."""
    masses = {(): 1.0}
    for u in BinaryTree().vertices_to_depth(depth - 1):
        s = rng.random()
        masses[u + (0,)] = masses[u] * s
        masses[u + (1,)] = masses[u] * (1.0 - s)
    return SampledMeasure(depth, masses)


def sample_gem(alpha, theta, k: int, rng: np.random.Generator) -> np.ndarray:
    """First ``k`` weights of a GEM(alpha, theta) sequence.

    With negative ``alpha`` and ``theta = -M alpha`` the sequence has
    exactly ``M`` weights summing to one, and at most ``M`` are returned.
    """
    alpha, theta = as_rational(alpha), as_rational(theta)
    if not crp_admissible(alpha, theta):
        raise BoundaryError("inadmissible GEM parameters")
    a, t = float(alpha), float(theta)
    out = []
    left = 1.0
    for i in range(1, k + 1):
        b_param = theta + i * alpha
        if b_param == 0:
            out.append(left)
            break
        b = rng.beta(1.0 - a, t + i * a)
        out.append(left * b)
        left *= 1.0 - b
    return np.array(out)
