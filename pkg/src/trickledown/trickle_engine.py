"""The trickle-down construction.

Particles are fed one at a time at the root. A particle that reaches an
occupied vertex is passed to a child chosen by that vertex's routing chain;
the first particle to reach a vacant vertex settles there. The chain state
records, for every vertex, how many particles it has routed to each child.

Time follows the convention that the state after ``n + 1`` particles is
``X_n``; ``X_0`` is the root alone with all routing counts zero.
"""
from __future__ import annotations

import hashlib
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graph_substrate import BinaryTree, GraphKind, HarrisUlam, SubstrateError, Vertex
from .routing_chains import RoutingChainSpec, RoutingState, ZERO


class EngineError(ValueError):
    pass


# ------------------------------------------------------------------ streams

def stable_key(*parts) -> int:
    """64-bit key derived from a stable hash of ``parts``."""
    digest = hashlib.blake2b(repr(parts).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derived_generator(seed: int, *parts) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed & (2**64 - 1), spawn_key=(stable_key(*parts),))
    return np.random.Generator(np.random.PCG64(ss))


class VertexStreams:
    """One independent uniform stream per vertex, derived from (seed, replica, vertex)."""

    def __init__(self, seed: int, replica: int = 0):
        self.seed = seed
        self.replica = replica
        self._gens: dict = {}

    def generator(self, u: Vertex) -> np.random.Generator:
        g = self._gens.get(u)
        if g is None:
            g = self._gens[u] = derived_generator(self.seed, "vertex", self.replica, u)
        return g

    def uniform(self, u: Vertex) -> float:
        return float(self.generator(u).random())


def _uniform(rng, u: Vertex) -> float:
    if isinstance(rng, VertexStreams):
        return rng.uniform(u)
    return float(rng.random())


# -------------------------------------------------------------------- trees

class Tree:
    """A finite rooted subtree of a tree substrate."""

    __slots__ = ("kind", "vertices", "_counts")

    def __init__(self, kind: GraphKind, vertices: Iterable[Vertex], check: bool = True):
        if not kind.is_tree:
            raise SubstrateError("trees live on tree substrates only")
        self.kind = kind
        self.vertices = frozenset(vertices)
        self._counts = None
        if check:
            self.check()

    def check(self) -> None:
        if not self.vertices:
            return
        if () not in self.vertices:
            raise SubstrateError("a nonempty tree must contain the root")
        for u in self.vertices:
            self.kind.validate(u)
            if u and u[:-1] not in self.vertices:
                raise SubstrateError(f"parent of {u!r} missing")
            if isinstance(self.kind, HarrisUlam) and u and u[-1] > 1:
                if u[:-1] + (u[-1] - 1,) not in self.vertices:
                    raise SubstrateError(f"older sibling of {u!r} missing")

    def __contains__(self, u):
        return u in self.vertices

    def __len__(self):
        return len(self.vertices)

    def __iter__(self):
        return iter(sorted(self.vertices, key=lambda w: (len(w), w)))

    def __eq__(self, other):
        return isinstance(other, Tree) and self.vertices == other.vertices

    def __hash__(self):
        return hash(self.vertices)

    def __le__(self, other):
        return self.vertices <= other.vertices

    def subtree_counts(self) -> dict:
        if self._counts is None:
            counts = dict.fromkeys(self.vertices, 1)
            for u in sorted(self.vertices, key=len, reverse=True):
                if u:
                    counts[u[:-1]] += counts[u]
            self._counts = counts
        return self._counts

    def count(self, u: Vertex) -> int:
        return self.subtree_counts().get(u, 0)

    def external(self) -> list:
        """Vacant vertices whose parent is in the tree (the possible next additions)."""
        if not self.vertices:
            return [()]
        out = []
        for u in self:
            if isinstance(self.kind, HarrisUlam):
                m = 1
                while u + (m,) in self.vertices:
                    m += 1
                if self.kind.cap is None or m <= self.kind.cap:
                    out.append(u + (m,))
            else:
                for v in self.kind.children(u):
                    if v not in self.vertices:
                        out.append(v)
        return sorted(out, key=lambda w: (len(w), w))

    def add(self, u: Vertex) -> "Tree":
        return Tree(self.kind, self.vertices | {u})

    def below(self, u: Vertex) -> frozenset:
        """The subtree rooted at ``u``, re-rooted (words relative to ``u``)."""
        k = len(u)
        return frozenset(w[k:] for w in self.vertices if w[:k] == u)

    def depth(self) -> int:
        return max((len(u) for u in self.vertices), default=-1)

    def format(self) -> str:
        return ",".join(self.kind.format_vertex(u) for u in self)

    def __repr__(self):
        return f"Tree({{{self.format()}}})"

    @classmethod
    def parse(cls, kind: GraphKind, text: str) -> "Tree":
        text = text.strip().strip("{}")
        words = [w for w in text.split(",") if w.strip()]
        return cls(kind, [kind.parse_vertex(w) for w in words])


def subtree_count(t: Tree, u: Vertex) -> int:
    return t.count(u)


# ------------------------------------------------------------------- states

class TrickleState:
    """Routing counts at every vertex plus the number of particles fed."""

    __slots__ = ("kind", "per_vertex", "fed", "_key")

    def __init__(self, kind: GraphKind, per_vertex: Mapping[Vertex, RoutingState] | None = None, fed: int | None = None):
        self.kind = kind
        self.per_vertex = {u: x for u, x in (per_vertex or {}).items() if x}
        root_count = self.at(kind.root).size
        if fed is None:
            fed = root_count + 1
        if (fed == 0 and self.per_vertex) or (fed and fed != root_count + 1):
            raise EngineError("particle count disagrees with the root clock")
        self.fed = fed
        self._key = None

    @classmethod
    def empty(cls, kind: GraphKind) -> "TrickleState":
        return cls(kind, {}, fed=0)

    @classmethod
    def initial(cls, kind: GraphKind) -> "TrickleState":
        return cls(kind, {}, fed=1)

    @property
    def n(self) -> int:
        """Time index: ``fed - 1``."""
        return self.fed - 1

    def at(self, u: Vertex) -> RoutingState:
        return self.per_vertex.get(u, ZERO)

    def arrivals(self, v: Vertex) -> int:
        if v == self.kind.root:
            return self.fed
        total = 0
        for p in self.kind.parents(v):
            total += self.at(p)[self.kind.slot_of(p, v)]
        return total

    def clock(self, u: Vertex) -> int:
        return max(self.arrivals(u) - 1, 0)

    def occupied(self) -> set:
        if not self.fed:
            return set()
        occ = {self.kind.root}
        for u, x in self.per_vertex.items():
            for slot, c in x.items():
                if c:
                    occ.add(self.kind.child(u, slot))
        return occ

    def check_consistency(self) -> None:
        occ = self.occupied()
        for u in occ | set(self.per_vertex):
            if u not in occ and self.at(u):
                raise EngineError(f"vacant vertex {u!r} routes particles")
            if self.at(u).size != self.clock(u):
                raise EngineError(f"consistency fails at {u!r}: clock {self.clock(u)} vs {self.at(u).size}")

    def is_consistent(self) -> bool:
        try:
            self.check_consistency()
        except EngineError:
            return False
        return True

    def leq(self, other: "TrickleState") -> bool:
        if self.fed > other.fed:
            return False
        return all(x.leq(other.at(u)) for u, x in self.per_vertex.items())

    def key(self):
        if self._key is None:
            self._key = (self.fed, frozenset(self.per_vertex.items()))
        return self._key

    def __eq__(self, other):
        return isinstance(other, TrickleState) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def sorted_vertices(self) -> list:
        return sorted(self.per_vertex, key=lambda u: (self.kind.depth(u), u))

    def format(self) -> str:
        parts = [f"{self.kind.format_vertex(u)}->{self.at(u).format()}" for u in self.sorted_vertices()]
        return f"n={self.n};" + ";".join(parts)

    def __repr__(self):
        return f"TrickleState({self.format()})"


def state_to_tree(state: TrickleState) -> Tree:
    return Tree(state.kind, state.occupied())


def tree_to_state(kind: GraphKind, t: Tree) -> TrickleState:
    if not kind.is_tree:
        raise SubstrateError("tree/state correspondence needs a tree substrate")
    if not len(t):
        return TrickleState.empty(kind)
    per: dict = {}
    for v in t.vertices:
        if v:
            per.setdefault(v[:-1], {})[kind.slot_of(v[:-1], v)] = t.count(v)
    return TrickleState(kind, {u: RoutingState(c) for u, c in per.items()}, fed=len(t))


# --------------------------------------------------------------- dynamics

class _Runner:
    """Mutable trajectory used by :func:`step` and :func:`simulate`."""

    def __init__(self, kind: GraphKind, spec: RoutingChainSpec, state: TrickleState):
        self.kind, self.spec = kind, spec
        self.per = dict(state.per_vertex)
        self.fed = state.fed
        self.occupied = state.occupied()

    def feed(self, rng) -> Vertex:
        u = self.kind.root
        if self.fed == 0:
            self.fed = 1
            self.occupied.add(u)
            return u
        self.fed += 1
        while u in self.occupied:
            x = self.per.get(u, ZERO)
            slot = self.spec.sample_slot(x, _uniform(rng, u))
            self.per[u] = x.add(slot)
            u = self.kind.child(u, slot)
        self.occupied.add(u)
        return u

    def state(self) -> TrickleState:
        return TrickleState(self.kind, self.per, fed=self.fed)


def step(kind: GraphKind, spec: RoutingChainSpec, state: TrickleState, rng) -> TrickleState:
    """Feed one particle; ``rng`` is a :class:`VertexStreams` or a numpy generator."""
    r = _Runner(kind, spec, state)
    r.feed(rng)
    return r.state()


def simulate(kind: GraphKind, spec: RoutingChainSpec, n: int, rng, start: TrickleState | None = None,
             record: bool = False):
    """Run until time ``n``; returns the final state and optional trajectory records."""
    r = _Runner(kind, spec, start or TrickleState.empty(kind))
    records = []
    while r.fed < n + 1:
        v = r.feed(rng)
        if record:
            records.append({"n": r.fed - 1, "new_vertex": kind.format_vertex(v), "occupied_count": len(r.occupied)})
    return r.state(), records


def settle_order(kind: GraphKind, spec: RoutingChainSpec, n: int, rng) -> tuple:
    """Final state and the vertex where each particle settled, in feeding order."""
    r = _Runner(kind, spec, TrickleState.empty(kind))
    order = [r.feed(rng) for _ in range(n + 1)]
    return r.state(), order


def project(state: TrickleState, within: Iterable[Vertex]) -> tuple:
    """Routing counts at the vertices of ``within``, as a hashable tuple."""
    return tuple((u, state.at(u)) for u in sorted(within, key=lambda w: (state.kind.depth(w), w)))


def simulate_within(kind: GraphKind, spec: RoutingChainSpec, within: Iterable[Vertex], n: int, rng) -> TrickleState:
    """The construction run on a downward-closed vertex set; particles routed out of it are lost."""
    inside = set(within)
    if kind.root not in inside or any(p not in inside for u in inside for p in kind.parents(u)):
        raise EngineError("vertex set must be downward closed")
    per: dict = {}
    occupied = {kind.root}
    for _ in range(n):
        u = kind.root
        while u in occupied:
            x = per.get(u, ZERO)
            slot = spec.sample_slot(x, _uniform(rng, u))
            per[u] = x.add(slot)
            u = kind.child(u, slot)
        if u in inside:
            occupied.add(u)
    return TrickleState(kind, per, fed=n + 1)


def simulate_tree(kind: GraphKind, spec: RoutingChainSpec, n: int, rng) -> Tree:
    state, _ = simulate(kind, spec, n, rng)
    return state_to_tree(state)


# ------------------------------------------------------------------ replay

def _as_increments(seq: Sequence) -> list:
    """Normalize routing instructions to a list of slots."""
    if not seq:
        return []
    if isinstance(seq[0], RoutingState):
        states = list(seq)
        if states[0]:
            states = [ZERO] + states
        out = []
        for a, b in zip(states, states[1:]):
            diff = [(s, b[s] - a[s]) for s in set(a.support()) | set(b.support())]
            moved = [s for s, d in diff if d != 0]
            if len(moved) != 1 or dict(diff)[moved[0]] != 1:
                raise EngineError(f"routing instructions must increase one coordinate by one: {a!r} -> {b!r}")
            out.append(moved[0])
        return out
    return [int(s) for s in seq]


def replay_clocks(kind: GraphKind, sigma: Mapping[Vertex, Sequence], n: int) -> dict:
    """Clock values at time ``n`` for deterministic routing instructions ``sigma``."""
    incs = {u: _as_increments(s) for u, s in sigma.items()}
    clocks = {kind.root: n}
    routed: dict = {}
    order = [kind.root]
    seen = {kind.root}
    i = 0
    while i < len(order):
        u = order[i]
        i += 1
        if u != kind.root:
            arrivals = sum(routed.get((p, u), 0) for p in kind.parents(u))
            clocks[u] = max(arrivals - 1, 0)
        a = clocks[u]
        if a == 0:
            continue
        seq = incs.get(u, [])
        if len(seq) < a:
            raise EngineError(f"routing instructions at {u!r} too short: need {a}, have {len(seq)}")
        for slot in seq[:a]:
            v = kind.child(u, slot)
            routed[(u, v)] = routed.get((u, v), 0) + 1
            if v not in seen:
                seen.add(v)
                order.append(v)
        if not kind.is_tree:
            # grid vertices have two parents; revisit order by depth
            order[i:] = sorted(order[i:], key=lambda w: (kind.depth(w), w))
    return clocks


def replay(kind: GraphKind, sigma: Mapping[Vertex, Sequence], n: int) -> TrickleState:
    """The state at time ``n`` produced by deterministic routing instructions."""
    clocks = replay_clocks(kind, sigma, n)
    per = {}
    for u, a in clocks.items():
        if a:
            counts: dict = {}
            for slot in _as_increments(sigma[u])[:a]:
                counts[slot] = counts.get(slot, 0) + 1
            per[u] = RoutingState(counts)
    state = TrickleState(kind, per, fed=n + 1)
    state.check_consistency()
    return state


# ------------------------------------------------------- vectorized runner

def _first_slot_prob(spec: RoutingChainSpec, c0: np.ndarray, c1: np.ndarray) -> np.ndarray:
    from .routing_chains import BernoulliWalk, CatalanUrn, DirichletUrn, MallowsUrn, QBinomialUrn

    if isinstance(spec, DirichletUrn) and spec.two_slot:
        w0, w1 = float(spec.weights[0]), float(spec.weights[1])
        return (w0 + c0) / (w0 + w1 + c0 + c1)
    if isinstance(spec, BernoulliWalk) and spec.two_slot:
        return np.full(c0.shape, float(spec.probs[0]))
    if isinstance(spec, MallowsUrn):
        return np.where(c1 == 0, 1.0 - float(spec.p), 0.0)
    if isinstance(spec, QBinomialUrn):
        return float(spec.r) * float(spec.q) ** c1
    if isinstance(spec, CatalanUrn):
        top = int((c0 + c1).max(initial=0))
        spec.table.step_second(0, top)
        out = np.empty(c0.shape)
        for k, (a, b) in enumerate(zip(c0.tolist(), c1.tolist())):
            out[k] = 1.0 - spec.table.step_second_float(a, b)
        return out
    raise EngineError(f"no vectorized sampler for {spec.describe()}")


def routing_paths(spec: RoutingChainSpec, steps: int, replicas: int, seed: int,
                  label: object = "routing", chunk: int = 4096) -> np.ndarray:
    """Slot sequences of ``replicas`` independent two-slot routing chains started at zero.

    Replica ``r`` draws from its own stream derived from ``(seed, label, r)``.
    """
    gens = [derived_generator(seed, label, r) for r in range(replicas)]
    out = np.zeros((replicas, steps), dtype=np.int8)
    c0 = np.zeros(replicas, dtype=np.int64)
    c1 = np.zeros(replicas, dtype=np.int64)
    for lo in range(0, steps, chunk):
        hi = min(lo + chunk, steps)
        u = np.stack([g.random(hi - lo) for g in gens])
        for k in range(hi - lo):
            second = u[:, k] >= _first_slot_prob(spec, c0, c1)
            out[:, lo + k] = second
            c1 += second
            c0 += ~second
    return out


def subtree_sizes_to_depth(spec: RoutingChainSpec, n: int, depth: int, replicas: int, seed: int,
                           chunk: int = 4096) -> dict:
    """Subtree sizes ``#X_n(u)`` for ``|u| <= depth`` on the binary tree, per replica.

    Only the routing chains of vertices above ``depth`` are run. Each runs for
    exactly as many steps as its clock, which is the construction itself
    restricted to a downward-closed vertex set. Streams are derived from
    ``(seed, vertex, replica)`` so the result does not depend on ``depth``.
    """
    kind = BinaryTree()
    sizes = {(): np.full(replicas, n + 1, dtype=np.int64)}
    for u in kind.vertices_to_depth(depth - 1):
        clock = np.maximum(sizes[u] - 1, 0)
        steps = int(clock.max(initial=0))
        gens = [derived_generator(seed, "vertex", r, u) for r in range(replicas)]
        c0 = np.zeros(replicas, dtype=np.int64)
        c1 = np.zeros(replicas, dtype=np.int64)
        for lo in range(0, steps, chunk):
            hi = min(lo + chunk, steps)
            need = np.clip(clock - lo, 0, hi - lo)
            u_mat = np.zeros((replicas, hi - lo))
            for r, g in enumerate(gens):
                if need[r]:
                    u_mat[r, : need[r]] = g.random(int(need[r]))
            for k in range(hi - lo):
                active = clock > lo + k
                second = u_mat[:, k] >= _first_slot_prob(spec, c0, c1)
                c1 += second & active
                c0 += ~second & active
        sizes[u + (0,)] = c0
        sizes[u + (1,)] = c1
    return sizes
