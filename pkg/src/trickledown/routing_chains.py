"""Per-vertex routing chains: transition laws and closed-form hitting probabilities.

A routing chain lives on count vectors indexed by the child slots of a
vertex. Each step adds one to a single coordinate. All probabilities are
exact ``Fraction`` values; sampling converts them to floats at the last
moment.
"""
from __future__ import annotations

from fractions import Fraction
from math import comb, factorial
from typing import Iterable, Mapping, Sequence

Rational = Fraction


class RoutingError(ValueError):
    pass


def as_rational(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise RoutingError(f"refusing float parameter {x!r}; pass a Fraction or 'num/den' string")
    return Fraction(x)


def format_rational(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def rising(x, k: int) -> Fraction:
    """Rising factorial ``x (x+1) ... (x+k-1)``."""
    out = Fraction(1)
    for i in range(k):
        out *= x + i
    return out


def multinomial(parts: Iterable[int]) -> int:
    parts = list(parts)
    out = factorial(sum(parts))
    for p in parts:
        out //= factorial(p)
    return out


class RoutingState:
    """Sparse vector of non-negative counts keyed by child slot."""

    __slots__ = ("_items", "_hash")

    def __init__(self, counts: Mapping[int, int] | None = None):
        items = []
        for slot, c in (counts or {}).items():
            if c < 0:
                raise RoutingError(f"negative count at slot {slot}")
            if c:
                items.append((slot, int(c)))
        items.sort()
        self._items = tuple(items)
        self._hash = hash(self._items)

    @classmethod
    def pair(cls, i: int, j: int) -> "RoutingState":
        return cls({0: i, 1: j})

    @classmethod
    def blocks(cls, sizes: Sequence[int]) -> "RoutingState":
        """Block sizes in order of appearance, stored at slots ``1, 2, ...``."""
        return cls({k + 1: a for k, a in enumerate(sizes)})

    def __getitem__(self, slot: int) -> int:
        for s, c in self._items:
            if s == slot:
                return c
        return 0

    def items(self):
        return self._items

    def support(self) -> tuple:
        return tuple(s for s, _ in self._items)

    @property
    def size(self) -> int:
        return sum(c for _, c in self._items)

    def __len__(self):
        return self.size

    def as_pair(self) -> tuple[int, int]:
        return (self[0], self[1])

    def as_blocks(self) -> tuple:
        return tuple(self[k] for k in range(1, len(self._items) + 1))

    def add(self, slot: int, k: int = 1) -> "RoutingState":
        d = dict(self._items)
        d[slot] = d.get(slot, 0) + k
        return RoutingState(d)

    def leq(self, other: "RoutingState") -> bool:
        return all(c <= other[s] for s, c in self._items)

    def __eq__(self, other):
        return isinstance(other, RoutingState) and self._items == other._items

    def __hash__(self):
        return self._hash

    def __bool__(self):
        return bool(self._items)

    def __repr__(self):
        return f"RoutingState({dict(self._items)})"

    def format(self) -> str:
        return "(" + ",".join(f"{s}:{c}" for s, c in self._items) + ")"


ZERO = RoutingState()


def _sample(options, u: float):
    acc = 0.0
    for slot, prob in options:
        acc += float(prob)
        if u < acc:
            return slot
    return options[-1][0]


class RoutingChainSpec:
    """Base class of the routing-chain families."""

    tag = "abstract"
    two_slot = True

    def validate(self, state: RoutingState) -> None:
        if self.two_slot and any(s not in (0, 1) for s in state.support()):
            raise RoutingError(f"{self.tag} uses slots 0 and 1 only: {state!r}")

    def transitions(self, state: RoutingState) -> list:
        raise NotImplementedError

    def hit(self, x: RoutingState, y: RoutingState) -> Fraction:
        """Closed-form probability that the chain started at ``x`` visits ``y``."""
        raise NotImplementedError

    def sample_slot(self, state: RoutingState, u: float) -> int:
        return _sample(self.transitions(state), u)

    def describe(self) -> str:
        return self.tag


# ---------------------------------------------------------------- Dirichlet

class DirichletUrn(RoutingChainSpec):
    """Pólya urn with initial weights ``weights``; BST routing is weights ``(1, 1)``."""

    tag = "dirichlet"

    def __init__(self, weights: Sequence | Mapping = (1, 1)):
        if not isinstance(weights, Mapping):
            weights = dict(enumerate(weights))
        self.weights = {s: as_rational(w) for s, w in weights.items()}
        if not self.weights or any(w <= 0 for w in self.weights.values()):
            raise RoutingError("urn weights must be positive")
        self.total = sum(self.weights.values())
        self.two_slot = set(self.weights) == {0, 1}

    def validate(self, state):
        if any(s not in self.weights for s in state.support()):
            raise RoutingError(f"slot outside urn: {state!r}")

    def transitions(self, state):
        self.validate(state)
        den = self.total + state.size
        return [(s, (w + state[s]) / den) for s, w in sorted(self.weights.items())]

    def hit(self, x, y):
        return dirichlet_urn_hit(x, y, self.weights)

    def describe(self):
        return "dirichlet(" + ",".join(format_rational(self.weights[s]) for s in sorted(self.weights)) + ")"


def dirichlet_urn_hit(x: RoutingState, y: RoutingState, weights) -> Fraction:
    if not isinstance(weights, Mapping):
        weights = dict(enumerate(weights))
    weights = {s: as_rational(w) for s, w in weights.items()}
    if not x.leq(y):
        return Fraction(0)
    slots = sorted(weights)
    d = [y[s] - x[s] for s in slots]
    total = sum(weights.values())
    num = multinomial(d)
    for s, k in zip(slots, d):
        num *= rising(weights[s] + x[s], k)
    return num / rising(total + x.size, sum(d))


# --------------------------------------------------------------- Bernoulli

class BernoulliWalk(RoutingChainSpec):
    """I.i.d. routing with fixed slot probabilities (space-time random walk)."""

    tag = "bernoulli"

    def __init__(self, probs: Sequence | Mapping = (Fraction(1, 2), Fraction(1, 2))):
        if not isinstance(probs, Mapping):
            probs = dict(enumerate(probs))
        self.probs = {s: as_rational(p) for s, p in probs.items()}
        if any(p <= 0 for p in self.probs.values()) or sum(self.probs.values()) != 1:
            raise RoutingError("slot probabilities must be positive and sum to 1")
        self.two_slot = set(self.probs) == {0, 1}

    def validate(self, state):
        if any(s not in self.probs for s in state.support()):
            raise RoutingError(f"slot outside walk: {state!r}")

    def transitions(self, state):
        self.validate(state)
        return sorted(self.probs.items())

    def hit(self, x, y):
        if not x.leq(y):
            return Fraction(0)
        slots = sorted(self.probs)
        d = [y[s] - x[s] for s in slots]
        out = Fraction(multinomial(d))
        for s, k in zip(slots, d):
            out *= self.probs[s] ** k
        return out

    def describe(self):
        return "bernoulli(" + ",".join(format_rational(self.probs[s]) for s in sorted(self.probs)) + ")"


# --------------------------------------------------------------------- CRP

def crp_admissible(alpha: Fraction, theta: Fraction) -> bool:
    if alpha < 0:
        m = -theta / alpha
        return m.denominator == 1 and m >= 1
    return 0 <= alpha < 1 and theta > -alpha


class CrpBlocks(RoutingChainSpec):
    """Two-parameter Chinese restaurant process on block sizes (slots ``1, 2, ...``)."""

    tag = "crp"
    two_slot = False

    def __init__(self, alpha=0, theta=1):
        self.alpha = as_rational(alpha)
        self.theta = as_rational(theta)
        if not crp_admissible(self.alpha, self.theta):
            raise RoutingError(f"inadmissible CRP parameters alpha={self.alpha}, theta={self.theta}")

    def validate(self, state):
        sup = state.support()
        if sup != tuple(range(1, len(sup) + 1)):
            raise RoutingError(f"blocks must occupy slots 1..m: {state!r}")

    def transitions(self, state):
        self.validate(state)
        a = state.as_blocks()
        m, p = len(a), sum(a)
        if p == 0:
            return [(1, Fraction(1))]
        den = self.theta + p
        out = [(k + 1, (ak - self.alpha) / den) for k, ak in enumerate(a)]
        new = (self.theta + m * self.alpha) / den
        if new > 0:
            out.append((m + 1, new))
        return [(s, q) for s, q in out if q > 0]

    def hit(self, x, y):
        return crp_path_probability(x.as_blocks(), y.as_blocks(), self.alpha, self.theta)

    def describe(self):
        return f"crp({format_rational(self.alpha)},{format_rational(self.theta)})"


def crp_path_probability(a: Sequence[int], b: Sequence[int], alpha, theta) -> Fraction:
    """Probability that the block-size chain started at ``a`` passes through ``b``."""
    alpha, theta = as_rational(alpha), as_rational(theta)
    a, b = tuple(a), tuple(b)
    if any(x <= 0 for x in a + b):
        raise RoutingError("block sizes must be positive")
    if not a:
        if not b:
            return Fraction(1)
        a = (1,)
    m, n = len(a), len(b)
    if n < m or any(b[k] < a[k] for k in range(m)):
        return Fraction(0)
    p, q = sum(a), sum(b)
    out = Fraction(1)
    for i in range(m, n):
        out *= theta + i * alpha
    for x in range(p, q):
        out /= theta + x
    for k in range(n):
        start = a[k] if k < m else 1
        for x in range(start, b[k]):
            out *= x - alpha
    free = q - p
    for k in range(m):
        out *= comb(free, b[k] - a[k])
        free -= b[k] - a[k]
    for k in range(m, n):
        out *= comb(free - 1, b[k] - 1)
        free -= b[k]
    return out


# ------------------------------------------------------------------ Mallows

class MallowsUrn(RoutingChainSpec):
    """Fill the first slot until a single switch, then the second slot forever."""

    tag = "mallows"

    def __init__(self, p):
        self.p = as_rational(p)
        if not 0 < self.p < 1:
            raise RoutingError("Mallows parameter must lie in (0, 1)")

    def transitions(self, state):
        self.validate(state)
        i, j = state.as_pair()
        if j == 0:
            return [(0, 1 - self.p), (1, self.p)]
        return [(1, Fraction(1))]

    def hit(self, x, y):
        return mallows_hit(x.as_pair(), y.as_pair(), self.p)

    def describe(self):
        return f"mallows({format_rational(self.p)})"


def mallows_hit(x: tuple, y: tuple, p) -> Fraction:
    p = as_rational(p)
    (i, j), (k, l) = x, y
    if j == 0:
        if i > k:
            return Fraction(0)
        return (1 - p) ** (k - i) * (p if l >= 1 else 1)
    return Fraction(1) if (i == k and j <= l) else Fraction(0)


# ---------------------------------------------------------------- q-binomial

def gaussian_binomial(n: int, k: int, q) -> Fraction:
    """The q-analogue of ``comb(n, k)`` evaluated at ``q``."""
    q = as_rational(q)
    if k < 0 or k > n:
        return Fraction(0)
    if q == 1:
        return Fraction(comb(n, k))
    out = Fraction(1)
    for i in range(1, k + 1):
        out *= (1 - q ** (n - k + i)) / (1 - q ** i)
    return out


class QBinomialUrn(RoutingChainSpec):
    """First slot with probability ``r q^j`` where ``j`` is the second count."""

    tag = "qbinomial"

    def __init__(self, q, r):
        self.q, self.r = as_rational(q), as_rational(r)
        if not (0 < self.q < 1 and 0 < self.r < 1):
            raise RoutingError("q and r must lie in (0, 1)")

    def transitions(self, state):
        self.validate(state)
        _, j = state.as_pair()
        first = self.r * self.q ** j
        return [(0, first), (1, 1 - first)]

    def hit(self, x, y):
        return qbinomial_hit(x.as_pair(), y.as_pair(), self.q, self.r)

    def describe(self):
        return f"qbinomial({format_rational(self.q)},{format_rational(self.r)})"


def qbinomial_hit(x: tuple, y: tuple, q, r) -> Fraction:
    q, r = as_rational(q), as_rational(r)
    (i, j), (k, l) = x, y
    if i > k or j > l:
        return Fraction(0)
    weight = (r * q ** j) ** (k - i)
    for m in range(j, l):
        weight *= 1 - r * q ** m
    return gaussian_binomial((k - i) + (l - j), k - i, q) * weight


# ------------------------------------------------------------------ Catalan

def catalan_number(n: int) -> int:
    if n < 0:
        raise ValueError("n must be non-negative")
    return comb(2 * n, n) // (n + 1)


class CatalanTable:
    """Exact transition probabilities of the Catalan urn, grown on demand.

    ``second[(i, j)]`` is the probability of stepping from ``(i, j)`` to
    ``(i, j+1)``. Entries with ``i <= j`` come from the marginal recursion
    and the rest from the mirror symmetry.
    """

    def __init__(self):
        self.second: dict[tuple[int, int], Fraction] = {}
        self.max_total = -1
        self._floats: list[list[float]] = []

    @staticmethod
    def _ratio(j: int) -> Fraction:
        # C_{j+1} / C_j
        return Fraction(2 * (2 * j + 1), j + 2)

    def _get(self, i, j):
        return self.second[(i, j)] if i <= j else 1 - self.second[(j, i)]

    def extend(self, max_total: int) -> "CatalanTable":
        for s in range(self.max_total + 1, max_total + 1):
            for i in range(s // 2 + 1):
                j = s - i
                if i == 0:
                    v = Fraction((j + 3) * (2 * j + 1), (j + 2) * (2 * j + 3))
                else:
                    stay = self._ratio(j) / self._ratio(i + j + 1)
                    feed = self._ratio(j) / self._ratio(i - 1)
                    v = stay - feed * (1 - self._get(i - 1, j + 1))
                if not 0 <= v <= 1:
                    raise ArithmeticError(f"Catalan urn entry out of range at {(i, j)}: {v}")
                self.second[(i, j)] = v
            self.max_total = s
            self._floats.append([float(self._get(i, s - i)) for i in range(s + 1)])
        return self

    def step_second(self, i: int, j: int) -> Fraction:
        if i + j > self.max_total:
            self.extend(max(i + j, 2 * self.max_total + 1, 16))
        return self._get(i, j)

    def step_second_float(self, i: int, j: int) -> float:
        if i + j > self.max_total:
            self.step_second(i, j)
        return self._floats[i + j][i]

    def rows(self, max_total: int):
        self.extend(max_total)
        for s in range(max_total + 1):
            for i in range(s + 1):
                j = s - i
                u = self._get(i, j)
                yield (i, j), ((i + 1, j), 1 - u), ((i, j + 1), u)


_CATALAN = CatalanTable()


def catalan_table(max_total: int) -> CatalanTable:
    if max_total < 1:
        raise ValueError("max_total must be at least 1")
    return _CATALAN.extend(max_total)


class CatalanUrn(RoutingChainSpec):
    tag = "catalan"

    def __init__(self, table: CatalanTable | None = None):
        self.table = table or _CATALAN

    def transitions(self, state):
        self.validate(state)
        i, j = state.as_pair()
        u = self.table.step_second(i, j)
        return [(s, w) for s, w in ((0, 1 - u), (1, u)) if w > 0]

    def sample_slot(self, state, u):
        i, j = state.as_pair()
        return 0 if u >= self.table.step_second_float(i, j) else 1

    def hit(self, x, y):
        return path_sum_hit(self, x, y)


# -------------------------------------------------------------- single trail

class SingleTrailHalf(RoutingChainSpec):
    """First step picks a slot fairly; afterwards the same slot is repeated."""

    tag = "single-trail"

    def validate(self, state):
        super().validate(state)
        if len(state.support()) > 1:
            raise RoutingError(f"single-trail states have one nonzero slot: {state!r}")

    def transitions(self, state):
        self.validate(state)
        sup = state.support()
        if not sup:
            return [(0, Fraction(1, 2)), (1, Fraction(1, 2))]
        return [(sup[0], Fraction(1))]

    def hit(self, x, y):
        self.validate(x)
        self.validate(y)
        if not x.leq(y):
            return Fraction(0)
        if not x and y:
            return Fraction(1, 2)
        return Fraction(1)


# ----------------------------------------------------------------- helpers

def path_sum_hit(spec: RoutingChainSpec, x: RoutingState, y: RoutingState) -> Fraction:
    """Hitting probability by forward dynamic programming over the routing chain."""
    if not x.leq(y):
        return Fraction(0)
    layer = {x: Fraction(1)}
    for _ in range(y.size - x.size):
        nxt: dict = {}
        for state, mass in layer.items():
            for slot, prob in spec.transitions(state):
                succ = state.add(slot)
                if succ.leq(y):
                    nxt[succ] = nxt.get(succ, 0) + mass * prob
        layer = nxt
    return layer.get(y, Fraction(0))


def parse_rational(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise RoutingError(f"not a rational: {text!r}") from exc


def spec_from_name(family: str, **params) -> RoutingChainSpec:
    """Build a family from CLI-style names and string parameters."""
    family = family.lower()
    if family in ("bst", "dirichlet"):
        w = params.get("weights") or "1,1"
        return DirichletUrn([parse_rational(t) for t in w.split(",")])
    if family in ("dst", "bernoulli"):
        w = params.get("probs") or "1/2,1/2"
        return BernoulliWalk([parse_rational(t) for t in w.split(",")])
    if family in ("crp", "rrt"):
        return CrpBlocks(parse_rational(params.get("alpha") or "0"), parse_rational(params.get("theta") or "1"))
    if family == "mallows":
        return MallowsUrn(parse_rational(params.get("p") or "1/2"))
    if family == "qbinomial":
        return QBinomialUrn(parse_rational(params.get("q") or "1/2"), parse_rational(params.get("r") or "1/2"))
    if family == "catalan":
        return CatalanUrn()
    if family in ("composition", "single-trail"):
        return SingleTrailHalf()
    raise RoutingError(f"unknown family {family!r}")


def default_substrate(spec: RoutingChainSpec) -> str:
    return "harris-ulam" if isinstance(spec, CrpBlocks) else "binary"

