"""The acceptance suite, shared by ``trickle verify`` and the test-suite.

Each check returns a :class:`CheckResult`. Statistical checks take a seed so
runs are reproducible.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import stats

from . import bijections as bij
from .boundary_limits import BoundaryMeasure, product_uniform_cdf
from .exact_oracle import enumerate_trees, exact_distribution, hitting_from, routing_hit, routing_states
from .graph_substrate import BinaryTree, Grid2D, HarrisUlam
from .h_transforms import dst_transition, h_transform, tree_transitions, trickle_up_frequencies
from .martin_kernels import (
    INFINITY,
    Finite,
    SpineTree,
    bst_extended_kernel,
    crp_extended_kernel,
    crp_kernel,
    mallows_tree_kernel,
    mallows_urn_kernel,
    prefix_chain_kernel,
    product_martin_kernel,
    qbinomial_urn_kernel,
    check_perfect_memory,
)
from .routing_chains import (
    BernoulliWalk,
    CatalanUrn,
    CrpBlocks,
    DirichletUrn,
    MallowsUrn,
    QBinomialUrn,
    RoutingState,
    SingleTrailHalf,
    catalan_number,
    crp_path_probability,
    gaussian_binomial,
    mallows_hit,
    qbinomial_hit,
)
from .trickle_engine import TrickleState, routing_paths, state_to_tree, subtree_sizes_to_depth

CRP_PARAMS = [(Fraction(0), Fraction(1)), (Fraction(1, 2), Fraction(1, 2)), (Fraction(-1, 2), Fraction(1))]
MALLOWS_PS = [Fraction(1, 4), Fraction(1, 3), Fraction(1, 2)]
Q_VALUES = [Fraction(1, 2), Fraction(1, 3), Fraction(2, 3), Fraction(1, 5), Fraction(7, 9)]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(name: str, fn: Callable[[], tuple]) -> CheckResult:
    t0 = time.perf_counter()
    passed, detail = fn()
    return CheckResult(name, bool(passed), detail, time.perf_counter() - t0)


def _tree_law(t) -> Fraction:
    out = Fraction(1)
    for u in t.vertices:
        out /= t.count(u)
    return out


# ---------------------------------------------------------------- 1, 2

def check_bst_law(max_n: int = 7):
    kind = BinaryTree()
    spec = DirichletUrn((1, 1))
    checked = 0
    for n in range(max_n + 1):
        law = exact_distribution(kind, spec, n)
        trees = {state_to_tree(s): m for s, m in law.items()}
        if len(trees) != catalan_number(n + 1) or sum(trees.values()) != 1:
            return False, f"support or mass wrong at n={n}"
        for t, m in trees.items():
            checked += 1
            if m != _tree_law(t):
                return False, f"mass of {t!r} is {m}, expected {_tree_law(t)}"
    return True, f"{checked} trees exact for n <= {max_n}"


def catalan_marginals(max_n: int) -> dict:
    """Routing-chain marginals from zero, by forward sweep over the table."""
    spec = CatalanUrn()
    layer = {RoutingState(): Fraction(1)}
    out = {0: dict(layer)}
    for n in range(1, max_n + 1):
        nxt: dict = {}
        for s, m in layer.items():
            for slot, p in spec.transitions(s):
                t = s.add(slot)
                nxt[t] = nxt.get(t, Fraction(0)) + m * p
        layer = nxt
        out[n] = layer
    return out


def check_catalan(max_n: int = 7, max_marginal: int = 10):
    kind = BinaryTree()
    spec = CatalanUrn()
    for n in range(max_n + 1):
        law = exact_distribution(kind, spec, n)
        target = Fraction(1, catalan_number(n + 1))
        if len(law) != catalan_number(n + 1) or any(m != target for m in law.values()):
            return False, f"not uniform at n={n}"
    marg = catalan_marginals(max_marginal)
    for n in range(1, max_marginal + 1):
        for k in range(n + 1):
            want = Fraction(catalan_number(k) * catalan_number(n - k), catalan_number(n + 1))
            if marg[n].get(RoutingState.pair(k, n - k), 0) != want:
                return False, f"marginal wrong at n={n}, k={k}"
    return True, f"uniform for n <= {max_n}; marginals exact for n <= {max_marginal}"


# ------------------------------------------------------------------- 3

def kernel_families():
    b, g, h = BinaryTree(), Grid2D(), HarrisUlam()
    third = Fraction(1, 3)
    return [
        ("bst", b, DirichletUrn((1, 1))),
        ("dirichlet(1,5/2)", b, DirichletUrn((1, Fraction(5, 2)))),
        ("dst-walk(1/3,2/3)", b, BernoulliWalk((third, 1 - third))),
        ("grid-walk(1/3,2/3)", g, BernoulliWalk((third, 1 - third))),
        ("grid-dirichlet(1,2)", g, DirichletUrn((1, 2))),
        ("mallows(1/3)", b, MallowsUrn(third)),
        ("qbinomial(1/2,1/3)", b, QBinomialUrn(Fraction(1, 2), third)),
        ("catalan", b, CatalanUrn()),
        ("composition", b, SingleTrailHalf()),
    ] + [(f"crp({a},{t})", h, CrpBlocks(a, t)) for a, t in CRP_PARAMS]


def kernel_mismatches(kind, spec, max_vertices: int) -> tuple[int, list]:
    root = TrickleState.initial(kind)
    ref = hitting_from(kind, spec, root, max_vertices)
    states = list(ref)
    count, bad = 0, []
    for x in states:
        hx = hitting_from(kind, spec, x, max_vertices)
        for y in states:
            if not x.leq(y):
                continue
            count += 1
            if product_martin_kernel(kind, spec, x, y) != hx.get(y, Fraction(0)) / ref[y]:
                bad.append((x, y))
    return count, bad


def check_product_kernel(max_vertices: int = 7):
    total = 0
    for name, kind, spec in kernel_families():
        count, bad = kernel_mismatches(kind, spec, max_vertices)
        total += count
        if bad:
            return False, f"{name}: {len(bad)} mismatches, first {bad[0]!r}"
    return True, f"{total} pairs over {len(kernel_families())} families, |y| <= {max_vertices}"


# ------------------------------------------------------------------- 4

def check_dst(max_vertices: int = 6):
    kind = BinaryTree()
    mu = BoundaryMeasure.fair(max_vertices + 1)
    row = h_transform(tree_transitions(kind, DirichletUrn((1, 1))), lambda t: bst_extended_kernel(t, mu))
    count = 0
    for n in range(1, max_vertices + 1):
        for s in enumerate_trees(kind, n):
            got = {next(iter(t.vertices - s.vertices)): w for t, w in row(s)}
            want = {u: Fraction(1, 2 ** len(u)) for u in s.external()}
            if got != want or dst_transition(s, mu) != want:
                return False, f"mismatch at {s!r}"
            count += 1
    return True, f"{count} trees with <= {max_vertices} vertices"


# ------------------------------------------------------------------- 5

def dyadic_measures(depth: int, count: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    out = [BoundaryMeasure.fair(depth)]
    for _ in range(count):
        splits = {}
        for u in BinaryTree().vertices_to_depth(depth - 1):
            splits[u] = Fraction(int(rng.integers(1, 8)), 8)
        out.append(BoundaryMeasure.from_splits(depth, splits.__getitem__))
    return out


def _harmonic(row, states, h) -> tuple[int, object]:
    n = 0
    for i in states:
        hi = h(i)
        if not hi:
            continue
        total = sum((p * h(j) for j, p in row(i)), Fraction(0))
        n += 1
        if total != hi:
            return n, i
    return n, None


def check_harmonicity(seed: int = 11):
    counts = {}
    kind = BinaryTree()
    bst_rows = tree_transitions(kind, DirichletUrn((1, 1)))
    depth = 6
    trees = [t for n in range(1, 7) for t in enumerate_trees(kind, n) if t.depth() < depth]
    total = 0
    for mu in dyadic_measures(depth, 4, seed):
        n, bad = _harmonic(bst_rows, trees, lambda t: bst_extended_kernel(t, mu))
        total += n
        if bad is not None:
            return False, f"BST kernel not harmonic at {bad!r}"
    counts["bst"] = total

    total = 0
    for alpha, theta in CRP_PARAMS:
        spec = CrpBlocks(alpha, theta)
        if alpha < 0:
            m = int(-theta / alpha)
            rhos = [[Fraction(1, m)] * m, [Fraction(1, 3), Fraction(2, 3)][:m] + [Fraction(0)] * (m - 2)]
        else:
            rhos = [[Fraction(1, 2), Fraction(1, 4)], [Fraction(1, 3), Fraction(1, 3), Fraction(1, 3)],
                    [Fraction(0), Fraction(1, 2)], []]
        states = [s.as_blocks() for k in range(0, 8) for s in routing_states(spec, k)]

        def rows(a, spec=spec):
            st = RoutingState.blocks(a)
            return [(st.add(slot).as_blocks(), p) for slot, p in spec.transitions(st)]

        for rho in rhos:
            n, bad = _harmonic(rows, states, lambda a: crp_extended_kernel(a, rho, alpha, theta))
            total += n
            if bad is not None:
                return False, f"CRP({alpha},{theta}) kernel not harmonic at {bad!r} for rho={rho}"
    counts["crp"] = total

    pairs = [(i, j) for i in range(13) for j in range(13 - i)]
    total = 0
    for p in MALLOWS_PS:
        spec = MallowsUrn(p)
        rows = _pair_rows(spec)
        for target in [Finite(k) for k in range(6)] + [INFINITY]:
            n, bad = _harmonic(rows, pairs, lambda x: mallows_urn_kernel(x, target, p))
            total += n
            if bad is not None:
                return False, f"Mallows urn kernel not harmonic at {bad!r}, {target!r}"
    counts["mallows-urn"] = total

    total = 0
    for q in Q_VALUES[:3]:
        for r in (Fraction(1, 2), Fraction(1, 3)):
            spec = QBinomialUrn(q, r)
            rows = _pair_rows(spec)
            for target in [Finite(k) for k in range(6)] + [INFINITY]:
                n, bad = _harmonic(rows, pairs, lambda x: qbinomial_urn_kernel(x, target, q, r))
                total += n
                if bad is not None:
                    return False, f"q-binomial kernel not harmonic at {bad!r}, {target!r}"
    counts["qbinomial-urn"] = total

    total = 0
    mallows_trees = [t for n in range(1, 7) for t in enumerate_trees(kind, n)]
    for p in MALLOWS_PS:
        rows = tree_transitions(kind, MallowsUrn(p))
        for T in sample_spine_trees(8):
            n, bad = _harmonic(rows, [t for t in mallows_trees if t.depth() < T.depth],
                               lambda t: mallows_tree_kernel(t, T, p))
            total += n
            if bad is not None:
                return False, f"Mallows tree kernel not harmonic at {bad!r}"
    counts["mallows-tree"] = total
    return True, ", ".join(f"{k}: {v} states" for k, v in counts.items())


def _pair_rows(spec):
    def rows(x):
        st = RoutingState.pair(*x)
        return [(st.add(slot).as_pair(), p) for slot, p in spec.transitions(st)]
    return rows


def sample_spine_trees(depth: int) -> list:
    """A few explicit infinite-spine trees known to ``depth``."""
    right = tuple([1] * depth)
    return [
        SpineTree(right, {}),
        SpineTree(right, {(): {(), (1,)}, (1,): {()}}),
        SpineTree((1, 0, 1, 1, 0, 0, 1, 1)[:depth], {(): {(), (0,)}, (1, 0): {()}}),
        SpineTree((0,) * depth, {}),
    ]


# ------------------------------------------------------------------- 6

def path_area_sum(a: int, b: int, q: Fraction) -> Fraction:
    """Sum over monotone paths with ``a`` first-coordinate and ``b`` second-coordinate steps."""
    total = Fraction(0)
    for ups in itertools.combinations(range(a + b), b):
        height, area = 0, 0
        upset = set(ups)
        for k in range(a + b):
            if k in upset:
                height += 1
            else:
                area += height
        total += q**area
    return total


def path_probability_sum(start, end, q, r) -> Fraction:
    (i, j), (k, l) = start, end
    a, b = k - i, l - j
    total = Fraction(0)
    for ups in itertools.combinations(range(a + b), b):
        x, y, w = i, j, Fraction(1)
        upset = set(ups)
        for s in range(a + b):
            first = r * q**y
            if s in upset:
                w *= 1 - first
                y += 1
            else:
                w *= first
                x += 1
        total += w
    return total


def check_qbinomial(max_steps: int = 10):
    count = 0
    for q in Q_VALUES:
        for a in range(max_steps + 1):
            for b in range(max_steps + 1 - a):
                if path_area_sum(a, b, q) != gaussian_binomial(a + b, a, q):
                    return False, f"identity fails at q={q}, ({a},{b})"
                count += 1
        r = Fraction(1, 3)
        for i, j in itertools.product(range(3), repeat=2):
            for a in range(7):
                for b in range(7 - a):
                    if qbinomial_hit((i, j), (i + a, j + b), q, r) != path_probability_sum((i, j), (i + a, j + b), q, r):
                        return False, f"hitting formula fails at q={q}"
    return True, f"{count} (q, shape) identities at {len(Q_VALUES)} values of q"


# ------------------------------------------------------------------- 7

def check_mallows(max_vertices: int = 7):
    kind = BinaryTree()
    count = 0
    for p in MALLOWS_PS:
        spec = MallowsUrn(p)
        states = [s for k in range(9) for s in routing_states(spec, k)]
        for x in states:
            for y in states:
                if mallows_hit(x.as_pair(), y.as_pair(), p) != routing_hit(spec, x, y):
                    return False, f"urn hitting formula fails at {x!r} -> {y!r}, p={p}"
        root = TrickleState.initial(kind)
        ref = hitting_from(kind, spec, root, max_vertices)
        all_states = list(ref)
        for x in all_states:
            hx = hitting_from(kind, spec, x, max_vertices)
            s = state_to_tree(x)
            for y in all_states:
                if not x.leq(y):
                    continue
                t = state_to_tree(y)
                count += 1
                if mallows_tree_kernel(s, t, p) != hx.get(y, Fraction(0)) / ref[y]:
                    return False, f"tree kernel fails at {s!r}, {t!r}, p={p}"
    return True, f"urn formula on all pairs of size <= 8; {count} tree pairs with <= {max_vertices} vertices"


# ------------------------------------------------------------------- 8

def check_crp(max_total: int = 7):
    count = 0
    for alpha, theta in CRP_PARAMS:
        spec = CrpBlocks(alpha, theta)
        states = [s for k in range(max_total + 1) for s in routing_states(spec, k)]
        for x in states:
            for y in states:
                want = routing_hit(spec, x, y)
                if crp_path_probability(x.as_blocks(), y.as_blocks(), alpha, theta) != want:
                    return False, f"path probability fails at {x!r} -> {y!r}"
                ref = routing_hit(spec, RoutingState(), y)
                if crp_kernel(x.as_blocks(), y.as_blocks(), alpha, theta) != want / ref:
                    return False, f"kernel fails at {x!r} -> {y!r}"
                count += 1
    return True, f"{count} ordered pairs over {len(CRP_PARAMS)} parameter pairs"


# ------------------------------------------------------------------- 9

def check_composition(max_n: int = 12, kernel_n: int = 8):
    kind = BinaryTree()
    spec = SingleTrailHalf()
    from .bijections import composition_decode, path_tree_to_word

    for n in range(1, max_n + 1):
        law = exact_distribution(kind, spec, n - 1)
        words = [path_tree_to_word(state_to_tree(s)) for s in law]
        comps = {composition_decode(w) for w in words}
        if len(law) != 2 ** (n - 1) or set(law.values()) != {Fraction(1, 2 ** (n - 1))}:
            return False, f"not uniform at n={n}"
        if len(comps) != 2 ** (n - 1) or any(sum(c) != n for c in comps):
            return False, f"decoding not a bijection at n={n}"
    root = TrickleState.initial(kind)
    ref = hitting_from(kind, spec, root, kernel_n)

    def succ(w):
        return [w + (0,), w + (1,)]

    check_perfect_memory(succ, (), kernel_n)
    rho = {path_tree_to_word(state_to_tree(s)): m for s, m in ref.items()}
    count = 0
    for x, _ in ref.items():
        hx = hitting_from(kind, spec, x, kernel_n)
        i = path_tree_to_word(state_to_tree(x))
        for y in ref:
            j = path_tree_to_word(state_to_tree(y))
            got = prefix_chain_kernel(rho.__getitem__, i, j, lambda a, b: b[: len(a)] == a)
            if got != hx.get(y, Fraction(0)) / ref[y]:
                return False, f"perfect-memory kernel fails at {i!r}, {j!r}"
            count += 1
    return True, f"uniform for n <= {max_n}; {count} kernel pairs"


# ------------------------------------------------------------------ 10

def frozen_by_horizon(paths: np.ndarray) -> np.ndarray:
    """A path is frozen if only one coordinate moves during its second half."""
    half = paths[:, paths.shape[1] // 2:]
    return (half.min(axis=1) == half.max(axis=1))


def mallows_structural(paths: np.ndarray) -> np.ndarray:
    seen = np.maximum.accumulate(paths, axis=1)
    return (paths == seen).all(axis=1)


def check_freeze(paths: int = 10_000, horizon: int = 1000, seed: int = 2024, threshold: float = 0.995):
    report = []
    ok = True
    cases = [("mallows(1/3)", MallowsUrn(Fraction(1, 3))),
             ("qbinomial(1/2,1/2)", QBinomialUrn(Fraction(1, 2), Fraction(1, 2))),
             ("catalan", CatalanUrn())]
    for name, spec in cases:
        sl = routing_paths(spec, horizon, paths, seed, label=name)
        frac = float(frozen_by_horizon(sl).mean())
        if name.startswith("mallows"):
            structural = float(mallows_structural(sl).mean())
            passed = structural == 1.0 and frac == 1.0
            report.append(f"{name} structural {structural:.4f} frozen {frac:.4f}")
        else:
            passed = frac >= threshold
            report.append(f"{name} frozen {frac:.4f}")
        ok = ok and passed
    return ok, "; ".join(report) + f" (threshold {threshold})"


# ------------------------------------------------------------------ 11

def bst_ratio_samples(replicas: int = 200, n: int = 100_000, seed: int = 7) -> dict:
    sizes = subtree_sizes_to_depth(DirichletUrn((1, 1)), n, 2, replicas, seed)
    return {u: v / (n + 1) for u, v in sizes.items() if u}


def check_boundary(replicas: int = 200, n: int = 100_000, samples: int = 100_000, seed: int = 7,
                   level: float = 0.001, pairs: int = 10):
    ratios = bst_ratio_samples(replicas, n, seed)
    worst = 1.0
    for u, x in ratios.items():
        pv = stats.kstest(x, lambda v, k=len(u): product_uniform_cdf(v, k)).pvalue
        worst = min(worst, pv)
        if pv < level:
            return False, f"KS rejects at vertex {u!r}: p={pv:.2e}"
    rng = np.random.default_rng(seed)
    kind = BinaryTree()
    pool = [t for k in range(1, 6) for t in enumerate_trees(kind, k)]
    max_z = 0.0
    for _ in range(pairs):
        s = pool[int(rng.integers(len(pool)))]
        mu = dyadic_measures(s.depth() + 2, 1, int(rng.integers(2**31)))[1]
        law = dst_transition(s, mu)
        counts = trickle_up_frequencies(s, mu, samples, rng)
        for u, p in law.items():
            p = float(p)
            se = math.sqrt(p * (1 - p) / samples) or 1e-12
            z = abs(counts.get(u, 0) / samples - p) / se
            max_z = max(max_z, z)
            if z > 4:
                return False, f"trickle-up frequency off by {z:.1f} SE at {u!r} for {s!r}"
    return True, f"min KS p-value {worst:.3g} over {len(ratios)} vertices; max |z| {max_z:.2f} over {pairs} pairs"


# ------------------------------------------------------------------ 12

FIGURE_BST = ((8, 7, 9, 4, 1, 3, 5, 2, 6),
              {1: (), 2: (1,), 3: (1, 0), 4: (0,), 5: (1, 0, 1), 6: (1, 1), 7: (0, 0), 8: (0, 0, 0), 9: (0, 0, 1)})
FIGURE_RRT = ((9, 7, 8, 4, 5, 1, 3, 2, 6),
              {0: (), 1: (1,), 2: (1, 1), 3: (1, 2), 4: (2,), 5: (2, 1), 6: (1, 1, 1), 7: (3,), 8: (3, 1), 9: (4,)})


def check_bijections(max_n: int = 6):
    r, want = FIGURE_BST
    if bij.listing_to_bst(r) != want:
        return False, "BST figure correspondence differs"
    r, want = FIGURE_RRT
    if bij.listing_to_rrt(r) != want:
        return False, "recursive-tree figure correspondence differs"
    count = 0
    for n in range(1, max_n + 1):
        for r in bij.all_listings(n):
            if bij.bst_to_listing(bij.listing_to_bst(r)) != r or bij.rrt_to_listing(bij.listing_to_rrt(r)) != r:
                return False, f"round trip fails for {r!r}"
            count += 1
    return True, f"both figures exact; {count} listings round-trip"


CRITERIA = [
    ("1 BST law", check_bst_law),
    ("2 Catalan uniformity", check_catalan),
    ("3 product kernel", check_product_kernel),
    ("4 DST as h-transform", check_dst),
    ("5 harmonicity", check_harmonicity),
    ("6 q-binomial identity", check_qbinomial),
    ("7 Mallows closed forms", check_mallows),
    ("8 CRP formulas", check_crp),
    ("9 composition chain", check_composition),
    ("10 freeze", check_freeze),
    ("11 boundary convergence", check_boundary),
    ("12 bijections", check_bijections),
]

SUITES = {
    "laws": ["1 BST law", "2 Catalan uniformity", "9 composition chain"],
    "kernels": ["3 product kernel", "7 Mallows closed forms", "8 CRP formulas", "6 q-binomial identity"],
    "harmonicity": ["4 DST as h-transform", "5 harmonicity"],
    "statistics": ["10 freeze", "11 boundary convergence"],
    "bijections": ["12 bijections"],
}
SUITES["all"] = [name for name, _ in CRITERIA]


def run(name: str, **kwargs) -> CheckResult:
    fn = dict(CRITERIA)[name]
    return _timed(name, lambda: fn(**kwargs))


def run_suite(suite: str) -> list:
    if suite not in SUITES:
        raise KeyError(suite)
    return [run(name) for name in SUITES[suite]]
