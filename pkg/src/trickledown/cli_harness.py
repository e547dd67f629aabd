"""Command-line entry point: ``trickle simulate | exact | verify``.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 budget exceeded.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import acceptance
from .boundary_limits import empirical_ratios
from .exact_oracle import BudgetExceeded, exact_distribution, exact_hit_probability, oracle_kernel
from .graph_substrate import HarrisUlam, SubstrateError, kind_from_name
from .martin_kernels import product_martin_kernel
from .routing_chains import CatalanUrn, CrpBlocks, RoutingError, catalan_table, default_substrate, format_rational, spec_from_name
from .trickle_engine import EngineError, Tree, VertexStreams, settle_order, state_to_tree, tree_to_state

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3

FAMILIES = ["bst", "dirichlet", "dst", "bernoulli", "crp", "rrt", "mallows", "qbinomial", "catalan", "composition"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _family_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--substrate", help="binary, grid or harris-ulam[:cap]; defaults by family")
    for name in ("p", "q", "r", "alpha", "theta"):
        p.add_argument(f"--{name}", help="exact rational, e.g. 1/3")
    p.add_argument("--weights", help="comma-separated urn weights")
    p.add_argument("--probs", help="comma-separated routing probabilities")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trickle", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="sample trickle-down trajectories")
    _family_args(sim)
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--replicas", type=int, default=1)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--report-depth", type=int, default=2)
    sim.add_argument("--format", choices=["jsonl", "tsv"], default="jsonl")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--trajectory", action="store_true", help="include the settle order of every particle")

    ex = sub.add_parser("exact", help="exact rational laws, hitting probabilities and kernels")
    _family_args(ex)
    ex.add_argument("--mode", choices=["dist", "hit", "kernel", "table"], required=True)
    ex.add_argument("--n", type=int, default=3)
    ex.add_argument("--s", help="source tree, e.g. e,0,1")
    ex.add_argument("--t", help="target tree")
    ex.add_argument("--format", choices=["text", "jsonl", "tsv"], default="text")

    ver = sub.add_parser("verify", help="run an acceptance suite")
    ver.add_argument("suite", choices=sorted(acceptance.SUITES))
    ver.add_argument("--budget", type=float, help="enumeration budget and Monte-Carlo sample cap")
    ver.add_argument("--format", choices=["text", "jsonl", "tsv"], default="text")
    return parser


def _spec_and_kind(args):
    params = {k: getattr(args, k) for k in ("p", "q", "r", "alpha", "theta", "weights", "probs")}
    spec = spec_from_name(args.family, **params)
    kind = kind_from_name(args.substrate or default_substrate(spec))
    on_words = isinstance(kind, HarrisUlam)
    if isinstance(spec, CrpBlocks) != on_words:
        raise UsageError(f"{spec.describe()} does not run on {args.substrate or 'the default substrate'}")
    return spec, kind


# ---------------------------------------------------------------- simulate

def _heaviest_path(t: Tree) -> list:
    counts = t.subtree_counts()
    u = t.kind.root
    path = [u]
    while True:
        kids = [v for v in t.kind.children(u, limit=len(t) + 1) if v in t]
        if not kids:
            return path
        # ties go to the first child in slot order
        u = max(kids, key=lambda v: (counts[v], [-a for a in v]))
        path.append(u)


def _last_off_majority(order: list, u: tuple, slot_of) -> dict:
    """Local routing history at ``u``: final majority slot and the last local time it was not chosen."""
    slots = [slot_of(v) for v in order if len(v) > len(u) and v[: len(u)] == u]
    if not slots:
        return {"routed": 0, "majority": None, "last_off_majority": None}
    tally: dict = {}
    for s in slots:
        tally[s] = tally.get(s, 0) + 1
    major = max(sorted(tally), key=tally.get)
    last = max((k for k, s in enumerate(slots, start=1) if s != major), default=0)
    return {"routed": len(slots), "majority": major, "last_off_majority": last}


def simulate_replica(task: tuple) -> dict:
    family_args, n, seed, replica, depth, trajectory = task
    args = argparse.Namespace(**family_args)
    spec, kind = _spec_and_kind(args)
    state, order = settle_order(kind, spec, n, VertexStreams(seed, replica))
    rec: dict = {"replica": replica, "seed": seed, "family": spec.describe(), "n": n}
    if kind.is_tree:
        t = state_to_tree(state)
        rec["tree"] = t.format()
        rec["ratios"] = {kind.format_vertex(u): format_rational(x) for u, x in empirical_ratios(t, depth).items()}
        spine = _heaviest_path(t)
        rec["spine"] = [kind.format_vertex(u) for u in spine]
        if kind.max_slots:
            # leading steps on which the heaviest path takes the last child slot
            last = kind.max_slots - 1
            rec["rightmost_agreement"] = next((k for k, v in enumerate(spine[1:]) if v[-1] != last), len(spine) - 1)
        rec["freeze"] = {
            kind.format_vertex(u): _last_off_majority(order, u, lambda v, k=len(u): v[k])
            for u in spine[: depth + 1]
        }
    else:
        rec["occupied"] = [kind.format_vertex(u) for u in sorted(state.occupied(), key=lambda w: (kind.depth(w), w))]
        rec["state"] = state.format()
    if trajectory:
        rec["trajectory"] = [kind.format_vertex(u) for u in order]
    return rec


def _tsv_line(rec: dict) -> str:
    cells = []
    for k, v in rec.items():
        if isinstance(v, (dict, list)):
            v = json.dumps(v, separators=(",", ":"), ensure_ascii=False)
        cells.append(f"{k}={v}")
    return "\t".join(cells)


def _emit(rec: dict, fmt: str, out) -> None:
    if fmt == "jsonl":
        out.write(json.dumps(rec, separators=(",", ":"), ensure_ascii=False) + "\n")
    else:
        out.write(_tsv_line(rec) + "\n")


def cmd_simulate(args, out) -> int:
    _spec_and_kind(args)
    if args.n < 0 or args.replicas < 1 or args.report_depth < 0:
        raise UsageError("--n and --report-depth must be nonnegative, --replicas positive")
    fam = {k: getattr(args, k) for k in ("family", "substrate", "p", "q", "r", "alpha", "theta", "weights", "probs")}
    tasks = [(fam, args.n, args.seed, rep, args.report_depth, args.trajectory) for rep in range(args.replicas)]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            # map yields in submission order, so output order matches replica order
            chunk = max(1, len(tasks) // (args.workers * 16))
            for rec in pool.map(simulate_replica, tasks, chunksize=chunk):
                _emit(rec, args.format, out)
    else:
        for task in tasks:
            _emit(simulate_replica(task), args.format, out)
    return EXIT_OK


# ------------------------------------------------------------------- exact

def _tree_arg(kind, text, name):
    if text is None:
        raise UsageError(f"--{name} is required for this mode")
    try:
        return Tree.parse(kind, text)
    except (SubstrateError, EngineError, ValueError) as exc:
        raise UsageError(f"bad --{name}: {exc}") from exc


def _rows(rows, fmt, out, header):
    for key, val in rows:
        if fmt == "jsonl":
            out.write(json.dumps({header: key, "value": val}, ensure_ascii=False) + "\n")
        elif fmt == "tsv":
            out.write(f"{key}\t{val}\n")
        else:
            out.write(f"{key} : {val}\n" if key is not None else f"{val}\n")


def cmd_exact(args, out) -> int:
    spec, kind = _spec_and_kind(args)
    if args.mode == "table":
        if not isinstance(spec, CatalanUrn):
            raise UsageError("--mode table is only defined for the catalan family")
        rows = [(f"({i},{j}) → ({k},{l})", format_rational(w))
                for (i, j), *succ in catalan_table(max(args.n, 1)).rows(args.n) for (k, l), w in succ]
        _rows(rows, args.format, out, "transition")
        return EXIT_OK
    if args.mode == "dist":
        if args.n < 0:
            raise UsageError("--n must be nonnegative")
        law = exact_distribution(kind, spec, args.n)
        if kind.is_tree:
            trees = sorted(((state_to_tree(s), m) for s, m in law.items()), key=lambda r: list(r[0]))
            rows = [(t.format(), format_rational(m)) for t, m in trees]
        else:
            rows = sorted((s.format(), format_rational(m)) for s, m in law.items())
        _rows(rows, args.format, out, "tree")
        return EXIT_OK
    if not kind.is_tree:
        raise UsageError("hit and kernel modes take trees; use a tree substrate")
    s = tree_to_state(kind, _tree_arg(kind, args.s, "s"))
    t = tree_to_state(kind, _tree_arg(kind, args.t, "t"))
    if args.mode == "hit":
        val = exact_hit_probability(kind, spec, s, t)
    else:
        val = oracle_kernel(kind, spec, s, t)
        closed = product_martin_kernel(kind, spec, s, t)
        if closed != val:
            raise AssertionError(f"closed-form kernel {closed} differs from oracle {val}")
    _rows([(None, format_rational(val))], args.format, out, "value")
    return EXIT_OK


# ------------------------------------------------------------------ verify

def cmd_verify(args, out) -> int:
    kwargs: dict = {}
    saved = os.environ.get("TRICKLE_BUDGET")
    if args.budget is not None:
        cap = int(args.budget)
        os.environ["TRICKLE_BUDGET"] = str(cap)
        kwargs = {
            "10 freeze": {"paths": min(10_000, cap)},
            "11 boundary convergence": {"n": min(100_000, cap), "samples": min(100_000, cap)},
        }
    try:
        return _run_suite(args, kwargs, out)
    finally:
        if saved is None:
            os.environ.pop("TRICKLE_BUDGET", None)
        else:
            os.environ["TRICKLE_BUDGET"] = saved


def _run_suite(args, kwargs, out) -> int:
    ok = True
    for name in acceptance.SUITES[args.suite]:
        res = acceptance.run(name, **kwargs.get(name, {}))
        ok = ok and res.passed
        if args.format == "jsonl":
            out.write(json.dumps({"check": res.name, "passed": res.passed, "detail": res.detail,
                                  "seconds": round(res.seconds, 3)}, ensure_ascii=False) + "\n")
        elif args.format == "tsv":
            out.write(f"{res.name}\t{'PASS' if res.passed else 'FAIL'}\t{res.detail}\t{res.seconds:.3f}\n")
        else:
            out.write(res.line() + "\n")
        out.flush()
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"simulate": cmd_simulate, "exact": cmd_exact, "verify": cmd_verify}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"trickle: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as exc:
        print(f"trickle: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (RoutingError, SubstrateError, EngineError, ValueError) as exc:
        print(f"trickle: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
