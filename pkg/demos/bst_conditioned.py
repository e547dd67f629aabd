"""Grow a binary search tree, then condition it on a boundary point.

Prints the exact law of the 4-vertex trees, the Martin kernel against a
fair coin-tossing measure, and how the conditioned chain differs from the
unconditioned one at the first few steps.
"""
from fractions import Fraction

import numpy as np

from trickledown import BinaryTree, DirichletUrn
from trickledown.boundary_limits import BoundaryMeasure
from trickledown.exact_oracle import enumerate_trees, exact_distribution
from trickledown.h_transforms import dst_transition, h_transform, run_trickle_up, tree_transitions
from trickledown.martin_kernels import bst_extended_kernel
from trickledown.trickle_engine import state_to_tree

B = BinaryTree()
BST = DirichletUrn((1, 1))


def main():
    print("exact law of the BST after 3 steps")
    law = exact_distribution(B, BST, 3)
    for s, m in sorted(law.items(), key=lambda kv: state_to_tree(kv[0]).format()):
        print(f"  {state_to_tree(s).format():<14} {m}")

    fair = BoundaryMeasure.fair(6)
    print("\nkernel against the fair measure: (#s)! 2^-(sum of depths)")
    for t in enumerate_trees(B, 3):
        print(f"  {t.format():<10} {bst_extended_kernel(t, fair)}")

    # conditioning on the fair measure turns the BST into digital search
    rows = h_transform(tree_transitions(B, BST), lambda t: bst_extended_kernel(t, fair))
    s = enumerate_trees(B, 2)[0]
    print(f"\nfrom {s.format()}: plain BST row vs conditioned row")
    plain = dict(tree_transitions(B, BST)(s))
    for t, w in rows(s):
        print(f"  {t.format():<10} {str(plain[t]):>5}  ->  {w}")
    print("  dst_transition:", {B.format_vertex(u): str(w) for u, w in dst_transition(s, fair).items()})

    skew = BoundaryMeasure.from_splits(12, lambda u: Fraction(3, 4))
    W = run_trickle_up(enumerate_trees(B, 1)[0], skew, 10, np.random.default_rng(1))
    print("\n10 trickle-up steps under a 3/4-left measure:", W.format())


if __name__ == "__main__":
    main()
