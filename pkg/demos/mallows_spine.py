"""Mallows tree process: the root sends a geometric number of particles left, then only right.

Simulates a few trees, prints the spine and the left-subtree sizes along it,
and shows the conditioned urn paths at a finite and an infinite boundary point.
"""
from fractions import Fraction

from trickledown import BinaryTree, MallowsUrn, VertexStreams, simulate, state_to_tree
from trickledown.h_transforms import follow, h_transform, routing_transitions
from trickledown.martin_kernels import INFINITY, Finite, mallows_urn_kernel

p = Fraction(1, 3)


def main():
    B = BinaryTree()
    for rep in range(3):
        state, _ = simulate(B, MallowsUrn(p), 300, VertexStreams(42, rep))
        t = state_to_tree(state)
        u, sizes = (), []
        while u + (1,) in t:
            sizes.append(t.count(u + (0,)) if u + (0,) in t else 0)
            u = u + (1,)
        print(f"replica {rep}: spine depth {len(u)}, left sizes along spine {sizes[:12]} ...")

    rows = routing_transitions(MallowsUrn(p))
    for target in (Finite(2), INFINITY):
        path = follow(h_transform(rows, lambda x: mallows_urn_kernel(x, target, p)), (0, 0), 6)
        print(f"urn conditioned on {target}: {path}")


if __name__ == "__main__":
    main()
