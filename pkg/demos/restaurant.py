"""Chinese restaurant block sizes as a trickle-down chain on the Harris-Ulam tree."""
from fractions import Fraction

import numpy as np

from trickledown import CrpBlocks, HarrisUlam, VertexStreams, simulate, state_to_tree
from trickledown.bijections import listing_to_rrt, uniform_listing
from trickledown.boundary_limits import sample_gem
from trickledown.martin_kernels import crp_extended_kernel


def main():
    H = HarrisUlam()
    state, _ = simulate(H, CrpBlocks(Fraction(1, 2), 1), 200, VertexStreams(9))
    t = state_to_tree(state)
    kids = sorted((u for u in t if len(u) == 1), key=lambda u: u[0])
    print("root block sizes:", [t.count(u) for u in kids][:10])

    rho = [Fraction(1, 2), Fraction(1, 4)]
    for a in [(1,), (2,), (1, 1), (3, 1)]:
        print(f"K({a}, rho={list(map(str, rho))}) = {crp_extended_kernel(a, rho, 0, 1)}")

    rng = np.random.default_rng(0)
    print("GEM(1/2, 1) sticks:", np.round(sample_gem(Fraction(1, 2), 1, 6, rng), 3))
    r = uniform_listing(8, rng)
    print("listing", r, "-> recursive tree", {k: H.format_vertex(v) for k, v in listing_to_rrt(r).items()})


if __name__ == "__main__":
    main()
