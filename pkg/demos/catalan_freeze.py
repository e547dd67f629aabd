"""Catalan urn: uniform trees, and why its paths are slow to freeze.

The first part checks uniformity exactly. The second runs urn paths and
reports how often the minority coordinate still moves late in the run.
"""
from trickledown import BinaryTree, CatalanUrn, catalan_number
from trickledown.exact_oracle import exact_distribution
from trickledown.routing_chains import catalan_table
from trickledown.trickle_engine import routing_paths


def main():
    for n in range(1, 7):
        law = exact_distribution(BinaryTree(), CatalanUrn(), n)
        print(f"n={n}: {len(law)} trees, masses {set(map(str, law.values()))}, C_{n + 1} = {catalan_number(n + 1)}")

    table = catalan_table(6)
    print("\nprobability of stepping to the second coordinate")
    for i in range(4):
        print("  " + "  ".join(f"{str(table.step_second(i, j)):>7}" for j in range(4)))

    paths = routing_paths(CatalanUrn(), 2000, 1000, 3)
    late = sum(len(set(row[500:])) > 1 for row in paths)
    print(f"\n{late} of {len(paths)} paths still use both slots after step 500")


if __name__ == "__main__":
    main()
