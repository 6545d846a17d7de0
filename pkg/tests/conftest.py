"""Shared corpus builders and brute-force oracles.

The oracles deliberately take the slow road (enumerate every simple cycle,
every column pair) so library results can be checked against an
independent computation.
"""

import random
from fractions import Fraction

import networkx as nx
import pytest

from maxplus.semiring import EPS, EXACT, Matrix
from maxplus.graphs import is_irreducible


def random_rational(rng: random.Random) -> Fraction:
    return Fraction(rng.randrange(-12, 13), rng.randrange(1, 5))


def random_matrix(rng: random.Random, k: int, density: float) -> Matrix:
    rows = [
        [random_rational(rng) if rng.random() < density else EPS for _ in range(k)]
        for _ in range(k)
    ]
    return Matrix.make(rows, EXACT)


def random_irreducible(rng: random.Random, k: int) -> Matrix:
    while True:
        A = random_matrix(rng, k, rng.uniform(0.3, 0.9))
        if is_irreducible(A):
            return A


def irreducible_corpus(count: int, seed: int = 2024) -> list:
    rng = random.Random(seed)
    return [random_irreducible(rng, rng.randrange(2, 7)) for _ in range(count)]


def nx_graph(A: Matrix) -> nx.DiGraph:
    # arc i -> j iff A[j][i] is finite, weighted by that entry
    G = nx.DiGraph()
    G.add_nodes_from(range(A.k))
    for j in range(A.k):
        for i in range(A.k):
            w = A.entry(j, i)
            if w is not None:
                G.add_edge(i, j, weight=w)
    return G


def brute_max_cycle_mean(A: Matrix):
    """Maximum mean weight over every simple cycle, or None if acyclic."""
    G = nx_graph(A)
    best = None
    for cyc in nx.simple_cycles(G):
        total = sum(G[cyc[t]][cyc[(t + 1) % len(cyc)]]["weight"] for t in range(len(cyc)))
        mean = Fraction(total, len(cyc))
        if best is None or mean > best:
            best = mean
    return best


@pytest.fixture(scope="session")
def small_corpus():
    return irreducible_corpus(100, seed=7)
