import random

import networkx as nx
import pytest

from maxplus.semiring import EPS, EXACT, ContractViolation, Matrix
from maxplus.graphs import (
    graph_cyclicity,
    graph_of,
    is_aperiodic,
    is_irreducible,
    scc_decompose,
    scc_from_arcs,
)

from conftest import nx_graph, random_matrix


def M(rows):
    return Matrix.make(rows, EXACT)


class TestArcConvention:
    def test_entry_j_i_means_arc_i_to_j(self):
        # A[1][0] finite: node 0 feeds node 1, valuation rides along
        A = M([[EPS, EPS], [5, EPS]])
        g = graph_of(A)
        pairs = [(s, d) for s, d, _w in g.arcs]
        assert pairs == [(0, 1)]
        assert g.arcs[0][2] == 5

    def test_self_loop_from_diagonal(self):
        g = graph_of(M([[3]]))
        assert [(s, d) for s, d, _w in g.arcs] == [(0, 0)]


class TestSccOracle:
    def test_matches_networkx_on_random_patterns(self):
        rng = random.Random(11)
        for _ in range(200):
            k = rng.randrange(1, 8)
            A = random_matrix(rng, k, rng.uniform(0.1, 0.9))
            dec = scc_decompose(graph_of(A))
            ours = sorted(sorted(c) for c in dec.components)
            theirs = sorted(sorted(c) for c in nx.strongly_connected_components(nx_graph(A)))
            assert ours == theirs

    def test_irreducibility_matches_networkx(self):
        rng = random.Random(12)
        seen = {True: 0, False: 0}
        for _ in range(200):
            k = rng.randrange(2, 7)
            A = random_matrix(rng, k, rng.uniform(0.2, 0.8))
            want = nx.is_strongly_connected(nx_graph(A))
            assert is_irreducible(A) == want
            seen[want] += 1
        assert seen[True] > 10 and seen[False] > 10

    def test_condensation_is_topologically_sorted(self):
        A = M([
            [0, EPS, EPS, EPS],
            [0, 0, EPS, EPS],
            [EPS, 0, 0, 0],
            [EPS, EPS, 0, 0],
        ])
        dec = scc_decompose(graph_of(A))
        order = {}
        for idx, comp in enumerate(dec.components):
            for node in comp:
                order[node] = idx
        for src, dst in dec.condensation_arcs:
            assert src < dst


class TestCyclicity:
    def test_single_loop(self):
        assert graph_cyclicity(graph_of(M([[1]]))) == 1

    def test_two_cycle(self):
        A = M([[EPS, 0], [0, EPS]])
        assert graph_cyclicity(graph_of(A)) == 2
        assert not is_aperiodic(A)

    def test_coprime_cycles_give_one(self):
        # cycles of lengths 2 and 3 through node 0
        A = M([
            [EPS, 0, 0],
            [0, EPS, EPS],
            [0, EPS, EPS],
        ])
        # arcs: 1->0, 2->0, 0->1, 0->2 -- every cycle has even length
        assert graph_cyclicity(graph_of(A)) == 2
        B = M([
            [0, 0, 0],
            [0, EPS, EPS],
            [EPS, 0, EPS],
        ])
        assert graph_cyclicity(graph_of(B)) == 1

    def test_gcd_per_component_lcm_across(self):
        # two disjoint cycles of lengths 2 and 3: lcm = 6
        A = M([
            [EPS, 0, EPS, EPS, EPS],
            [0, EPS, EPS, EPS, EPS],
            [EPS, EPS, EPS, EPS, 0],
            [EPS, EPS, 0, EPS, EPS],
            [EPS, EPS, EPS, 0, EPS],
        ])
        assert graph_cyclicity(graph_of(A)) == 6

    def test_matches_brute_force_on_random_irreducible(self):
        from math import gcd

        rng = random.Random(13)
        checked = 0
        while checked < 60:
            k = rng.randrange(2, 6)
            A = random_matrix(rng, k, rng.uniform(0.25, 0.7))
            G = nx_graph(A)
            if not nx.is_strongly_connected(G):
                continue
            want = 0
            for cyc in nx.simple_cycles(G):
                want = gcd(want, len(cyc))
            assert graph_cyclicity(graph_of(A)) == want
            checked += 1


class TestArcsConstructor:
    def test_explicit_arcs(self):
        dec = scc_from_arcs(3, [(0, 1), (1, 0), (1, 2)])
        assert sorted(sorted(c) for c in dec.components) == [[0, 1], [2]]

    def test_bad_node_rejected(self):
        with pytest.raises(ContractViolation):
            scc_from_arcs(2, [(0, 5)])
