from __future__ import annotations

import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgeprob.core import (
    CountMatrix,
    EdgeSequence,
    Partition,
    ProbabilityMatrix,
    collapse,
    cross_entropy,
    description_length,
    empirical_distribution,
    entropy,
    representative,
)

from conftest import random_counts, random_probability


def pm(values, n=2):
    return ProbabilityMatrix(np.array(values, dtype=float).reshape(n, n))


class TestTypes:
    def test_probability_matrix_rejects_bad_input(self):
        with pytest.raises(ValueError):
            ProbabilityMatrix(np.full((2, 2), 0.3))
        with pytest.raises(ValueError):
            ProbabilityMatrix(np.array([[1.5, -0.5], [0, 0]]))
        with pytest.raises(ValueError):
            ProbabilityMatrix(np.ones((2, 3)) / 6)

    def test_arrays_are_read_only(self):
        q = ProbabilityMatrix.uniform(3)
        with pytest.raises(ValueError):
            q.p[0, 0] = 1.0

    def test_edge_sequence_range_check(self):
        with pytest.raises(ValueError):
            EdgeSequence.from_pairs(2, [(0, 2)])
        e = EdgeSequence.from_pairs(3, [(0, 1), (2, 2)])
        assert e.m == 2 and list(e) == [(0, 1), (2, 2)]
        assert e.prefix(1).m == 1 and e.prefix(0).m == 0

    def test_partition_invariants(self):
        with pytest.raises(ValueError):
            Partition(np.array([0, 2, 2]))
        with pytest.raises(ValueError):
            Partition.from_blocks(3, [[0, 1], [1, 2]])
        part = Partition.from_sizes([2, 1])
        assert part.p == 2 and part.sizes.tolist() == [2, 1]
        assert part.blocks() == [[0, 1], [2]]
        assert part == Partition.from_blocks(3, [[0, 1], [2]])
        assert Partition.singletons(4).p == 4 and Partition.single(4).p == 1

    def test_count_matrix(self):
        w = CountMatrix(np.array([[1.0, 2.0], [0.0, 0.5]]))
        assert w.m == 3.5 and not w.is_integral()
        with pytest.raises(ValueError):
            CountMatrix(np.array([[-1.0]]))


class TestEntropy:
    def test_uniform(self):
        assert entropy(ProbabilityMatrix.uniform(2)) == pytest.approx(2.0, abs=1e-15)

    def test_delta(self):
        assert entropy(pm([1, 0, 0, 0])) == 0.0

    def test_dyadic(self):
        assert entropy(pm([0.5, 0.25, 0.125, 0.125])) == pytest.approx(1.75, abs=1e-15)

    def test_bounds_and_uniform_is_max(self):
        rng = np.random.default_rng(0)
        for n in (2, 3, 5):
            u = entropy(ProbabilityMatrix.uniform(n))
            assert u == pytest.approx(2 * math.log2(n))
            for _ in range(20):
                d = rng.normal(size=(n, n)) * 1e-3
                d -= d.mean()
                q = ProbabilityMatrix(np.full((n, n), 1 / n**2) + d / n**2)
                assert 0 <= entropy(q) < u


class TestCrossEntropy:
    def test_self_equals_entropy(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            p = ProbabilityMatrix(random_probability(rng, 3, zeros=True))
            assert cross_entropy(p, p) == pytest.approx(entropy(p), abs=1e-12)

    def test_delta_vs_uniform(self):
        assert cross_entropy(pm([0, 0, 1, 0]), ProbabilityMatrix.uniform(2)) == pytest.approx(2.0)

    def test_direct_sum_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            p, q = random_probability(rng, 3), random_probability(rng, 3)
            oracle = 0.0
            for u in range(3):
                for v in range(3):
                    oracle -= p[u, v] * math.log2(q[u, v])
            assert cross_entropy(ProbabilityMatrix(p), ProbabilityMatrix(q)) == pytest.approx(oracle, abs=1e-12)

    def test_infinite_marker(self):
        assert cross_entropy(pm([0.5, 0.5, 0, 0]), pm([1, 0, 0, 0])) == math.inf

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cross_entropy(ProbabilityMatrix.uniform(2), ProbabilityMatrix.uniform(3))

    def test_gibbs_inequality(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            n = int(rng.integers(1, 5))
            p = ProbabilityMatrix(random_probability(rng, n, zeros=True))
            q = ProbabilityMatrix(random_probability(rng, n))
            assert cross_entropy(p, q) >= entropy(p) - 1e-12


class TestEmpiricalAndCollapse:
    def test_single_edge(self):
        d = empirical_distribution(EdgeSequence.from_pairs(2, [(0, 0)]))
        assert d.p.ravel().tolist() == [1, 0, 0, 0]

    def test_two_edges(self):
        d = empirical_distribution(EdgeSequence.from_pairs(2, [(0, 0), (0, 1)]))
        assert d.p.ravel().tolist() == [0.5, 0.5, 0, 0]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            empirical_distribution(EdgeSequence.from_pairs(2, []))

    def test_hash_map_oracle(self):
        rng = np.random.default_rng(4)
        pairs = [tuple(map(int, rng.integers(0, 5, 2))) for _ in range(50)]
        counter = Counter(pairs)
        d = empirical_distribution(EdgeSequence.from_pairs(5, pairs))
        for u in range(5):
            for v in range(5):
                assert d.p[u, v] == counter[(u, v)] / 50

    def test_collapse_examples(self):
        assert collapse(EdgeSequence.from_pairs(3, [])).m == 0
        w = collapse(EdgeSequence.from_pairs(2, [(0, 1), (0, 1), (1, 0)]))
        assert w.k[0, 1] == 2 and w.k[1, 0] == 1 and w.m == 3


class TestRepresentative:
    def test_zero_matrix(self):
        assert representative(CountMatrix.zeros(3), 0).m == 0

    def test_single_entry(self):
        k = np.zeros((2, 2))
        k[1, 1] = 3
        assert list(representative(CountMatrix(k), 5)) == [(1, 1)] * 3

    def test_seeds_give_different_orderings(self):
        w = random_counts(np.random.default_rng(5), 4, 40)
        a, b = representative(w, 1), representative(w, 2)
        assert not np.array_equal(a.edges, b.edges)
        assert np.array_equal(collapse(a).k, collapse(b).k)
        assert np.array_equal(representative(w, 1).edges, a.edges)

    def test_rejects_fractional(self):
        with pytest.raises(ValueError):
            representative(CountMatrix(np.array([[0.5]])), 0)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 5), st.integers(0, 30), st.integers(0, 2**32 - 1))
    def test_round_trip(self, n, m, seed):
        w = random_counts(np.random.default_rng(seed), n, m)
        assert np.array_equal(collapse(representative(w, seed)).k, w.k)


class TestDescriptionLength:
    def test_uniform(self):
        e = EdgeSequence.from_pairs(4, [(0, 1), (3, 3), (2, 0)])
        assert description_length(e, ProbabilityMatrix.uniform(4)) == pytest.approx(3 * 2 * 2)

    def test_quarter(self):
        assert description_length(EdgeSequence.from_pairs(2, [(0, 0)]), ProbabilityMatrix.uniform(2)) == 2.0

    def test_infinite_marker(self):
        assert description_length(EdgeSequence.from_pairs(2, [(1, 1)]), pm([1, 0, 0, 0])) == math.inf

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 5), st.integers(1, 40), st.integers(0, 2**32 - 1))
    def test_two_routes(self, n, m, seed):
        rng = np.random.default_rng(seed)
        e = EdgeSequence(n, rng.integers(0, n, (m, 2)))
        q = ProbabilityMatrix(random_probability(rng, n))
        assert description_length(e, q) == pytest.approx(m * cross_entropy(empirical_distribution(e), q), abs=1e-9)
