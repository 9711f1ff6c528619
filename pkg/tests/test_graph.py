"""
Unit tests for the taste graph data model: row normalization, zero-balancing,
balancing and the one-step transition.
"""
import math
import os
import sys
import unittest

import numpy as np
import scipy.sparse as sp

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tastewalk.errors import (AllZeroRow, ConfigError, InvariantViolation,
                              MissingBalanceEntry, RowConflict, RowTooLong,
                              UnknownVertex)
from tastewalk.graph import (DEFAULT_BALANCING, ZERO, BalancingConfig,
                             DecayKind, DecayModel, EdgeRecord, EdgeType,
                             TasteGraph, VertexType, artist, balanced_weight,
                             merge_parts, next_vector, normalize_row,
                             rank_scores, track, track_artists, transition,
                             transition_matrix, user, zero_balance_row)

from helpers import dense_transition, dense_vector, random_taste_graph


class TestRowNormalization(unittest.TestCase):

    def test_proportional_scaling(self):
        self.assertEqual(normalize_row([2, 3]), [0.4, 0.6])
        self.assertEqual(normalize_row([1]), [1.0])
        self.assertEqual(normalize_row([0, 5, 5]), [0.0, 0.5, 0.5])

    def test_all_zero_row_rejected(self):
        with self.assertRaises(AllZeroRow):
            normalize_row([0, 0])
        with self.assertRaises(AllZeroRow):
            normalize_row([])

    def test_negative_weight_rejected(self):
        with self.assertRaises(InvariantViolation):
            normalize_row([1.0, -0.5])


class TestZeroBalancing(unittest.TestCase):

    def test_linear_short_row(self):
        row = [(track("a"), 0.6), (track("b"), 0.4)]
        balanced = zero_balance_row(row, DecayModel(DecayKind.LINEAR, 4))
        self.assertEqual([v for v, _ in balanced], [track("a"), track("b"), ZERO])
        for (_, got), expected in zip(balanced, [0.42, 0.28, 0.30]):
            self.assertAlmostEqual(got, expected, places=12)

    def test_full_row_unchanged(self):
        row = [(track(k), 0.25) for k in "abcd"]
        self.assertEqual(zero_balance_row(row, DecayModel(DecayKind.LINEAR, 4)), row)

    def test_exponential_single_edge(self):
        balanced = zero_balance_row([(track("a"), 1.0)], DecayModel(DecayKind.EXPONENTIAL, 3, 0.5))
        f = (0.25 + 0.125) / (0.5 + 0.25 + 0.125)
        self.assertAlmostEqual(dict(balanced)[ZERO], f, places=12)
        self.assertAlmostEqual(dict(balanced)[track("a")], 1 - f, places=12)
        self.assertAlmostEqual(math.fsum(w for _, w in balanced), 1.0, places=12)

    def test_row_longer_than_expected_count(self):
        row = [(track(k), 0.2) for k in "abcde"]
        with self.assertRaises(RowTooLong):
            zero_balance_row(row, DecayModel(DecayKind.LINEAR, 4))

    def test_row_with_zero_edge_is_left_alone(self):
        row = [(track("a"), 0.7), (ZERO, 0.3)]
        self.assertEqual(zero_balance_row(row, DecayModel(DecayKind.LINEAR, 10)), row)

    def test_invalid_decay_models(self):
        with self.assertRaises(ConfigError):
            DecayModel(DecayKind.LINEAR, 0)
        with self.assertRaises(ConfigError):
            DecayModel(DecayKind.EXPONENTIAL, 5, 1.0)


class TestTasteGraph(unittest.TestCase):

    def test_row_must_sum_to_one(self):
        with self.assertRaises(InvariantViolation):
            TasteGraph({(track("a"), EdgeType.SIMILAR_TRACK): [(track("b"), 0.5)]})

    def test_duplicate_edge_rejected(self):
        with self.assertRaises(InvariantViolation):
            TasteGraph({(track("a"), EdgeType.SIMILAR_TRACK): [(track("b"), 0.5), (track("b"), 0.5)]})

    def test_zero_vertex_owns_no_rows(self):
        with self.assertRaises(InvariantViolation):
            TasteGraph({(ZERO, EdgeType.SIMILAR_TRACK): [(track("b"), 1.0)]})

    def test_zero_vertex_always_present(self):
        graph = TasteGraph()
        self.assertIn(ZERO, graph)
        self.assertEqual(graph.row(ZERO, EdgeType.ABSORB), ((ZERO, 1.0),))
        self.assertEqual(graph.num_edges, 0)

    def test_with_rows_replaces_and_removes(self):
        key = (track("a"), EdgeType.SIMILAR_TRACK)
        graph = TasteGraph({key: [(track("b"), 1.0)]})
        updated = graph.with_rows({key: [(track("c"), 1.0)]})
        self.assertEqual(updated.row(*key), ((track("c"), 1.0),))
        self.assertEqual(graph.row(*key), ((track("b"), 1.0),))
        self.assertEqual(graph.with_rows({key: None}).num_rows, 0)
        self.assertNotEqual(updated.snapshot_id, graph.snapshot_id)

    def test_edges_in_canonical_order(self):
        graph, _, _, _ = random_taste_graph(seed=3)
        edges = list(graph.edges())
        keys = [(e.source.vtype.value, e.source.key, e.etype.value, e.target.vtype.value, e.target.key)
                for e in edges]
        self.assertEqual(keys, sorted(keys))
        self.assertEqual(len(edges), graph.num_edges)


class TestBalancing(unittest.TestCase):

    def setUp(self):
        self.u = user("u")
        self.graph = TasteGraph({
            (self.u, EdgeType.LIKES): [(track("t1"), 0.5), (track("t2"), 0.5)],
            (self.u, EdgeType.PREFERS): [(artist("a1"), 0.5), (artist("a2"), 0.5)],
            (user("v"), EdgeType.LIKES): [(track("t1"), 0.5), (track("t2"), 0.5)],
        })
        self.cfg = BalancingConfig()

    def test_balanced_weight_is_product(self):
        edge = EdgeRecord(self.u, artist("a1"), EdgeType.PREFERS, 0.5)
        self.assertAlmostEqual(balanced_weight(self.graph, self.cfg, edge), 0.2)

    def test_empty_row_mass_goes_to_other_rows(self):
        edge = EdgeRecord(user("v"), track("t1"), EdgeType.LIKES, 0.5)
        self.assertAlmostEqual(balanced_weight(self.graph, self.cfg, edge), 0.5)

    def test_full_rows_sum_to_one(self):
        graph, _, _, _ = random_taste_graph(seed=11)
        for v in graph.vertices:
            self.assertAlmostEqual(math.fsum(w for _, w in next_vector(graph, self.cfg, v)), 1.0,
                                   places=12, msg=str(v))

    def test_vertex_without_rows_goes_to_zero(self):
        self.assertEqual(next_vector(self.graph, self.cfg, track("t1")), ((ZERO, 1.0),))

    def test_missing_balance_entry(self):
        cfg = BalancingConfig({(VertexType.USER, EdgeType.LIKES): 1.0})
        with self.assertRaises(MissingBalanceEntry):
            next_vector(self.graph, cfg, self.u)

    def test_balancing_weights_must_sum_to_one(self):
        with self.assertRaises(ConfigError):
            BalancingConfig({(VertexType.USER, EdgeType.LIKES): 0.6,
                             (VertexType.USER, EdgeType.PREFERS): 0.6})
        with self.assertRaises(ConfigError):
            BalancingConfig({(VertexType.TRACK, EdgeType.SIMILAR_TRACK): 1.5})

    def test_equal_tables_share_cache_key(self):
        self.assertEqual(BalancingConfig(), BalancingConfig())
        self.assertEqual(hash(BalancingConfig()), hash(BalancingConfig()))


class TestTransition(unittest.TestCase):

    def test_zero_vertex_absorbs(self):
        self.assertEqual(transition(TasteGraph(), BalancingConfig(), {ZERO: 1.0}), {ZERO: 1.0})

    def test_deterministic_chain(self):
        u, i = user("u"), track("i")
        graph = TasteGraph({(u, EdgeType.LIKES): [(i, 1.0)],
                            (i, EdgeType.SIMILAR_TRACK): [(u, 1.0)]})
        self.assertEqual(transition(graph, BalancingConfig(), {u: 1.0}), {i: 1.0})
        self.assertEqual(transition(graph, BalancingConfig(), {i: 1.0}), {u: 1.0})

    def test_matches_dense_matrix_product(self):
        cfg = BalancingConfig()
        for seed in range(5):
            graph, users, _, _ = random_taste_graph(seed=seed, users=2, artists=2, tracks=6)
            P, order, index = dense_transition(graph, cfg)
            rng = np.random.default_rng(seed)
            x = {v: float(rng.random()) for v in order}
            expected = P.T @ dense_vector(x, index)
            got = dense_vector(transition(graph, cfg, x), index)
            np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_transition_preserves_mass(self):
        graph, users, _, _ = random_taste_graph(seed=7)
        y = transition(graph, BalancingConfig(), {users[0]: 0.3, users[1]: 0.7})
        self.assertAlmostEqual(math.fsum(y.values()), 1.0, places=12)

    def test_unknown_vertex(self):
        with self.assertRaises(UnknownVertex):
            transition(TasteGraph(), BalancingConfig(), {track("nowhere"): 1.0})


class TestTransitionMatrix(unittest.TestCase):

    def test_sparse_matrix_equals_dense_transitions(self):
        cfg = BalancingConfig()
        for seed in range(5):
            graph, _, _, _ = random_taste_graph(seed=seed, users=2, artists=3, tracks=8)
            matrix = transition_matrix(graph, cfg)
            P, _, _ = dense_transition(graph, cfg, order=list(matrix.vertices))
            self.assertTrue(sp.issparse(matrix.matrix))
            np.testing.assert_allclose(matrix.matrix.toarray(), P, atol=1e-12)
            np.testing.assert_allclose(np.asarray(matrix.matrix.sum(axis=1)).ravel(), 1.0, atol=1e-9)

    def test_built_once_per_balancing_table(self):
        graph, _, _, _ = random_taste_graph(seed=3)
        first = transition_matrix(graph, BalancingConfig())
        self.assertIs(transition_matrix(graph, BalancingConfig()), first)
        table = dict(DEFAULT_BALANCING)
        table[(VertexType.USER, EdgeType.LIKES)] = 0.5
        table[(VertexType.USER, EdgeType.PREFERS)] = 0.5
        other = transition_matrix(graph, BalancingConfig(table))
        self.assertIsNot(other, first)
        self.assertFalse(np.allclose(other.matrix.toarray(), first.matrix.toarray()))

    def test_array_round_trip(self):
        graph, users, _, _ = random_taste_graph(seed=6)
        matrix = transition_matrix(graph, BalancingConfig())
        x = {users[0]: 0.25, users[1]: 0.75}
        self.assertEqual(matrix.to_vector(matrix.to_array(x)), x)
        with self.assertRaises(UnknownVertex):
            matrix.to_array({user("ghost"): 1.0})


class TestMergeParts(unittest.TestCase):

    def setUp(self):
        self.similar = TasteGraph({(artist("a"), EdgeType.SIMILAR_ARTIST): [(artist("b"), 1.0)]})
        self.tracks = TasteGraph({(artist("a"), EdgeType.ARTIST_TRACK): [(track("t"), 1.0)]})

    def test_empty_part_is_identity(self):
        self.assertEqual(merge_parts([TasteGraph(), self.similar]), self.similar)

    def test_disjoint_union(self):
        merged = merge_parts([self.similar, self.tracks])
        self.assertEqual(set(merged.out_rows(artist("a"))),
                         {EdgeType.SIMILAR_ARTIST, EdgeType.ARTIST_TRACK})

    def test_conflicting_rows(self):
        other = TasteGraph({(artist("a"), EdgeType.SIMILAR_ARTIST): [(artist("c"), 1.0)]})
        with self.assertRaises(RowConflict):
            merge_parts([self.similar, other])

    def test_track_artists_picks_heaviest_row(self):
        graph = TasteGraph({
            (artist("a"), EdgeType.ARTIST_TRACK): [(track("t"), 0.7), (track("s"), 0.3)],
            (artist("b"), EdgeType.ARTIST_TRACK): [(track("s"), 0.9), (ZERO, 0.1)],
        })
        self.assertEqual(track_artists(graph), {track("t"): artist("a"), track("s"): artist("b")})


class TestRanking(unittest.TestCase):

    def test_ties_break_by_key_and_zero_never_ranks(self):
        scores = {track("b"): 0.5, track("a"): 0.5, ZERO: 0.9, track("c"): 0.7}
        self.assertEqual([v.key for v, _ in rank_scores(scores)], ["c", "a", "b"])
        self.assertEqual(len(rank_scores(scores, 2)), 2)


if __name__ == "__main__":
    unittest.main(verbosity=2)
