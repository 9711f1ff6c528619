"""
Unit tests for the radio sequencer: cumulative vectors, picking and rejection.
"""
import os
import sys
import unittest
from collections import Counter

import numpy as np

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tastewalk.errors import (ConfigError, EmptyDistribution,
                              InsufficientCandidates, OutOfRange)
from tastewalk.graph import ZERO, EdgeType, TasteGraph, artist, track
from tastewalk.sequencer import (RejectionConfig, RejectionModel,
                                 build_cumulative, generate_sequence, pick,
                                 rejection_probability)

from helpers import random_taste_graph

NO_REJECTION = RejectionConfig(presence_decay=1.0, distance_decay=0.0,
                               repeat_window=-1, coherence_lookback=0)


class TestCumulativeVector(unittest.TestCase):

    def test_running_sum_in_key_order(self):
        cv = build_cumulative({track("b"): 0.7, track("a"): 0.3})
        self.assertEqual(cv.order, (track("a"), track("b")))
        np.testing.assert_allclose(cv.cum, [0.3, 1.0])

    def test_single_item(self):
        cv = build_cumulative({track("a"): 0.4})
        np.testing.assert_allclose(cv.cum, [0.4])
        self.assertAlmostEqual(cv.total, 0.4)

    def test_zero_vertex_and_empty_weights_skipped(self):
        cv = build_cumulative({track("a"): 0.5, ZERO: 0.3, track("b"): 0.0})
        self.assertEqual(cv.order, (track("a"),))

    def test_empty_distribution(self):
        with self.assertRaises(EmptyDistribution):
            build_cumulative({})
        with self.assertRaises(EmptyDistribution):
            build_cumulative({ZERO: 1.0})


class TestPick(unittest.TestCase):

    def setUp(self):
        self.cv = build_cumulative({track("a"): 0.3, track("b"): 0.7})

    def test_interval_membership(self):
        self.assertEqual(pick(self.cv, 0.1), track("a"))
        self.assertEqual(pick(self.cv, 0.0), track("a"))
        self.assertEqual(pick(self.cv, 0.9), track("b"))

    def test_half_open_boundary(self):
        self.assertEqual(pick(self.cv, 0.3), track("b"))

    def test_out_of_range(self):
        with self.assertRaises(OutOfRange):
            pick(self.cv, 1.0)
        with self.assertRaises(OutOfRange):
            pick(self.cv, -0.1)

    def test_pick_frequencies(self):
        rng = np.random.default_rng(0)
        weights = rng.random(100)
        x = {track(f"t{i:03d}"): float(w) for i, w in enumerate(weights)}
        cv = build_cumulative(x)
        draws = 200_000
        counts = Counter(pick(cv, r) for r in rng.random(draws) * cv.total)
        total = sum(x.values())
        for v, w in x.items():
            self.assertAlmostEqual(counts[v] / draws, w / total, delta=0.01)


class TestRejectionFactors(unittest.TestCase):

    def setUp(self):
        self.artists = {track(f"{a}{i}"): artist(a) for a in "xyzw" for i in range(5)}

    def test_presence(self):
        cfg = RejectionConfig(presence_decay=0.5, distance_decay=0.0, coherence_lookback=0)
        sequence = [track("x0"), track("x1"), track("y0")]
        p = rejection_probability(track("x2"), sequence, cfg, artists=self.artists)
        self.assertAlmostEqual(p, 0.25)

    def test_distance(self):
        cfg = RejectionConfig(presence_decay=1.0, distance_decay=0.5, coherence_lookback=0)
        model = RejectionModel(cfg, artists=self.artists)
        sequence = [track("x0"), track("y0"), track("z0")]
        self.assertAlmostEqual(model.distance_factor(track("x1"), sequence), 0.875)
        self.assertAlmostEqual(model.distance_factor(track("w0"), sequence), 1.0)

    def test_repeat(self):
        cfg = RejectionConfig(repeat_window=0, coherence_lookback=0)
        self.assertEqual(rejection_probability(track("x0"), [track("x0"), track("y0")], cfg,
                                               artists=self.artists), 0.0)

    def test_repeat_window(self):
        model = RejectionModel(RejectionConfig(repeat_window=1), artists=self.artists)
        self.assertEqual(model.repeat_factor(track("x0"), [track("x0"), track("y0")]), 1.0)
        self.assertEqual(model.repeat_factor(track("y0"), [track("x0"), track("y0")]), 0.0)

    def test_track_without_artist_is_its_own_artist(self):
        model = RejectionModel(RejectionConfig(coherence_lookback=0))
        self.assertEqual(model.artist_of(track("solo")), track("solo"))

    def test_coherence_bounded(self):
        graph, _, _, tracks = random_taste_graph(seed=2, tracks=12)
        candidates = {t: 1.0 for t in tracks}
        model = RejectionModel(RejectionConfig(), graph, candidates=candidates)
        for t in tracks:
            c = model.coherence_factor(t, tracks[:2])
            self.assertGreaterEqual(c, 0.05)
            self.assertLessEqual(c, 1.0)
        self.assertEqual(model.coherence_factor(tracks[0], []), 1.0)

    def test_coherence_without_candidates_uses_tail_neighbourhood(self):
        t0, near, far, x = track("t0"), track("near"), track("far"), track("x")
        graph = TasteGraph({(t0, EdgeType.SIMILAR_TRACK): [(near, 1.0)],
                            (near, EdgeType.SIMILAR_TRACK): [(t0, 1.0)],
                            (far, EdgeType.SIMILAR_TRACK): [(x, 1.0)],
                            (x, EdgeType.SIMILAR_TRACK): [(far, 1.0)]})
        cfg = RejectionConfig(presence_decay=1.0, distance_decay=0.0,
                              repeat_window=-1, coherence_lookback=1)
        self.assertAlmostEqual(rejection_probability(near, [t0], cfg, graph), 1.0)
        self.assertAlmostEqual(rejection_probability(far, [t0], cfg, graph), 0.05)

    def test_invalid_config(self):
        with self.assertRaises(ConfigError):
            RejectionConfig(presence_decay=1.5)
        with self.assertRaises(ConfigError):
            RejectionConfig(repeat_window=-2)


class TestGenerateSequence(unittest.TestCase):

    def test_no_rejection_is_weighted_sampling(self):
        x = {track("a"): 0.5, track("b"): 0.3, track("c"): 0.2}
        result = generate_sequence(x, 20_000, NO_REJECTION, rng_seed=3)
        self.assertTrue(result.complete)
        self.assertEqual(result.draws, 20_000)
        counts = Counter(result.items)
        for v, w in x.items():
            self.assertAlmostEqual(counts[v] / 20_000, w, delta=0.015)

    def test_no_duplicates(self):
        x = {track(f"t{i}"): 1.0 + i for i in range(30)}
        result = generate_sequence(x, 20, RejectionConfig(coherence_lookback=0), rng_seed=5)
        self.assertTrue(result.complete)
        self.assertEqual(len(set(result.items)), 20)

    def test_deterministic_for_a_seed(self):
        graph, _, _, tracks = random_taste_graph(seed=6, tracks=12)
        x = {t: 1.0 for t in tracks}
        first = generate_sequence(x, 8, RejectionConfig(), 11, graph)
        second = generate_sequence(x, 8, RejectionConfig(), 11, graph)
        self.assertEqual(first, second)

    def test_presence_rejection_alternates_artists(self):
        artists = {track(f"{a}{i:02d}"): artist(a) for a in "xy" for i in range(20)}
        x = {t: 1.0 for t in artists}
        presence = RejectionConfig(presence_decay=0.5, distance_decay=0.0, repeat_window=-1,
                                   coherence_lookback=0)

        def same_artist_rate(cfg):
            same = pairs = 0
            for seed in range(200):
                items = generate_sequence(x, 10, cfg, seed, artists=artists).items
                same += sum(artists[a] == artists[b] for a, b in zip(items, items[1:]))
                pairs += max(0, len(items) - 1)
            return same / pairs

        baseline = same_artist_rate(NO_REJECTION)
        self.assertLess(same_artist_rate(presence), baseline)
        distance = RejectionConfig(presence_decay=1.0, distance_decay=0.9, repeat_window=-1,
                                   coherence_lookback=0)
        self.assertLess(same_artist_rate(distance), baseline - 0.2)

    def test_partial_sequence(self):
        artists = {track("x0"): artist("x"), track("x1"): artist("x")}
        cfg = RejectionConfig(presence_decay=0.0, coherence_lookback=0, max_attempts=5)
        with self.assertLogs("tastewalk.sequencer", level="WARNING"):
            result = generate_sequence({t: 1.0 for t in artists}, 2, cfg, 1, artists=artists)
        self.assertFalse(result.complete)
        self.assertEqual(len(result.items), 1)
        self.assertEqual(result.draws, 10)

    def test_insufficient_candidates(self):
        with self.assertRaises(InsufficientCandidates):
            generate_sequence({track("a"): 1.0}, 2, RejectionConfig(), 0)

    def test_empty_sequence(self):
        result = generate_sequence({track("a"): 1.0}, 0, RejectionConfig(), 0)
        self.assertEqual(result.items, ())
        self.assertTrue(result.complete)


if __name__ == "__main__":
    unittest.main(verbosity=2)
