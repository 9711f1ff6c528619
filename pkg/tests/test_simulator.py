"""
Tests of the synthetic world and the main page comparison.
"""
import os
import sys
import unittest
from collections import Counter
from datetime import date

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tastewalk.builder import build_taste_graph
from tastewalk.metrics import Source
from tastewalk.simulator import (WorldConfig, compare_main_page, generate_world,
                                 global_top_page, personalized_page,
                                 replay_main_page)


class TestSyntheticWorld(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.cfg = WorldConfig(users=200, seed=4)
        cls.world = generate_world(cls.cfg)
        cls.graph = build_taste_graph(cls.world.log, cls.world.catalog, cls.world.playlists,
                                      cls.world.today)

    def test_world_shape(self):
        self.assertEqual(len(self.world.user_genre), 200)
        self.assertEqual(len(self.world.catalog), 200)
        self.assertEqual(len(self.world.log), 200 * self.cfg.history_plays)
        same = sum(self.world.track_genre[e.track] == self.world.user_genre[e.user] for e in self.world.log)
        self.assertGreater(same / len(self.world.log), 0.9)

    def test_generation_is_deterministic(self):
        again = generate_world(self.cfg)
        self.assertEqual(again.log, self.world.log)
        self.assertEqual(again.playlists, self.world.playlists)

    def test_replay_is_deterministic(self):
        page = global_top_page(self.world, self.cfg)
        first = replay_main_page(self.world, page, self.cfg, seed=9)
        self.assertEqual(first, replay_main_page(self.world, page, self.cfg, seed=9))
        my_music = sum(e.source is Source.MY_MUSIC for e in first)
        self.assertEqual(my_music, 200 * self.cfg.my_music_plays)

    def test_global_top_uses_recent_plays(self):
        end = (self.world.today.toordinal() - date(1970, 1, 1).toordinal() + 1) * 86400
        start = end - self.cfg.top_window_days * 86400
        recent = Counter(e.track for e in self.world.log if start <= e.timestamp < end)
        self.assertLess(sum(recent.values()), len(self.world.log))
        page = global_top_page(self.world, self.cfg)("u0000")
        self.assertEqual(len(page), self.cfg.page_size)
        counts = [recent[v.key] for v in page]
        self.assertEqual(counts, sorted(counts, reverse=True))
        self.assertEqual(counts[0], max(recent.values()))
        self.assertTrue(all(c > 0 for c in counts))

    def test_personalized_page_matches_genre(self):
        page = personalized_page(self.world, self.graph, cfg=self.cfg)
        matched = total = 0
        for u in sorted(self.world.user_genre)[:20]:
            items = page(u)
            self.assertLessEqual(len(items), self.cfg.page_size)
            total += len(items)
            matched += sum(self.world.track_genre[v.key] == self.world.user_genre[u] for v in items)
        self.assertGreater(matched / total, 0.8)

    def test_personalized_page_beats_global_top(self):
        reports = compare_main_page(self.world, cfg=self.cfg, graph=self.graph)
        personalized = reports["personalized"].playbacks_main_vs_mymusic
        baseline = reports["baseline"].playbacks_main_vs_mymusic
        self.assertGreaterEqual(personalized / baseline, 1.5)


if __name__ == "__main__":
    unittest.main(verbosity=2)
