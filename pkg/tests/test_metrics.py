"""
Unit tests for the main page indicators.
"""
import os
import sys
import unittest

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tastewalk import tsv
from tastewalk.errors import DataFormatError
from tastewalk.metrics import Kind, Source, TaggedEvent, compute_indicators

from helpers import toy_path


def repeat(source, kind, n):
    return [TaggedEvent(source, kind, "u", "t")] * n


class TestIndicators(unittest.TestCase):

    def test_ratios(self):
        events = (repeat(Source.MAIN_PAGE, Kind.PLAYBACK, 50) + repeat(Source.MY_MUSIC, Kind.PLAYBACK, 100)
                  + repeat(Source.MAIN_PAGE, Kind.CLICK, 25))
        report = compute_indicators(events)
        self.assertAlmostEqual(report.playbacks_main_vs_mymusic, 0.5)
        self.assertAlmostEqual(report.likes_main_vs_mymusic, 0.0)
        self.assertAlmostEqual(report.playbacks_per_click, 2.0)

    def test_no_my_music_playbacks(self):
        report = compute_indicators(repeat(Source.MAIN_PAGE, Kind.PLAYBACK, 3))
        self.assertEqual(report.undefined(), ["playbacks_main_vs_mymusic", "likes_main_vs_mymusic",
                                              "playbacks_per_click"])
        report = compute_indicators(repeat(Source.MAIN_PAGE, Kind.CLICK, 1))
        self.assertEqual(report.undefined(), ["playbacks_main_vs_mymusic", "likes_main_vs_mymusic"])

    def test_equal_playbacks(self):
        events = repeat(Source.MAIN_PAGE, Kind.PLAYBACK, 7) + repeat(Source.MY_MUSIC, Kind.PLAYBACK, 7)
        self.assertEqual(compute_indicators(events).playbacks_main_vs_mymusic, 1.0)

    def test_hand_counted_log(self):
        report = compute_indicators(tsv.load_tagged_events(toy_path('events.tsv')))
        self.assertEqual((report.main_playbacks, report.main_likes, report.main_clicks,
                          report.my_music_playbacks), (6, 2, 3, 9))
        self.assertAlmostEqual(report.playbacks_main_vs_mymusic, 6 / 9)
        self.assertAlmostEqual(report.likes_main_vs_mymusic, 2 / 9)
        self.assertAlmostEqual(report.playbacks_per_click, 2.0)

    def test_unknown_tags(self):
        with self.assertRaises(DataFormatError):
            TaggedEvent("sidebar", "click", "u", "t")
        with self.assertRaises(DataFormatError):
            TaggedEvent("main_page", "skip", "u", "t")


if __name__ == "__main__":
    unittest.main(verbosity=2)
