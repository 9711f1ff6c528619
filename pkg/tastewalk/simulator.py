"""
Synthetic listening world and main-page replay.

The world has two latent genres. Every user leans towards one genre, plays
mostly tracks of that genre and reacts to main-page items accordingly. Replaying
a personalized main page and a global top list against the same users yields
tagged events for the indicator harness.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .builder import Catalog, PlaybackEvent, TrackInfo, build_taste_graph, top_tracks
from .config import Settings
from .graph import TasteGraph, VertexId, user
from .metrics import IndicatorReport, Kind, Source, TaggedEvent, compute_indicators
from .walk import main_page

logger = logging.getLogger(__name__)

GENRES = ("g0", "g1")
SEXES = ("M", "F")
REGIONS = ("north", "south", "east", "west")


@dataclass(frozen=True)
class WorldConfig:
    users: int = 500
    artists_per_genre: int = 10
    tracks_per_artist: int = 10
    purity: float = 0.95
    history_plays: int = 40
    session_gap_seconds: int = 60
    my_music_plays: int = 10
    page_size: int = 20
    pool: int = 100
    top_window_days: int = 30
    match_click_probability: float = 0.4
    other_click_probability: float = 0.02
    extra_plays_per_click: float = 1.0
    like_probability: float = 0.3
    today: date = date(2026, 3, 1)
    seed: int = 0
    progress: bool = False


@dataclass
class SyntheticWorld:
    log: List[PlaybackEvent]
    catalog: Catalog
    playlists: Dict[str, List[str]]
    demography: List[Tuple[str, int, str, str]]
    user_genre: Dict[str, str]
    track_genre: Dict[str, str]
    today: date


def generate_world(cfg: WorldConfig = WorldConfig()) -> SyntheticWorld:
    rng = np.random.default_rng(cfg.seed)
    tracks: Dict[str, List[str]] = {g: [] for g in GENRES}
    track_genre: Dict[str, str] = {}
    artist_of: Dict[str, str] = {}
    for g in GENRES:
        for a in range(cfg.artists_per_genre):
            artist_key = f"{g}-a{a:02d}"
            for t in range(cfg.tracks_per_artist):
                key = f"{artist_key}-t{t:02d}"
                tracks[g].append(key)
                track_genre[key] = g
                artist_of[key] = artist_key

    # Zipf-like popularity inside each genre keeps the global top list mixed.
    popularity = {g: 1.0 / np.arange(1, len(tracks[g]) + 1) ** 0.8 for g in GENRES}
    for g in GENRES:
        popularity[g] /= popularity[g].sum()
        rng.shuffle(popularity[g])

    start = datetime.combine(cfg.today - timedelta(days=60), datetime.min.time(), timezone.utc)
    base = int(start.timestamp())
    log: List[PlaybackEvent] = []
    playlists: Dict[str, List[str]] = {}
    demography = []
    user_genre: Dict[str, str] = {}
    for i in tqdm(range(cfg.users), desc="Synthetic users", disable=not cfg.progress):
        u = f"u{i:04d}"
        own = GENRES[i % 2]
        other = GENRES[1 - i % 2]
        user_genre[u] = own
        ts = base + int(rng.integers(0, 50 * 86400))
        for _ in range(cfg.history_plays):
            g = own if rng.random() < cfg.purity else other
            key = tracks[g][int(rng.choice(len(tracks[g]), p=popularity[g]))]
            log.append(PlaybackEvent(u, key, ts))
            ts += cfg.session_gap_seconds
        favourites = rng.choice(len(tracks[own]), size=3, replace=False, p=popularity[own])
        playlists[u] = [tracks[own][int(j)] for j in favourites]
        age = int(rng.integers(15, 25)) if own == GENRES[0] else int(rng.integers(35, 60))
        demography.append((u, age, SEXES[int(rng.integers(0, 2))], REGIONS[int(rng.integers(0, 4))]))

    plays: Dict[str, int] = {key: 0 for key in track_genre}
    for e in log:
        plays[e.track] += 1
    added = cfg.today - timedelta(days=365)
    catalog = Catalog({key: TrackInfo(artist_of[key], added, ((added, float(plays[key])),))
                       for key in track_genre})
    logger.info("synthetic world: %d users, %d tracks, %d plays", cfg.users, len(catalog), len(log))
    return SyntheticWorld(log, catalog, playlists, demography, user_genre, track_genre, cfg.today)


PageFunction = Callable[[str], Sequence[VertexId]]


def replay_main_page(world: SyntheticWorld, page: PageFunction,
                     cfg: WorldConfig = WorldConfig(), seed: int = 0) -> List[TaggedEvent]:
    """Show every user a page and record clicks, playbacks and likes, plus "My music" playbacks."""
    rng = np.random.default_rng(seed)
    events: List[TaggedEvent] = []
    for u in tqdm(sorted(world.user_genre), desc="Main page replay", disable=not cfg.progress):
        own = world.user_genre[u]
        for v in page(u):
            match = world.track_genre.get(v.key) == own
            p = cfg.match_click_probability if match else cfg.other_click_probability
            if rng.random() >= p:
                continue
            events.append(TaggedEvent(Source.MAIN_PAGE, Kind.CLICK, u, v.key))
            for _ in range(1 + int(rng.poisson(cfg.extra_plays_per_click))):
                events.append(TaggedEvent(Source.MAIN_PAGE, Kind.PLAYBACK, u, v.key))
            if match and rng.random() < cfg.like_probability:
                events.append(TaggedEvent(Source.MAIN_PAGE, Kind.LIKE, u, v.key))
        own_tracks = world.playlists.get(u, [])
        for j in range(cfg.my_music_plays):
            if own_tracks:
                events.append(TaggedEvent(Source.MY_MUSIC, Kind.PLAYBACK, u, own_tracks[j % len(own_tracks)]))
    return events


def global_top_page(world: SyntheticWorld, cfg: WorldConfig = WorldConfig()) -> PageFunction:
    """The same page for everyone: the most played tracks of the last ``top_window_days`` days."""
    top = [v for v, _ in top_tracks(world.log, world.today, cfg.top_window_days, cfg.page_size)]
    return lambda u: top


def personalized_page(world: SyntheticWorld, graph: TasteGraph, settings: Settings = Settings(),
                      cfg: WorldConfig = WorldConfig()) -> PageFunction:
    ratings = world.catalog.ratings(world.today)

    def page(u: str) -> List[VertexId]:
        ranked = main_page(graph, settings.balancing, user(u), ratings, cfg.pool, cfg.page_size,
                           settings.personalize)
        return [v for v, _ in ranked]
    return page


def compare_main_page(world: SyntheticWorld, settings: Settings = Settings(),
                      cfg: WorldConfig = WorldConfig(),
                      graph: Optional[TasteGraph] = None) -> Dict[str, IndicatorReport]:
    """Indicators of the personalized main page against the global top list."""
    if graph is None:
        graph = build_taste_graph(world.log, world.catalog, world.playlists, world.today, settings.builder)
    pages = {"personalized": personalized_page(world, graph, settings, cfg),
             "baseline": global_top_page(world, cfg)}
    reports = {name: compute_indicators(replay_main_page(world, page, cfg, cfg.seed + 1))
               for name, page in pages.items()}
    for name, report in reports.items():
        logger.info("%s: playbacks main/my music = %s", name, report.playbacks_main_vs_mymusic)
    return reports
