"""
Builders for the four taste graph parts.

Each builder is a pure batch function of the playback log and catalog. Every
row it emits is normalized, truncated to its limit and zero-balanced, so the
parts can be merged with ``merge_parts`` without further processing.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from datetime import date
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from sklearn.metrics.pairwise import cosine_similarity
from tqdm import tqdm

from .errors import AllZeroRow, ConfigError, DataFormatError
from .graph import (DecayKind, DecayModel, EdgeType, RowKey, TasteGraph,
                    VertexId, VertexType, artist, merge_parts, normalize_row,
                    rank_scores, track, user, zero_balance_row)

logger = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400
EPOCH_ORDINAL = date(1970, 1, 1).toordinal()


@dataclass(frozen=True)
class PlaybackEvent:
    user: str
    track: str
    timestamp: int

    def __post_init__(self):
        if self.timestamp <= 0:
            raise DataFormatError(f"timestamp must be positive, got {self.timestamp}")


@dataclass(frozen=True)
class TrackInfo:
    """Catalog entry: main artist, date added and daily rating increments."""
    artist: str
    added_date: date
    ratings: Tuple[Tuple[date, float], ...]

    def __post_init__(self):
        if not self.ratings:
            raise DataFormatError("rating history must not be empty")
        dates = [d for d, _ in self.ratings]
        if dates != sorted(dates):
            raise DataFormatError("rating history must be in ascending date order")
        if any(r < 0 for _, r in self.ratings):
            raise DataFormatError("ratings must be non-negative")

    def total_rating(self, today: Optional[date] = None) -> float:
        return math.fsum(r for d, r in self.ratings if today is None or d <= today)


class Catalog:
    """Track metadata keyed by track key."""

    def __init__(self, tracks: Mapping[str, TrackInfo]):
        self._tracks = dict(tracks)

    def __contains__(self, key) -> bool:
        return key in self._tracks

    def __len__(self) -> int:
        return len(self._tracks)

    def __iter__(self):
        return iter(sorted(self._tracks))

    def __getitem__(self, key: str) -> TrackInfo:
        return self._tracks[key]

    def artist_of(self, key: str) -> str:
        return self._tracks[key].artist

    def tracks_by_artist(self) -> Dict[str, List[str]]:
        grouped: Dict[str, List[str]] = defaultdict(list)
        for key in sorted(self._tracks):
            grouped[self._tracks[key].artist].append(key)
        return dict(grouped)

    def ratings(self, today: Optional[date] = None) -> Dict[str, float]:
        """System-wide rating of every track (sum of its rating history)."""
        return {key: info.total_rating(today) for key, info in self._tracks.items()}


PlaylistStore = Mapping[str, Sequence[str]]


@dataclass(frozen=True)
class BuilderConfig:
    window_size: int = 1000
    cowindow_seconds: int = 1800
    top_k: int = 100
    outlier_zscore: float = 2.0
    similarity_floor: float = 0.01
    recent_boost: float = 2.0
    refine_iterations: int = 1
    # Preference mixing weights (history, running window, playlists).
    mix_history: float = 0.5
    mix_window: float = 0.3
    mix_playlist: float = 0.2
    history_days: int = 0               # 0 keeps the full log
    daily_play_cap: int = 10            # plays of a track per day that count, 0: no cap
    momentum: float = 1.0
    growth_window_days: int = 7
    recency_days: int = 30
    similarity_limit: int = 100
    preference_limit: int = 200
    artist_tracks_limit: int = 100
    artist_tracks_rho: float = 0.8
    progress: bool = False

    def __post_init__(self):
        positive = ("window_size", "cowindow_seconds", "top_k", "outlier_zscore",
                    "growth_window_days", "similarity_limit", "preference_limit",
                    "artist_tracks_limit")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"builder.{name} must be positive")
        if self.top_k > self.similarity_limit:
            raise ConfigError("builder.top_k must not exceed builder.similarity_limit")
        if self.recent_boost < 1.0:
            raise ConfigError("builder.recent_boost must be >= 1")
        if min(self.refine_iterations, self.history_days, self.recency_days, self.daily_play_cap) < 0:
            raise ConfigError("builder day counts and refine_iterations must be >= 0")
        mix = (self.mix_history, self.mix_window, self.mix_playlist)
        if any(m < 0 for m in mix) or sum(mix) <= 0:
            raise ConfigError("builder mixing weights must be non-negative with a positive sum")


def _sorted_log(log: Iterable[PlaybackEvent]) -> List[PlaybackEvent]:
    return sorted(log, key=lambda e: (e.timestamp, e.user, e.track))


def _shares(counts: Mapping[str, float]) -> Dict[str, float]:
    total = math.fsum(counts.values())
    if total <= 0:
        return {}
    return {k: c / total for k, c in counts.items()}


def _finish_row(scores: Mapping[VertexId, float], limit: int,
                decay: DecayModel) -> Optional[List[Tuple[VertexId, float]]]:
    """Rank, truncate, normalize and zero-balance a row. None if nothing is left."""
    ranked = [(v, s) for v, s in rank_scores(scores) if s > 0][:limit]
    if not ranked:
        return None
    try:
        weights = normalize_row([s for _, s in ranked])
    except AllZeroRow:
        return None
    return zero_balance_row([(v, w) for (v, _), w in zip(ranked, weights)], decay)


def build_user_preferences(log: Iterable[PlaybackEvent],
                           playlists: Optional[PlaylistStore] = None,
                           cfg: BuilderConfig = BuilderConfig(),
                           catalog: Optional[Catalog] = None) -> TasteGraph:
    """
    Likes (user -> track) and, given a catalog, Prefers (user -> artist) rows.

    A track's score mixes three normalized components: the share of the user's
    daily-aggregated play history (at most ``daily_play_cap`` plays of a track
    count per day), the share within the last ``window_size`` plays and the
    playlist membership share. Components the user has no data
    for are left out and the remaining mixing weights renormalised.
    """
    by_user: Dict[str, List[PlaybackEvent]] = defaultdict(list)
    for event in _sorted_log(log):
        by_user[event.user].append(event)
    playlists = playlists or {}
    users = sorted(set(by_user) | {u for u, items in playlists.items() if items})
    decay = DecayModel(DecayKind.LINEAR, cfg.preference_limit)

    rows: Dict[RowKey, list] = {}
    for u in tqdm(users, desc="User preferences", disable=not cfg.progress):
        plays = by_user.get(u, [])
        components: List[Tuple[float, Dict[str, float]]] = []
        if plays:
            history = plays
            if cfg.history_days:
                cutoff = plays[-1].timestamp - cfg.history_days * SECONDS_PER_DAY
                history = [e for e in plays if e.timestamp > cutoff]
            daily = Counter((e.track, e.timestamp // SECONDS_PER_DAY) for e in history)
            history_counts: Counter = Counter()
            for (key, _), count in daily.items():
                history_counts[key] += min(count, cfg.daily_play_cap) if cfg.daily_play_cap else count
            components.append((cfg.mix_history, _shares(history_counts)))
            window = plays[-cfg.window_size:]
            components.append((cfg.mix_window, _shares(Counter(e.track for e in window))))
        listed = list(dict.fromkeys(playlists.get(u, ())))
        if listed:
            components.append((cfg.mix_playlist, {key: 1.0 / len(listed) for key in listed}))

        mix_total = math.fsum(alpha for alpha, shares in components if shares)
        if mix_total <= 0:
            continue
        scores: Dict[str, float] = defaultdict(float)
        for alpha, shares in components:
            for key, share in shares.items():
                scores[key] += alpha / mix_total * share

        likes = _finish_row({track(k): s for k, s in scores.items()}, cfg.preference_limit, decay)
        if likes:
            rows[(user(u), EdgeType.LIKES)] = likes
        if catalog is not None:
            by_artist: Dict[str, float] = defaultdict(float)
            for key, s in scores.items():
                if key in catalog:
                    by_artist[catalog.artist_of(key)] += s
            prefers = _finish_row({artist(a): s for a, s in by_artist.items()},
                                  cfg.preference_limit, decay)
            if prefers:
                rows[(user(u), EdgeType.PREFERS)] = prefers
    return TasteGraph(rows)


def _rank_weighted(counts: sp.csr_matrix) -> sp.csr_matrix:
    # Each user row becomes 1/rank of the artist in the user's own listening,
    # scaled by sqrt(1 / artists listened) so the cosine discounts heavy listeners.
    counts = counts.tocsr()
    counts.sum_duplicates()
    data = np.empty_like(counts.data, dtype=float)
    for u in range(counts.shape[0]):
        start, end = counts.indptr[u], counts.indptr[u + 1]
        if start == end:
            continue
        cols = counts.indices[start:end]
        vals = counts.data[start:end]
        order = np.lexsort((cols, -vals))
        ranks = np.empty(end - start)
        ranks[order] = np.arange(1, end - start + 1)
        data[start:end] = (1.0 / ranks) * math.sqrt(1.0 / (end - start))
    return sp.csr_matrix((data, counts.indices.copy(), counts.indptr.copy()), shape=counts.shape)


def artist_similarity_scores(log: Iterable[PlaybackEvent], catalog: Catalog,
                             cfg: BuilderConfig = BuilderConfig()) -> Dict[str, Dict[str, float]]:
    """Artist-artist similarity before filtering and normalization."""
    events = [e for e in log if e.track in catalog]
    listeners: Dict[str, set] = defaultdict(set)
    for e in events:
        listeners[e.track].add(e.user)

    by_artist = catalog.tracks_by_artist()
    representative = set()
    for tracks in by_artist.values():
        ranked = sorted(tracks, key=lambda t: (-len(listeners.get(t, ())), t))
        representative.update(ranked[:max(1, math.ceil(len(ranked) / 2))])

    counts = Counter((e.user, catalog.artist_of(e.track)) for e in events if e.track in representative)
    artists = sorted(by_artist)
    if not counts or len(artists) < 2:
        return {}
    users = sorted({u for u, _ in counts})
    u_index = {u: i for i, u in enumerate(users)}
    a_index = {a: i for i, a in enumerate(artists)}
    keys = sorted(counts)
    matrix = sp.csr_matrix(
        ([float(counts[k]) for k in keys],
         ([u_index[u] for u, _ in keys], [a_index[a] for _, a in keys])),
        shape=(len(users), len(artists)))

    if cfg.refine_iterations:
        # Depends on the counts only: every further pass yields the same matrix.
        sim = cosine_similarity(_rank_weighted(matrix).T)
    else:
        sim = cosine_similarity((matrix > 0).astype(float).T)
    np.fill_diagonal(sim, 0.0)

    scores: Dict[str, Dict[str, float]] = {}
    for i, a in enumerate(artists):
        nz = np.nonzero(sim[i] > 0)[0]
        if len(nz):
            scores[a] = {artists[j]: float(sim[i, j]) for j in nz}
    return scores


def track_similarity_scores(log: Iterable[PlaybackEvent],
                            cfg: BuilderConfig = BuilderConfig()) -> Dict[str, Dict[str, float]]:
    """
    Co-play counts within ``cowindow_seconds`` with a popularity baseline.

    For each play, every distinct other track played by the same user within the
    following window counts once: score(A, B) = co(A, B) / sqrt(pop(A) pop(B)).
    """
    events = _sorted_log(log)
    popularity = Counter(e.track for e in events)
    by_user: Dict[str, List[PlaybackEvent]] = defaultdict(list)
    for e in events:
        by_user[e.user].append(e)

    co: Counter = Counter()
    for plays in tqdm(by_user.values(), desc="Track co-plays", disable=not cfg.progress):
        n = len(plays)
        for i in range(n):
            a = plays[i].track
            partners = set()
            k = i + 1
            while k < n and plays[k].timestamp - plays[i].timestamp <= cfg.cowindow_seconds:
                if plays[k].track != a:
                    partners.add(plays[k].track)
                k += 1
            for b in partners:
                co[(a, b) if a < b else (b, a)] += 1

    scores: Dict[str, Dict[str, float]] = defaultdict(dict)
    for (a, b), count in co.items():
        s = count / math.sqrt(popularity[a] * popularity[b])
        scores[a][b] = s
        scores[b][a] = s
    return dict(scores)


def _drop_outliers(candidates: Dict[str, float], zscore: float) -> Dict[str, float]:
    if len(candidates) < 2:
        return candidates
    values = np.fromiter(candidates.values(), dtype=float)
    std = values.std()
    if std == 0:
        return candidates
    mean = values.mean()
    return {k: s for k, s in candidates.items() if (s - mean) / std >= -zscore}


def _similarity_rows(scores: Mapping[str, Mapping[str, float]], vtype: VertexType,
                     etype: EdgeType, cfg: BuilderConfig) -> Dict[RowKey, list]:
    decay = DecayModel(DecayKind.LINEAR, cfg.similarity_limit)
    rows: Dict[RowKey, list] = {}
    for key in sorted(scores):
        candidates = _drop_outliers(dict(scores[key]), cfg.outlier_zscore)
        candidates = {k: s for k, s in candidates.items() if s >= cfg.similarity_floor}
        row = _finish_row({VertexId(vtype, k): s for k, s in candidates.items()}, cfg.top_k, decay)
        if row:
            rows[(VertexId(vtype, key), etype)] = row
    return rows


def build_artist_similarity(log: Iterable[PlaybackEvent], catalog: Catalog,
                            cfg: BuilderConfig = BuilderConfig()) -> TasteGraph:
    scores = artist_similarity_scores(log, catalog, cfg)
    return TasteGraph(_similarity_rows(scores, VertexType.ARTIST, EdgeType.SIMILAR_ARTIST, cfg))


def build_track_similarity(log: Iterable[PlaybackEvent],
                           cfg: BuilderConfig = BuilderConfig()) -> TasteGraph:
    scores = track_similarity_scores(log, cfg)
    return TasteGraph(_similarity_rows(scores, VertexType.TRACK, EdgeType.SIMILAR_TRACK, cfg))


def momentum_rating(info: TrackInfo, today: date, cfg: BuilderConfig = BuilderConfig()) -> float:
    """Total rating boosted by recent growth and by recent introduction."""
    horizon = cfg.growth_window_days
    total = last = prior = 0.0
    for day, rating in info.ratings:
        age = (today - day).days
        if age < 0:
            continue
        total += rating
        if age < horizon:
            last += rating
        elif age < 2 * horizon:
            prior += rating
    growth = (last - prior) / (prior + 1.0)
    value = total * (1.0 + cfg.momentum * max(0.0, growth))
    if 0 <= (today - info.added_date).days <= cfg.recency_days:
        value *= cfg.recent_boost
    return value


def build_artist_tracks(catalog: Catalog, today: date,
                        cfg: BuilderConfig = BuilderConfig()) -> TasteGraph:
    decay = DecayModel(DecayKind.EXPONENTIAL, cfg.artist_tracks_limit, cfg.artist_tracks_rho)
    rows: Dict[RowKey, list] = {}
    for a, tracks in tqdm(sorted(catalog.tracks_by_artist().items()),
                          desc="Artist tracks", disable=not cfg.progress):
        scores = {track(t): momentum_rating(catalog[t], today, cfg) for t in tracks}
        row = _finish_row(scores, cfg.artist_tracks_limit, decay)
        if row is None:
            logger.warning("artist %s has no rated tracks, row dropped", a)
            continue
        rows[(artist(a), EdgeType.ARTIST_TRACK)] = row
    return TasteGraph(rows)


def build_taste_graph(log: Sequence[PlaybackEvent], catalog: Catalog,
                      playlists: Optional[PlaylistStore], today: date,
                      cfg: BuilderConfig = BuilderConfig()) -> TasteGraph:
    parts = [build_user_preferences(log, playlists, cfg, catalog=catalog)]
    if log:
        parts.append(build_artist_similarity(log, catalog, cfg))
        parts.append(build_track_similarity(log, cfg))
    if len(catalog):
        parts.append(build_artist_tracks(catalog, today, cfg))
    graph = merge_parts(parts)
    logger.info("built taste graph: %d vertices, %d rows, %d edges",
                len(graph), graph.num_rows, graph.num_edges)
    return graph


def top_tracks(log: Iterable[PlaybackEvent], today: date, days: int = 30,
               n: int = 100) -> List[Tuple[VertexId, float]]:
    """Most played tracks over the ``days`` days up to and including ``today``."""
    if days < 1 or n < 1:
        raise ConfigError("top_tracks needs days >= 1 and n >= 1")
    end = (today.toordinal() - EPOCH_ORDINAL + 1) * SECONDS_PER_DAY
    start = end - days * SECONDS_PER_DAY
    counts = Counter(e.track for e in log if start <= e.timestamp < end)
    return rank_scores({track(k): float(c) for k, c in counts.items()}, n)
