"""
Cold start for new users and new items.

New users borrow preferences from the demography profile of their segment.
New items get a novelty relevance from how many users showed interest in them
since they were added; novel enough items receive a heavy link from their
artist and a rating boost, so walks can reach them before they gather history.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from datetime import date
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Set, Tuple

from .builder import Catalog, PlaybackEvent, PlaylistStore
from .errors import ConfigError, DataFormatError, FutureDate
from .graph import (BalancingConfig, EdgeType, StateVector, TasteGraph,
                    VertexId, VertexType, artist, normalized, rank_scores,
                    track)
from .walk import Ranking, WalkParams, recommend_from_seed

logger = logging.getLogger(__name__)

WILDCARD = "*"
AGE_BANDS = ((17, "<=17"), (24, "18-24"), (34, "25-34"), (44, "35-44"))
OLDEST_BAND = "45+"
BOOST_CEILING = 0.95


class DemographySegment(NamedTuple):
    age_band: str
    sex: str
    region: str

    def __str__(self):
        return f"{self.age_band}/{self.sex}/{self.region}"


GLOBAL_SEGMENT = DemographySegment(WILDCARD, WILDCARD, WILDCARD)


def age_band(age: Optional[int]) -> str:
    if age is None or age < 0:
        return WILDCARD
    for upper, band in AGE_BANDS:
        if age <= upper:
            return band
    return OLDEST_BAND


def segment_for(age: Optional[int], sex: Optional[str], region: Optional[str]) -> DemographySegment:
    sex = (sex or "").strip().upper()
    region = (region or "").strip()
    return DemographySegment(age_band(age),
                             sex if sex in ("M", "F") else WILDCARD,
                             region or WILDCARD)


def fallback_chain(segment: DemographySegment) -> List[DemographySegment]:
    """The segment, then region, sex and age wildcarded in turn; always ends with the global segment."""
    steps = [segment,
             segment._replace(region=WILDCARD),
             segment._replace(region=WILDCARD, sex=WILDCARD),
             GLOBAL_SEGMENT]
    return list(dict.fromkeys(steps))


@dataclass(frozen=True)
class DemographyProfile:
    segment: DemographySegment
    prefs: Mapping[VertexId, float]
    support: int

    def top(self, n: int) -> Ranking:
        return rank_scores(self.prefs, n)


@dataclass(frozen=True)
class ColdStartConfig:
    min_support: int = 10
    full_strength: int = 50

    def __post_init__(self):
        if self.min_support < 1 or self.full_strength < 1:
            raise ConfigError("coldstart.min_support and coldstart.full_strength must be >= 1")


def build_demography_profiles(log: Iterable[PlaybackEvent],
                              users: Mapping[str, DemographySegment],
                              min_support: int = 10) -> List[DemographyProfile]:
    """
    Aggregate distinct listeners per track for every segment and its coarser parents.

    Segments with fewer than ``min_support`` users are left out; the global
    profile is always kept.
    """
    listeners: Dict[DemographySegment, Dict[str, Set[str]]] = defaultdict(lambda: defaultdict(set))
    members: Dict[DemographySegment, Set[str]] = defaultdict(set)
    for event in log:
        for segment in fallback_chain(users.get(event.user, GLOBAL_SEGMENT)):
            listeners[segment][event.track].add(event.user)
            members[segment].add(event.user)

    profiles = []
    for segment in sorted(listeners):
        support = len(members[segment])
        if support < min_support and segment != GLOBAL_SEGMENT:
            logger.debug("segment %s dropped, support %d < %d", segment, support, min_support)
            continue
        counts = {track(key): float(len(who)) for key, who in listeners[segment].items()}
        profiles.append(DemographyProfile(segment, normalized(counts), support))
    return profiles


def resolve_profile(profiles: Iterable[DemographyProfile],
                    segment: DemographySegment) -> Optional[DemographyProfile]:
    by_segment = {p.segment: p for p in profiles}
    for candidate in fallback_chain(segment):
        if candidate in by_segment:
            return by_segment[candidate]
    return None


def mix_preferences(own: Mapping[VertexId, float], profile: DemographyProfile,
                    own_strength: Optional[int] = None, full_strength: int = 50) -> StateVector:
    """
    Convex mix of the user's own preferences with a demography profile.

    The own share mu = min(1, own_strength / full_strength), where
    own_strength defaults to the number of distinct own items.
    """
    if full_strength < 1:
        raise ConfigError("full_strength must be >= 1")
    own_n = normalized(own)
    strength = len(own_n) if own_strength is None else own_strength
    mu = min(1.0, strength / full_strength)
    if mu <= 0:
        return dict(profile.prefs)
    if mu >= 1:
        return own_n
    mixed = {v: mu * own_n.get(v, 0.0) + (1.0 - mu) * profile.prefs.get(v, 0.0)
             for v in set(own_n) | set(profile.prefs)}
    return normalized(mixed)


def cold_start_recommend(graph: TasteGraph, bal_cfg: BalancingConfig, own: Mapping[VertexId, float],
                         profile: DemographyProfile, params: WalkParams = WalkParams(),
                         cfg: ColdStartConfig = ColdStartConfig()) -> Ranking:
    """Recommendations for a user with little or no history."""
    own = {v: w for v, w in own.items() if w > 0}
    fallback = [(v, s) for v, s in profile.top(len(profile.prefs))
                if v.vtype is VertexType.TRACK and v not in own][:params.top_n]
    if not own:
        return fallback
    seed = {v: w for v, w in mix_preferences(own, profile, full_strength=cfg.full_strength).items()
            if v in graph}
    if not seed:
        return fallback
    return recommend_from_seed(graph, bal_cfg, seed, params, known=own)


@dataclass(frozen=True)
class NoveltyConfig:
    ti: float = 1.0
    novelty_limit: float = 5.0
    recency_horizon_days: int = 14
    boost_link_weight: float = 0.5
    rating_boost: float = 2.0

    def __post_init__(self):
        if self.ti <= 0:
            raise ConfigError("novelty.ti must be positive")
        if self.novelty_limit <= 0:
            raise ConfigError("novelty.novelty_limit must be positive")
        if self.recency_horizon_days < 0:
            raise ConfigError("novelty.recency_horizon_days must be >= 0")
        if not 0.0 < self.boost_link_weight < 1.0:
            raise ConfigError("novelty.boost_link_weight must lie in (0, 1)")
        if self.rating_boost < 1.0:
            raise ConfigError("novelty.rating_boost must be >= 1")


def novelty_relevance(interested_users: int, added_date: date, today: date, ti: float) -> float:
    """interested_users / days ** ti, where days counts calendar days in the system (at least 1)."""
    if added_date > today:
        raise FutureDate(f"item added on {added_date}, after {today}")
    if interested_users < 0:
        raise DataFormatError("interested_users must be >= 0")
    if ti <= 0:
        raise ConfigError("ti must be positive")
    days = (today - added_date).days + 1
    return interested_users / days ** ti


def interested_users(log: Iterable[PlaybackEvent], playlists: Optional[PlaylistStore] = None) -> Dict[str, int]:
    """Distinct users who played a track or added it to a playlist."""
    who: Dict[str, Set[str]] = defaultdict(set)
    for event in log:
        who[event.track].add(event.user)
    for u, items in (playlists or {}).items():
        for key in items:
            who[key].add(u)
    return {key: len(users) for key, users in who.items()}


@dataclass(frozen=True)
class BoostResult:
    graph: TasteGraph
    ratings: Dict[str, float]
    boosted: Tuple[VertexId, ...]
    overflow: bool


def novel_tracks(catalog: Catalog, cfg: NoveltyConfig, today: date,
                 stats: Mapping[str, int]) -> List[str]:
    novel = []
    for key in catalog:
        info = catalog[key]
        if info.added_date > today:
            logger.debug("track %s is scheduled for %s, not novel yet", key, info.added_date)
            continue
        if (today - info.added_date).days > cfg.recency_horizon_days:
            continue
        if novelty_relevance(stats.get(key, 0), info.added_date, today, cfg.ti) >= cfg.novelty_limit:
            novel.append(key)
    return novel


def boost_new_items(graph: TasteGraph, catalog: Catalog, cfg: NoveltyConfig, today: date,
                    stats: Mapping[str, int], ratings: Optional[Mapping[str, float]] = None) -> BoostResult:
    """
    Give novel tracks a heavy link from their artist and a rating boost.

    In each affected ArtistTrack row the novel tracks get ``boost_link_weight``
    each and the other entries (θ included) are rescaled to fill the rest of
    the row. Boosts that would take more than 0.95 of a row are scaled down and
    reported through ``overflow``.
    """
    ratings = dict(ratings if ratings is not None else catalog.ratings(today))
    novel = novel_tracks(catalog, cfg, today, stats)
    if not novel:
        return BoostResult(graph, ratings, (), False)

    by_artist: Dict[VertexId, List[VertexId]] = defaultdict(list)
    for key in novel:
        by_artist[artist(catalog.artist_of(key))].append(track(key))
        if key in ratings:
            ratings[key] *= cfg.rating_boost

    overflow = False
    updates = {}
    for a in sorted(by_artist):
        boosted = by_artist[a]
        weight = cfg.boost_link_weight
        if weight * len(boosted) > BOOST_CEILING:
            overflow = True
            weight = BOOST_CEILING / len(boosted)
            logger.warning("boost of %d tracks by %s exceeds %.2f of the row, scaled to %.3f each",
                           len(boosted), a.key, BOOST_CEILING, weight)
        is_boosted = set(boosted)
        siblings = [(t, w) for t, w in graph.row(a, EdgeType.ARTIST_TRACK) if t not in is_boosted]
        rest = math.fsum(w for _, w in siblings)
        if rest <= 0:
            row = [(t, 1.0 / len(boosted)) for t in boosted]
        else:
            scale = (1.0 - weight * len(boosted)) / rest
            row = [(t, weight) for t in boosted] + [(t, w * scale) for t, w in siblings]
        updates[(a, EdgeType.ARTIST_TRACK)] = row

    logger.info("boosted %d novel tracks across %d artists", len(novel), len(by_artist))
    return BoostResult(graph.with_rows(updates), ratings,
                       tuple(sorted(track(k) for k in novel)), overflow)
