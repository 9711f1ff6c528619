"""
Tab-separated input and output files.

Every file is UTF-8, one record per line. Blank lines and lines starting with
``#`` are skipped on input. Malformed lines raise DataFormatError with the file
name and line number.
"""

from __future__ import annotations

import logging
import os
from collections import defaultdict
from datetime import date
from typing import Dict, Iterable, Iterator, List, Mapping, Sequence, Tuple

from .builder import Catalog, PlaybackEvent, TrackInfo
from .coldstart import DemographyProfile, DemographySegment, segment_for
from .errors import DataFormatError, TasteGraphError
from .graph import VertexId, VertexType
from .metrics import TaggedEvent

logger = logging.getLogger(__name__)


def read_rows(path: str, columns: int) -> Iterator[Tuple[int, List[str]]]:
    name = os.path.basename(path)
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != columns:
                raise DataFormatError(f"{name}:{lineno}: expected {columns} fields, got {len(fields)}")
            yield lineno, fields


def _parse(path: str, lineno: int, parser, value: str, what: str):
    try:
        return parser(value)
    except (ValueError, TasteGraphError) as e:
        raise DataFormatError(f"{os.path.basename(path)}:{lineno}: bad {what} {value!r} ({e})") from None


def _check_field(value: str):
    if not value or "\t" in value or "\n" in value:
        raise DataFormatError(f"field {value!r} cannot be written to a tab-separated file")
    return value


def write_rows(path: str, rows: Iterable[Sequence[object]]):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write("\t".join(_check_field(str(v)) for v in row) + "\n")


def parse_vertex(token: str, default: VertexType = VertexType.TRACK) -> VertexId:
    """``type:key`` or a bare key of the default type."""
    token = token.strip()
    prefix, sep, rest = token.partition(":")
    if sep and prefix in {t.value for t in VertexType}:
        return VertexId(VertexType(prefix), rest)
    return VertexId(default, token)


def format_vertex(v: VertexId) -> str:
    return v.key if v.vtype is VertexType.TRACK else str(v)


# -- playback log: user, track, unix timestamp --

def load_playback_log(path: str) -> List[PlaybackEvent]:
    events = []
    for lineno, (u, t, ts) in read_rows(path, 3):
        events.append(_parse(path, lineno, lambda s: PlaybackEvent(u, t, int(s)), ts, "timestamp"))
    logger.info("loaded %d playback events from %s", len(events), path)
    return events


def write_playback_log(path: str, events: Iterable[PlaybackEvent]):
    write_rows(path, ((e.user, e.track, e.timestamp) for e in events))


# -- catalog: track, artist, added date; ratings: track, date, rating --

def load_catalog(catalog_path: str, ratings_path: str = None) -> Catalog:
    ratings: Dict[str, List[Tuple[date, float]]] = defaultdict(list)
    if ratings_path:
        for lineno, (t, day, value) in read_rows(ratings_path, 3):
            ratings[t].append((_parse(ratings_path, lineno, date.fromisoformat, day, "date"),
                               _parse(ratings_path, lineno, float, value, "rating")))
    tracks = {}
    for lineno, (t, a, added) in read_rows(catalog_path, 3):
        if t in tracks:
            raise DataFormatError(f"{os.path.basename(catalog_path)}:{lineno}: duplicate track {t}")
        added_date = _parse(catalog_path, lineno, date.fromisoformat, added, "date")
        history = tuple(sorted(ratings.pop(t, []))) or ((added_date, 0.0),)
        tracks[t] = _parse(catalog_path, lineno, lambda _: TrackInfo(a, added_date, history), t, "track")
    if ratings:
        logger.warning("%d rated tracks are missing from the catalog", len(ratings))
    return Catalog(tracks)


def write_catalog(catalog_path: str, ratings_path: str, catalog: Catalog):
    write_rows(catalog_path, ((t, catalog[t].artist, catalog[t].added_date.isoformat()) for t in catalog))
    write_rows(ratings_path, ((t, d.isoformat(), repr(r)) for t in catalog for d, r in catalog[t].ratings))


def load_ratings(path: str) -> Dict[str, float]:
    """System-wide rating per track: the sum of its rating history."""
    totals: Dict[str, float] = defaultdict(float)
    for lineno, (t, _, value) in read_rows(path, 3):
        totals[t] += _parse(path, lineno, float, value, "rating")
    return dict(totals)


# -- playlists: user, track --

def load_playlists(path: str) -> Dict[str, List[str]]:
    playlists: Dict[str, List[str]] = defaultdict(list)
    for _, (u, t) in read_rows(path, 2):
        if t not in playlists[u]:
            playlists[u].append(t)
    return dict(playlists)


def write_playlists(path: str, playlists: Mapping[str, Sequence[str]]):
    write_rows(path, ((u, t) for u in sorted(playlists) for t in playlists[u]))


# -- demography: user, age, sex, region --

def _age(value: str):
    value = value.strip()
    return int(value) if value and value not in ("-", "*") else None


def load_demography(path: str) -> Dict[str, DemographySegment]:
    users = {}
    for lineno, (u, age, sex, region) in read_rows(path, 4):
        users[u] = segment_for(_parse(path, lineno, _age, age, "age"), sex, region)
    return users


def write_demography(path: str, rows: Iterable[Tuple[str, int, str, str]]):
    write_rows(path, rows)


# -- demography profiles: age band, sex, region, support, vertex, weight --

def write_profiles(path: str, profiles: Iterable[DemographyProfile]):
    rows = []
    for p in profiles:
        for v, w in p.top(len(p.prefs)):
            rows.append((p.segment.age_band, p.segment.sex, p.segment.region, p.support,
                         str(v), format(w, ".12g")))
    write_rows(path, rows)


def load_profiles(path: str) -> List[DemographyProfile]:
    prefs: Dict[DemographySegment, Dict[VertexId, float]] = defaultdict(dict)
    support: Dict[DemographySegment, int] = {}
    for lineno, (age, sex, region, count, vertex, weight) in read_rows(path, 6):
        segment = DemographySegment(age, sex, region)
        support[segment] = _parse(path, lineno, int, count, "support")
        prefs[segment][parse_vertex(vertex)] = _parse(path, lineno, float, weight, "weight")
    return [DemographyProfile(s, prefs[s], support[s]) for s in sorted(prefs)]


# -- tagged events: source, kind, user, track --

def load_tagged_events(path: str) -> List[TaggedEvent]:
    return [_parse(path, lineno, lambda _: TaggedEvent(source, kind, u, t), kind, "event")
            for lineno, (source, kind, u, t) in read_rows(path, 4)]


def write_tagged_events(path: str, events: Iterable[TaggedEvent]):
    write_rows(path, ((e.source.value, e.kind.value, e.user, e.track) for e in events))
