"""Offline indicators comparing main-page activity with "My music" activity."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional

from .errors import DataFormatError


class Source(str, Enum):
    MAIN_PAGE = "main_page"
    MY_MUSIC = "my_music"


class Kind(str, Enum):
    PLAYBACK = "playback"
    LIKE = "like"
    CLICK = "click"


@dataclass(frozen=True)
class TaggedEvent:
    source: Source
    kind: Kind
    user: str
    track: str

    def __post_init__(self):
        try:
            object.__setattr__(self, "source", Source(self.source))
            object.__setattr__(self, "kind", Kind(self.kind))
        except ValueError as e:
            raise DataFormatError(str(e)) from None


@dataclass(frozen=True)
class IndicatorReport:
    """The three ratios; None marks a ratio whose denominator is zero."""
    playbacks_main_vs_mymusic: Optional[float]
    likes_main_vs_mymusic: Optional[float]
    playbacks_per_click: Optional[float]
    main_playbacks: int = 0
    main_likes: int = 0
    main_clicks: int = 0
    my_music_playbacks: int = 0

    def undefined(self) -> List[str]:
        names = ("playbacks_main_vs_mymusic", "likes_main_vs_mymusic", "playbacks_per_click")
        return [name for name in names if getattr(self, name) is None]


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def compute_indicators(events: Iterable[TaggedEvent]) -> IndicatorReport:
    counts = Counter((e.source, e.kind) for e in events)
    main_plays = counts[(Source.MAIN_PAGE, Kind.PLAYBACK)]
    main_likes = counts[(Source.MAIN_PAGE, Kind.LIKE)]
    main_clicks = counts[(Source.MAIN_PAGE, Kind.CLICK)]
    my_plays = counts[(Source.MY_MUSIC, Kind.PLAYBACK)]
    return IndicatorReport(
        playbacks_main_vs_mymusic=_ratio(main_plays, my_plays),
        likes_main_vs_mymusic=_ratio(main_likes, my_plays),
        playbacks_per_click=_ratio(main_plays, main_clicks),
        main_playbacks=main_plays,
        main_likes=main_likes,
        main_clicks=main_clicks,
        my_music_playbacks=my_plays,
    )
