"""
Radio sequences: random pick from a preference vector with rejection.

Items are drawn proportionally to their weight from a cumulative vector. Each
drawn item is then accepted with probability p_a, the product of four rejection
factors (repeat, artist presence, artist distance and coherence with the tail
of the sequence), so the sequence stays relevant and varied at the same time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import (ConfigError, EmptyDistribution, InsufficientCandidates,
                     OutOfRange)
from .graph import (ZERO, BalancingConfig, StateVector, TasteGraph, VertexId,
                    VertexType, track_artists, transition, uniform,
                    vertex_order)
from .walk import PersonalizationWeights, personalize

logger = logging.getLogger(__name__)

COHERENCE_FLOOR = 0.05


@dataclass(frozen=True, eq=False)
class CumulativeVector:
    order: Tuple[VertexId, ...]
    cum: np.ndarray

    @property
    def total(self) -> float:
        return float(self.cum[-1])

    def __len__(self):
        return len(self.order)


def build_cumulative(x: Mapping[VertexId, float]) -> CumulativeVector:
    """Running sums of ``x`` over ascending vertex order; θ and empty weights skipped."""
    items = sorted(((v, w) for v, w in x.items() if w > 0 and v != ZERO),
                   key=lambda item: vertex_order(item[0]))
    if not items:
        raise EmptyDistribution("preference vector has no positive weight")
    cum = np.cumsum(np.fromiter((w for _, w in items), dtype=float, count=len(items)))
    return CumulativeVector(tuple(v for v, _ in items), cum)


def pick(cv: CumulativeVector, r: float) -> VertexId:
    """The item whose half-open interval [cum[i-1], cum[i]) contains ``r``."""
    if not 0.0 <= r < cv.total:
        raise OutOfRange(f"r={r} outside [0, {cv.total})")
    return cv.order[int(np.searchsorted(cv.cum, r, side="right"))]


@dataclass(frozen=True)
class RejectionConfig:
    presence_decay: float = 0.5
    distance_decay: float = 0.5
    repeat_window: int = 0              # 0: whole sequence, -1: repeats allowed
    coherence_weights: PersonalizationWeights = field(
        default_factory=lambda: PersonalizationWeights((0.6, 0.3, 0.1, 0.0)))
    coherence_lookback: int = 3         # 0 disables the coherence factor
    max_attempts: int = 50

    def __post_init__(self):
        for name in ("presence_decay", "distance_decay"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"rejection.{name} must lie in [0, 1]")
        if self.repeat_window < -1:
            raise ConfigError("rejection.repeat_window must be >= -1")
        if self.coherence_lookback < 0:
            raise ConfigError("rejection.coherence_lookback must be >= 0")
        if self.max_attempts < 1:
            raise ConfigError("rejection.max_attempts must be >= 1")


@dataclass(frozen=True)
class RadioSequence:
    items: Tuple[VertexId, ...]
    complete: bool
    draws: int


class RejectionModel:
    """
    Rejection factors for one sequence generation.

    ``artists`` maps tracks to their main artist; a track without one is its
    own artist. Coherence scores are normalized over ``candidates`` (or the
    tail's one-step neighbourhood when there are none) and cached per
    sequence tail.
    """

    def __init__(self, cfg: RejectionConfig, graph: Optional[TasteGraph] = None,
                 bal_cfg: Optional[BalancingConfig] = None,
                 artists: Optional[Mapping[VertexId, VertexId]] = None,
                 candidates: Optional[Mapping[VertexId, float]] = None):
        self.cfg = cfg
        self.graph = graph
        self.bal_cfg = bal_cfg or BalancingConfig()
        if artists is None:
            artists = track_artists(graph) if graph is not None else {}
        self.artists = artists
        self.candidates = dict(candidates or {})
        self._coherence: Dict[Tuple[VertexId, ...], Dict[VertexId, float]] = {}

    def artist_of(self, v: VertexId) -> VertexId:
        return self.artists.get(v, v)

    def repeat_factor(self, v: VertexId, sequence: Sequence[VertexId]) -> float:
        window = self.cfg.repeat_window
        if window < 0:
            return 1.0
        recent = sequence if window == 0 else sequence[-window:]
        return 0.0 if v in recent else 1.0

    def presence_factor(self, v: VertexId, sequence: Sequence[VertexId]) -> float:
        a = self.artist_of(v)
        counta = sum(1 for s in sequence if self.artist_of(s) == a)
        return self.cfg.presence_decay ** counta

    def distance_factor(self, v: VertexId, sequence: Sequence[VertexId]) -> float:
        a = self.artist_of(v)
        for tailposa, s in enumerate(reversed(sequence), start=1):
            if self.artist_of(s) == a:
                return 1.0 - self.cfg.distance_decay ** tailposa
        return 1.0

    def coherence_factor(self, v: VertexId, sequence: Sequence[VertexId]) -> float:
        lookback = self.cfg.coherence_lookback
        if lookback == 0 or not sequence or self.graph is None:
            return 1.0
        scores = self._coherence_scores(tuple(sequence[-lookback:]), v)
        return scores.get(v, 1.0)

    def _coherence_scores(self, tail: Tuple[VertexId, ...], v: VertexId) -> Dict[VertexId, float]:
        cached = self._coherence.get(tail)
        if cached is not None and v in cached:
            return cached
        source = uniform(t for t in tail if t in self.graph)
        pool = self.candidates or self._neighbourhood(source)
        target = pool if v in pool else {**pool, v: 1.0}
        if not source:
            scores = {c: 1.0 for c in target}
        else:
            ranked = personalize(self.graph, self.bal_cfg, source, target, self.cfg.coherence_weights)
            best = ranked[0][1] if ranked else 0.0
            if best <= 0:
                scores = {c: 1.0 for c, _ in ranked}
            else:
                scores = {c: min(1.0, max(COHERENCE_FLOOR, s / best)) for c, s in ranked}
        self._coherence[tail] = scores
        return scores

    def _neighbourhood(self, source: Mapping[VertexId, float]) -> Dict[VertexId, float]:
        # Without a candidate pool, scores are normalized over the tracks one
        # step away from the tail.
        if not source:
            return {}
        return {t: m for t, m in transition(self.graph, self.bal_cfg, source).items()
                if t.vtype is VertexType.TRACK and m > 0}

    def probability(self, v: VertexId, sequence: Sequence[VertexId]) -> float:
        p = self.repeat_factor(v, sequence)
        if p == 0.0:
            return 0.0
        p *= self.presence_factor(v, sequence) * self.distance_factor(v, sequence)
        if p == 0.0:
            return 0.0
        return p * self.coherence_factor(v, sequence)


def rejection_probability(v: VertexId, sequence: Sequence[VertexId], cfg: RejectionConfig,
                          graph: Optional[TasteGraph] = None,
                          bal_cfg: Optional[BalancingConfig] = None,
                          artists: Optional[Mapping[VertexId, VertexId]] = None,
                          candidates: Optional[Mapping[VertexId, float]] = None) -> float:
    """
    Acceptance probability of ``v`` after ``sequence``.

    Coherence is normalized over ``candidates`` when given, else over the
    tracks one step away from the sequence tail.
    """
    return RejectionModel(cfg, graph, bal_cfg, artists, candidates).probability(v, sequence)


def generate_sequence(x: Mapping[VertexId, float], length: int, cfg: RejectionConfig,
                      rng_seed: int, graph: Optional[TasteGraph] = None,
                      bal_cfg: Optional[BalancingConfig] = None,
                      artists: Optional[Mapping[VertexId, VertexId]] = None) -> RadioSequence:
    """
    Draw a sequence of ``length`` items from ``x``.

    A drawn item is accepted when a second uniform draw falls below its
    acceptance probability; rejected items stay in the pool and can be drawn
    again. Generation stops after ``max_attempts * length`` draws, returning
    an incomplete sequence.
    """
    if length < 0:
        raise ConfigError("sequence length must be >= 0")
    cv = build_cumulative(x)
    if len(cv) < length:
        raise InsufficientCandidates(f"{len(cv)} candidate items for a sequence of {length}")
    candidates = {v: w for v, w in x.items() if w > 0 and v != ZERO}
    model = RejectionModel(cfg, graph, bal_cfg, artists, candidates)
    rng = np.random.default_rng(rng_seed)
    upper = np.nextafter(cv.total, 0.0)

    items: List[VertexId] = []
    draws = 0
    budget = cfg.max_attempts * length
    while len(items) < length and draws < budget:
        v = pick(cv, min(rng.random() * cv.total, upper))
        draws += 1
        if rng.random() < model.probability(v, items):
            items.append(v)

    complete = len(items) == length
    if not complete:
        logger.warning("radio sequence stopped at %d of %d items after %d draws",
                       len(items), length, draws)
    return RadioSequence(tuple(items), complete, draws)
