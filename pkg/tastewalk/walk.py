"""
Random-walk queries over a taste graph.

All functions are pure over an immutable snapshot. Vectors are exchanged as
``{vertex: mass}`` dicts; the iterations themselves run on the snapshot's
sparse transition matrix, which is built once per balancing table.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Collection, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ColdUser, ConfigError, EmptySeed, EmptyTarget, UnknownVertex
from .graph import (ZERO, BalancingConfig, StateVector, TasteGraph, VertexId,
                    VertexType, next_vector, normalized, rank_scores,
                    total_mass, track, transition_matrix,
                    uniform, vertex_order)

logger = logging.getLogger(__name__)

Ranking = List[Tuple[VertexId, float]]


class RestartMode(str, Enum):
    TWO_STAGE = "two_stage"   # restart at next(seed)
    CLASSIC = "classic"       # restart at the seed itself


@dataclass(frozen=True)
class WalkParams:
    alpha: float = 0.5
    max_iterations: int = 200
    epsilon: float = 1e-10
    suppression: float = -1.0
    top_n: int = 10
    restart: RestartMode = RestartMode.TWO_STAGE

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"walk.alpha must lie in (0, 1), got {self.alpha}")
        if self.epsilon <= 0:
            raise ConfigError("walk.epsilon must be positive")
        if self.max_iterations < 1:
            raise ConfigError("walk.max_iterations must be >= 1")
        if not -1.0 <= self.suppression <= 1.0:
            raise ConfigError("walk.suppression must lie in [-1, 1]")
        if self.top_n < 1:
            raise ConfigError("walk.top_n must be >= 1")
        object.__setattr__(self, "restart", RestartMode(self.restart))


@dataclass(frozen=True)
class PersonalizationWeights:
    """(w_0, ..., w_n): w_i weighs paths of i + 1 steps, w_n the target's own weights."""
    weights: Tuple[float, ...] = (0.5, 0.3, 0.2, 0.1)

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        if len(weights) < 2:
            raise ConfigError("personalization needs at least two weights (w_0 and w_n)")
        object.__setattr__(self, "weights", weights)

    @property
    def depth(self) -> int:
        return len(self.weights) - 1


@dataclass(frozen=True)
class MainPageConfig:
    pool: int = 1000
    top: int = 100
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.pool < 1 or self.top < 1:
            raise ConfigError("mainpage.pool and mainpage.top must be >= 1")
        if self.noise_sigma < 0:
            raise ConfigError("mainpage.noise_sigma must be >= 0")


@dataclass(frozen=True)
class WalkResult:
    pre_restart: StateVector
    post_restart: StateVector
    converged: bool
    iterations: int
    residual: float


def _check_seed(graph: TasteGraph, seed: Mapping[VertexId, float]):
    if not seed or total_mass(seed) <= 0:
        raise EmptySeed("seed vector has no mass")
    for v in seed:
        if v not in graph:
            raise UnknownVertex(f"unknown vertex {v}")


def rwr_steady_state(graph: TasteGraph, cfg: BalancingConfig, seed: Mapping[VertexId, float],
                     params: WalkParams = WalkParams()) -> WalkResult:
    """
    Random walk with restart from ``seed``.

    Each iteration first propagates the state one step (the pre-restart vector)
    and then mixes in the restart distribution with probability alpha. The
    two-stage mode restarts at next(seed), so seed vertices only get mass that
    flows back to them.
    """
    _check_seed(graph, seed)
    matrix = transition_matrix(graph, cfg)
    s = matrix.to_array(normalized(seed))
    alpha = params.alpha
    restart = alpha * (matrix.step(s) if params.restart is RestartMode.TWO_STAGE else s)

    x = s
    y = np.zeros_like(s)
    residual = math.inf
    iterations = 0
    for iterations in range(1, params.max_iterations + 1):
        y = matrix.step(x)
        x_new = (1.0 - alpha) * y + restart
        residual = float(np.abs(x_new - x).sum())
        x = x_new
        if residual < params.epsilon:
            break

    converged = residual < params.epsilon or residual <= 100 * params.epsilon
    if not converged:
        logger.warning("random walk did not converge after %d iterations (residual %.3g)",
                       iterations, residual)
    return WalkResult(matrix.to_vector(y), matrix.to_vector(x), converged, iterations, residual)


def _suppress(scores: Mapping[VertexId, float], known: Collection[VertexId],
              suppression: float) -> StateVector:
    if suppression == -1.0:
        return {v: s for v, s in scores.items() if v not in known}
    factor = 1.0 - abs(suppression)
    return {v: (s * factor if v in known else s) for v, s in scores.items()}


def recommend_from_seed(graph: TasteGraph, cfg: BalancingConfig, seed: Mapping[VertexId, float],
                        params: WalkParams = WalkParams(),
                        known: Iterable[VertexId] = ()) -> Ranking:
    result = rwr_steady_state(graph, cfg, seed, params)
    scores = {v: s for v, s in result.pre_restart.items() if v.vtype is VertexType.TRACK}
    scores = _suppress(scores, frozenset(known), params.suppression)
    return [(v, s) for v, s in rank_scores(scores) if s > 0][:params.top_n]


def recommend(graph: TasteGraph, cfg: BalancingConfig, user: VertexId,
              params: WalkParams = WalkParams(), known: Iterable[VertexId] = ()) -> Ranking:
    """Top tracks for ``user``; raises ColdUser when the user has no out-edges."""
    if user not in graph or not graph.has_out_edges(user):
        raise ColdUser(f"{user} has no preferences in the taste graph")
    return recommend_from_seed(graph, cfg, {user: 1.0}, params, known)


def personalize(graph: TasteGraph, cfg: BalancingConfig, source: Mapping[VertexId, float],
                target: Mapping[VertexId, float],
                weights: PersonalizationWeights = PersonalizationWeights()) -> Ranking:
    """
    Rank the items of ``target`` by their relevance to ``source``.

    rel = w_n * t + sum_i w_i * x_i, where x_0 = next(source), x_i = next(x_{i-1})
    and only the components on the target's support are read. The target is
    normalized first, so scaling it does not change the order.
    """
    t = normalized(target)
    if not t:
        raise EmptyTarget("personalization target is empty")
    w = weights.weights
    n = weights.depth
    rel = {v: w[n] * m for v, m in t.items()}
    if source:
        matrix = transition_matrix(graph, cfg)
        reachable = [v for v in t if v in matrix.index]
        support = np.array([matrix.index[v] for v in reachable], dtype=int)
        x = matrix.step(matrix.to_array(source))
        for i in range(n):
            if i:
                x = matrix.step(x)
            for v, m in zip(reachable, x[support]):
                rel[v] += w[i] * float(m)
    return sorted(rel.items(), key=lambda item: (-item[1], vertex_order(item[0])))


def preference_vector(graph: TasteGraph, cfg: BalancingConfig, user: VertexId) -> StateVector:
    """next(user) without θ: the user's one-step preference distribution."""
    if user not in graph:
        raise UnknownVertex(f"unknown vertex {user}")
    return {v: w for v, w in next_vector(graph, cfg, user) if v != ZERO and w > 0}


def extend_list(graph: TasteGraph, cfg: BalancingConfig, items: Sequence[VertexId],
                user_prefs: Optional[Mapping[VertexId, float]] = None,
                params: WalkParams = WalkParams(),
                weights: PersonalizationWeights = PersonalizationWeights(),
                min_seed: int = 5) -> Ranking:
    """
    Tracks that extend the list ``items``.

    A short list is first enriched with the user's preferred items most coupled
    to it. The walk then runs from the enriched list and candidates are
    re-weighted by their personal relevance: score = walk * (1 + personal).
    """
    seed = list(dict.fromkeys(items))
    if not seed:
        raise EmptySeed("cannot extend an empty list")
    for v in seed:
        if v not in graph:
            raise UnknownVertex(f"unknown vertex {v}")
    prefs = {v: m for v, m in (user_prefs or {}).items() if v in graph and m > 0}

    enriched = list(seed)
    if len(seed) < min_seed and prefs:
        in_seed = set(seed)
        candidates = {v: m for v, m in prefs.items() if v not in in_seed and v != ZERO}
        # Coupling to the list only: the candidates' own weight term is left out.
        coupling = PersonalizationWeights(weights.weights[:-1] + (0.0,))
        if candidates:
            for v, score in personalize(graph, cfg, uniform(seed), candidates, coupling):
                if len(enriched) >= min_seed or score <= 0:
                    break
                enriched.append(v)
        logger.debug("extend: seed of %d enriched to %d items", len(seed), len(enriched))

    result = rwr_steady_state(graph, cfg, uniform(enriched), params)
    excluded = set(enriched)
    walk_scores = {v: s for v, s in result.pre_restart.items()
                   if v.vtype is VertexType.TRACK and v not in excluded and s > 0}
    if not walk_scores:
        return []
    personal = dict(personalize(graph, cfg, prefs, walk_scores, weights)) if prefs else {}
    final = {v: s * (1.0 + personal.get(v, 0.0)) for v, s in walk_scores.items()}
    return [(v, s) for v, s in rank_scores(final) if s > 0][:params.top_n]


def main_page(graph: TasteGraph, cfg: BalancingConfig, user: VertexId,
              ratings: Mapping[str, float], pool: int = 1000, top: int = 100,
              weights: PersonalizationWeights = PersonalizationWeights(),
              noise_sigma: float = 0.0, rng_seed: Optional[int] = None) -> Ranking:
    """
    Personal top list: the ``pool`` best rated tracks ranked for ``user``.

    The user vertex is the personalization source, so w_0 weighs the user's own
    known items (a negative w_0 pushes them down). Users without preferences get
    the pool in rating order.

    With ``noise_sigma > 0`` every personalized score gets Gaussian noise with
    standard deviation ``noise_sigma`` times the mean pool score, so repeated
    visits see a shuffled page; ``rng_seed`` makes the shuffle reproducible.
    """
    if noise_sigma < 0:
        raise ConfigError("main page noise_sigma must be >= 0")
    pool_items = rank_scores({track(k): r for k, r in ratings.items() if r > 0}, pool)
    if not pool_items:
        return []
    if user not in graph or not graph.has_out_edges(user):
        logger.debug("main page for %s falls back to rating order", user)
        return pool_items[:top]
    ranked = personalize(graph, cfg, {user: 1.0}, dict(pool_items), weights)
    if noise_sigma > 0:
        scores = np.array([s for _, s in ranked])
        scale = float(np.abs(scores).mean()) or 1.0
        noise = np.random.default_rng(rng_seed).normal(0.0, noise_sigma * scale, len(ranked))
        noisy = {v: s + float(z) for (v, s), z in zip(ranked, noise)}
        ranked = sorted(noisy.items(), key=lambda item: (-item[1], vertex_order(item[0])))
    return ranked[:top]
