"""
Context sets: clustering a user's preferences and filtering by context.

A user's preferences usually mix several listening contexts. The clustering
routines split the preference set into groups of items strongly linked in the
taste graph; the contextual filter keeps only the items reachable from a chosen
context through short, heavy paths.
"""

from __future__ import annotations

import logging
import math
import threading
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import (Dict, FrozenSet, Hashable, Iterable, List, Mapping,
                    NamedTuple, Optional, Sequence, Set, Tuple)

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError, UnknownVertex
from .graph import (ZERO, BalancingConfig, StateVector, TasteGraph, VertexId,
                    next_vector, normalized, rank_scores, track_artists,
                    vertex_order)

logger = logging.getLogger(__name__)

AP_TOLERANCE = 1e-9
EXEMPLAR_TIE = 1e-6


class ClusterAlgorithm(str, Enum):
    WEIGHT_BOUND = "weight"
    COMMONS_BOUND = "commons"


class APVariant(str, Enum):
    PRINTED = "printed"      # diagonal responsibility s(i,i) - max_{k!=i} s(i,k)
    STANDARD = "standard"    # diagonal responsibility s(i,i) - max_{k!=i} (a(i,k) + s(i,k))


class ClusterStage(NamedTuple):
    algorithm: ClusterAlgorithm
    tau: float
    nc: int = 1


DEFAULT_CHAIN = (
    ClusterStage(ClusterAlgorithm.COMMONS_BOUND, 0.01, 2),
    ClusterStage(ClusterAlgorithm.COMMONS_BOUND, 0.02, 3),
    ClusterStage(ClusterAlgorithm.COMMONS_BOUND, 0.05, 4),
)


@dataclass(frozen=True)
class ClusterConfig:
    tau: float = 0.01
    nc: int = 2
    chain: Tuple[ClusterStage, ...] = DEFAULT_CHAIN
    size_limit: int = 50
    relative_rating_pct: float = 30.0
    delta: float = 0.5
    damping: float = 0.8
    convince_limit: int = 10
    max_ap_iterations: int = 500
    min_cluster_size: int = 2
    ap_variant: APVariant = APVariant.PRINTED
    thin_prefs: int = 20

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ConfigError("cluster.tau must lie in (0, 1)")
        if self.nc < 1:
            raise ConfigError("cluster.nc must be >= 1")
        if not self.chain:
            raise ConfigError("cluster.chain must not be empty")
        object.__setattr__(self, "chain", tuple(
            ClusterStage(ClusterAlgorithm(s[0]), float(s[1]), int(s[2]) if len(s) > 2 else 1)
            for s in self.chain))
        if not 0.0 <= self.delta <= 1.0:
            raise ConfigError("cluster.delta must lie in [0, 1]")
        if not 0.0 <= self.damping < 1.0:
            raise ConfigError("cluster.damping must lie in [0, 1)")
        if self.convince_limit < 1 or self.max_ap_iterations < 1:
            raise ConfigError("cluster.convince_limit and cluster.max_ap_iterations must be >= 1")
        if self.size_limit < 1 or self.min_cluster_size < 1:
            raise ConfigError("cluster.size_limit and cluster.min_cluster_size must be >= 1")
        if self.relative_rating_pct < 0:
            raise ConfigError("cluster.relative_rating_pct must be >= 0")
        object.__setattr__(self, "ap_variant", APVariant(self.ap_variant))


@dataclass(frozen=True)
class ClusterSet:
    """A partition of the input items into clusters and the unclustered rest."""
    clusters: Tuple[FrozenSet, ...]
    unclustered: FrozenSet
    converged: bool = True
    no_exemplar: bool = False
    centers: Optional[Tuple[Hashable, ...]] = None

    @property
    def items(self) -> FrozenSet:
        return frozenset().union(self.unclustered, *self.clusters)


def _cluster_key(members: Iterable) -> tuple:
    ordered = sorted(members, key=_item_order)
    return (-len(ordered), _item_order(ordered[0]))


def _item_order(item):
    return vertex_order(item) if isinstance(item, VertexId) else (str(item), "")


def _out_neighbors(graph: TasteGraph, v: VertexId) -> Set[VertexId]:
    return {t for row in graph.out_rows(v).values() for t, _ in row if t != ZERO}


def neighbors(graph: TasteGraph, bal_cfg: BalancingConfig, v: VertexId, tau: float) -> Set[VertexId]:
    """nbr_tau(v): vertices receiving at least ``tau`` of v's one-step mass (tau = 0: all out-neighbors)."""
    if v not in graph:
        raise UnknownVertex(f"unknown vertex {v}")
    if tau <= 0:
        return _out_neighbors(graph, v)
    return {t for t, w in next_vector(graph, bal_cfg, v) if t != ZERO and w >= tau}


def _support(prefs: Mapping[VertexId, float]) -> List[VertexId]:
    return sorted((v for v, w in prefs.items() if w > 0 and v != ZERO), key=vertex_order)


def _neighborhoods(graph, bal_cfg, items, tau) -> Dict[VertexId, Set[VertexId]]:
    return {v: neighbors(graph, bal_cfg, v, tau) if v in graph else set() for v in items}


def _components(items: Sequence[VertexId], edges: Iterable[Tuple[int, int]],
                min_cluster_size: int) -> ClusterSet:
    n = len(items)
    if n == 0:
        return ClusterSet((), frozenset())
    pairs = list(edges)
    rows = [i for i, _ in pairs]
    cols = [j for _, j in pairs]
    adjacency = sp.coo_matrix((np.ones(len(pairs)), (rows, cols)), shape=(n, n))
    _, labels = connected_components(adjacency, directed=False)
    groups: Dict[int, List[VertexId]] = defaultdict(list)
    for i, label in enumerate(labels):
        groups[label].append(items[i])
    clusters, unclustered = [], set()
    for members in groups.values():
        if len(members) >= min_cluster_size:
            clusters.append(frozenset(members))
        else:
            unclustered.update(members)
    return ClusterSet(tuple(sorted(clusters, key=_cluster_key)), frozenset(unclustered))


def cluster_weight_bound(graph: TasteGraph, bal_cfg: BalancingConfig, prefs: Mapping[VertexId, float],
                         tau: float, min_cluster_size: int = 2) -> ClusterSet:
    """Components of the preference graph linking v to v' when v' is in nbr_tau(v)."""
    items = _support(prefs)
    index = {v: i for i, v in enumerate(items)}
    nbr = _neighborhoods(graph, bal_cfg, items, tau)
    edges = [(index[v], index[u]) for v in items for u in nbr[v] if u in index and u != v]
    return _components(items, edges, min_cluster_size)


def cluster_commons_bound(graph: TasteGraph, bal_cfg: BalancingConfig, prefs: Mapping[VertexId, float],
                          tau: float, nc: int, min_cluster_size: int = 2) -> ClusterSet:
    """Components of the preference graph linking items sharing at least ``nc`` neighbors."""
    if nc < 1:
        raise ConfigError("nc must be >= 1")
    items = _support(prefs)
    nbr = _neighborhoods(graph, bal_cfg, items, tau)
    edges = [(i, j) for i in range(len(items)) for j in range(i + 1, len(items))
             if len(nbr[items[i]] & nbr[items[j]]) >= nc]
    return _components(items, edges, min_cluster_size)


def _cluster_stage(graph, bal_cfg, prefs, stage: ClusterStage, min_cluster_size: int) -> ClusterSet:
    if stage.algorithm is ClusterAlgorithm.WEIGHT_BOUND:
        return cluster_weight_bound(graph, bal_cfg, prefs, stage.tau, min_cluster_size)
    return cluster_commons_bound(graph, bal_cfg, prefs, stage.tau, stage.nc, min_cluster_size)


def cluster_hierarchical(graph: TasteGraph, bal_cfg: BalancingConfig, prefs: Mapping[VertexId, float],
                         cfg: ClusterConfig = ClusterConfig()) -> ClusterSet:
    """
    Chain of clustering stages with tightening parameters.

    Only items weighing at least ``relative_rating_pct`` percent of the mean
    preference weight enter the first stage. Clusters above ``size_limit`` are
    re-clustered by the next stage. The items left over at the end, together
    with the ones the rating limit rejected, get one more pass through the
    first stage.
    """
    support = _support(prefs)
    if not support:
        return ClusterSet((), frozenset())
    mean = math.fsum(prefs[v] for v in support) / len(support)
    limit = cfg.relative_rating_pct / 100.0 * mean
    kept = {v: prefs[v] for v in support if prefs[v] >= limit}
    rejected = {v for v in support if v not in kept}

    def run(subset: Mapping[VertexId, float], depth: int):
        result = _cluster_stage(graph, bal_cfg, subset, cfg.chain[depth], cfg.min_cluster_size)
        clusters, unclustered = [], set(result.unclustered)
        for cluster in result.clusters:
            if len(cluster) > cfg.size_limit and depth + 1 < len(cfg.chain):
                logger.debug("cluster of %d items passed to stage %d", len(cluster), depth + 1)
                sub_clusters, sub_unclustered = run({v: subset[v] for v in cluster}, depth + 1)
                clusters.extend(sub_clusters)
                unclustered |= sub_unclustered
            else:
                clusters.append(cluster)
        return clusters, unclustered

    clusters, unclustered = run(kept, 0) if kept else ([], set())
    remainder = unclustered | rejected
    if len(remainder) >= cfg.min_cluster_size:
        fallback = _cluster_stage(graph, bal_cfg, {v: prefs[v] for v in remainder},
                                  cfg.chain[0], cfg.min_cluster_size)
        clusters.extend(fallback.clusters)
        remainder = set(fallback.unclustered)
    return ClusterSet(tuple(sorted(clusters, key=_cluster_key)), frozenset(remainder))


def similarity_cnd(graph: TasteGraph, v: VertexId, v2: VertexId) -> int:
    """Number of graph edges with both ends in the common out-neighborhood of v and v2."""
    for u in (v, v2):
        if u not in graph:
            raise UnknownVertex(f"unknown vertex {u}")
    common = _out_neighbors(graph, v) & _out_neighbors(graph, v2)
    return sum(1 for a in common for row in graph.out_rows(a).values()
               for t, _ in row if t in common)


class SimilarityCache:
    """
    CND similarities memoised per graph snapshot.

    Safe for concurrent readers; a value is stored once and the cache is
    cleared whenever a different snapshot is queried.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._snapshot_id: Optional[int] = None
        self._values: Dict[Tuple[VertexId, VertexId], int] = {}
        self.computations = 0

    def similarity(self, graph: TasteGraph, v: VertexId, v2: VertexId) -> int:
        key = (v, v2) if vertex_order(v) <= vertex_order(v2) else (v2, v)
        with self._lock:
            if self._snapshot_id != graph.snapshot_id:
                self._values.clear()
                self._snapshot_id = graph.snapshot_id
            hit = self._values.get(key)
        if hit is not None:
            return hit
        value = similarity_cnd(graph, *key)
        with self._lock:
            if self._snapshot_id == graph.snapshot_id and key not in self._values:
                self._values[key] = value
                self.computations += 1
        return value

    def matrix(self, graph: TasteGraph, items: Sequence[VertexId]) -> np.ndarray:
        n = len(items)
        sim = np.zeros((n, n))
        for i in range(n):
            for j in range(i, n):
                sim[i, j] = sim[j, i] = self.similarity(graph, items[i], items[j])
        return sim


def _exemplars(evidence: np.ndarray) -> np.ndarray:
    # Lowest index among the values tied with the row maximum.
    best = evidence.max(axis=1)
    tol = EXEMPLAR_TIE * np.maximum(1.0, np.abs(best))
    return np.argmax(evidence >= (best - tol)[:, None], axis=1)


def clusters_from_exemplars(ex: Sequence[int], items: Optional[Sequence] = None) -> ClusterSet:
    """Group items by the center their exemplar chain ends in; chains stuck in a cycle stay unclustered."""
    n = len(ex)
    items = list(range(n)) if items is None else list(items)
    centers = [i for i in range(n) if ex[i] == i]
    if n and not centers:
        logger.warning("affinity propagation found no exemplar among %d items", n)
        return ClusterSet((), frozenset(items), converged=False, no_exemplar=True)
    groups: Dict[int, List] = {c: [] for c in centers}
    unclustered = []
    for i in range(n):
        j, seen = i, set()
        while ex[j] != j and j not in seen:
            seen.add(j)
            j = ex[j]
        if ex[j] == j:
            groups[j].append(items[i])
        else:
            unclustered.append(items[i])
    return ClusterSet(tuple(frozenset(groups[c]) for c in centers), frozenset(unclustered),
                      centers=tuple(items[c] for c in centers))


def cluster_affinity_propagation(sim: np.ndarray, cfg: ClusterConfig = ClusterConfig(),
                                 items: Optional[Sequence] = None) -> ClusterSet:
    """
    Damped affinity propagation over a square similarity matrix.

    The diagonal is expected to be discounted already. Iteration stops when
    responsibilities and availabilities change by less than 1e-9, when the
    exemplar assignment (with at least one center) has been stable for
    ``convince_limit`` iterations, or after ``max_ap_iterations``.
    """
    S = np.asarray(sim, dtype=float)
    n = S.shape[0]
    if S.ndim != 2 or S.shape[1] != n:
        raise ConfigError("similarity matrix must be square")
    items = list(range(n)) if items is None else list(items)
    if n == 0:
        return ClusterSet((), frozenset())
    if n == 1:
        return ClusterSet((frozenset(items),), frozenset(), centers=(items[0],))

    lam = cfg.damping
    rows = np.arange(n)
    diag = np.diag(S).copy()
    off = S.copy()
    np.fill_diagonal(off, -np.inf)
    printed_diag = diag - off.max(axis=1)

    R = np.zeros((n, n))
    A = np.zeros((n, n))
    ex_prev = None
    stable = 0
    converged = False
    for iteration in range(1, cfg.max_ap_iterations + 1):
        AS = A + S
        first_idx = AS.argmax(axis=1)
        first = AS[rows, first_idx]
        AS[rows, first_idx] = -np.inf
        second = AS.max(axis=1)
        max_excl = np.repeat(first[:, None], n, axis=1)
        max_excl[rows, first_idx] = second
        P = S - max_excl
        if cfg.ap_variant is APVariant.PRINTED:
            P[rows, rows] = printed_diag
        R_new = (1.0 - lam) * P + lam * R

        positive = np.maximum(R_new, 0.0)
        positive[rows, rows] = 0.0
        column = positive.sum(axis=0)
        Q = np.minimum(0.0, np.diag(R_new)[None, :] + column[None, :] - positive)
        Q[rows, rows] = column
        A_new = (1.0 - lam) * Q + lam * A

        change = max(np.abs(R_new - R).max(), np.abs(A_new - A).max())
        R, A = R_new, A_new
        ex = _exemplars(R + A)
        if ex_prev is not None and np.array_equal(ex, ex_prev):
            stable += 1
        else:
            stable = 0
        ex_prev = ex
        if change < AP_TOLERANCE:
            converged = True
            break
        if stable >= cfg.convince_limit and np.any(ex == rows):
            converged = True
            break

    logger.debug("affinity propagation stopped after %d iterations (converged=%s)", iteration, converged)
    if not converged:
        logger.warning("affinity propagation hit %d iterations without converging", cfg.max_ap_iterations)
    result = clusters_from_exemplars([int(e) for e in ex_prev], items)
    if result.no_exemplar:
        return result
    return ClusterSet(result.clusters, result.unclustered, converged, False, result.centers)


def _medoid(cluster: Sequence[int], sim: np.ndarray) -> int:
    ordered = sorted(cluster)
    totals = [sim[i, ordered].sum() for i in ordered]
    return ordered[int(np.argmax(totals))]


def relink_small_clusters(clusters: ClusterSet, sim: np.ndarray, min_size: int,
                          items: Optional[Sequence] = None) -> ClusterSet:
    """
    Merge each cluster smaller than ``min_size`` into the large cluster whose
    center is most similar to its members; without any positive similarity
    its members become unclustered.
    """
    S = np.asarray(sim, dtype=float)
    items = list(range(S.shape[0])) if items is None else list(items)
    index = {item: i for i, item in enumerate(items)}
    centers = clusters.centers or (None,) * len(clusters.clusters)

    large, small = [], []
    for cluster, center in zip(clusters.clusters, centers):
        (large if len(cluster) >= min_size else small).append((cluster, center))
    if not small:
        return clusters

    merged = [set(c) for c, _ in large]
    large_centers = []
    for cluster, center in large:
        if center is None:
            center = items[_medoid([index[m] for m in cluster], S)]
        large_centers.append(index[center])

    unclustered = set(clusters.unclustered)
    for cluster, _ in small:
        members = [index[m] for m in sorted(cluster, key=_item_order)]
        totals = [S[members, c].sum() for c in large_centers]
        if totals and max(totals) > 0:
            merged[int(np.argmax(totals))].update(cluster)
        else:
            unclustered.update(cluster)

    new_centers = tuple(items[c] for c in large_centers) if clusters.centers else None
    return ClusterSet(tuple(frozenset(c) for c in merged), frozenset(unclustered),
                      clusters.converged, clusters.no_exemplar, new_centers)


class FilterMode(str, Enum):
    PRE = "pre"     # filter preferences before generation
    POST = "post"   # filter generated recommendations


@dataclass(frozen=True)
class ContextFilterParams:
    path_length: int = 2
    min_path_count: Optional[int] = None
    min_weight_sum: Optional[float] = 0.05
    min_best_path: Optional[float] = None
    mode: FilterMode = FilterMode.POST

    def __post_init__(self):
        if self.path_length < 1:
            raise ConfigError("filter.path_length must be >= 1")
        if self.min_path_count is None and self.min_weight_sum is None and self.min_best_path is None:
            raise ConfigError("contextual filter needs at least one threshold")
        object.__setattr__(self, "mode", FilterMode(self.mode))


@dataclass
class PathStats:
    count: int = 0
    weight_sum: float = 0.0
    best: float = 0.0


def path_measures(graph: TasteGraph, bal_cfg: BalancingConfig, context: Iterable[VertexId],
                  max_length: int) -> Dict[VertexId, PathStats]:
    """Count, weight sum and best weight of simple paths of length 1..max_length from the context."""
    stats: Dict[VertexId, PathStats] = defaultdict(PathStats)

    def extend(v: VertexId, weight: float, depth: int, on_path: Set[VertexId]):
        for t, w in next_vector(graph, bal_cfg, v):
            if t == ZERO or t in on_path or w <= 0:
                continue
            p = weight * w
            s = stats[t]
            s.count += 1
            s.weight_sum += p
            s.best = max(s.best, p)
            if depth + 1 < max_length:
                on_path.add(t)
                extend(t, p, depth + 1, on_path)
                on_path.remove(t)

    for c in sorted(set(context), key=vertex_order):
        if c in graph:
            extend(c, 1.0, 0, {c})
    return dict(stats)


def contextual_filter(graph: TasteGraph, bal_cfg: BalancingConfig, context: Iterable[VertexId],
                      candidates: Iterable[VertexId],
                      params: ContextFilterParams = ContextFilterParams()) -> Set[VertexId]:
    """Candidates linked to the context strongly enough by at least one path measure."""
    context = set(context)
    if not context:
        raise ConfigError("context set must not be empty")
    measures = path_measures(graph, bal_cfg, context, params.path_length)
    kept = set()
    for c in candidates:
        if c in context:
            kept.add(c)
            continue
        s = measures.get(c, PathStats())
        if ((params.min_path_count is not None and s.count >= params.min_path_count)
                or (params.min_weight_sum is not None and s.weight_sum >= params.min_weight_sum)
                or (params.min_best_path is not None and s.best >= params.min_best_path)):
            kept.add(c)
    return kept


def prefilter_preferences(graph: TasteGraph, bal_cfg: BalancingConfig, context: Iterable[VertexId],
                          prefs: Mapping[VertexId, float],
                          params: ContextFilterParams = ContextFilterParams()) -> StateVector:
    kept = contextual_filter(graph, bal_cfg, context, prefs.keys(), params)
    return normalized({v: w for v, w in prefs.items() if v in kept})


def postfilter_recommendations(graph: TasteGraph, bal_cfg: BalancingConfig, context: Iterable[VertexId],
                               ranking: Sequence[Tuple[VertexId, float]],
                               params: ContextFilterParams = ContextFilterParams()) -> List[Tuple[VertexId, float]]:
    kept = contextual_filter(graph, bal_cfg, context, [v for v, _ in ranking], params)
    return [(v, s) for v, s in ranking if v in kept]


class ContextSet(NamedTuple):
    label: str
    members: FrozenSet[VertexId]


def _label(members: Iterable[VertexId], prefs: Mapping[VertexId, float],
           artists: Mapping[VertexId, VertexId]) -> str:
    weights: Dict[VertexId, float] = defaultdict(float)
    for m in members:
        weights[artists.get(m, m)] += prefs.get(m, 0.0)
    return " & ".join(a.key for a, _ in rank_scores(weights, 2))


def generate_context_sets(graph: TasteGraph, bal_cfg: BalancingConfig, prefs: Mapping[VertexId, float],
                          cfg: ClusterConfig = ClusterConfig(), profile=None,
                          cache: Optional[SimilarityCache] = None,
                          artists: Optional[Mapping[VertexId, VertexId]] = None) -> List[ContextSet]:
    """
    Split the preferences into labelled context sets.

    Thin preferences are first mixed with a demography profile when one is
    given. Items are clustered by affinity propagation over CND similarity,
    then small clusters are relinked.
    """
    support = _support(prefs)
    if not support:
        return []
    if len(support) < cfg.thin_prefs and profile is not None:
        from .coldstart import mix_preferences
        mixed = mix_preferences(prefs, profile, full_strength=cfg.thin_prefs)
        prefs = dict(rank_scores({v: w for v, w in mixed.items() if v in graph}, cfg.thin_prefs))
        support = _support(prefs)
    items = [v for v in support if v in graph]
    if not items:
        return []

    cache = cache if cache is not None else SimilarityCache()
    sim = cache.matrix(graph, items)
    sim[np.diag_indices_from(sim)] *= cfg.delta
    clusters = cluster_affinity_propagation(sim, cfg, items)
    clusters = relink_small_clusters(clusters, sim, cfg.min_cluster_size, items)

    artists = track_artists(graph) if artists is None else artists
    sets = [ContextSet(_label(c, prefs, artists), c) for c in clusters.clusters]
    weight = {s: math.fsum(prefs.get(m, 0.0) for m in s.members) for s in sets}
    return sorted(sets, key=lambda s: (-weight[s], s.label))
