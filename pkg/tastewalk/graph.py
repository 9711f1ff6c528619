"""
Taste graph data model.

A taste graph is a typed, weighted, directed graph. Out-edges of a vertex are
grouped in rows, one row per edge type, and every non-empty row is a probability
distribution (the graph is "partly stochastic"). A balancing table apportions
the unit out-mass of a vertex between its rows, which turns the graph into a
fully stochastic one. The zero-balancing vertex θ absorbs the mass that sparse
rows should not push onto their few edges.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import (Dict, Iterable, Iterator, List, Mapping, NamedTuple,
                    Optional, Sequence, Tuple)

import numpy as np
import scipy.sparse as sp

from .errors import (AllZeroRow, ConfigError, InvariantViolation,
                     MissingBalanceEntry, RowConflict, RowTooLong,
                     UnknownVertex)

logger = logging.getLogger(__name__)

ROW_TOLERANCE = 1e-9


class VertexType(str, Enum):
    USER = "user"
    TRACK = "track"
    ARTIST = "artist"
    ZERO = "zero"
    # Reserved, no builder populates them yet.
    GENRE = "genre"
    INTEREST = "interest"


class EdgeType(str, Enum):
    LIKES = "likes"                    # user -> track
    PREFERS = "prefers"                # user -> artist
    SIMILAR_ARTIST = "similar_artist"
    SIMILAR_TRACK = "similar_track"
    ARTIST_TRACK = "artist_track"
    ABSORB = "absorb"                  # implicit θ self-loop only


class VertexId(NamedTuple):
    vtype: VertexType
    key: str

    def __str__(self):
        return f"{self.vtype.value}:{self.key}"


ZERO = VertexId(VertexType.ZERO, "θ")

StateVector = Dict[VertexId, float]
Row = Tuple[Tuple[VertexId, float], ...]
RowKey = Tuple[VertexId, EdgeType]


def user(key: str) -> VertexId:
    return VertexId(VertexType.USER, key)


def track(key: str) -> VertexId:
    return VertexId(VertexType.TRACK, key)


def artist(key: str) -> VertexId:
    return VertexId(VertexType.ARTIST, key)


def vertex_order(v: VertexId):
    """Total order used for ties and canonical output: key first, then type."""
    return (v.key, v.vtype.value)


def canonical_order(v: VertexId):
    """Order used by snapshot serialization: type first, then key."""
    return (v.vtype.value, v.key)


@dataclass(frozen=True)
class EdgeRecord:
    source: VertexId
    target: VertexId
    etype: EdgeType
    weight: float


class DecayKind(str, Enum):
    LINEAR = "linear"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class DecayModel:
    """
    Expected rank-mass profile of a full row of ``expected_count`` edges.

    A row with k < K edges is missing the mass of ranks k+1..K; that fraction
    goes to θ.
    """
    kind: DecayKind = DecayKind.LINEAR
    expected_count: int = 100
    rho: float = 0.8

    def __post_init__(self):
        if self.expected_count < 1:
            raise ConfigError(f"expected_count must be >= 1, got {self.expected_count}")
        if self.kind is DecayKind.EXPONENTIAL and not 0.0 < self.rho < 1.0:
            raise ConfigError(f"rho must lie in (0, 1), got {self.rho}")

    def missing_fraction(self, k: int) -> float:
        K = self.expected_count
        if k >= K:
            return 0.0
        if self.kind is DecayKind.LINEAR:
            # sum_{r=1..K} (K - r + 1) and the same sum over r = k+1..K
            m_all = K * (K + 1) / 2.0
            m_miss = (K - k) * (K - k + 1) / 2.0
            return m_miss / m_all
        m_all = math.fsum(self.rho ** r for r in range(1, K + 1))
        m_miss = math.fsum(self.rho ** r for r in range(k + 1, K + 1))
        return m_miss / m_all


def normalize_row(weights: Sequence[float]) -> List[float]:
    if any(w < 0 for w in weights):
        raise InvariantViolation(f"negative weight in row: {list(weights)}")
    total = math.fsum(weights)
    if total <= 0:
        raise AllZeroRow("cannot normalize a row whose weights are all zero")
    return [w / total for w in weights]


def zero_balance_row(row: Sequence[Tuple[VertexId, float]],
                     decay: DecayModel) -> List[Tuple[VertexId, float]]:
    """
    Drain part of a short row into θ.

    The row must already be normalized and sorted by descending weight. A row
    that already carries a θ edge is returned as is.
    """
    if any(v == ZERO for v, _ in row):
        return list(row)
    k = len(row)
    if k > decay.expected_count:
        raise RowTooLong(f"row has {k} edges, limit is {decay.expected_count}")
    if k == 0 or k == decay.expected_count:
        return list(row)
    f = decay.missing_fraction(k)
    keep = 1.0 - f
    return [(v, w * keep) for v, w in row] + [(ZERO, f)]


_snapshot_ids = itertools.count(1)


class TasteGraph:
    """
    Immutable snapshot of a taste graph.

    ``rows`` maps (vertex, edge type) to an ordered sequence of (target, weight).
    θ is always present and owns an implicit weight-1 self-loop that is never
    listed among the rows.
    """

    def __init__(self, rows: Optional[Mapping[RowKey, Sequence[Tuple[VertexId, float]]]] = None,
                 vertices: Iterable[VertexId] = (), tolerance: float = ROW_TOLERANCE):
        self._rows: Dict[RowKey, Row] = {}
        self._out: Dict[VertexId, Dict[EdgeType, Row]] = {}
        known = {ZERO}
        known.update(vertices)

        for (source, etype), entries in (rows or {}).items():
            row = tuple((target, float(w)) for target, w in entries)
            if not row:
                continue
            self._check_row(source, etype, row, tolerance)
            self._rows[(source, etype)] = row
            self._out.setdefault(source, {})[etype] = row
            known.add(source)
            known.update(target for target, _ in row)

        self._vertices = frozenset(known)
        self.snapshot_id = next(_snapshot_ids)
        self._next_cache: Dict[tuple, Dict[VertexId, Row]] = {}
        self._matrix_cache: Dict[tuple, "TransitionMatrix"] = {}

    @staticmethod
    def _check_row(source: VertexId, etype: EdgeType, row: Row, tolerance: float):
        if source == ZERO or etype is EdgeType.ABSORB:
            raise InvariantViolation("θ owns only its implicit self-loop")
        seen = set()
        for target, w in row:
            if w < -tolerance or w > 1.0 + tolerance:
                raise InvariantViolation(
                    f"weight {w} of {source} -{etype.value}-> {target} outside [0, 1]")
            if target in seen:
                raise InvariantViolation(
                    f"duplicate edge {source} -{etype.value}-> {target}")
            seen.add(target)
        total = math.fsum(w for _, w in row)
        if abs(total - 1.0) > tolerance:
            raise InvariantViolation(
                f"row ({source}, {etype.value}) sums to {total!r}, expected 1")

    @property
    def vertices(self) -> frozenset:
        return self._vertices

    def __contains__(self, v) -> bool:
        return v in self._vertices

    def __len__(self) -> int:
        return len(self._vertices)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TasteGraph):
            return NotImplemented
        return self._rows == other._rows and self._vertices == other._vertices

    __hash__ = None

    def row(self, v: VertexId, etype: EdgeType) -> Row:
        if v == ZERO and etype is EdgeType.ABSORB:
            return ((ZERO, 1.0),)
        return self._rows.get((v, etype), ())

    def out_rows(self, v: VertexId) -> Mapping[EdgeType, Row]:
        if v == ZERO:
            return {EdgeType.ABSORB: ((ZERO, 1.0),)}
        return self._out.get(v, {})

    def has_out_edges(self, v: VertexId) -> bool:
        return v == ZERO or bool(self._out.get(v))

    def items(self) -> Iterator[Tuple[RowKey, Row]]:
        """Explicit rows in canonical order (source, edge type)."""
        for key in sorted(self._rows, key=lambda k: (canonical_order(k[0]), k[1].value)):
            yield key, self._rows[key]

    def edges(self) -> Iterator[EdgeRecord]:
        for (source, etype), row in self.items():
            for target, w in sorted(row, key=lambda e: canonical_order(e[0])):
                yield EdgeRecord(source, target, etype, w)

    @property
    def num_rows(self) -> int:
        return len(self._rows)

    @property
    def num_edges(self) -> int:
        return sum(len(row) for row in self._rows.values())

    def with_rows(self, updates: Mapping[RowKey, Optional[Sequence[Tuple[VertexId, float]]]]) -> "TasteGraph":
        """New snapshot with ``updates`` applied; a ``None`` row removes the row."""
        rows: Dict[RowKey, Sequence] = dict(self._rows)
        for key, row in updates.items():
            if row is None:
                rows.pop(key, None)
            else:
                rows[key] = row
        return TasteGraph(rows, self._vertices)

    def __repr__(self):
        return (f"TasteGraph(snapshot_id={self.snapshot_id}, vertices={len(self._vertices)}, "
                f"rows={self.num_rows}, edges={self.num_edges})")


DEFAULT_BALANCING = {
    (VertexType.USER, EdgeType.LIKES): 0.6,
    (VertexType.USER, EdgeType.PREFERS): 0.4,
    (VertexType.ARTIST, EdgeType.SIMILAR_ARTIST): 0.5,
    (VertexType.ARTIST, EdgeType.ARTIST_TRACK): 0.5,
    (VertexType.TRACK, EdgeType.SIMILAR_TRACK): 1.0,
}


@dataclass(frozen=True, eq=False)
class BalancingConfig:
    """β(vertex type, edge type): how a vertex splits its mass between rows."""
    table: Mapping[Tuple[VertexType, EdgeType], float] = field(
        default_factory=lambda: dict(DEFAULT_BALANCING))

    def __post_init__(self):
        table = {}
        for (vtype, etype), w in self.table.items():
            w = float(w)
            if not 0.0 <= w <= 1.0:
                raise ConfigError(f"balancing weight {w} for ({vtype}, {etype}) outside [0, 1]")
            table[(VertexType(vtype), EdgeType(etype))] = w
        sums: Dict[VertexType, List[float]] = defaultdict(list)
        for (vtype, _), w in table.items():
            sums[vtype].append(w)
        for vtype, ws in sums.items():
            total = math.fsum(ws)
            if abs(total - 1.0) > ROW_TOLERANCE:
                raise ConfigError(f"balancing weights of {vtype.value} sum to {total}, expected 1")
        object.__setattr__(self, "table", MappingProxyType(table))
        object.__setattr__(self, "cache_key", tuple(sorted(
            (vt.value, et.value, w) for (vt, et), w in table.items())))

    def __eq__(self, other):
        if not isinstance(other, BalancingConfig):
            return NotImplemented
        return self.cache_key == other.cache_key

    def __hash__(self):
        return hash(self.cache_key)

    def weight(self, vtype: VertexType, etype: EdgeType) -> float:
        if vtype is VertexType.ZERO and etype is EdgeType.ABSORB:
            return 1.0
        try:
            return self.table[(vtype, etype)]
        except KeyError:
            raise MissingBalanceEntry(
                f"no balancing entry for ({vtype.value}, {etype.value})") from None


def _row_shares(graph: TasteGraph, cfg: BalancingConfig, v: VertexId) -> Dict[EdgeType, float]:
    # Balance mass of empty rows is spread over the non-empty rows in proportion
    # to their own β. An empty result sends the vertex's mass to θ.
    rows = graph.out_rows(v)
    betas = {etype: cfg.weight(v.vtype, etype) for etype in rows}
    active = math.fsum(betas.values())
    if active <= 0:
        return {}
    return {etype: b / active for etype, b in betas.items()}


def balanced_weight(graph: TasteGraph, cfg: BalancingConfig, edge: EdgeRecord) -> float:
    if edge.source not in graph:
        raise UnknownVertex(f"unknown vertex {edge.source}")
    shares = _row_shares(graph, cfg, edge.source)
    return edge.weight * shares.get(edge.etype, 0.0)


def next_vector(graph: TasteGraph, cfg: BalancingConfig, v: VertexId) -> Row:
    """One-step balanced distribution of a single vertex, memoised per snapshot."""
    cache = graph._next_cache.setdefault(cfg.cache_key, {})
    hit = cache.get(v)
    if hit is not None:
        return hit
    if v not in graph:
        raise UnknownVertex(f"unknown vertex {v}")
    shares = _row_shares(graph, cfg, v)
    if not shares:
        result: Row = ((ZERO, 1.0),)
    else:
        acc: Dict[VertexId, float] = {}
        for etype, share in shares.items():
            if share == 0.0:
                continue
            for target, w in graph.row(v, etype):
                acc[target] = acc.get(target, 0.0) + w * share
        result = tuple(acc.items())
    cache[v] = result
    return result


class TransitionMatrix:
    """
    Balanced one-step transitions of a snapshot as a sparse matrix.

    ``matrix[i, j]`` is the probability of moving from ``vertices[i]`` to
    ``vertices[j]``. Vertices without out-edges move to θ, θ stays on itself.
    """

    def __init__(self, graph: TasteGraph, cfg: BalancingConfig):
        self.vertices: Tuple[VertexId, ...] = tuple(sorted(graph.vertices, key=canonical_order))
        self.index: Dict[VertexId, int] = {v: i for i, v in enumerate(self.vertices)}
        rows, cols, data = [], [], []
        for i, v in enumerate(self.vertices):
            for target, p in next_vector(graph, cfg, v):
                rows.append(i)
                cols.append(self.index[target])
                data.append(p)
        n = len(self.vertices)
        self.matrix = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
        self._forward = self.matrix.T.tocsr()

    def __len__(self) -> int:
        return len(self.vertices)

    def to_array(self, x: Mapping[VertexId, float]) -> np.ndarray:
        arr = np.zeros(len(self.vertices))
        for v, mass in x.items():
            i = self.index.get(v)
            if i is None:
                raise UnknownVertex(f"unknown vertex {v}")
            arr[i] += mass
        return arr

    def to_vector(self, arr: np.ndarray) -> StateVector:
        return {self.vertices[i]: float(arr[i]) for i in np.flatnonzero(arr)}

    def step(self, arr: np.ndarray) -> np.ndarray:
        return self._forward @ arr


def transition_matrix(graph: TasteGraph, cfg: BalancingConfig) -> TransitionMatrix:
    """The snapshot's transition matrix under ``cfg``, built once per balancing table."""
    matrix = graph._matrix_cache.get(cfg.cache_key)
    if matrix is None:
        matrix = TransitionMatrix(graph, cfg)
        graph._matrix_cache[cfg.cache_key] = matrix
        logger.debug("transition matrix for snapshot %d: %d vertices, %d entries",
                     graph.snapshot_id, len(matrix), matrix.matrix.nnz)
    return matrix


def transition(graph: TasteGraph, cfg: BalancingConfig, x: Mapping[VertexId, float]) -> StateVector:
    """One balanced step of the state vector ``x``."""
    matrix = transition_matrix(graph, cfg)
    return matrix.to_vector(matrix.step(matrix.to_array(x)))


def merge_parts(parts: Iterable[TasteGraph]) -> TasteGraph:
    rows: Dict[RowKey, Row] = {}
    vertices = set()
    for part in parts:
        for key, row in part.items():
            if key in rows:
                source, etype = key
                raise RowConflict(f"row ({source}, {etype.value}) defined by two parts")
            rows[key] = row
        vertices.update(part.vertices)
    return TasteGraph(rows, vertices)


def track_artists(graph: TasteGraph) -> Dict[VertexId, VertexId]:
    """Main artist of every track, read from the ArtistTrack rows."""
    best: Dict[VertexId, Tuple[float, VertexId]] = {}
    for (source, etype), row in graph.items():
        if etype is not EdgeType.ARTIST_TRACK:
            continue
        for target, w in row:
            if target.vtype is not VertexType.TRACK:
                continue
            current = best.get(target)
            if current is None or w > current[0]:
                best[target] = (w, source)
    return {t: a for t, (_, a) in best.items()}


# -- state vector helpers --

def total_mass(x: Mapping[VertexId, float]) -> float:
    return math.fsum(x.values())


def normalized(x: Mapping[VertexId, float]) -> StateVector:
    total = total_mass(x)
    if total <= 0:
        return {}
    return {v: w / total for v, w in x.items() if w > 0}


def uniform(vertices: Iterable[VertexId]) -> StateVector:
    items = list(dict.fromkeys(vertices))
    if not items:
        return {}
    share = 1.0 / len(items)
    return {v: share for v in items}


def project(x: Mapping[VertexId, float], support: Iterable[VertexId]) -> StateVector:
    return {v: x[v] for v in support if v in x}


def rank_scores(scores: Mapping[VertexId, float], n: Optional[int] = None) -> List[Tuple[VertexId, float]]:
    """Descending score, ties by ascending vertex key. θ never ranks."""
    ranked = sorted(((v, s) for v, s in scores.items() if v != ZERO),
                    key=lambda item: (-item[1], vertex_order(item[0])))
    return ranked if n is None else ranked[:n]
