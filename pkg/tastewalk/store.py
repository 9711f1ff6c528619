"""
Snapshot files.

A snapshot is the taste graph together with the balancing table and the
system-wide track ratings. The file is line oriented and tab separated::

    #taste-graph v1
    #snapshot_id	<int>
    #build_timestamp	<ISO-8601>
    <from_type>	<from_key>	<edge_type>	<to_type>	<to_key>	<weight>
    ...
    #vertex	<type>	<key>
    ...
    #balancing
    <vertex_type>	<edge_type>	<weight>
    #ratings
    <track>	<rating>
    #checksum	<16 hex digits>

Vertices that appear in no edge get a ``#vertex`` line. Edges and vertices
are written in canonical order, so saving a loaded snapshot reproduces the
file byte for byte. The checksum is a 64-bit BLAKE2b digest of all bytes
before the checksum line.
"""

from __future__ import annotations

import hashlib
import logging
import os
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Dict, List, Mapping, Tuple

from .errors import CorruptSnapshot, DataFormatError
from .graph import (ZERO, BalancingConfig, EdgeType, TasteGraph, VertexId,
                    VertexType, canonical_order)

logger = logging.getLogger(__name__)

HEADER = "#taste-graph v1"
CHECKSUM_TAG = "#checksum\t"
LOAD_TOLERANCE = 1e-6


def _fmt(w: float) -> str:
    return format(w, ".12g")


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


@dataclass(frozen=True)
class Snapshot:
    graph: TasteGraph
    balancing: BalancingConfig = field(default_factory=BalancingConfig)
    ratings: Mapping[str, float] = field(default_factory=dict)
    snapshot_id: int = 1
    build_timestamp: str = ""


def content_checksum(body: str) -> str:
    return hashlib.blake2b(body.encode("utf-8"), digest_size=8).hexdigest()


def _field(value: str) -> str:
    if not value or "\t" in value or "\n" in value:
        raise DataFormatError(f"key {value!r} cannot be serialized")
    return value


def serialize_snapshot(snapshot: Snapshot) -> str:
    lines = [HEADER,
             f"#snapshot_id\t{snapshot.snapshot_id}",
             f"#build_timestamp\t{snapshot.build_timestamp}"]
    for e in snapshot.graph.edges():
        lines.append("\t".join((e.source.vtype.value, _field(e.source.key), e.etype.value,
                                e.target.vtype.value, _field(e.target.key), _fmt(e.weight))))
    linked = {v for e in snapshot.graph.edges() for v in (e.source, e.target)}
    for v in sorted(snapshot.graph.vertices - linked - {ZERO}, key=canonical_order):
        lines.append(f"#vertex\t{v.vtype.value}\t{_field(v.key)}")
    lines.append("#balancing")
    for (vtype, etype), w in sorted(snapshot.balancing.table.items(),
                                    key=lambda item: (item[0][0].value, item[0][1].value)):
        lines.append(f"{vtype.value}\t{etype.value}\t{_fmt(w)}")
    lines.append("#ratings")
    for key in sorted(snapshot.ratings):
        lines.append(f"{_field(key)}\t{_fmt(snapshot.ratings[key])}")
    body = "\n".join(lines) + "\n"
    return body + CHECKSUM_TAG + content_checksum(body) + "\n"


def parse_snapshot(text: str) -> Snapshot:
    at = text.rfind("\n" + CHECKSUM_TAG)
    if at < 0:
        raise CorruptSnapshot("checksum line missing")
    body = text[:at + 1]
    expected = text[at + 1 + len(CHECKSUM_TAG):].strip()
    if content_checksum(body) != expected:
        raise CorruptSnapshot("checksum mismatch")

    lines = body.split("\n")[:-1]
    if not lines or lines[0] != HEADER:
        raise CorruptSnapshot(f"missing {HEADER!r} header")

    meta: Dict[str, str] = {}
    rows: Dict[Tuple[VertexId, EdgeType], List[Tuple[VertexId, float]]] = defaultdict(list)
    vertices: List[VertexId] = []
    table = {}
    ratings: Dict[str, float] = {}
    section = "edges"
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            if line in ("#balancing", "#ratings"):
                section = line[1:]
                continue
            fields = line.split("\t")
            if line.startswith("#vertex\t") and section == "edges" and len(fields) == 3:
                vertices.append(VertexId(VertexType(fields[1]), fields[2]))
            elif line.startswith("#"):
                if section != "edges" or len(fields) != 2:
                    raise ValueError("unexpected directive")
                meta[fields[0][1:]] = fields[1]
            elif section == "edges":
                ft, fk, et, tt, tk, w = fields
                rows[(VertexId(VertexType(ft), fk), EdgeType(et))].append(
                    (VertexId(VertexType(tt), tk), float(w)))
            elif section == "balancing":
                vt, et, w = fields
                table[(VertexType(vt), EdgeType(et))] = float(w)
            else:
                key, value = fields
                ratings[key] = float(value)
        except ValueError as e:
            raise CorruptSnapshot(f"line {lineno}: {e}") from None

    graph = TasteGraph(rows, vertices, tolerance=LOAD_TOLERANCE)
    try:
        snapshot_id = int(meta.get("snapshot_id", "1"))
    except ValueError:
        raise CorruptSnapshot("bad snapshot_id") from None
    return Snapshot(graph, BalancingConfig(table), ratings, snapshot_id, meta.get("build_timestamp", ""))


def save_snapshot(snapshot: Snapshot, path: str):
    text = serialize_snapshot(snapshot)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    os.replace(tmp, path)
    logger.info("saved snapshot %d (%d edges) to %s",
                snapshot.snapshot_id, snapshot.graph.num_edges, path)


def load_snapshot(path: str) -> Snapshot:
    with open(path, "r", encoding="utf-8", newline="") as f:
        text = f.read()
    snapshot = parse_snapshot(text)
    logger.info("loaded snapshot %d from %s: %r", snapshot.snapshot_id, path, snapshot.graph)
    return snapshot
