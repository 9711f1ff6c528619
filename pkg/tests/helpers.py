"""
Shared fixtures for the test suite: small hand-made graphs, random graphs and
dense-matrix oracles for the walk computations.
"""
import os
import sys

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tastewalk.graph import (ZERO, EdgeType, TasteGraph, VertexType, artist,
                             next_vector, normalize_row, track, user)

BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
TOY_DIR = os.path.join(BASE_DIR, 'data', 'toy')


def toy_path(name):
    return os.path.join(TOY_DIR, name)


def weighted_row(rng, targets):
    """A row over ``targets`` with random positive weights summing to 1."""
    weights = normalize_row(list(rng.uniform(0.1, 1.0, size=len(targets))))
    return list(zip(targets, weights))


def random_taste_graph(seed=0, users=3, artists=3, tracks=9, density=0.4):
    """
    Small random taste graph with all five row types.

    Every track belongs to artist ``i % artists``; every user likes at least
    one track and prefers at least one artist.
    """
    rng = np.random.default_rng(seed)
    U = [user(f"u{i}") for i in range(users)]
    A = [artist(f"a{i}") for i in range(artists)]
    T = [track(f"t{i:02d}") for i in range(tracks)]

    def subset(pool, exclude=None, at_least=1):
        pool = [p for p in pool if p != exclude]
        picked = [p for p in pool if rng.random() < density]
        if len(picked) < at_least:
            picked = [pool[int(i)] for i in rng.choice(len(pool), size=at_least, replace=False)]
        return picked

    rows = {}
    for u in U:
        rows[(u, EdgeType.LIKES)] = weighted_row(rng, subset(T))
        rows[(u, EdgeType.PREFERS)] = weighted_row(rng, subset(A))
    for i, a in enumerate(A):
        rows[(a, EdgeType.ARTIST_TRACK)] = weighted_row(rng, T[i::artists])
        if artists > 1:
            rows[(a, EdgeType.SIMILAR_ARTIST)] = weighted_row(rng, subset(A, exclude=a))
    for t in T:
        rows[(t, EdgeType.SIMILAR_TRACK)] = weighted_row(rng, subset(T, exclude=t))
    return TasteGraph(rows), U, A, T


def clique_graph(groups, members_per_group):
    """Disjoint cliques of tracks linked by uniform SimilarTrack rows."""
    rows = {}
    clusters = []
    for g in range(groups):
        members = [track(f"g{g}t{i}") for i in range(members_per_group)]
        clusters.append(members)
        for m in members:
            others = [o for o in members if o != m]
            rows[(m, EdgeType.SIMILAR_TRACK)] = [(o, 1.0 / len(others)) for o in others]
    return TasteGraph(rows), clusters


def dense_transition(graph, cfg, order=None):
    """Row-stochastic matrix P with P[i, j] = balanced weight of i -> j."""
    order = order or sorted(graph.vertices, key=lambda v: (v.vtype.value, v.key))
    index = {v: i for i, v in enumerate(order)}
    P = np.zeros((len(order), len(order)))
    for v in order:
        for t, w in next_vector(graph, cfg, v):
            P[index[v], index[t]] += w
    return P, order, index


def dense_vector(x, index):
    vec = np.zeros(len(index))
    for v, m in x.items():
        vec[index[v]] = m
    return vec


def rwr_oracle(graph, cfg, seed, alpha, two_stage=True):
    """Exact fixed point of x = alpha * r + (1 - alpha) * P^T x and its pre-restart vector."""
    P, order, index = dense_transition(graph, cfg)
    s = dense_vector(seed, index)
    s = s / s.sum()
    r = P.T @ s if two_stage else s
    n = len(order)
    x = np.linalg.solve(np.eye(n) - (1 - alpha) * P.T, alpha * r)
    y = P.T @ x
    return ({v: x[i] for v, i in index.items()},
            {v: y[i] for v, i in index.items()})


def personalize_oracle(graph, cfg, source, target, weights):
    """rel = w_n * t + sum_i w_i * ((P^T)^(i+1) s) read on the target's support."""
    P, order, index = dense_transition(graph, cfg)
    s = dense_vector(source, index)
    t_total = sum(target.values())
    n = len(weights) - 1
    rel = {v: weights[n] * m / t_total for v, m in target.items()}
    x = s
    for i in range(n):
        x = P.T @ x
        for v in target:
            rel[v] += weights[i] * x[index[v]]
    return rel


def reachable(graph, start):
    """Vertices reachable from ``start`` through explicit rows (θ excluded)."""
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for row in graph.out_rows(v).values():
            for t, _ in row:
                if t != ZERO and t not in seen:
                    seen.add(t)
                    stack.append(t)
    return seen


def track_only(vertices):
    return {v for v in vertices if v.vtype is VertexType.TRACK}
