"""Exact statistics computed with full graph access.

These are the label oracles and the ground truth the constant-time
estimators are checked against; nothing here goes through the oracle.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import InvalidArgument
from .graph import Graph


def _undirected(g: Graph):
    if g.directed:
        raise InvalidArgument("statistic is defined for undirected graphs only")


def _per_vertex_triangles(g: Graph) -> np.ndarray:
    a = g.to_scipy()
    return np.asarray((a @ a).multiply(a).sum(axis=1)).ravel() // 2


def triangle_count(g: Graph) -> int:
    _undirected(g)
    return int(_per_vertex_triangles(g).sum() // 3)


def exact_triangle_statistic(g: Graph) -> float:
    """Probability that three independent uniform vertices span a triangle.

    Vertices are drawn with replacement, so this is ``6 T / n^3``, the exact
    expectation of one triangle-density trial.
    """
    _undirected(g)
    if g.n == 0:
        return 0.0
    return 6.0 * triangle_count(g) / float(g.n) ** 3


def exact_local_clustering(g: Graph) -> float:
    """Average local clustering; vertices of degree < 2 contribute 0."""
    _undirected(g)
    if g.n == 0:
        return 0.0
    deg = g.out_degree().astype(np.float64)
    tri = _per_vertex_triangles(g).astype(np.float64)
    pairs = deg * (deg - 1) / 2
    local = np.divide(tri, pairs, out=np.zeros_like(tri), where=pairs > 0)
    return float(local.mean())


def exact_global_clustering(g: Graph) -> float:
    """Transitivity: 3 * triangles / connected triples (0 without triples)."""
    _undirected(g)
    deg = g.out_degree().astype(np.float64)
    triples = float((deg * (deg - 1) / 2).sum())
    if triples == 0:
        return 0.0
    return 3.0 * triangle_count(g) / triples


def exact_max_degree(g: Graph) -> int:
    _undirected(g)
    return int(g.out_degree().max()) if g.n else 0


def num_components(g: Graph) -> int:
    if g.n == 0:
        return 0
    count, _ = connected_components(g.to_scipy(), directed=g.directed, connection="weak")
    return int(count)


def is_connected(g: Graph) -> bool:
    return num_components(g) == 1
