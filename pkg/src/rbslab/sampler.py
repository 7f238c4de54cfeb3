"""Random ball sampling over an oracle session.

A ball is grown layer by layer: layer 0 holds one uniform vertex and every
entry of layer ``i-1`` (duplicates included) contributes ``b`` independent
neighbor draws to layer ``i``. A union of balls is then closed under
adjacency queries to obtain the induced subgraph on the sampled vertices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InvalidArgument, InvalidState
from .oracle import EMPTY, OracleSession


@dataclass(frozen=True)
class LocalGraph:
    """A small graph in local indices, with ordered roots and features."""

    adjacency: np.ndarray
    roots: tuple[int, ...] = ()
    features: np.ndarray | None = None

    @property
    def m(self) -> int:
        return int(self.adjacency.shape[0])

    def subgraph(self, idx) -> "LocalGraph":
        idx = np.asarray(idx, dtype=np.int64)
        pos = {int(v): i for i, v in enumerate(idx)}
        roots = tuple(pos[r] for r in self.roots if r in pos)
        feats = None if self.features is None else self.features[idx]
        return LocalGraph(self.adjacency[np.ix_(idx, idx)], roots, feats)


@dataclass(frozen=True, eq=False)
class BallUnion:
    """Induced subgraph on the union of ``k`` sampled balls.

    ``vertices[i]`` is the original id of local vertex ``i``; ``roots`` are
    original ids of the ball centers in ball order. ``layers[j][i]`` keeps
    the raw layer ``i`` of ball ``j`` with duplicates. ``designated_root`` is
    set by the rooted variant, whose first ball is centered at it.
    """

    roots: tuple[int, ...]
    vertices: np.ndarray
    adjacency: np.ndarray
    features: np.ndarray | None
    layers: tuple[tuple[np.ndarray, ...], ...]
    params: tuple[int, int, int]
    designated_root: int | None = None

    @property
    def m(self) -> int:
        return int(self.vertices.size)

    def local_index(self, v: int) -> int:
        hit = np.nonzero(self.vertices == v)[0]
        if hit.size == 0:
            raise KeyError(v)
        return int(hit[0])

    @property
    def root_positions(self) -> tuple[int, ...]:
        return tuple(self.local_index(r) for r in self.roots)

    def local(self) -> LocalGraph:
        return LocalGraph(self.adjacency, self.root_positions, self.features)

    def edges_local(self) -> np.ndarray:
        return np.argwhere(self.adjacency)

    def to_json(self) -> dict:
        k, b, r = self.params
        return {
            "params": {"k": k, "b": b, "r": r},
            "roots": [int(x) for x in self.roots],
            "designated_root": self.designated_root,
            "vertices": [int(x) for x in self.vertices],
            "edges": [[int(u), int(v)] for u, v in self.edges_local()],
        }


@dataclass(frozen=True)
class ComponentSet:
    components: tuple[np.ndarray, ...]
    root_component: int | None = None

    def __len__(self) -> int:
        return len(self.components)


def max_union_size(k: int, b: int, r: int) -> int:
    """Number of layer slots in ``k`` balls: k * (1 + b + ... + b^r)."""
    return k * sum(b**i for i in range(r + 1))


def _grow_ball(s: OracleSession, root: int, b: int, r: int, pad: bool) -> tuple[np.ndarray, ...]:
    layers = [np.array([root], dtype=np.int64)]
    for _ in range(r):
        parents = np.repeat(layers[-1], b)
        draws = s.sample_neighbors(parents)
        if pad:
            # an empty draw occupies its slot with the parent, keeping the
            # slot count (and so every later query count) fixed
            draws = np.where(draws == EMPTY, parents, draws)
        else:
            draws = draws[draws != EMPTY]
        layers.append(draws)
    return tuple(layers)


def _close(
    s: OracleSession,
    balls: list[tuple[np.ndarray, ...]],
    roots: list[int],
    params: tuple[int, int, int],
    pad: bool,
    designated_root: int | None = None,
) -> BallUnion:
    slots = np.concatenate([layer for ball in balls for layer in ball])
    # local order = order of first appearance, so roots come early
    _, first = np.unique(slots, return_index=True)
    vertices = slots[np.sort(first)]
    m = vertices.size
    adjacency = np.zeros((m, m), dtype=bool)
    if pad:
        lookup = {int(v): i for i, v in enumerate(vertices)}
        loc = np.array([lookup[int(v)] for v in slots], dtype=np.int64)
        si, sj = np.nonzero(~np.eye(slots.size, dtype=bool))
        hit = s.are_adjacent(slots[si], slots[sj])
        adjacency[loc[si[hit]], loc[sj[hit]]] = True
    elif m > 1:
        ii, jj = np.nonzero(~np.eye(m, dtype=bool))
        hit = s.are_adjacent(vertices[ii], vertices[jj])
        adjacency[ii[hit], jj[hit]] = True
    return BallUnion(
        roots=tuple(int(x) for x in roots),
        vertices=vertices,
        adjacency=adjacency,
        features=s.features_of(vertices),
        layers=tuple(balls),
        params=params,
        designated_root=designated_root,
    )


def _check(b: int, r: int, k: int = 1, min_k: int = 1):
    if b < 1:
        raise InvalidArgument("branching factor b must be >= 1")
    if r < 0:
        raise InvalidArgument("radius r must be >= 0")
    if k < min_k:
        raise InvalidArgument(f"ball count k must be >= {min_k}")


def random_ball_sample(s: OracleSession, b: int, r: int, pad_queries: bool = False) -> BallUnion:
    """One random ball of branching ``b`` and radius ``r``."""
    return union_sample(s, 1, b, r, pad_queries=pad_queries)


def union_sample(s: OracleSession, k: int, b: int, r: int, pad_queries: bool = False) -> BallUnion:
    """Union of ``k`` independent random balls and its induced subgraph.

    Adjacency is identified with ``m(m-1)`` queries over ordered pairs of
    distinct sampled vertices. With ``pad_queries`` every ordered pair of
    layer slots is queried instead and empty neighbor draws are filled with
    the parent, so the total query count is exactly
    ``k + k(b + ... + b^r) + K(K-1)`` with ``K = max_union_size(k, b, r)``.
    """
    _check(b, r, k)
    balls, roots = [], []
    for _ in range(k):
        root = s.sample_vertex()
        roots.append(root)
        balls.append(_grow_ball(s, root, b, r, pad_queries))
    return _close(s, balls, roots, (k, b, r), pad_queries)


def rooted_union_sample(
    s: OracleSession,
    root: int,
    k: int,
    b: int,
    r: int,
    n_vertices: int | None = None,
    pad_queries: bool = False,
) -> BallUnion:
    """Ball centered at ``root`` plus ``k`` random balls.

    The ``k`` free balls are drawn first, so with equal seeds they coincide
    with ``union_sample(s, k, b, r)``. The designated root is listed first.
    ``n_vertices`` optionally validates ``root``; the oracle itself exposes
    no vertex count.
    """
    _check(b, r, k, min_k=0)
    root = int(root)
    if root < 0 or (n_vertices is not None and root >= n_vertices):
        raise InvalidArgument(f"invalid root vertex {root}")
    balls, roots = [], []
    for _ in range(k):
        c = s.sample_vertex()
        roots.append(c)
        balls.append(_grow_ball(s, c, b, r, pad_queries))
    try:
        own = _grow_ball(s, root, b, r, pad_queries)
    except IndexError:
        raise InvalidArgument(f"invalid root vertex {root}") from None
    return _close(s, [own] + balls, [root] + roots, (k, b, r), pad_queries, designated_root=root)


def weakly_connected_components(u: BallUnion | LocalGraph) -> ComponentSet:
    """Weak components ordered by their smallest local index."""
    a = u.adjacency
    m = a.shape[0]
    if m == 0:
        return ComponentSet(())
    count, labels = connected_components(csr_matrix(a), directed=True, connection="weak")
    comps = [np.nonzero(labels == c)[0] for c in range(count)]
    comps.sort(key=lambda c: int(c[0]))
    root_component = None
    if isinstance(u, BallUnion) and u.designated_root is not None:
        pos = u.local_index(u.designated_root)
        root_component = next(i for i, c in enumerate(comps) if pos in c)
    return ComponentSet(tuple(comps), root_component)


def require_root_component(c: ComponentSet) -> int:
    if c.root_component is None:
        raise InvalidState("component set has no designated root component")
    return c.root_component
