"""Random neighborhood access model.

An :class:`OracleSession` is the only way samplers and estimators touch a
graph. It answers three query types (uniform vertex, uniform out-neighbor,
adjacency test) and counts every call. Batched variants exist for speed;
a batch of ``t`` queries is accounted exactly like ``t`` scalar calls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded, InvalidState
from .graph import Graph
from .rng import SeedLike, as_seed_sequence, make_rng

EMPTY = -1
"""Marker returned by batched neighbor draws for vertices with no out-neighbors."""


@dataclass(frozen=True)
class QueryCounts:
    sample_vertex: int = 0
    sample_neighbor: int = 0
    is_adjacent: int = 0

    @property
    def total(self) -> int:
        return self.sample_vertex + self.sample_neighbor + self.is_adjacent

    def __add__(self, other: "QueryCounts") -> "QueryCounts":
        return QueryCounts(
            self.sample_vertex + other.sample_vertex,
            self.sample_neighbor + other.sample_neighbor,
            self.is_adjacent + other.is_adjacent,
        )

    def as_dict(self) -> dict:
        return {
            "sample_vertex": self.sample_vertex,
            "sample_neighbor": self.sample_neighbor,
            "is_adjacent": self.is_adjacent,
            "total": self.total,
        }


class OracleSession:
    """Seeded query interface over one immutable graph.

    Not safe for concurrent use; create one session per worker with a
    derived seed instead.
    """

    def __init__(self, graph: Graph, seed: SeedLike = None, budget: int | None = None):
        if budget is not None and budget < 0:
            raise ValueError("budget must be non-negative")
        self._graph = graph
        self.seed = as_seed_sequence(seed)
        self._rng = make_rng(self.seed)
        self.budget = budget
        self._counts = [0, 0, 0]
        self._exhausted = False
        self._deg = graph.out_degree()

    # accounting -------------------------------------------------------

    def _charge(self, kind: int, amount: int):
        if self._exhausted:
            raise BudgetExceeded("query budget already exhausted")
        if self.budget is not None and sum(self._counts) + amount > self.budget:
            self._exhausted = True
            raise BudgetExceeded(
                f"query budget {self.budget} exceeded "
                f"({sum(self._counts)} used, {amount} requested)"
            )
        self._counts[kind] += amount

    def query_count(self) -> QueryCounts:
        return QueryCounts(*self._counts)

    @property
    def directed(self) -> bool:
        return self._graph.directed

    @property
    def feature_dim(self) -> int:
        return self._graph.feature_dim

    def features_of(self, vertices) -> np.ndarray | None:
        """Features of already obtained vertices (free, like vertex labels)."""
        if self._graph.features is None:
            return None
        return self._graph.features[np.asarray(vertices, dtype=np.int64)]

    # scalar queries ---------------------------------------------------

    def sample_vertex(self) -> int:
        return int(self.sample_vertices(1)[0])

    def sample_neighbor(self, u: int) -> int | None:
        v = int(self.sample_neighbors(np.array([u]))[0])
        return None if v == EMPTY else v

    def is_adjacent(self, u: int, v: int) -> bool:
        return bool(self.are_adjacent(np.array([u]), np.array([v]))[0])

    # batched queries --------------------------------------------------

    def sample_vertices(self, count: int) -> np.ndarray:
        if self._graph.n == 0:
            raise InvalidState("cannot sample a vertex of the empty graph")
        self._charge(0, count)
        return self._rng.integers(0, self._graph.n, size=count)

    def sample_neighbors(self, us) -> np.ndarray:
        """One uniform out-neighbor per entry of ``us``; ``EMPTY`` where none."""
        us = np.asarray(us, dtype=np.int64)
        self._charge(1, us.size)
        deg = self._deg[us]
        pick = np.floor(self._rng.random(us.size) * deg).astype(np.int64)
        out = np.full(us.size, EMPTY, dtype=np.int64)
        ok = deg > 0
        out[ok] = self._graph.out_targets[self._graph.out_offsets[us[ok]] + pick[ok]]
        return out

    def are_adjacent(self, us, vs) -> np.ndarray:
        us = np.asarray(us, dtype=np.int64)
        vs = np.asarray(vs, dtype=np.int64)
        self._charge(2, us.size)
        return self._graph.has_arcs(us, vs)
