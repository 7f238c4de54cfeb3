"""Immutable CSR graph storage and edge-list ingestion."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, InvalidArgument, ParseError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LoadStats:
    lines: int = 0
    self_loops: int = 0
    duplicates: int = 0


def _csr(n: int, src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((dst, src))
    targets = dst[order].astype(np.int64)
    counts = np.bincount(src, minlength=n)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return offsets, targets


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple graph on vertices ``0..n-1``.

    Undirected graphs are stored as symmetric digraphs, so ``out_*`` and
    ``in_*`` coincide for them. Self-loops and parallel edges never occur.
    """

    n: int
    directed: bool
    out_offsets: np.ndarray
    out_targets: np.ndarray
    in_offsets: np.ndarray
    in_targets: np.ndarray
    features: np.ndarray | None = None
    stats: LoadStats | None = field(default=None, compare=False)

    def __post_init__(self):
        # sorted arc keys u*n+v; is_adjacent is a binary search over them
        src = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.out_offsets))
        object.__setattr__(self, "_keys", src * max(self.n, 1) + self.out_targets)
        for arr in (self.out_offsets, self.out_targets, self.in_offsets, self.in_targets):
            arr.setflags(write=False)
        if self.features is not None:
            self.features.setflags(write=False)

    # construction -----------------------------------------------------

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges,
        directed: bool = False,
        features=None,
    ) -> "Graph":
        """Build a graph, silently dropping self-loops and duplicate edges.

        Use :func:`simplify_edges` first when the drop counts matter.
        """
        arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        arr, _, _ = simplify_edges(n, arr, directed)
        return cls._from_simple(n, arr, directed, features)

    @classmethod
    def _from_simple(cls, n, arr, directed, features=None, stats=None) -> "Graph":
        if n < 0:
            raise InvalidArgument("vertex count must be non-negative")
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise InvalidArgument("edge endpoint out of range")
        if not directed:
            arr = np.concatenate([arr, arr[:, ::-1]])
        src, dst = arr[:, 0], arr[:, 1]
        out_off, out_tgt = _csr(n, src, dst)
        in_off, in_tgt = _csr(n, dst, src)
        if features is not None:
            features = np.array(features, dtype=np.float64)
            if features.ndim == 1:
                features = features[:, None]
            if features.shape[0] != n:
                raise DimensionError(f"feature rows {features.shape[0]} != vertex count {n}")
            if features.size and (features.min() < 0.0 or features.max() > 1.0):
                raise InvalidArgument("vertex features must lie in [0, 1]")
        return cls(n, bool(directed), out_off, out_tgt, in_off, in_tgt, features, stats)

    # queries ----------------------------------------------------------

    @property
    def num_arcs(self) -> int:
        return int(self.out_targets.size)

    @property
    def num_edges(self) -> int:
        return self.num_arcs if self.directed else self.num_arcs // 2

    @property
    def feature_dim(self) -> int:
        return 0 if self.features is None else int(self.features.shape[1])

    def out_degree(self) -> np.ndarray:
        return np.diff(self.out_offsets)

    def in_degree(self) -> np.ndarray:
        return np.diff(self.in_offsets)

    def neighbors(self, u: int) -> np.ndarray:
        return self.out_targets[self.out_offsets[u] : self.out_offsets[u + 1]]

    def has_arcs(self, us, vs) -> np.ndarray:
        """Vectorized arc membership test (no query accounting)."""
        us = np.asarray(us, dtype=np.int64)
        vs = np.asarray(vs, dtype=np.int64)
        q = us * max(self.n, 1) + vs
        keys = self._keys
        if keys.size == 0:
            return np.zeros(q.shape, dtype=bool)
        pos = np.searchsorted(keys, q)
        pos = np.minimum(pos, keys.size - 1)
        return keys[pos] == q

    def edges(self) -> np.ndarray:
        """Arc list; for undirected graphs each edge once with u < v."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.out_degree())
        arr = np.column_stack([src, self.out_targets])
        if not self.directed:
            arr = arr[arr[:, 0] < arr[:, 1]]
        return arr

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=bool)
        e = self.edges()
        a[e[:, 0], e[:, 1]] = True
        if not self.directed:
            a[e[:, 1], e[:, 0]] = True
        return a

    def to_scipy(self):
        import scipy.sparse as sp

        data = np.ones(self.num_arcs, dtype=np.int64)
        return sp.csr_matrix((data, self.out_targets, self.out_offsets), shape=(self.n, self.n))

    def relabel(self, perm) -> "Graph":
        """Graph with vertex ``v`` renamed to ``perm[v]``."""
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.n)):
            raise InvalidArgument("perm must be a permutation of range(n)")
        e = self.edges()
        feats = None
        if self.features is not None:
            feats = np.empty_like(self.features)
            feats[perm] = self.features
        return Graph._from_simple(self.n, perm[e], self.directed, feats)

    def add_edges(self, edges) -> "Graph":
        arr = np.concatenate([self.edges(), np.asarray(edges, dtype=np.int64).reshape(-1, 2)])
        return Graph.from_edges(self.n, arr, self.directed, self.features)

    def __repr__(self) -> str:
        kind = "directed" if self.directed else "undirected"
        return f"Graph(n={self.n}, edges={self.num_edges}, {kind}, d={self.feature_dim})"


def simplify_edges(n: int, arr: np.ndarray, directed: bool) -> tuple[np.ndarray, int, int]:
    """Drop self-loops and duplicates. Returns (edges, loops, duplicates)."""
    arr = np.asarray(arr, dtype=np.int64).reshape(-1, 2)
    loops = arr[:, 0] == arr[:, 1]
    n_loops = int(loops.sum())
    arr = arr[~loops]
    if not directed:
        arr = np.sort(arr, axis=1)
    before = arr.shape[0]
    if before:
        arr = np.unique(arr, axis=0)
    return arr, n_loops, before - arr.shape[0]


# file formats ---------------------------------------------------------


_HEADER = re.compile(r"#\s*n\s*=\s*(\d+)")


def _read_pairs(path: Path) -> tuple[list[tuple[int, int]], int, int | None]:
    pairs = []
    lines = 0
    declared = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            if declared is None and not pairs:
                m = _HEADER.match(raw.strip())
                if m:
                    declared = int(m.group(1))
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            lines += 1
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"expected 'u v', got {raw.strip()!r}", lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"non-integer vertex id in {raw.strip()!r}", lineno) from None
            if u < 0 or v < 0:
                raise ParseError("vertex ids must be non-negative", lineno)
            pairs.append((u, v))
    return pairs, lines, declared


def read_features(path, n: int) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                rows.append([float(x) for x in line.split()])
            except ValueError:
                raise ParseError(f"bad feature value in {raw.strip()!r}", lineno) from None
    if len(rows) != n:
        raise DimensionError(f"feature file has {len(rows)} rows, graph has {n} vertices")
    if rows and len({len(r) for r in rows}) != 1:
        raise DimensionError("feature rows have inconsistent dimension")
    return np.array(rows, dtype=np.float64).reshape(n, -1)


def load_edge_list(path, directed: bool = False, features_path=None) -> Graph:
    """Read a whitespace separated ``u v`` edge list.

    Vertex ids are compacted to ``0..n-1`` in increasing id order, unless the
    file starts with a ``# n=N`` header (as written by :func:`write_edge_list`),
    in which case ids are kept and isolated vertices survive the round trip.
    Self-loops and duplicate edges are dropped and counted in ``graph.stats``.
    """
    pairs, lines, declared = _read_pairs(Path(path))
    raw = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    if declared is not None and (raw.size == 0 or raw.max() < declared):
        n = declared
        arr = raw
    else:
        ids, inverse = np.unique(raw, return_inverse=True)
        n = int(ids.size)
        arr = inverse.reshape(-1, 2)
    arr, loops, dups = simplify_edges(n, arr, directed)
    if loops or dups:
        log.info("%s: dropped %d self-loops and %d duplicate edges", path, loops, dups)
    feats = read_features(features_path, n) if features_path is not None else None
    return Graph._from_simple(n, arr, directed, feats, LoadStats(lines, loops, dups))


def write_edge_list(g: Graph, path) -> None:
    e = g.edges()
    with open(path, "w") as fh:
        fh.write(f"# n={g.n} {'directed' if g.directed else 'undirected'}\n")
        for u, v in e:
            fh.write(f"{u} {v}\n")


def write_features(g: Graph, path) -> None:
    if g.features is None:
        raise InvalidArgument("graph has no features")
    np.savetxt(path, g.features, fmt="%.17g")
