"""Random and deterministic graph generators.

All random generators take a seed and are bitwise reproducible for it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .graph import Graph, simplify_edges
from .rng import SeedLike, make_rng

# above this many vertex pairs ER switches from a Bernoulli matrix to
# drawing a binomial edge count and that many distinct pairs
_DENSE_PAIR_LIMIT = 20_000_000


@dataclass(frozen=True)
class GraphonSpec:
    """Piecewise-constant graphon given by an ``m x m`` probability grid."""

    grid: np.ndarray

    def __post_init__(self):
        grid = np.array(self.grid, dtype=np.float64)
        if grid.ndim != 2 or grid.shape[0] != grid.shape[1] or grid.shape[0] == 0:
            raise InvalidArgument("graphon grid must be a non-empty square matrix")
        if np.any(grid < 0) or np.any(grid > 1):
            raise InvalidArgument("graphon grid entries must lie in [0, 1]")
        if not np.allclose(grid, grid.T, atol=0, rtol=0):
            raise InvalidArgument("graphon grid must be symmetric")
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)

    @property
    def blocks(self) -> int:
        return self.grid.shape[0]

    @classmethod
    def constant(cls, p: float) -> "GraphonSpec":
        return cls(np.array([[p]]))


def _check_p(p: float):
    if not 0.0 <= p <= 1.0:
        raise InvalidArgument(f"edge probability {p} outside [0, 1]")


def _upper_pairs(n: int, mask: np.ndarray) -> np.ndarray:
    iu, ju = np.triu_indices(n, k=1)
    return np.column_stack([iu[mask], ju[mask]])


def gen_er(n: int, p: float, seed: SeedLike = None) -> Graph:
    """Erdos-Renyi G(n, p)."""
    _check_p(p)
    if n < 0:
        raise InvalidArgument("n must be non-negative")
    rng = make_rng(seed)
    pairs = n * (n - 1) // 2
    if pairs <= _DENSE_PAIR_LIMIT:
        mask = rng.random(pairs) < p
        return Graph._from_simple(n, _upper_pairs(n, mask), False)
    # conditioned on the count, the edge set is a uniform subset of pairs;
    # uniform ordered pairs u != v give uniform unordered pairs
    target = int(rng.binomial(pairs, p))
    keys = np.empty(0, dtype=np.int64)
    while keys.size < target:
        want = int((target - keys.size) * 1.1) + 16
        u = rng.integers(0, n, size=want)
        v = rng.integers(0, n, size=want)
        keep = u != v
        lo = np.minimum(u[keep], v[keep])
        hi = np.maximum(u[keep], v[keep])
        cand = np.concatenate([keys, lo * n + hi])
        _, first = np.unique(cand, return_index=True)
        keys = cand[np.sort(first)]
    keys = np.sort(keys[:target])
    return Graph._from_simple(n, np.column_stack([keys // n, keys % n]), False)


def gen_config_regular(n: int, d: int, seed: SeedLike = None) -> Graph:
    """Configuration model on ``n`` vertices with ``d`` half-edges each.

    Half-edges are paired uniformly; the resulting self-loops and parallel
    edges are deleted, so a few vertices may end with degree below ``d``.
    """
    if n < 1 or d < 0:
        raise InvalidArgument("need n >= 1 and d >= 0")
    if (n * d) % 2:
        raise InvalidArgument(f"n*d = {n * d} is odd; half-edges cannot be paired")
    if d >= n:
        raise InvalidArgument(f"degree {d} >= n = {n} forces duplicate edges")
    rng = make_rng(seed)
    stubs = rng.permutation(np.repeat(np.arange(n, dtype=np.int64), d))
    arr, _, _ = simplify_edges(n, stubs.reshape(-1, 2), False)
    return Graph._from_simple(n, arr, False)


def gen_graphon(spec: GraphonSpec, n: int, seed: SeedLike = None, chunk: int = 2048) -> Graph:
    """Sample an n-vertex graph from a piecewise-constant graphon."""
    if n < 0:
        raise InvalidArgument("n must be non-negative")
    rng = make_rng(seed)
    m = spec.blocks
    x = rng.random(n)
    block = np.minimum((x * m).astype(np.int64), m - 1)
    parts = []
    # row chunks keep memory at O(chunk * n)
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        rows = np.arange(start, stop)
        coin = rng.random((stop - start, n))
        prob = spec.grid[block[rows][:, None], block[None, :]]
        hit = (coin < prob) & (np.arange(n)[None, :] > rows[:, None])
        i, j = np.nonzero(hit)
        parts.append(np.column_stack([rows[i], j]))
    arr = np.concatenate(parts) if parts else np.empty((0, 2), dtype=np.int64)
    return Graph._from_simple(n, arr.astype(np.int64), False)


def gen_two_cliques(N: int, bridged: bool = False) -> Graph:
    """Two disjoint copies of K_N, optionally joined by one edge (N-1, N)."""
    if N < 2:
        raise InvalidArgument("clique size must be at least 2")
    iu, ju = np.triu_indices(N, k=1)
    a = np.column_stack([iu, ju])
    arr = np.concatenate([a, a + N])
    if bridged:
        arr = np.concatenate([arr, [[N - 1, N]]])
    return Graph._from_simple(2 * N, arr.astype(np.int64), False)


def perturb_add_edges(g: Graph, count: int, seed: SeedLike = None) -> Graph:
    """Add ``count`` new uniformly random edges (no loops, no duplicates)."""
    if g.directed:
        raise InvalidArgument("perturbation is defined for undirected graphs")
    free = g.n * (g.n - 1) // 2 - g.num_edges
    if count > free:
        raise InvalidArgument(f"cannot add {count} edges; only {free} non-edges exist")
    rng = make_rng(seed)
    existing = g.edges()
    taken = set((existing[:, 0] * g.n + existing[:, 1]).tolist())
    new = []
    while len(new) < count:
        u, v = (int(x) for x in rng.integers(0, g.n, size=2))
        if u == v:
            continue
        key = min(u, v) * g.n + max(u, v)
        if key in taken:
            continue
        taken.add(key)
        new.append((min(u, v), max(u, v)))
    if not new:
        return g
    return g.add_edges(new)


# small deterministic graphs ---------------------------------------------


def complete_graph(n: int) -> Graph:
    iu, ju = np.triu_indices(n, k=1)
    return Graph._from_simple(n, np.column_stack([iu, ju]).astype(np.int64), False)


def path_graph(n: int) -> Graph:
    arr = np.column_stack([np.arange(n - 1), np.arange(1, n)]) if n > 1 else np.empty((0, 2))
    return Graph._from_simple(n, arr.astype(np.int64), False)


def star_graph(leaves: int) -> Graph:
    arr = np.column_stack([np.zeros(leaves), np.arange(1, leaves + 1)])
    return Graph._from_simple(leaves + 1, arr.astype(np.int64), False)


def empty_graph(n: int) -> Graph:
    return Graph._from_simple(n, np.empty((0, 2), dtype=np.int64), False)


def isolated_pair_plus_edge() -> Graph:
    """Two isolated vertices plus a single edge."""
    return Graph._from_simple(4, np.array([[2, 3]], dtype=np.int64), False)
