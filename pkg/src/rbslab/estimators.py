"""Constant-query estimators.

Every estimator here issues a number of oracle queries that depends on its
own parameters only. Trials are vectorized, but each trial still spends
exactly the queries it would spend when run on its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .canonical import DEFAULT_FEATURE_STEP, CanonicalCode, canonicalize
from .errors import InvalidArgument
from .exact import is_connected
from .generators import gen_two_cliques
from .metric import DEFAULT_R_MAX, sampling_distance
from .oracle import EMPTY, OracleSession
from .rng import SeedLike
from .sampler import union_sample

DEFAULT_REDRAW_CAP = 16


def _check_trials(s: OracleSession, T: int):
    if T < 1:
        raise InvalidArgument("number of trials T must be >= 1")
    if s.directed:
        raise InvalidArgument("estimator is defined for undirected graphs only")


def triangle_trials(s: OracleSession, T: int) -> np.ndarray:
    """Indicator of each trial: three uniform vertices pairwise adjacent.

    Uses ``3T`` vertex samples and ``3T`` adjacency queries, with no
    short-circuit. Repeated vertices are never adjacent to themselves, so
    the trial mean is ``6 * triangles / n^3``.
    """
    _check_trials(s, T)
    u, v, q = s.sample_vertices(3 * T).reshape(3, T)
    hit = s.are_adjacent(np.concatenate([u, u, q]), np.concatenate([v, q, v])).reshape(3, T)
    return hit.all(axis=0)


def triangle_density(s: OracleSession, T: int) -> float:
    return float(triangle_trials(s, T).mean())


def clustering_trials(s: OracleSession, T: int, redraw_cap: int = DEFAULT_REDRAW_CAP) -> np.ndarray:
    """Per trial: is a random pair of distinct neighbors of a random vertex adjacent.

    A trial draws ``v``, a first neighbor ``u`` and up to ``1 + redraw_cap``
    candidates for the second one; the first candidate different from ``u``
    is used. Trials without two distinct neighbors score 0, and their
    adjacency query goes to ``(v, v)``, which is never adjacent. All draws
    are issued whether needed or not.
    """
    _check_trials(s, T)
    if redraw_cap < 0:
        raise InvalidArgument("redraw_cap must be >= 0")
    tries = 2 + redraw_cap
    v = s.sample_vertices(T)
    draws = s.sample_neighbors(np.repeat(v, tries)).reshape(T, tries)
    u = draws[:, 0]
    cand = draws[:, 1:]
    good = (cand != u[:, None]) & (cand != EMPTY) & (u != EMPTY)[:, None]
    ok = good.any(axis=1)
    w = cand[np.arange(T), good.argmax(axis=1)]
    a = np.where(ok, u, v)
    b = np.where(ok, w, v)
    return s.are_adjacent(a, b) & ok


def local_clustering(s: OracleSession, T: int, redraw_cap: int = DEFAULT_REDRAW_CAP) -> float:
    return float(clustering_trials(s, T, redraw_cap).mean())


def bernoulli_stderr(mean: float, T: int) -> float:
    return math.sqrt(max(mean * (1.0 - mean), 0.0) / T)


@dataclass
class CanonicalEstimatorTable:
    """Lookup from isomorphism class of a sampled union to a value."""

    k: int
    b: int
    r: int
    entries: dict[CanonicalCode, float] = field(default_factory=dict)
    default_value: float = 0.0
    root_mode: str = "ordered"
    feature_step: float | None = DEFAULT_FEATURE_STEP

    def __post_init__(self):
        if self.k < 1 or self.b < 1 or self.r < 0:
            raise InvalidArgument("table needs k >= 1, b >= 1, r >= 0")
        for code in self.entries:
            if code.root_mode != self.root_mode or code.feature_step != self.feature_step:
                raise InvalidArgument("table entry built with different canonicalization settings")

    def code_of(self, u) -> CanonicalCode:
        return canonicalize(u, root_mode=self.root_mode, feature_step=self.feature_step)

    def lookup(self, code: CanonicalCode) -> float:
        return self.entries.get(code, self.default_value)


def canonical_estimate(s: OracleSession, table: CanonicalEstimatorTable) -> float:
    """One sampled union, canonicalized and looked up in ``table``."""
    u = union_sample(s, table.k, table.b, table.r)
    return table.lookup(table.code_of(u))


def connectivity_demo(
    N: int, r_max: int = DEFAULT_R_MAX, M: int = 5000, seed: SeedLike = None
) -> dict:
    """Bridged vs unbridged pair of N-cliques: parameter gap against distance."""
    if N < 2:
        raise InvalidArgument("clique size N must be >= 2")
    bridged = gen_two_cliques(N, bridged=True)
    split = gen_two_cliques(N, bridged=False)
    c1, c0 = int(is_connected(bridged)), int(is_connected(split))
    d = sampling_distance(bridged, split, r_max=r_max, M=M, seed=seed)
    return {
        "N": N,
        "connected": {"bridged": c1, "unbridged": c0},
        "parameter_gap": abs(c1 - c0),
        "distance": d.to_json(),
    }
