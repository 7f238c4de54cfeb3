"""Empirical r-profiles, total variation, sampling distance and Wasserstein.

A level-``r`` profile is the histogram of canonical codes of ``M``
independent ball unions drawn with ``k = b = radius = r`` (``k`` can be
overridden). Distances combine level TVs with weights ``2^-r`` up to a
truncation level; the neglected tail ``2^-r_max`` is reported, not hidden.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .canonical import DEFAULT_FEATURE_STEP, CanonicalCode, canonicalize
from .errors import CanonicalizationTimeout, InvalidArgument, TooLarge
from .graph import Graph
from .oracle import OracleSession, QueryCounts
from .rng import SeedLike, as_seed_sequence, describe, substream
from .sampler import union_sample

PROFILE_SCHEMA = "rbslab.profile/1"
DEFAULT_R_MAX = 3
DEFAULT_WASSERSTEIN_CAP = 64


@dataclass
class Profile:
    r: int
    k: int
    b: int
    radius: int
    M: int
    feature_step: float | None
    root_mode: str
    histogram: Counter = field(default_factory=Counter)
    queries: QueryCounts = field(default_factory=QueryCounts)

    @property
    def params(self) -> tuple:
        return (self.r, self.k, self.b, self.radius, self.feature_step, self.root_mode)

    def frequencies(self) -> dict[CanonicalCode, float]:
        return {c: n / self.M for c, n in self.histogram.items()}

    def sqrt_mass(self) -> float:
        """Sum over classes of sqrt(empirical frequency)."""
        return float(sum(math.sqrt(n / self.M) for n in self.histogram.values()))

    def merge(self, other: "Profile") -> "Profile":
        if self.params != other.params:
            raise InvalidArgument("cannot merge profiles with different parameters")
        return Profile(
            *self.params[:4],
            M=self.M + other.M,
            feature_step=self.feature_step,
            root_mode=self.root_mode,
            histogram=self.histogram + other.histogram,
            queries=self.queries + other.queries,
        )

    def to_json(self) -> dict:
        rows = sorted(self.histogram.items(), key=lambda kv: (-kv[1], kv[0].certificate))
        return {
            "schema": PROFILE_SCHEMA,
            "r": self.r,
            "k": self.k,
            "b": self.b,
            "radius": self.radius,
            "M": self.M,
            "feature_step": self.feature_step,
            "root_mode": self.root_mode,
            "classes": len(rows),
            "queries": self.queries.as_dict(),
            "histogram": [
                {"digest": c.digest.hex(), "m": c.num_vertices, "count": n, "certificate": c.certificate.hex()}
                for c, n in rows
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Profile":
        if data.get("schema") != PROFILE_SCHEMA:
            raise InvalidArgument(f"unsupported profile schema {data.get('schema')!r}")
        hist = Counter()
        for row in data["histogram"]:
            code = CanonicalCode.from_hex(row["certificate"])
            if code.digest.hex() != row["digest"]:
                raise InvalidArgument("profile digest does not match its certificate")
            hist[code] += int(row["count"])
        q = data.get("queries", {})
        return cls(
            data["r"], data["k"], data["b"], data["radius"], data["M"],
            data["feature_step"], data["root_mode"], hist,
            QueryCounts(q.get("sample_vertex", 0), q.get("sample_neighbor", 0), q.get("is_adjacent", 0)),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def estimate_profile(
    g: Graph,
    r: int,
    M: int,
    seed: SeedLike = None,
    k: int | None = None,
    b: int | None = None,
    radius: int | None = None,
    feature_step: float | None = DEFAULT_FEATURE_STEP,
    root_mode: str = "ordered",
) -> Profile:
    """Histogram of ``M`` canonicalized ball unions.

    Draw ``i`` runs in its own session seeded by ``substream(seed, i)``, so a
    failing draw can be replayed from the seed recorded in the error.
    """
    if r < 1 or M < 1:
        raise InvalidArgument("need r >= 1 and M >= 1")
    k = r if k is None else k
    b = r if b is None else b
    radius = r if radius is None else radius
    base = as_seed_sequence(seed)
    hist: Counter = Counter()
    queries = QueryCounts()
    for i in range(M):
        draw_seed = substream(base, i)
        s = OracleSession(g, draw_seed)
        u = union_sample(s, k, b, radius)
        try:
            code = canonicalize(u, root_mode=root_mode, feature_step=feature_step)
        except CanonicalizationTimeout as exc:
            raise CanonicalizationTimeout(str(exc), describe(draw_seed)) from exc
        hist[code] += 1
        queries = queries + s.query_count()
    return Profile(r, k, b, radius, M, feature_step, root_mode, hist, queries)


def tv_distance(p: Profile, q: Profile) -> float:
    """Half the L1 distance between the empirical class frequencies."""
    if p.params != q.params:
        raise InvalidArgument(f"profile parameters differ: {p.params} vs {q.params}")
    fp, fq = p.frequencies(), q.frequencies()
    keys = set(fp) | set(fq)
    return 0.5 * math.fsum(abs(fp.get(c, 0.0) - fq.get(c, 0.0)) for c in keys)


def mc_tolerance(p: Profile, q: Profile) -> float:
    """Expected deviation scale of the plug-in TV between two profiles.

    ``E|p_hat_c - p_c| <= sqrt(p_c / M)``, so the plug-in TV is off by at
    most ``(sum sqrt p_c + sum sqrt q_c) / (2 sqrt M)`` in expectation; the
    empirical frequencies stand in for the unknown ones.
    """
    return 0.5 * (p.sqrt_mass() / math.sqrt(p.M) + q.sqrt_mass() / math.sqrt(q.M))


@dataclass
class DistanceEstimate:
    value: float
    r_max: int
    per_level_tv: list[float]
    tail_bound: float
    M: int
    per_level_eps: list[float]

    @property
    def eps_mc(self) -> float:
        return math.fsum(2.0**-r * e for r, e in enumerate(self.per_level_eps, start=1))

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "r_max": self.r_max,
            "per_level_tv": self.per_level_tv,
            "per_level_eps_mc": self.per_level_eps,
            "eps_mc": self.eps_mc,
            "tail_bound": self.tail_bound,
            "M": self.M,
        }


def combine_levels(tvs: list[float], eps: list[float], M: int) -> DistanceEstimate:
    r_max = len(tvs)
    value = math.fsum(2.0**-r * t for r, t in enumerate(tvs, start=1))
    return DistanceEstimate(value, r_max, list(tvs), 2.0**-r_max, M, list(eps))


def profile_stack(
    g: Graph, r_max: int, M: int, seed: SeedLike, feature_step=DEFAULT_FEATURE_STEP
) -> list[Profile]:
    """Profiles of levels ``1..r_max``; level ``r`` uses ``substream(seed, r)``."""
    return [estimate_profile(g, r, M, substream(seed, r), feature_step=feature_step) for r in range(1, r_max + 1)]


def distance_from_profiles(ps: list[Profile], qs: list[Profile]) -> DistanceEstimate:
    if len(ps) != len(qs):
        raise InvalidArgument("profile stacks have different depths")
    tvs = [tv_distance(p, q) for p, q in zip(ps, qs)]
    eps = [mc_tolerance(p, q) for p, q in zip(ps, qs)]
    return combine_levels(tvs, eps, ps[0].M if ps else 0)


def sampling_distance(
    g: Graph,
    h: Graph,
    r_max: int = DEFAULT_R_MAX,
    M: int = 5000,
    seed: SeedLike = None,
    feature_step=DEFAULT_FEATURE_STEP,
) -> DistanceEstimate:
    """Truncated sampling distance ``sum_{r<=r_max} 2^-r TV(z_r(g), z_r(h))``."""
    if r_max < 1:
        raise InvalidArgument("r_max must be >= 1")
    base = as_seed_sequence(seed)
    ps = profile_stack(g, r_max, M, substream(base, 0), feature_step)
    qs = profile_stack(h, r_max, M, substream(base, 1), feature_step)
    return distance_from_profiles(ps, qs)


# optimal transport -------------------------------------------------------


def transport_cost(cost: np.ndarray) -> float:
    """Exact optimal transport cost between two uniform discrete measures."""
    cost = np.asarray(cost, dtype=np.float64)
    na, nb = cost.shape
    if na == 0 or nb == 0:
        raise InvalidArgument("empty support")
    if na == nb:
        from scipy.optimize import linear_sum_assignment

        rows, cols = linear_sum_assignment(cost)
        return math.fsum(cost[rows, cols]) / na
    from scipy.optimize import linprog

    # variables pi[i, j] >= 0, row sums 1/na, column sums 1/nb
    a_eq = np.zeros((na + nb, na * nb))
    for i in range(na):
        a_eq[i, i * nb : (i + 1) * nb] = 1.0
    for j in range(nb):
        a_eq[na + j, j::nb] = 1.0
    b_eq = np.concatenate([np.full(na, 1.0 / na), np.full(nb, 1.0 / nb)])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


def distance_matrix(
    a: list[Graph], b: list[Graph], r_max: int, M: int, seed: SeedLike
) -> np.ndarray:
    """Pairwise sampling distances; each graph's profiles are estimated once."""
    base = as_seed_sequence(seed)
    pa = [profile_stack(g, r_max, M, substream(base, 0, i)) for i, g in enumerate(a)]
    pb = [profile_stack(g, r_max, M, substream(base, 1, j)) for j, g in enumerate(b)]
    out = np.zeros((len(a), len(b)))
    for i, j in itertools.product(range(len(a)), range(len(b))):
        out[i, j] = distance_from_profiles(pa[i], pb[j]).value
    return out


def wasserstein(
    a: list[Graph],
    b: list[Graph],
    r_max: int = DEFAULT_R_MAX,
    M: int = 1000,
    seed: SeedLike = None,
    cap: int = DEFAULT_WASSERSTEIN_CAP,
) -> float:
    """Wasserstein distance between uniform measures on two graph samples."""
    if len(a) > cap or len(b) > cap:
        raise TooLarge(f"support sizes {len(a)}, {len(b)} exceed cap {cap}")
    if not a or not b:
        raise InvalidArgument("both samples must be non-empty")
    return transport_cost(distance_matrix(a, b, r_max, M, seed))
