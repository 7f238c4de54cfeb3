"""Exact canonical certificates for small rooted, featured digraphs.

Pipeline: initial vertex colors from (root positions, feature buckets);
twin classes are collapsed into single labelled vertices; the reduced graph
is labelled by individualization-refinement with automorphism pruning; the
reduced order is expanded back to a canonical order of the input.

Two inputs get equal certificates iff they are isomorphic by a map that
sends root ``i`` to root ``i`` and preserves quantized features.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CanonicalizationTimeout, InvalidArgument, TooLarge
from .sampler import BallUnion, LocalGraph

CERT_VERSION = 1
_MAGIC = b"RBC"
ROOT_MODES = ("ordered", "unrooted")
DEFAULT_SIZE_CAP = 256
DEFAULT_NODE_BUDGET = 100_000
DEFAULT_FEATURE_STEP = 0.1

# fixed hash weights for colour refinement; colour c hashes to _W[c]
_WEIGHTS = np.random.Generator(np.random.Philox(0x5EED)).integers(
    1, 2**62, size=(2, 1 << 14), dtype=np.int64
)


@dataclass(frozen=True, eq=False)
class CanonicalCode:
    certificate: bytes
    root_mode: str
    feature_step: float | None
    num_vertices: int
    digest: bytes = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "digest", hashlib.blake2b(self.certificate, digest_size=16).digest())

    def __hash__(self) -> int:
        return int.from_bytes(self.digest[:8], "big")

    def __eq__(self, other) -> bool:
        # digest equality alone is not trusted; the full certificate decides
        if not isinstance(other, CanonicalCode):
            return NotImplemented
        return self.digest == other.digest and self.certificate == other.certificate

    def __repr__(self) -> str:
        return f"CanonicalCode(m={self.num_vertices}, {self.root_mode}, {self.digest.hex()[:12]})"

    @classmethod
    def from_hex(cls, cert_hex: str) -> "CanonicalCode":
        return decode_header(bytes.fromhex(cert_hex))


def quantize(features: np.ndarray, step: float) -> np.ndarray:
    """Bucket index of each feature on a grid of width ``step`` over [0, 1]."""
    if step <= 0 or step > 1:
        raise InvalidArgument("feature step must lie in (0, 1]")
    buckets = max(1, math.ceil(1.0 / step - 1e-9))
    idx = np.floor(np.asarray(features, dtype=np.float64) / step + 1e-9).astype(np.int64)
    return np.clip(idx, 0, buckets - 1)


def _rank_rows(keys: list) -> np.ndarray:
    uniq = sorted(set(keys))
    pos = {k: i for i, k in enumerate(uniq)}
    return np.array([pos[k] for k in keys], dtype=np.int64)


# twin reduction ---------------------------------------------------------


def _reduce_twins(adj: np.ndarray, labels: list) -> tuple[np.ndarray, list, list]:
    """Collapse classes of twins with equal labels.

    False twins have equal rows and columns; true twins have equal rows and
    columns of ``A + I``. A vertex is never in a nontrivial class of both
    kinds, and twins are swapped by a colour preserving automorphism, so
    the reduction loses nothing once class type and size enter the label.
    """
    members = [[i] for i in range(adj.shape[0])]
    a = adj
    while a.shape[0] > 1:
        m = a.shape[0]
        ai = a | np.eye(m, dtype=bool)
        groups: dict = {}
        for v in range(m):
            fkey = (0, labels[v], a[v].tobytes(), a[:, v].tobytes())
            tkey = (1, labels[v], ai[v].tobytes(), ai[:, v].tobytes())
            groups.setdefault(fkey, []).append(v)
            groups.setdefault(tkey, []).append(v)
        merged = [(key[0], vs) for key, vs in groups.items() if len(vs) > 1]
        if not merged:
            break
        head = {}
        for kind, vs in merged:
            for v in vs:
                assert v not in head, "vertex in two twin classes"
                head[v] = (vs[0], kind, vs)
        keep, new_labels, new_members = [], [], []
        for v in range(m):
            if v not in head:
                keep.append(v)
                new_labels.append(labels[v])
                new_members.append(members[v])
            elif head[v][0] == v:
                _, kind, vs = head[v]
                keep.append(v)
                new_labels.append((1, kind, len(vs), labels[v]))
                new_members.append([x for w in vs for x in members[w]])
        a = a[np.ix_(keep, keep)]
        labels, members = new_labels, new_members
    return a, labels, members


# individualization-refinement ------------------------------------------


class _Search:
    def __init__(self, adj: np.ndarray, colors: np.ndarray, node_budget: int):
        self.a = adj
        self.ai = adj.astype(np.int64)
        self.ait = np.ascontiguousarray(self.ai.T)
        self.directed = not np.array_equal(adj, adj.T)
        self.m = adj.shape[0]
        self.colors0 = colors
        self.budget = node_budget
        self.nodes = 0
        self.first = None
        self.best = None
        self.autos: list[np.ndarray] = []

    def refine(self, c: np.ndarray) -> np.ndarray:
        ncol = int(c.max()) + 1
        w_out, w_in = _WEIGHTS[0], _WEIGHTS[1]
        while True:
            # integer sums wrap mod 2^64, which keeps them order independent
            h_out = self.ai @ w_out[c]
            if self.directed:
                h_in = self.ait @ w_in[c]
                order = np.lexsort((h_in, h_out, c))
                ks = (c[order], h_out[order], h_in[order])
            else:
                order = np.lexsort((h_out, c))
                ks = (c[order], h_out[order])
            step = np.zeros(self.m, dtype=np.int64)
            for k in ks:
                step[1:] |= k[1:] != k[:-1]
            new = np.empty(self.m, dtype=np.int64)
            new[order] = np.cumsum(step)
            count = int(new[order[-1]]) + 1
            if count == ncol:
                return c
            c, ncol = new, count

    @staticmethod
    def individualize(c: np.ndarray, v: int) -> np.ndarray:
        key = 2 * c + 1
        key[v] -= 1
        return np.unique(key, return_inverse=True)[1].ravel()

    def _leaf(self, c: np.ndarray):
        perm = np.argsort(c, kind="stable")
        cert = np.packbits(self.a[np.ix_(perm, perm)]).tobytes()
        if self.first is None:
            self.first = self.best = (cert, perm)
            return
        for ref_cert, ref_perm in (self.first, self.best):
            if cert == ref_cert:
                gamma = np.empty(self.m, dtype=np.int64)
                gamma[perm] = ref_perm
                self.autos.append(gamma)
                return
        if cert < self.best[0]:
            self.best = (cert, perm)

    def _orbit(self, seeds: list[int], path: list[int]) -> set[int]:
        gens = [g for g in self.autos if all(g[p] == p for p in path)]
        orbit = set(seeds)
        frontier = list(seeds)
        while frontier and gens:
            nxt = []
            for x in frontier:
                for g in gens:
                    y = int(g[x])
                    if y not in orbit:
                        orbit.add(y)
                        nxt.append(y)
            frontier = nxt
        return orbit

    def run(self) -> np.ndarray:
        self._visit(self.colors0, [])
        return self.best[1]

    def _visit(self, c: np.ndarray, path: list[int]):
        self.nodes += 1
        if self.nodes > self.budget:
            raise CanonicalizationTimeout(f"search exceeded {self.budget} nodes")
        c = self.refine(c)
        sizes = np.bincount(c)
        if sizes.max() == 1:
            self._leaf(c)
            return
        open_cells = np.nonzero(sizes > 1)[0]
        target = open_cells[np.argmin(sizes[open_cells])]
        tried: list[int] = []
        orbit: set[int] = set()
        stamp = None
        for v in np.nonzero(c == target)[0]:
            v = int(v)
            if tried:
                if stamp != (len(tried), len(self.autos)):
                    orbit = self._orbit(tried, path)
                    stamp = (len(tried), len(self.autos))
                if v in orbit:
                    continue
            self._visit(self.individualize(c, v), path + [v])
            tried.append(v)


def canonical_order(adj: np.ndarray, colors, node_budget: int = DEFAULT_NODE_BUDGET) -> np.ndarray:
    """Canonical vertex order of a coloured digraph.

    ``colors`` are integers whose relative order is meaningful (equal
    integers = same colour). Returns ``order`` with ``order[i]`` the vertex
    placed at canonical position ``i``.
    """
    adj = np.asarray(adj, dtype=bool)
    m = adj.shape[0]
    if m == 0:
        return np.zeros(0, dtype=np.int64)
    if m > _WEIGHTS.shape[1]:
        raise TooLarge(f"graph has {m} vertices; refinement supports {_WEIGHTS.shape[1]}")
    labels = [(0, int(x)) for x in np.asarray(colors).tolist()]
    red, red_labels, members = _reduce_twins(adj, labels)
    if red.shape[0] == 1:
        return np.array(members[0], dtype=np.int64)
    search = _Search(red, _rank_rows(red_labels), node_budget)
    red_order = search.run()
    return np.array([x for v in red_order for x in members[v]], dtype=np.int64)


def _initial_colors(g: LocalGraph, root_mode: str, step: float | None):
    m = g.m
    roots_at = [[] for _ in range(m)]
    if root_mode == "ordered":
        for i, r in enumerate(g.roots):
            roots_at[r].append(i)
    if g.features is not None and step is not None:
        buckets = quantize(g.features, step)
    else:
        buckets = np.zeros((m, 0), dtype=np.int64)
    keys = [(tuple(roots_at[v]), tuple(buckets[v].tolist())) for v in range(m)]
    return _rank_rows(keys), buckets


def canonical_form(
    g: BallUnion | LocalGraph,
    root_mode: str = "ordered",
    feature_step: float | None = DEFAULT_FEATURE_STEP,
    size_cap: int = DEFAULT_SIZE_CAP,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> tuple[CanonicalCode, np.ndarray]:
    """Certificate and the canonical order that produced it."""
    if root_mode not in ROOT_MODES:
        raise InvalidArgument(f"root_mode must be one of {ROOT_MODES}")
    if isinstance(g, BallUnion):
        g = g.local()
    m = g.m
    if m > size_cap:
        raise TooLarge(f"graph has {m} vertices, cap is {size_cap}")
    adj = np.asarray(g.adjacency, dtype=bool)
    if adj.shape != (m, m) or (m and adj.diagonal().any()):
        raise InvalidArgument("adjacency must be square with an empty diagonal")
    colors, buckets = _initial_colors(g, root_mode, feature_step)
    order = canonical_order(adj, colors, node_budget)
    inv = np.empty(m, dtype=np.int64)
    inv[order] = np.arange(m)
    roots = [int(inv[r]) for r in g.roots] if root_mode == "ordered" else []
    cert = _encode(m, root_mode, roots, feature_step, buckets[order], adj[np.ix_(order, order)])
    return CanonicalCode(cert, root_mode, feature_step, m), order


def canonicalize(
    g: BallUnion | LocalGraph,
    root_mode: str = "ordered",
    feature_step: float | None = DEFAULT_FEATURE_STEP,
    size_cap: int = DEFAULT_SIZE_CAP,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> CanonicalCode:
    return canonical_form(g, root_mode, feature_step, size_cap, node_budget)[0]


def isomorphic(a: CanonicalCode, b: CanonicalCode) -> bool:
    if a.root_mode != b.root_mode or a.feature_step != b.feature_step:
        raise InvalidArgument("codes were built with different root modes or feature steps")
    return a == b


# byte layout (big endian):
#   "RBC" | version u8 | mode u8 | m u32 | k u16 | k * u32 root positions
#   | step f64 (NaN when absent) | d u16 | m*d u16 buckets | packed adjacency


def _encode(m, root_mode, roots, step, buckets, adj) -> bytes:
    d = int(buckets.shape[1])
    parts = [
        _MAGIC,
        struct.pack(">BBIH", CERT_VERSION, ROOT_MODES.index(root_mode), m, len(roots)),
        struct.pack(f">{len(roots)}I", *roots),
        struct.pack(">dH", float("nan") if step is None else float(step), d),
        np.asarray(buckets, dtype=">u2").tobytes(),
        np.packbits(adj).tobytes(),
    ]
    return b"".join(parts)


def decode_header(cert: bytes) -> CanonicalCode:
    if cert[:3] != _MAGIC:
        raise InvalidArgument("not a canonical certificate")
    version, mode, m, _ = struct.unpack(">BBIH", cert[3:11])
    if version != CERT_VERSION:
        raise InvalidArgument(f"unsupported certificate version {version}")
    k = struct.unpack(">H", cert[9:11])[0]
    off = 11 + 4 * k
    step = struct.unpack(">d", cert[off : off + 8])[0]
    return CanonicalCode(cert, ROOT_MODES[mode], None if math.isnan(step) else step, m)


def decode_adjacency(code: CanonicalCode) -> tuple[np.ndarray, tuple[int, ...]]:
    """Canonical adjacency matrix and root positions stored in a certificate."""
    cert = code.certificate
    _, _, m, k = struct.unpack(">BBIH", cert[3:11])
    roots = struct.unpack(f">{k}I", cert[11 : 11 + 4 * k])
    off = 11 + 4 * k + 8
    d = struct.unpack(">H", cert[off : off + 2])[0]
    off += 2 + 2 * m * d
    bits = np.unpackbits(np.frombuffer(cert[off:], dtype=np.uint8))[: m * m]
    return bits.reshape(m, m).astype(bool), tuple(roots)
