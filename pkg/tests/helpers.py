"""Independent oracles shared by unit and acceptance tests."""

import itertools

import networkx as nx
import numpy as np


def pair_index(m):
    return list(itertools.combinations(range(m), 2))


def all_adjacency(m):
    """Every labelled simple graph on m vertices, as an (2^E, m, m) bool array."""
    pairs = pair_index(m)
    E = len(pairs)
    codes = np.arange(1 << E, dtype=np.int64)
    out = np.zeros((codes.size, m, m), dtype=bool)
    for j, (a, b) in enumerate(pairs):
        bit = ((codes >> j) & 1).astype(bool)
        out[:, a, b] = bit
        out[:, b, a] = bit
    return out


def orbit_classes(m):
    """Isomorphism class id of every labelled graph code, by applying all m! maps."""
    pairs = pair_index(m)
    E = len(pairs)
    where = {p: j for j, p in enumerate(pairs)}
    perms = np.array(list(itertools.permutations(range(m))), dtype=np.int64).reshape(-1, m)
    pm = np.array([[where[tuple(sorted((int(p[a]), int(p[b]))))] for a, b in pairs] for p in perms],
                  dtype=np.int64).reshape(len(perms), E)
    cls = np.full(1 << E, -1, dtype=np.int64)
    nxt = 0
    for code in range(1 << E):
        if cls[code] >= 0:
            continue
        bits = (code >> np.arange(E)) & 1
        images = (bits[None, :] << pm).sum(axis=1)
        cls[images] = nxt
        nxt += 1
    return cls


def to_nx(adj, roots=(), labels=None):
    g = nx.from_numpy_array(np.asarray(adj, dtype=int))
    for v in g.nodes:
        g.nodes[v]["tag"] = (tuple(i for i, r in enumerate(roots) if r == v),
                             None if labels is None else tuple(np.asarray(labels[v]).tolist()))
    return g


def vf2_isomorphic(a, b, ra=(), rb=(), la=None, lb=None):
    return nx.is_isomorphic(to_nx(a, ra, la), to_nx(b, rb, lb), node_match=lambda x, y: x["tag"] == y["tag"])


def degree_preserving_swap(adj, rng, swaps=3):
    """Random double edge swaps; keeps the degree sequence, usually breaks isomorphism."""
    g = nx.from_numpy_array(np.asarray(adj, dtype=int))
    if g.number_of_edges() >= 2:
        try:
            nx.double_edge_swap(g, nswap=swaps, max_tries=200, seed=int(rng.integers(2**31)))
        except nx.NetworkXException:
            pass
    return nx.to_numpy_array(g, nodelist=range(adj.shape[0]), dtype=bool)


def random_pair(rng, m_max=20):
    """(adj_a, roots_a, adj_b, roots_b): b is a relabelling of a or of a degree-preserving variant."""
    m = int(rng.integers(1, m_max + 1))
    p = rng.uniform(0.1, 0.6)
    a = np.triu(rng.random((m, m)) < p, 1)
    a = a | a.T
    k = int(rng.integers(0, 3))
    ra = tuple(int(x) for x in rng.integers(0, m, size=k))
    b, rb = a, ra
    if rng.random() < 0.5:
        b = degree_preserving_swap(a, rng)
    perm = rng.permutation(m)
    inv = np.argsort(perm)
    b = b[np.ix_(perm, perm)]
    rb = tuple(int(inv[r]) for r in rb)
    return a, ra, b, rb


def gradient_check(seed, step=1e-5):
    """Worst relative error of analytic gradients against central differences.

    A small random model, a batch of sampled inputs with random labels and a
    random readout standardization. Relative error is |a - n| / max(|a|, |n|, 1e-6).
    """
    from rbslab.generators import gen_er
    from rbslab.gnn import (FeatureSpec, LabeledSample, ModelParams, SamplerParams,
                            fit_scaling, loss_and_grad, sample_input)
    from rbslab.oracle import OracleSession

    rng = np.random.default_rng(seed)
    rooted = bool(rng.random() < 0.3)
    classes = int(rng.integers(2, 5))
    feats = FeatureSpec("degree", (1, 2, 3, 5)) if rng.random() < 0.7 else FeatureSpec("constant")
    p = ModelParams.init(hidden=int(rng.integers(2, 6)), layers=int(rng.integers(1, 4)), classes=classes,
                         g_hidden=int(rng.integers(3, 8)), rooted=rooted, features=feats, seed=seed)
    g = gen_er(int(rng.integers(10, 40)), float(rng.uniform(0.05, 0.3)), seed=seed)
    s = OracleSession(g, seed=seed)
    sp = SamplerParams(int(rng.integers(1, 3)), 2, 2)
    batch = []
    for _ in range(int(rng.integers(1, 5))):
        root = int(rng.integers(g.n)) if rooted else None
        batch.append(LabeledSample(sample_input(s, p, sp, root=root), int(rng.integers(classes))))
    p = fit_scaling(p, batch)
    p.shift = p.shift + rng.normal(0, 0.3, p.shift.shape)
    wd = float(rng.choice([0.0, 1e-3]))
    _, grads = loss_and_grad(p, batch, wd)
    theta = p.tensors()
    worst = 0.0
    for ti, t in enumerate(theta):
        for idx in np.ndindex(t.shape):
            up = [x.copy() for x in theta]
            dn = [x.copy() for x in theta]
            up[ti][idx] += step
            dn[ti][idx] -= step
            num = (loss_and_grad(p.with_tensors(up), batch, wd)[0]
                   - loss_and_grad(p.with_tensors(dn), batch, wd)[0]) / (2 * step)
            a = grads[ti][idx]
            worst = max(worst, abs(a - num) / max(abs(a), abs(num), 1e-6))
    return worst
