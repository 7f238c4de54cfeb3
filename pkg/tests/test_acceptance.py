"""Acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL criterion N: ...`` line and then
asserts. Run with ``pytest tests/test_acceptance.py -v`` or directly as a
script, which runs every criterion in order and prints the same lines.
"""

import itertools
import json
import sys
import time
from contextlib import nullcontext, redirect_stdout
from io import StringIO

import numpy as np
import pytest

from helpers import all_adjacency, gradient_check, orbit_classes, random_pair, vf2_isomorphic
from rbslab.canonical import canonicalize
from rbslab.cli import main as cli_main
from rbslab.estimators import triangle_density
from rbslab.exact import exact_triangle_statistic
from rbslab.experiments import connectivity_experiment, perturb_experiment, sizegen_experiment
from rbslab.generators import isolated_pair_plus_edge, gen_config_regular, gen_er
from rbslab.gnn import ModelParams, SamplerParams, TrainConfig, evaluate, sample_dataset, train
from rbslab.graph import write_edge_list
from rbslab.metric import distance_from_profiles, distance_matrix, estimate_profile, profile_stack, transport_cost
from rbslab.oracle import OracleSession
from rbslab.rng import substream
from rbslab.sampler import LocalGraph

_capsys = None


def verdict(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    with _capsys.disabled() if _capsys is not None else nullcontext():
        print("\n" + line, flush=True)
    assert ok, line


@pytest.fixture(autouse=True)
def _terminal(capsys):
    global _capsys
    _capsys = capsys
    yield
    _capsys = None


# 1 ----------------------------------------------------------------------------


def test_criterion_01_triangle_estimator():
    g = gen_er(300, 0.1, seed=2024)
    exact = exact_triangle_statistic(g)
    t0 = time.perf_counter()
    errs = [abs(triangle_density(OracleSession(g, seed=s), 200_000) - exact) for s in range(5)]
    elapsed = time.perf_counter() - t0
    ok = max(errs) <= 0.01 and elapsed < 10.0
    verdict(1, ok, f"max |est - exact| = {max(errs):.2e} (<= 0.01), 5 seeds in {elapsed:.2f}s (< 10s)")


# 2 ----------------------------------------------------------------------------


def test_criterion_02_constant_queries():
    small = gen_er(1000, 0.01, seed=1)
    large = gen_er(100_000, 1e-4, seed=1)
    tri = []
    for g in (small, large):
        s = OracleSession(g, seed=0)
        triangle_density(s, 5000)
        tri.append(s.query_count())
    model = ModelParams.init(seed=0)
    res = evaluate(model, [small, large], [0, 1], SamplerParams(3, 5, 2), seed=0, votes=5)
    ev = res.queries
    ok = tri[0] == tri[1] and ev[0] == ev[1]
    verdict(2, ok, f"triangle queries {tri[0].total} vs {tri[1].total}; "
                   f"evaluate queries {ev[0].total} vs {ev[1].total} (n=1e3 vs 1e5, exact equality)")


# 3 ----------------------------------------------------------------------------


def test_criterion_03_two_class_profile():
    p = estimate_profile(isolated_pair_plus_edge(), r=2, M=10_000, seed=3, k=1)
    freqs = sorted(c / p.M for c in p.histogram.values())
    ok = len(freqs) == 2 and all(abs(f - 0.5) <= 0.02 for f in freqs)
    verdict(3, ok, f"{len(freqs)} classes, frequencies {[round(f, 4) for f in freqs]} (0.5 +- 0.02, M=1e4)")


# 4 ----------------------------------------------------------------------------


def metric_pool():
    """Ten graphs with well concentrated profiles: 2-regular and sparse ER, n in [300, 700]."""
    rng = np.random.default_rng(44)
    out = []
    for i in range(10):
        n = int(rng.integers(150, 351)) * 2
        if i % 2 == 0:
            out.append(gen_config_regular(n, 2, seed=substream(4, i)))
        else:
            out.append(gen_er(n, 0.3 / n, seed=substream(4, i)))
    return out


def test_criterion_04_metric_sanity():
    M, r_max = 5000, 3
    graphs = metric_pool()
    rng = np.random.default_rng(4)
    rep_a, rep_b, self_d = [], [], []
    for i, g in enumerate(graphs):
        h = g.relabel(rng.permutation(g.n))
        pa = profile_stack(g, r_max, M, substream(40, i, 0))
        pb = profile_stack(h, r_max, M, substream(40, i, 1))
        rep_a.append(pa)
        rep_b.append(pb)
        self_d.append(distance_from_profiles(pa, pb).value)

    def d(x, y):
        return distance_from_profiles(rep_a[x], rep_b[y])

    sym_bad = tri_bad = 0
    worst_sym = worst_tri = -np.inf
    for _ in range(50):
        x, y, z = (int(v) for v in rng.choice(len(graphs), size=3, replace=False))
        dxy, dyx, dxz, dyz = d(x, y), d(y, x), d(x, z), d(y, z)
        eps = max(e.eps_mc for e in (dxy, dyx, dxz, dyz))
        s = abs(dxy.value - dyx.value) - 2 * eps
        t = dxz.value - dxy.value - dyz.value - 2 * eps
        worst_sym, worst_tri = max(worst_sym, s), max(worst_tri, t)
        sym_bad += s > 0
        tri_bad += t > 0
    ok = max(self_d) <= 0.03 and sym_bad == 0 and tri_bad == 0
    verdict(4, ok, f"max d(G, pi G) = {max(self_d):.4f} (<= 0.03) over 10 graphs; "
                   f"symmetry violations {sym_bad}/50, triangle violations {tri_bad}/50 (slack 2 eps_MC; "
                   f"worst margins {worst_sym:.3f}, {worst_tri:.3f})")


# 5 ----------------------------------------------------------------------------


def test_criterion_05_connectivity_gadget():
    rep = connectivity_experiment((20, 80, 320), r_max=3, M=5000, seeds=(0, 1, 2, 3, 4))
    rows = rep.metrics["by_N"]
    means = [r["mean_distance"] for r in rows]
    gaps = [r["parameter_gap"] for r in rows]
    decreasing = all(b < a for a, b in zip(means, means[1:]))
    ok = decreasing and means[-1] <= 0.05 and all(g == 1 for g in gaps)
    verdict(5, ok, f"mean distances {[round(m, 4) for m in means]} for N=20,80,320 "
                   f"(strictly decreasing, last <= 0.05); connectivity gaps {gaps} (== 1)")


# 6 ----------------------------------------------------------------------------


def test_criterion_06_perturbation_bound():
    g = gen_er(2000, 0.005, seed=6)
    rep = perturb_experiment(g, 0.01, r_max=3, M=5000, seeds=(0, 1))
    level = [c for c in rep.checks if " level " in c["name"]]
    ok = len(level) == 6 and all(c["pass"] for c in level)
    shown = ", ".join(f"{c['observed']:.3f}<={c['bound']:.3f}" for c in level)
    verdict(6, ok, f"per-level TV vs 2 r^r delta + eps_MC, r=1..3, seeds 0,1: {shown}")


# 7 ----------------------------------------------------------------------------


def test_criterion_07_canonical_exactness():
    failures = 0
    checked = 0
    for m in range(1, 8):
        cls = orbit_classes(m)
        certs = [canonicalize(LocalGraph(a)).certificate for a in all_adjacency(m)]
        seen = {}
        for c, cert in zip(cls.tolist(), certs):
            seen.setdefault(c, set()).add(cert)
        distinct = {next(iter(v)) for v in seen.values()}
        # equal certificates within a class and distinct ones across classes
        failures += sum(len(v) != 1 for v in seen.values()) + (len(seen) - len(distinct))
        checked += len(certs)
    rng = np.random.default_rng(7)
    pair_fail = 0
    for _ in range(1000):
        a, ra, b, rb = random_pair(rng, 20)
        same = canonicalize(LocalGraph(a, ra)) == canonicalize(LocalGraph(b, rb))
        pair_fail += same != vf2_isomorphic(a, b, ra, rb)
    ok = failures == 0 and pair_fail == 0
    verdict(7, ok, f"exhaustive m<=7: {checked} labelled graphs, {failures} failures; "
                   f"1000 random pairs m<=20: {pair_fail} failures")


# 8 ----------------------------------------------------------------------------


def brute_coupling(cost):
    a, b = cost.shape
    L = int(np.lcm(a, b))
    big = np.repeat(np.repeat(cost, L // a, axis=0), L // b, axis=1)
    best = min(big[np.arange(L), list(p)].sum() for p in itertools.permutations(range(L)))
    return best / L


def test_criterion_08_wasserstein_exact():
    rng = np.random.default_rng(8)
    worst = 0.0
    cases = 0
    shapes = [(n, n) for n in range(1, 9)] * 4 + [(2, 4), (4, 2), (2, 8), (8, 4), (1, 8)]
    for a, b in shapes:
        cost = rng.random((a, b))
        worst = max(worst, abs(transport_cost(cost) - brute_coupling(cost)))
        cases += 1
    ga = [gen_er(30, p, seed=i) for i, p in enumerate((0.05, 0.1, 0.2))]
    gb = [gen_er(30, p, seed=10 + i) for i, p in enumerate((0.07, 0.15, 0.3))]
    cost = distance_matrix(ga, gb, r_max=2, M=100, seed=0)
    worst = max(worst, abs(transport_cost(cost) - brute_coupling(cost)))
    ok = worst <= 1e-9
    verdict(8, ok, f"{cases + 1} cost matrices with support <= 8: max |solver - brute force| = {worst:.1e} (<= 1e-9)")


# 9 ----------------------------------------------------------------------------


def test_criterion_09_gradients():
    errs = [gradient_check(seed) for seed in range(20)]
    ok = max(errs) < 1e-4
    verdict(9, ok, f"max relative error over 20 model/input pairs = {max(errs):.2e} (< 1e-4)")


# 10 ---------------------------------------------------------------------------


def test_criterion_10_learnable_target():
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)

    def split(count):
        labels = rng.integers(0, 2, size=count).tolist()
        graphs = [gen_er(int(rng.integers(50, 151)), 0.15 if y else 0.05, seed=int(rng.integers(2**62)))
                  for y in labels]
        return graphs, labels

    tr, ytr = split(500)
    te, yte = split(200)
    sp = SamplerParams(3, 5, 2)
    p0 = ModelParams.init(seed=substream(10, 0))
    data = sample_dataset(tr, ytr, p0, sp, per_graph=1, seed=substream(10, 1))
    model, _ = train(p0, data, TrainConfig(seed=10))
    res = evaluate(model, te, yte, sp, seed=substream(10, 2), votes=5)
    elapsed = time.perf_counter() - t0
    ok = res.accuracy >= 0.90 and elapsed < 300
    verdict(10, ok, f"test accuracy {res.accuracy:.3f} (>= 0.90) in {elapsed:.1f}s (< 300s)")


# 11 ---------------------------------------------------------------------------


def test_criterion_11_size_generalization():
    rep = sizegen_experiment(family="graphon", target="global-clustering", small=(30, 60), large=(300, 600), seed=11)
    val = rep.metrics["validation"]["accuracy"]
    test = rep.metrics["test"]["accuracy"]
    w = rep.metrics["wasserstein_train_test"]
    ok = test >= 0.70 and abs(val - test) <= 0.15
    verdict(11, ok, f"test accuracy {test:.3f} (>= 0.70), validation {val:.3f} (gap {abs(val - test):.3f} <= 0.15); "
                    f"train/test Wasserstein {w:.4f}")


# 12 ---------------------------------------------------------------------------


def run_cli(argv):
    buf = StringIO()
    with redirect_stdout(buf):
        code = cli_main([str(a) for a in argv])
    out = json.loads(buf.getvalue())
    if isinstance(out, dict):
        out.pop("timing", None)
    return code, json.dumps(out, sort_keys=True, indent=2)


def test_criterion_12_determinism(tmp_path):
    g = tmp_path / "g.el"
    fig = tmp_path / "toy.el"
    write_edge_list(isolated_pair_plus_edge(), fig)
    rows = []
    for i in range(6):
        path = tmp_path / f"m{i}.el"
        write_edge_list(gen_er(60, 0.05 if i % 2 else 0.2, seed=i), path)
        rows.append({"graph": path.name, "label": i % 2})
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps(rows))
    model = tmp_path / "model.bin"
    commands = [
        ["gen", "er", "--n", 200, "--p", 0.05, "--seed", 3, "--out", g],
        ["sample", "--graph", g, "--k", 2, "--b", 3, "--r", 2, "--seed", 3],
        ["profile", "--graph", fig, "--r", 2, "--k", 1, "--samples", 500, "--seed", 3],
        ["distance", "--a", g, "--b", fig, "--rmax", 2, "--samples", 300, "--seed", 3],
        ["wasserstein", "--a", g, fig, "--b", fig, "--rmax", 2, "--samples", 100, "--seed", 3],
        ["estimate", "triangle", "--graph", g, "--trials", 2000, "--seed", 3],
        ["estimate", "clustering", "--graph", g, "--trials", 2000, "--seed", 3],
        ["train", "--manifest", manifest, "--out", model, "--epochs", 3, "--k", 2, "--b", 2, "--r", 1, "--seed", 3],
        ["eval", "--model", model, "--manifest", manifest, "--k", 2, "--b", 2, "--r", 1, "--votes", 3, "--seed", 3],
        ["perturb", "--er", 300, 0.02, "--delta", 0.01, "--rmax", 2, "--samples", 200, "--seeds", 3, 4],
        ["connectivity", "--N", 4, 8, "--rmax", 2, "--samples", 200, "--seeds", 3, 4],
        ["sizegen", "--train", 40, "--val", 20, "--test", 20, "--small", 20, 30, "--large", 60, 80,
         "--epochs", 3, "--votes", 3, "--w-graphs", 3, "--w-samples", 30, "--seed", 3],
    ]
    differ = []
    for argv in commands:
        first = run_cli(argv)
        second = run_cli(argv)
        if first != second:
            differ.append(" ".join(str(a) for a in argv[:2]))
    ok = not differ
    verdict(12, ok, f"{len(commands)} CLI commands run twice, byte-identical JSON minus timing; differing: {differ or 'none'}")


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    failed = 0
    for name, fn in sorted(globals().items()):
        if not name.startswith("test_criterion_"):
            continue
        try:
            if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
