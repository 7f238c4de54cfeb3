"""Seeded experiment drivers returning JSON-ready reports.

A report carries its parameters, seeds, metrics and a list of bound checks.
Anything that varies between identical runs (wall clock) lives under the
``timing`` key so the rest can be compared byte for byte.
"""

from __future__ import annotations

import math
import operator
import time
from datetime import datetime, timezone

import numpy as np

from .errors import InvalidArgument, InvalidState
from .estimators import connectivity_demo
from .exact import exact_global_clustering, exact_max_degree
from .generators import GraphonSpec, gen_config_regular, gen_graphon, perturb_add_edges
from .gnn import FeatureSpec, ModelParams, SamplerParams, TrainConfig, evaluate, sample_dataset, train
from .graph import Graph
from .metric import sampling_distance, wasserstein
from .rng import as_seed_sequence, make_rng, substream

REPORT_SCHEMA = "rbslab.report/1"
_RELATIONS = {"<=": operator.le, "<": operator.lt, ">=": operator.ge}


class Report:
    def __init__(self, name: str, parameters: dict, seeds: list):
        self.name = name
        self.parameters = parameters
        self.seeds = list(seeds)
        self.metrics: dict = {}
        self.checks: list[dict] = []
        self._t0 = time.perf_counter()
        self._started = datetime.now(timezone.utc).isoformat(timespec="seconds")

    def check(self, name: str, observed: float, bound: float, relation: str = "<=", **extra) -> bool:
        ok = _RELATIONS[relation](observed, bound)
        self.checks.append(
            {"name": name, "observed": observed, "bound": bound, "relation": relation, "pass": bool(ok), **extra}
        )
        return ok

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def to_json(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "experiment": self.name,
            "parameters": self.parameters,
            "seeds": self.seeds,
            "metrics": self.metrics,
            "bound_checks": self.checks,
            "passed": self.passed,
            "timing": {"started": self._started, "elapsed_s": round(time.perf_counter() - self._t0, 3)},
        }


# perturbation ---------------------------------------------------------------


def level_bound(r: int, delta: float) -> float:
    """Per-level TV bound ``2 r^r delta`` after adding ``delta * n`` edges."""
    return 2.0 * r**r * delta


def total_bound(delta: float, r_max: int) -> tuple[float, int]:
    """Best truncation ``s <= r_max`` of the per-level bounds plus the tail ``2^-s``."""
    best = None
    for s in range(1, r_max + 1):
        val = sum(2.0**-r * min(1.0, level_bound(r, delta)) for r in range(1, s + 1)) + 2.0**-s
        if best is None or val < best[0]:
            best = (val, s)
    return best


def perturb_experiment(g: Graph, delta: float, r_max: int = 3, M: int = 5000, seeds=(0, 1)) -> Report:
    if not 0 < delta < 1:
        raise InvalidArgument("delta must lie in (0, 1)")
    count = int(math.floor(delta * g.n))
    rep = Report("perturb", {"n": g.n, "edges": g.num_edges, "delta": delta, "added_edges": count,
                             "r_max": r_max, "M": M}, seeds)
    bound, s_best = total_bound(delta, r_max)
    runs = []
    for seed in seeds:
        h = perturb_add_edges(g, count, substream(seed, 0))
        d = sampling_distance(g, h, r_max=r_max, M=M, seed=substream(seed, 1))
        runs.append({"seed": seed, **d.to_json()})
        for r, (tv, eps) in enumerate(zip(d.per_level_tv, d.per_level_eps), start=1):
            rep.check(f"seed {seed} level {r} tv", tv, level_bound(r, delta) + eps,
                      claimed=level_bound(r, delta), eps_mc=eps)
        rep.check(f"seed {seed} total distance", d.value, bound + d.eps_mc,
                  claimed=bound, truncation=s_best, eps_mc=d.eps_mc)
    rep.metrics["runs"] = runs
    return rep


# connectivity ---------------------------------------------------------------


def connectivity_experiment(Ns=(20, 80, 320), r_max: int = 3, M: int = 5000, seeds=(0, 1, 2, 3, 4)) -> Report:
    rep = Report("connectivity", {"N": list(Ns), "r_max": r_max, "M": M}, seeds)
    rows = []
    means = []
    for N in Ns:
        per_seed = [connectivity_demo(N, r_max, M, seed=substream(s, N)) for s in seeds]
        vals = [x["distance"]["value"] for x in per_seed]
        means.append(float(np.mean(vals)))
        rows.append({
            "N": N,
            "parameter_gap": per_seed[0]["parameter_gap"],
            "mean_distance": means[-1],
            "runs": [{"seed": s, **x["distance"]} for s, x in zip(seeds, per_seed)],
        })
        rep.check(f"N={N} connectivity gap", per_seed[0]["parameter_gap"], 1, relation=">=")
    for (a, da), (b, db) in zip(zip(Ns, means), zip(Ns[1:], means[1:])):
        rep.check(f"distance decreases N={a}->{b}", db, da, relation="<")
    rep.metrics["by_N"] = rows
    return rep


# size generalization -------------------------------------------------------------

FAMILIES = ("graphon", "config-regular")
TARGETS = {"global-clustering": exact_global_clustering, "max-degree": exact_max_degree}


def family_graph(family: str, n: int, rng: np.random.Generator, p_range=(0.3, 0.9), d_range=(2, 6)) -> Graph:
    seed = int(rng.integers(2**63))
    if family == "graphon":
        return gen_graphon(GraphonSpec.constant(float(rng.uniform(*p_range))), n, seed)
    if family == "config-regular":
        d = int(rng.integers(d_range[0], d_range[1] + 1))
        if (n * d) % 2:
            n += 1
        return gen_config_regular(n, d, seed)
    raise InvalidArgument(f"family must be one of {FAMILIES}")


def quantile_labels(values: np.ndarray, classes: int) -> tuple[np.ndarray, np.ndarray]:
    edges = np.quantile(values, np.arange(1, classes) / classes)
    labels = np.searchsorted(edges, values, side="right")
    if np.unique(labels).size < 2:
        raise InvalidState("degenerate label distribution: every graph falls into one class")
    return labels, edges


def sizegen_experiment(
    family: str = "graphon",
    target: str = "global-clustering",
    small=(30, 60),
    large=(300, 600),
    n_train: int = 500,
    n_val: int = 100,
    n_test: int = 200,
    classes: int = 5,
    sampler: SamplerParams = SamplerParams(6, 2, 1),
    features: FeatureSpec = FeatureSpec("degree", tuple(range(1, 19))),
    hidden: int = 16,
    layers: int = 2,
    cfg: TrainConfig = TrainConfig(),
    per_graph: int = 8,
    votes: int = 25,
    w_graphs: int = 16,
    w_samples: int = 200,
    r_max: int = 3,
    seed: int = 0,
    p_range=(0.3, 0.9),
) -> Report:
    if target not in TARGETS:
        raise InvalidArgument(f"target must be one of {tuple(TARGETS)}")
    if small[0] > small[1] or large[0] > large[1]:
        raise InvalidArgument("size ranges must be (low, high)")
    if small[1] >= large[0] and tuple(small) != tuple(large):
        raise InvalidArgument("small and large ranges must be disjoint with small < large")
    params = {
        "family": family, "target": target, "small": list(small), "large": list(large),
        "n_train": n_train, "n_val": n_val, "n_test": n_test, "classes": classes,
        "sampler": {"k": sampler.k, "b": sampler.b, "r": sampler.r},
        "features": {"mode": features.mode, "boundaries": list(features.boundaries)},
        "hidden": hidden, "layers": layers, "per_graph": per_graph, "votes": votes,
        "train": cfg.__dict__.copy(), "wasserstein": {"graphs": w_graphs, "M": w_samples, "r_max": r_max},
        "p_range": list(p_range),
    }
    rep = Report("sizegen", params, [seed])
    base = as_seed_sequence(seed)
    rng = make_rng(substream(base, 0))

    def draw(count, lo, hi):
        return [family_graph(family, int(rng.integers(lo, hi + 1)), rng, p_range) for _ in range(count)]

    tr, va = draw(n_train, *small), draw(n_val, *small)
    te = draw(n_test, *large)
    stat = TARGETS[target]
    labels, edges = quantile_labels(np.array([stat(g) for g in tr + va + te], dtype=np.float64), classes)
    ytr, yva, yte = (labels[:n_train].tolist(), labels[n_train : n_train + n_val].tolist(),
                     labels[n_train + n_val :].tolist())
    p0 = ModelParams.init(hidden, layers, classes, features=features, seed=substream(base, 1))
    data = sample_dataset(tr, ytr, p0, sampler, per_graph, substream(base, 2))
    model, curve = train(p0, data, cfg)
    val = evaluate(model, va, yva, sampler, substream(base, 3), votes)
    test = evaluate(model, te, yte, sampler, substream(base, 4), votes)
    w = wasserstein(tr[:w_graphs], te[:w_graphs], r_max=r_max, M=w_samples, seed=substream(base, 5))
    rep.metrics = {
        "label_edges": edges.tolist(),
        "class_counts": np.bincount(labels, minlength=classes).tolist(),
        "loss_curve": curve,
        "validation": val.to_json(),
        "test": test.to_json(),
        "wasserstein_train_test": w,
    }
    if family == "graphon" and target == "global-clustering":
        rep.check("test accuracy", test.accuracy, 0.70, relation=">=")
        rep.check("validation/test gap", abs(val.accuracy - test.accuracy), 0.15)
    return rep
