"""Command line front end: ``rbslab <command> ...``.

Every command prints one JSON document on stdout. Exit codes: 0 success,
1 bad usage, 2 runtime error, 3 a reported bound check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .errors import RBSError
from .estimators import bernoulli_stderr, clustering_trials, triangle_trials
from .generators import GraphonSpec, gen_config_regular, gen_er, gen_graphon, gen_two_cliques
from .gnn import (
    FEATURE_MODES,
    DEFAULT_BUCKETS,
    FeatureSpec,
    ModelParams,
    SamplerParams,
    TrainConfig,
    evaluate,
    load_params,
    sample_dataset,
    save_params,
    train,
)
from .graph import load_edge_list, write_edge_list
from .metric import Profile, estimate_profile, sampling_distance, wasserstein
from .oracle import OracleSession
from .rng import SEED_ENV, default_seed
from .sampler import rooted_union_sample, union_sample, weakly_connected_components

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_BOUND = 0, 1, 2, 3

log = logging.getLogger("rbslab")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _graph(path, directed=False, features=None):
    return load_edge_list(path, directed=directed, features_path=features)


def _grid(text: str) -> np.ndarray:
    try:
        return np.array([[float(x) for x in row.split(",")] for row in text.split(";")])
    except ValueError:
        raise UsageError(f"cannot parse graphon grid {text!r}; use 'a,b;c,d'") from None


def _manifest(path):
    """``[{"graph": file, "label": y}, ...]``; paths relative to the manifest."""
    path = Path(path)
    rows = json.loads(path.read_text())
    if isinstance(rows, dict):
        rows = rows.get("graphs", [])
    if not rows:
        raise UsageError(f"manifest {path} lists no graphs")
    graphs = [load_edge_list(path.parent / r["graph"]) for r in rows]
    return graphs, [r["label"] for r in rows]


# commands ----------------------------------------------------------------------


def cmd_gen(a) -> int:
    if a.family == "er":
        g = gen_er(a.n, a.p, a.seed)
    elif a.family == "config":
        g = gen_config_regular(a.n, a.d, a.seed)
    elif a.family == "graphon":
        spec = GraphonSpec(_grid(a.grid)) if a.grid else GraphonSpec.constant(a.p)
        g = gen_graphon(spec, a.n, a.seed)
    else:
        g = gen_two_cliques(a.N, a.bridged)
    write_edge_list(g, a.out)
    _emit({"out": str(a.out), "family": a.family, "n": g.n, "edges": g.num_edges, "seed": a.seed})
    return EXIT_OK


def cmd_sample(a) -> int:
    g = _graph(a.graph, a.directed, a.features)
    s = OracleSession(g, a.seed)
    if a.root is None:
        u = union_sample(s, a.k, a.b, a.r)
    else:
        u = rooted_union_sample(s, a.root, a.k, a.b, a.r, n_vertices=g.n)
    comps = weakly_connected_components(u)
    out = u.to_json()
    out.update({
        "seed": a.seed,
        "components": [[int(x) for x in c] for c in comps.components],
        "root_component": comps.root_component,
        "queries": s.query_count().as_dict(),
    })
    _emit(out)
    return EXIT_OK


def cmd_profile(a) -> int:
    g = _graph(a.graph, a.directed, a.features)
    p = estimate_profile(g, a.r, a.samples, a.seed, k=a.k, b=a.b, radius=a.radius, feature_step=a.step)
    data = p.to_json()
    data["seed"] = a.seed
    if a.out:
        Path(a.out).write_text(p.dumps())
    data["frequencies"] = [round(row["count"] / p.M, 12) for row in data["histogram"]]
    _emit(data)
    return EXIT_OK


def cmd_distance(a) -> int:
    d = sampling_distance(_graph(a.a), _graph(a.b), a.rmax, a.samples, a.seed)
    _emit({**d.to_json(), "seed": a.seed, "a": str(a.a), "b": str(a.b)})
    return EXIT_OK


def cmd_wasserstein(a) -> int:
    ga = [_graph(f) for f in a.a]
    gb = [_graph(f) for f in a.b]
    w = wasserstein(ga, gb, a.rmax, a.samples, a.seed, a.cap)
    _emit({"wasserstein": w, "r_max": a.rmax, "M": a.samples, "seed": a.seed, "sizes": [len(ga), len(gb)]})
    return EXIT_OK


def cmd_estimate(a) -> int:
    g = _graph(a.graph)
    s = OracleSession(g, a.seed, budget=a.budget)
    if a.statistic == "triangle":
        x = triangle_trials(s, a.trials)
    else:
        x = clustering_trials(s, a.trials, a.redraw_cap)
    est = float(x.mean())
    _emit({
        "statistic": a.statistic,
        "estimate": est,
        "trials": a.trials,
        "seed": a.seed,
        "queries": s.query_count().as_dict(),
        "stderr_estimate": bernoulli_stderr(est, a.trials),
    })
    return EXIT_OK


def _train_config(a) -> TrainConfig:
    return TrainConfig(
        lr=a.lr, momentum=a.momentum, weight_decay=a.weight_decay, step_size=a.step_size,
        gamma=a.gamma, epochs=a.epochs, batch_size=a.batch_size, seed=a.seed, task=a.task,
    )


def cmd_train(a) -> int:
    graphs, labels = _manifest(a.manifest)
    feats = FeatureSpec(a.features, tuple(a.buckets))
    classes = 1 if a.task == "regression" else int(max(labels)) + 1
    p0 = ModelParams.init(a.hidden, a.layers, classes, a.g_hidden, features=feats, seed=a.seed)
    sp = SamplerParams(a.k, a.b, a.r)
    data = sample_dataset(graphs, labels, p0, sp, a.per_graph, a.seed)
    model, curve = train(p0, data, _train_config(a))
    save_params(model, a.out)
    _emit({"model": str(a.out), "loss_curve": curve, "samples": len(data), "classes": classes, "seed": a.seed})
    return EXIT_OK


def cmd_eval(a) -> int:
    model = load_params(a.model)
    graphs, labels = _manifest(a.manifest)
    res = evaluate(model, graphs, labels, SamplerParams(a.k, a.b, a.r), a.seed, a.votes, not a.no_pad)
    _emit({**res.to_json(), "votes": a.votes, "seed": a.seed})
    return EXIT_OK


def _report(rep: ex.Report) -> int:
    _emit(rep.to_json())
    if not rep.passed:
        log.error("bound check failed: %s", [c["name"] for c in rep.checks if not c["pass"]])
        return EXIT_BOUND
    return EXIT_OK


def cmd_perturb(a) -> int:
    if a.graph:
        g = _graph(a.graph)
    elif a.er:
        g = gen_er(int(a.er[0]), float(a.er[1]), a.seed)
    else:
        raise UsageError("perturb needs --graph or --er N P")
    return _report(ex.perturb_experiment(g, a.delta, a.rmax, a.samples, a.seeds or [a.seed]))


def cmd_sizegen(a) -> int:
    rep = ex.sizegen_experiment(
        family=a.family, target=a.target, small=tuple(a.small), large=tuple(a.large),
        n_train=a.train, n_val=a.val, n_test=a.test, classes=a.classes,
        sampler=SamplerParams(a.k, a.b, a.r), features=FeatureSpec(a.features, tuple(a.buckets)),
        hidden=a.hidden, layers=a.layers, cfg=_train_config(a), per_graph=a.per_graph,
        votes=a.votes, w_graphs=a.w_graphs, w_samples=a.w_samples, r_max=a.rmax, seed=a.seed,
        p_range=tuple(a.p_range),
    )
    return _report(rep)


def cmd_connectivity(a) -> int:
    return _report(ex.connectivity_experiment(tuple(a.N), a.rmax, a.samples, a.seeds or [a.seed]))


# parser -------------------------------------------------------------------------


def _model_flags(p, k=3, b=5, r=2, per_graph=1, votes=5, buckets=DEFAULT_BUCKETS):
    p.add_argument("--k", type=int, default=k)
    p.add_argument("--b", type=int, default=b)
    p.add_argument("--r", type=int, default=r)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--g-hidden", type=int, default=32)
    p.add_argument("--features", choices=FEATURE_MODES, default="degree")
    p.add_argument("--buckets", type=int, nargs="+", default=list(buckets))
    p.add_argument("--per-graph", type=int, default=per_graph)
    p.add_argument("--votes", type=int, default=votes)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=1e-3)
    p.add_argument("--step-size", type=int, default=50)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--task", choices=("classification", "regression"), default="classification")


def build_parser() -> argparse.ArgumentParser:
    seed = default_seed()
    top = _Parser(prog="rbslab", description="Constant-query graph sampling toolkit.")
    top.add_argument("-v", "--verbose", action="store_true")
    sub = top.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, fn, help):
        p = sub.add_parser(name, help=help)
        p.set_defaults(fn=fn)
        p.add_argument("--seed", type=int, default=seed, help=f"default from ${SEED_ENV}")
        return p

    p = command("gen", cmd_gen, "generate a graph and write it as an edge list")
    p.add_argument("family", choices=("er", "config", "graphon", "two-cliques"))
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--grid", help="graphon grid rows, e.g. '0.3,0.05;0.05,0.3'")
    p.add_argument("--N", type=int, default=10)
    p.add_argument("--bridged", action="store_true")
    p.add_argument("--out", required=True)

    def graph_flags(p):
        p.add_argument("--graph", required=True)
        p.add_argument("--directed", action="store_true")
        p.add_argument("--features", default=None, help="vertex feature file")

    p = command("sample", cmd_sample, "draw one ball union")
    graph_flags(p)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--b", type=int, default=3)
    p.add_argument("--r", type=int, default=3)
    p.add_argument("--root", type=int, default=None)

    p = command("profile", cmd_profile, "empirical r-profile")
    graph_flags(p)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--b", type=int, default=None)
    p.add_argument("--radius", type=int, default=None)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--step", type=float, default=0.1, help="feature quantization step")
    p.add_argument("--out", default=None)

    p = command("distance", cmd_distance, "truncated sampling distance")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--rmax", type=int, default=3)
    p.add_argument("--samples", type=int, default=5000)

    p = command("wasserstein", cmd_wasserstein, "Wasserstein distance between graph samples")
    p.add_argument("--a", nargs="+", required=True)
    p.add_argument("--b", nargs="+", required=True)
    p.add_argument("--rmax", type=int, default=3)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--cap", type=int, default=64)

    p = command("estimate", cmd_estimate, "constant-query statistic estimate")
    p.add_argument("statistic", choices=("triangle", "clustering"))
    p.add_argument("--graph", required=True)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--redraw-cap", type=int, default=16)
    p.add_argument("--budget", type=int, default=None)

    p = command("train", cmd_train, "train a model on a labelled manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    _model_flags(p)

    p = command("eval", cmd_eval, "voting accuracy of a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--b", type=int, default=5)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--votes", type=int, default=5)
    p.add_argument("--no-pad", action="store_true", help="query only distinct sampled pairs")

    p = command("perturb", cmd_perturb, "distance after adding random edges")
    p.add_argument("--graph")
    p.add_argument("--er", nargs=2, metavar=("N", "P"))
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--rmax", type=int, default=3)
    p.add_argument("--samples", type=int, default=5000)
    p.add_argument("--seeds", type=int, nargs="+")

    p = command("sizegen", cmd_sizegen, "train on small graphs, test on large ones")
    p.add_argument("--family", choices=ex.FAMILIES, default="graphon")
    p.add_argument("--target", choices=tuple(ex.TARGETS), default="global-clustering")
    p.add_argument("--small", type=int, nargs=2, default=[30, 60])
    p.add_argument("--large", type=int, nargs=2, default=[300, 600])
    p.add_argument("--train", type=int, default=500)
    p.add_argument("--val", type=int, default=100)
    p.add_argument("--test", type=int, default=200)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--p-range", type=float, nargs=2, default=[0.3, 0.9])
    p.add_argument("--w-graphs", type=int, default=16)
    p.add_argument("--w-samples", type=int, default=200)
    p.add_argument("--rmax", type=int, default=3)
    _model_flags(p, k=6, b=2, r=1, per_graph=8, votes=25, buckets=range(1, 19))

    p = command("connectivity", cmd_connectivity, "bridged vs split two-clique gadget")
    p.add_argument("--N", type=int, nargs="+", default=[20, 80, 320])
    p.add_argument("--rmax", type=int, default=3)
    p.add_argument("--samples", type=int, default=5000)
    p.add_argument("--seeds", type=int, nargs="+")
    return top


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"rbslab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RBSError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"rbslab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
