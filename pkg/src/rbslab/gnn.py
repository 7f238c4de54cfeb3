"""Small trainable GNN over sampled ball unions.

``f`` is a stack of linear message-passing layers with no activation,
``h_l = (A h_{l-1}) W_l + b_l``, read out as ``f(C) = sum_l sum_u h_l(u)``
for each weakly connected component ``C``. ``g`` is a two layer ReLU
perceptron on the sum of component embeddings (or on the pair
``(f(C_root), sum of the others)`` for the rooted variant).

Before the forward pass the union is put into canonical vertex order, so
relabeling vertices or reordering components gives bitwise equal logits.
Gradients are written out by hand.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .canonical import DEFAULT_NODE_BUDGET, _rank_rows, canonical_order
from .errors import InvalidArgument, InvalidState, ParseError, TrainingDiverged
from .graph import Graph
from .oracle import OracleSession, QueryCounts
from .rng import SeedLike, as_seed_sequence, make_rng, substream
from .sampler import (
    BallUnion,
    ComponentSet,
    LocalGraph,
    require_root_component,
    rooted_union_sample,
    union_sample,
    weakly_connected_components,
)

DEFAULT_BUCKETS = (1, 2, 3, 4, 6, 8, 12, 16, 24)
FEATURE_MODES = ("constant", "degree")
TASKS = ("classification", "regression")
CHECKPOINT_MAGIC = b"RBSG"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class FeatureSpec:
    """How input vertex features are built from a sampled union.

    ``degree`` one-hot encodes the out-degree inside the sample against
    ``boundaries``: bucket ``i`` holds degrees in ``[bnd[i-1], bnd[i])``.
    """

    mode: str = "degree"
    boundaries: tuple[int, ...] = DEFAULT_BUCKETS

    def __post_init__(self):
        if self.mode not in FEATURE_MODES:
            raise InvalidArgument(f"feature mode must be one of {FEATURE_MODES}")
        if list(self.boundaries) != sorted(set(self.boundaries)):
            raise InvalidArgument("bucket boundaries must be strictly increasing")

    @property
    def dim(self) -> int:
        return 1 if self.mode == "constant" else len(self.boundaries) + 1

    def encode(self, adj: np.ndarray) -> np.ndarray:
        m = adj.shape[0]
        if self.mode == "constant":
            return np.ones((m, 1))
        deg = adj.sum(axis=1)
        idx = np.searchsorted(np.asarray(self.boundaries), deg, side="right")
        x = np.zeros((m, self.dim))
        x[np.arange(m), idx] = 1.0
        return x


@dataclass
class ModelParams:
    f_w: list[np.ndarray]
    f_b: list[np.ndarray]
    g_w1: np.ndarray
    g_b1: np.ndarray
    g_w2: np.ndarray
    g_b2: np.ndarray
    rooted: bool = False
    features: FeatureSpec = field(default_factory=FeatureSpec)
    # fixed affine map applied to the readout input; not trained
    shift: np.ndarray | None = None
    scale: np.ndarray | None = None

    @classmethod
    def init(
        cls,
        hidden: int = 16,
        layers: int = 2,
        classes: int = 2,
        g_hidden: int = 32,
        rooted: bool = False,
        features: FeatureSpec = FeatureSpec(),
        seed: SeedLike = None,
    ) -> "ModelParams":
        if hidden < 1 or layers < 1 or classes < 1 or g_hidden < 1:
            raise InvalidArgument("model dimensions must be positive")
        rng = make_rng(seed)

        def dense(a, b):
            return rng.normal(0.0, 1.0 / np.sqrt(a), size=(a, b))

        dims = [features.dim] + [hidden] * layers
        g_in = 2 * hidden if rooted else hidden
        return cls(
            f_w=[dense(dims[i], dims[i + 1]) for i in range(layers)],
            f_b=[np.zeros(hidden) for _ in range(layers)],
            g_w1=dense(g_in, g_hidden),
            g_b1=np.zeros(g_hidden),
            g_w2=dense(g_hidden, classes),
            g_b2=np.zeros(classes),
            rooted=rooted,
            features=features,
            shift=np.zeros(g_in),
            scale=np.ones(g_in),
        )

    @property
    def layers(self) -> int:
        return len(self.f_w)

    @property
    def hidden(self) -> int:
        return self.f_w[0].shape[1]

    @property
    def classes(self) -> int:
        return self.g_w2.shape[1]

    @property
    def g_in(self) -> int:
        return self.g_w1.shape[0]

    def tensors(self) -> list[np.ndarray]:
        """Trainable tensors in a fixed order."""
        out = []
        for w, b in zip(self.f_w, self.f_b):
            out += [w, b]
        return out + [self.g_w1, self.g_b1, self.g_w2, self.g_b2]

    def with_tensors(self, ts: list[np.ndarray]) -> "ModelParams":
        L = self.layers
        return replace(
            self,
            f_w=list(ts[0 : 2 * L : 2]),
            f_b=list(ts[1 : 2 * L : 2]),
            g_w1=ts[2 * L],
            g_b1=ts[2 * L + 1],
            g_w2=ts[2 * L + 2],
            g_b2=ts[2 * L + 3],
        )

    def copy(self) -> "ModelParams":
        p = self.with_tensors([t.copy() for t in self.tensors()])
        return replace(p, shift=self.shift.copy(), scale=self.scale.copy())

    def check(self):
        h = self.hidden
        prev = self.features.dim
        for w, b in zip(self.f_w, self.f_b):
            if w.shape != (prev, h) or b.shape != (h,):
                raise InvalidArgument("f layer shapes are inconsistent")
            prev = h
        g_in = 2 * h if self.rooted else h
        gh = self.g_w1.shape[1]
        if (
            self.g_w1.shape != (g_in, gh)
            or self.g_b1.shape != (gh,)
            or self.g_w2.shape[0] != gh
            or self.g_b2.shape != (self.classes,)
            or self.shift.shape != (g_in,)
            or self.scale.shape != (g_in,)
        ):
            raise InvalidArgument("readout shapes are inconsistent")
        if not all(np.isfinite(t).all() for t in self.tensors()):
            raise InvalidArgument("parameters contain non-finite values")


# inputs -------------------------------------------------------------------


@dataclass(frozen=True)
class Prepared:
    """A sampled union in canonical vertex order with input features."""

    adjacency: np.ndarray
    x: np.ndarray
    root_mask: np.ndarray | None = None


def prepare(
    u: BallUnion | LocalGraph,
    c: ComponentSet | None,
    features: FeatureSpec,
    rooted: bool = False,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> Prepared:
    adj = np.asarray(u.adjacency, dtype=bool)
    x = features.encode(adj)
    m = adj.shape[0]
    mask = None
    if rooted:
        if c is None:
            c = weakly_connected_components(u)
        mask = np.zeros(m, dtype=bool)
        mask[c.components[require_root_component(c)]] = True
    keys = [(bool(mask[i]) if rooted else False, tuple(x[i].tolist())) for i in range(m)]
    order = canonical_order(adj, _rank_rows(keys), node_budget) if m else np.zeros(0, np.int64)
    adj = adj[np.ix_(order, order)].astype(np.float64)
    return Prepared(adj, x[order], None if mask is None else mask[order])


@dataclass
class LabeledSample:
    input: Prepared
    label: int | float


# forward / backward ---------------------------------------------------------


def _embed(p: ModelParams, z: Prepared):
    hs = [z.x]
    ps = []
    for w, b in zip(p.f_w, p.f_b):
        msg = z.adjacency @ hs[-1]
        ps.append(msg)
        hs.append(msg @ w + b)
    total = np.sum(hs[1:], axis=0) if len(hs) > 1 else np.zeros((z.x.shape[0], p.hidden))
    if p.rooted:
        if z.root_mask is None:
            raise InvalidState("rooted model needs an input with a root component")
        s = np.concatenate([total[z.root_mask].sum(axis=0), total[~z.root_mask].sum(axis=0)])
    else:
        s = total.sum(axis=0)
    return s, hs, ps


def _readout(p: ModelParams, s: np.ndarray):
    zin = (s - p.shift) / p.scale
    a1 = zin @ p.g_w1 + p.g_b1
    r1 = np.maximum(a1, 0.0)
    return r1 @ p.g_w2 + p.g_b2, (zin, a1, r1)


def logits_of(p: ModelParams, z: Prepared) -> np.ndarray:
    s, _, _ = _embed(p, z)
    return _readout(p, s)[0]


def forward(p: ModelParams, u: BallUnion | LocalGraph, c: ComponentSet | None = None) -> np.ndarray:
    """Logits of the unrooted model, summing over all components of ``u``."""
    if p.rooted:
        raise InvalidArgument("model is rooted; use forward_rooted")
    p.check()
    return logits_of(p, prepare(u, c, p.features))


def forward_rooted(p: ModelParams, u: BallUnion, c: ComponentSet | None = None) -> np.ndarray:
    """Logits of ``g(f(C_root), sum of f over the other components)``."""
    if not p.rooted:
        raise InvalidArgument("model is not rooted; use forward")
    p.check()
    if c is None:
        c = weakly_connected_components(u)
    require_root_component(c)
    return logits_of(p, prepare(u, c, p.features, rooted=True))


def _softmax(v: np.ndarray) -> np.ndarray:
    e = np.exp(v - v.max())
    return e / e.sum()


def _sample_grad(p: ModelParams, z: Prepared, label, task: str):
    s, hs, ps = _embed(p, z)
    logits, (zin, a1, r1) = _readout(p, s)
    if task == "classification":
        prob = _softmax(logits)
        loss = -np.log(max(prob[int(label)], 1e-300))
        d = prob.copy()
        d[int(label)] -= 1.0
    else:
        diff = logits[0] - float(label)
        loss = diff * diff
        d = np.array([2.0 * diff])
    g_w2 = np.outer(r1, d)
    g_b2 = d
    da1 = (p.g_w2 @ d) * (a1 > 0)
    g_w1 = np.outer(zin, da1)
    g_b1 = da1
    ds = (p.g_w1 @ da1) / p.scale
    h = p.hidden
    m = z.x.shape[0]
    if p.rooted:
        grow = np.where(z.root_mask[:, None], ds[:h], ds[h:])
    else:
        grow = np.broadcast_to(ds, (m, h))
    gw, gb = [None] * p.layers, [None] * p.layers
    dh = np.array(grow)
    for l in range(p.layers - 1, -1, -1):
        gw[l] = ps[l].T @ dh
        gb[l] = dh.sum(axis=0)
        if l:
            dh = grow + z.adjacency.T @ (dh @ p.f_w[l].T)
    grads = []
    for w, b in zip(gw, gb):
        grads += [w, b]
    return loss, grads + [g_w1, g_b1, g_w2, g_b2]


def _check_label(p: ModelParams, label, task: str):
    if task == "classification":
        if int(label) != label or not 0 <= int(label) < p.classes:
            raise InvalidArgument(f"label {label} out of range for {p.classes} classes")
    elif p.classes != 1:
        raise InvalidArgument("regression needs a single output")


def loss_and_grad(
    p: ModelParams,
    batch: list[LabeledSample],
    weight_decay: float = 0.0,
    task: str = "classification",
) -> tuple[float, list[np.ndarray]]:
    """Mean loss over ``batch`` plus ``weight_decay / 2 * ||theta||^2``."""
    if not batch:
        raise InvalidArgument("batch is empty")
    if task not in TASKS:
        raise InvalidArgument(f"task must be one of {TASKS}")
    theta = p.tensors()
    total = 0.0
    acc = [np.zeros_like(t) for t in theta]
    for smp in batch:
        _check_label(p, smp.label, task)
        loss, grads = _sample_grad(p, smp.input, smp.label, task)
        total += loss
        for a, g in zip(acc, grads):
            a += g
    n = len(batch)
    total /= n
    out = [a / n for a in acc]
    if weight_decay:
        total += 0.5 * weight_decay * sum(float(np.sum(t * t)) for t in theta)
        out = [g + weight_decay * t for g, t in zip(out, theta)]
    return float(total), out


# training ---------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-3
    step_size: int = 50
    gamma: float = 0.5
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    task: str = "classification"
    standardize: bool = True

    def __post_init__(self):
        if self.lr < 0 or self.weight_decay < 0 or not 0 <= self.momentum < 1:
            raise InvalidArgument("lr and weight decay must be >= 0, momentum in [0, 1)")
        if not 0 < self.gamma <= 1 or self.step_size < 1:
            raise InvalidArgument("schedule needs step_size >= 1 and gamma in (0, 1]")
        if self.epochs < 0 or self.batch_size < 1:
            raise InvalidArgument("epochs must be >= 0 and batch_size >= 1")
        if self.task not in TASKS:
            raise InvalidArgument(f"task must be one of {TASKS}")

    def lr_at(self, epoch: int) -> float:
        return self.lr * self.gamma ** (epoch // self.step_size)


def fit_scaling(p: ModelParams, data: list[LabeledSample]) -> ModelParams:
    """Set the readout input shift/scale to the mean/std over ``data``."""
    s = np.array([_embed(p, d.input)[0] for d in data])
    sd = s.std(axis=0)
    q = p.copy()
    q.shift = s.mean(axis=0)
    q.scale = np.where(sd > 1e-8, sd, 1.0)
    return q


def train(p0: ModelParams, data: list[LabeledSample], cfg: TrainConfig) -> tuple[ModelParams, list[float]]:
    """Minibatch SGD with momentum, weight decay and a stepped learning rate.

    Returns the final parameters and the mean training loss of each epoch.
    """
    if not data:
        raise InvalidArgument("training data is empty")
    p0.check()
    p = fit_scaling(p0, data) if cfg.standardize else p0.copy()
    rng = make_rng(cfg.seed)
    theta = p.tensors()
    vel = [np.zeros_like(t) for t in theta]
    curve = []
    for epoch in range(cfg.epochs):
        lr = cfg.lr_at(epoch)
        perm = rng.permutation(len(data))
        losses = []
        for start in range(0, len(data), cfg.batch_size):
            batch = [data[i] for i in perm[start : start + cfg.batch_size]]
            loss, grads = loss_and_grad(p.with_tensors(theta), batch, cfg.weight_decay, cfg.task)
            if not np.isfinite(loss) or not all(np.isfinite(g).all() for g in grads):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch starting {start} (lr={lr:g})")
            for v, g in zip(vel, grads):
                v *= cfg.momentum
                v += g
            theta = [t - lr * v for t, v in zip(theta, vel)]
            losses.append(loss * len(batch))
        curve.append(float(sum(losses) / len(data)))
    return p.with_tensors(theta), curve


def predict(p: ModelParams, z: Prepared) -> int:
    return int(np.argmax(logits_of(p, z)))


# sampling and evaluation ---------------------------------------------------


@dataclass(frozen=True)
class SamplerParams:
    k: int = 3
    b: int = 5
    r: int = 2


def sample_input(
    s: OracleSession,
    p: ModelParams,
    sp: SamplerParams,
    root: int | None = None,
    pad_queries: bool = False,
) -> Prepared:
    if p.rooted:
        if root is None:
            raise InvalidArgument("rooted model needs a root vertex")
        u = rooted_union_sample(s, root, sp.k, sp.b, sp.r, pad_queries=pad_queries)
        return prepare(u, weakly_connected_components(u), p.features, rooted=True)
    u = union_sample(s, sp.k, sp.b, sp.r, pad_queries=pad_queries)
    return prepare(u, None, p.features)


def sample_dataset(
    graphs: list[Graph],
    labels: list,
    p: ModelParams,
    sp: SamplerParams,
    per_graph: int = 1,
    seed: SeedLike = None,
) -> list[LabeledSample]:
    """``per_graph`` independent unions of each graph, labelled like the graph."""
    if len(graphs) != len(labels):
        raise InvalidArgument("graphs and labels differ in length")
    base = as_seed_sequence(seed)
    out = []
    for i, (g, y) in enumerate(zip(graphs, labels)):
        s = OracleSession(g, substream(base, i))
        out += [LabeledSample(sample_input(s, p, sp), y) for _ in range(per_graph)]
    return out


@dataclass
class EvalResult:
    accuracy: float
    confusion: np.ndarray
    predictions: list[int]
    queries: list[QueryCounts]

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "predictions": self.predictions,
            "queries_per_graph": sorted({q.total for q in self.queries}),
        }


def vote(p: ModelParams, s: OracleSession, sp: SamplerParams, votes: int, pad_queries: bool = True) -> int:
    """Majority class over ``votes`` independent sample-and-forward passes.

    Ties go to the smallest class index.
    """
    if votes < 1:
        raise InvalidArgument("votes must be >= 1")
    tally = np.zeros(p.classes, dtype=np.int64)
    for _ in range(votes):
        tally[predict(p, sample_input(s, p, sp, pad_queries=pad_queries))] += 1
    return int(np.argmax(tally))


def evaluate(
    p: ModelParams,
    graphs: list[Graph],
    labels: list[int],
    sp: SamplerParams = SamplerParams(),
    seed: SeedLike = None,
    votes: int = 5,
    pad_queries: bool = True,
) -> EvalResult:
    """Voting accuracy and confusion matrix on labelled graphs.

    With ``pad_queries`` (the default) each graph costs exactly the same
    number of oracle queries, a function of ``(k, b, r, votes)`` alone.
    """
    if p.rooted:
        raise InvalidArgument("graph classification uses the unrooted model")
    if len(graphs) != len(labels):
        raise InvalidArgument("graphs and labels differ in length")
    p.check()
    base = as_seed_sequence(seed)
    conf = np.zeros((p.classes, p.classes), dtype=np.int64)
    preds, queries = [], []
    for i, (g, y) in enumerate(zip(graphs, labels)):
        s = OracleSession(g, substream(base, i))
        yhat = vote(p, s, sp, votes, pad_queries)
        conf[int(y), yhat] += 1
        preds.append(yhat)
        queries.append(s.query_count())
    acc = float(np.trace(conf) / max(len(graphs), 1))
    return EvalResult(acc, conf, preds, queries)


def evaluate_prepared(p: ModelParams, data: list[LabeledSample]) -> float:
    """Single-pass accuracy on already sampled inputs."""
    if not data:
        return 0.0
    return float(np.mean([predict(p, d.input) == d.label for d in data]))


# checkpoints -------------------------------------------------------------------
# layout (big endian): "RBSG" | version u8 | rooted u8 | mode u8 | nb u16 |
# nb * i64 boundaries | count u16 | count * (ndim u8, dims u32..., f64 data)


def _write_tensor(buf: io.BytesIO, t: np.ndarray):
    buf.write(struct.pack(">B", t.ndim))
    buf.write(struct.pack(f">{t.ndim}I", *t.shape))
    buf.write(np.ascontiguousarray(t, dtype=">f8").tobytes())


def _read_tensor(buf: io.BytesIO) -> np.ndarray:
    (ndim,) = struct.unpack(">B", buf.read(1))
    shape = struct.unpack(f">{ndim}I", buf.read(4 * ndim))
    size = int(np.prod(shape)) if ndim else 1
    raw = buf.read(8 * size)
    if len(raw) != 8 * size:
        raise ParseError("truncated checkpoint")
    return np.frombuffer(raw, dtype=">f8").astype(np.float64).reshape(shape)


def dumps_params(p: ModelParams) -> bytes:
    buf = io.BytesIO()
    f = p.features
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack(">BBBH", CHECKPOINT_VERSION, int(p.rooted), FEATURE_MODES.index(f.mode), len(f.boundaries)))
    buf.write(struct.pack(f">{len(f.boundaries)}q", *f.boundaries))
    ts = [*p.tensors(), p.shift, p.scale]
    buf.write(struct.pack(">H", len(ts)))
    for t in ts:
        _write_tensor(buf, t)
    return buf.getvalue()


def loads_params(data: bytes) -> ModelParams:
    buf = io.BytesIO(data)
    if buf.read(4) != CHECKPOINT_MAGIC:
        raise ParseError("not a model checkpoint")
    version, rooted, mode, nb = struct.unpack(">BBBH", buf.read(5))
    if version != CHECKPOINT_VERSION:
        raise ParseError(f"unsupported checkpoint version {version}")
    bounds = struct.unpack(f">{nb}q", buf.read(8 * nb))
    (count,) = struct.unpack(">H", buf.read(2))
    ts = [_read_tensor(buf) for _ in range(count)]
    L = (count - 6) // 2
    if count < 8 or count != 2 * L + 6:
        raise ParseError("checkpoint has an unexpected tensor count")
    p = ModelParams(
        f_w=ts[0 : 2 * L : 2],
        f_b=ts[1 : 2 * L : 2],
        g_w1=ts[2 * L],
        g_b1=ts[2 * L + 1],
        g_w2=ts[2 * L + 2],
        g_b2=ts[2 * L + 3],
        rooted=bool(rooted),
        features=FeatureSpec(FEATURE_MODES[mode], tuple(int(b) for b in bounds)),
        shift=ts[2 * L + 4],
        scale=ts[2 * L + 5],
    )
    p.check()
    return p


def save_params(p: ModelParams, path):
    with open(path, "wb") as fh:
        fh.write(dumps_params(p))


def load_params(path) -> ModelParams:
    with open(path, "rb") as fh:
        return loads_params(fh.read())
