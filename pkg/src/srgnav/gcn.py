"""Three-layer graph convolutional network in plain numpy.

Layers follow ``H' = act(A_hat @ H @ W)`` with the symmetric normalised,
self-looped adjacency ``A_hat``. The first two layers use ReLU, the last is
linear and produces the node embeddings. Training minimises the mean binary
cross-entropy of ``sigmoid(z_a . z_b)`` over labelled node pairs with Adam;
all gradients are written out by hand.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .categories import CategorySpace
from .graph import SRG, srg_to_gcn_inputs
from .trajectories import corpus_pairs

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1
EMBEDDING_FORMAT_VERSION = 1


class NonFiniteError(FloatingPointError):
    """A forward activation, loss or gradient became NaN/inf."""


class ZeroNormError(ValueError):
    pass


def normalized_adjacency(adj: np.ndarray) -> np.ndarray:
    """``D^-1/2 (A + I) D^-1/2`` where ``D`` is the degree of ``A + I``."""
    a = np.asarray(adj, dtype=float) + np.eye(len(adj))
    d = 1.0 / np.sqrt(a.sum(axis=1))
    return a * d[:, None] * d[None, :]


def glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class GcnModel:
    weights: list
    activation: str = "relu"

    @classmethod
    def init(cls, n_in: int, hidden=(128, 128), embed_dim: int = 128, seed: int = 0,
             activation: str = "relu") -> "GcnModel":
        rng = np.random.default_rng(seed)
        dims = [n_in, *hidden, embed_dim]
        if len(dims) != 4:
            raise ValueError("the network has exactly two hidden layers")
        return cls([glorot(rng, dims[i], dims[i + 1]) for i in range(3)], activation)

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def check(self):
        for i in range(len(self.weights) - 1):
            if self.weights[i].shape[1] != self.weights[i + 1].shape[0]:
                raise ValueError(f"layer {i + 1} output does not match layer {i + 2} input")


def _act(name, x):
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "tanh":
        return np.tanh(x)
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name, pre, post):
    if name == "relu":
        return (pre > 0).astype(float)
    return 1.0 - post ** 2


def gcn_forward(model: GcnModel, a_hat: np.ndarray, x: np.ndarray):
    """Return ``(embeddings, cache)``; the cache feeds :func:`backward`."""
    model.check()
    if x.shape[1] != model.weights[0].shape[0]:
        raise ValueError(f"features have {x.shape[1]} columns, layer 1 expects {model.weights[0].shape[0]}")
    h = x
    cache = {"a_hat": a_hat, "agg": [], "pre": [], "post": []}
    n_layers = len(model.weights)
    for i, w in enumerate(model.weights):
        agg = a_hat @ h
        pre = agg @ w
        post = pre if i == n_layers - 1 else _act(model.activation, pre)
        if not np.all(np.isfinite(post)):
            raise NonFiniteError(f"non-finite activation in layer {i + 1}")
        cache["agg"].append(agg)
        cache["pre"].append(pre)
        cache["post"].append(post)
        h = post
    return h, cache


def backward(model: GcnModel, cache: dict, d_emb: np.ndarray) -> list:
    """Weight gradients given ``dLoss/dEmbeddings``."""
    if d_emb.shape != cache["post"][-1].shape:
        raise ValueError(f"upstream gradient shape {d_emb.shape} != embeddings {cache['post'][-1].shape}")
    a_hat = cache["a_hat"]
    grads = [None] * len(model.weights)
    d_pre = d_emb
    for i in reversed(range(len(model.weights))):
        grads[i] = cache["agg"][i].T @ d_pre
        if i == 0:
            break
        d_post = a_hat.T @ (d_pre @ model.weights[i].T)
        d_pre = d_post * _act_grad(model.activation, cache["pre"][i - 1], cache["post"][i - 1])
    return grads


def _pair_arrays(pairs):
    if isinstance(pairs, np.ndarray):
        arr = pairs.astype(np.int64)
    else:
        arr = np.array([(p.anchor, p.other, p.label) for p in pairs], dtype=np.int64).reshape(-1, 3)
    return arr[:, 0], arr[:, 1], arr[:, 2].astype(float)


def pair_loss_and_grad(emb: np.ndarray, pairs, similarity: str = "dot"):
    """Mean sigmoid cross-entropy over pairs and its gradient w.r.t. ``emb``.

    ``pairs`` is a list of :class:`TrainingPair` or an ``(P, 3)`` integer
    array of ``(anchor, other, label)``.
    """
    a, b, y = _pair_arrays(pairs)
    if len(a) == 0:
        raise ValueError("pair list is empty")
    za, zb = emb[a], emb[b]
    if similarity == "dot":
        s = np.einsum("ij,ij->i", za, zb)
    elif similarity == "cosine":
        na = np.linalg.norm(za, axis=1)
        nb = np.linalg.norm(zb, axis=1)
        s = np.einsum("ij,ij->i", za, zb) / (na * nb)
    else:
        raise ValueError(f"unknown similarity {similarity!r}")
    loss = float(np.mean(np.logaddexp(0.0, s) - y * s))
    ds = (_sigmoid(s) - y) / len(s)
    if similarity == "dot":
        ga, gb = ds[:, None] * zb, ds[:, None] * za
    else:
        ga = ds[:, None] * (zb / (na * nb)[:, None] - s[:, None] * za / (na ** 2)[:, None])
        gb = ds[:, None] * (za / (na * nb)[:, None] - s[:, None] * zb / (nb ** 2)[:, None])
    grad = np.zeros_like(emb)
    np.add.at(grad, a, ga)
    np.add.at(grad, b, gb)
    return loss, grad


def pair_count_matrices(pairs, n: int):
    """``(positive, negative)`` N x N multiplicity matrices of a pair list."""
    a, b, y = _pair_arrays(pairs)
    pos = np.zeros((n, n))
    neg = np.zeros((n, n))
    np.add.at(pos, (a[y == 1], b[y == 1]), 1.0)
    np.add.at(neg, (a[y == 0], b[y == 0]), 1.0)
    return pos, neg


def count_loss_and_grad(emb: np.ndarray, pos: np.ndarray, neg: np.ndarray):
    """Same loss as :func:`pair_loss_and_grad` (dot similarity) from pair counts.

    With ``S = Z Z^T`` every pair multiset collapses onto an N x N grid,
    which keeps an epoch cheap however many duplicate pairs the corpus has.
    """
    total = pos.sum() + neg.sum()
    if total == 0:
        raise ValueError("pair list is empty")
    s = emb @ emb.T
    softplus = np.logaddexp(0.0, s)
    loss = float((pos * (softplus - s)).sum() + (neg * softplus).sum()) / total
    sig = _sigmoid(s)
    ds = (pos * (sig - 1.0) + neg * sig) / total
    return loss, (ds + ds.T) @ emb


def _sigmoid(s):
    return np.where(s >= 0, 1.0 / (1.0 + np.exp(-np.abs(s))), np.exp(-np.abs(s)) / (1.0 + np.exp(-np.abs(s))))


@dataclass
class TrainConfig:
    lr: float = 3e-4
    epochs: int = 300
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    hidden: tuple = (128, 128)
    embed_dim: int = 128
    activation: str = "relu"
    similarity: str = "dot"
    # stop when the loss has not improved by min_delta for this many epochs
    patience: int | None = 50
    min_delta: float = 1e-7

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        self.hidden = tuple(self.hidden)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["hidden"] = list(self.hidden)
        return d


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


def adam_step(params: list, grads: list, state: AdamState, config: TrainConfig):
    """One bias-corrected Adam update; returns new ``(params, state)``."""
    t = state.t + 1
    b1, b2 = config.beta1, config.beta2
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_p.append(p - config.lr * m_hat / (np.sqrt(v_hat) + config.eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(new_m, new_v, t)


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    names: tuple
    vectors: np.ndarray

    def __post_init__(self):
        vec = np.array(self.vectors, dtype=float)
        if not np.all(np.isfinite(vec)):
            raise NonFiniteError("embedding table contains non-finite values")
        vec.setflags(write=False)
        object.__setattr__(self, "vectors", vec)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __getitem__(self, key) -> np.ndarray:
        idx = self.names.index(key) if isinstance(key, str) else int(key)
        return self.vectors[idx]

    def to_text(self, space_hash: str = "") -> str:
        lines = [f"# format_version={EMBEDDING_FORMAT_VERSION} category_space_hash={space_hash}"]
        for name, row in zip(self.names, self.vectors):
            lines.append(",".join([name] + [repr(float(v)) for v in row]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> tuple["EmbeddingTable", str]:
        lines = text.splitlines()
        header = dict(kv.split("=", 1) for kv in lines[0].lstrip("# ").split())
        if int(header["format_version"]) != EMBEDDING_FORMAT_VERSION:
            raise ValueError(f"unsupported embedding format_version {header['format_version']}")
        names, rows = [], []
        for line in lines[1:]:
            if line:
                parts = line.split(",")
                names.append(parts[0])
                rows.append([float(v) for v in parts[1:]])
        return cls(tuple(names), np.array(rows)), header.get("category_space_hash", "")


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ZeroNormError("cosine similarity is undefined for a zero vector")
    return float(np.dot(a, b) / (na * nb))


@dataclass
class TrainResult:
    model: GcnModel
    embeddings: EmbeddingTable
    loss_history: list = field(default_factory=list)
    n_pairs: int = 0


def train(pruned: SRG, corpus, config: TrainConfig = TrainConfig(),
          space: CategorySpace | None = None, pairs=None) -> TrainResult:
    """Full-batch training over every pair derived from ``corpus``.

    ``pairs`` overrides the pair list derived from the corpus.
    """
    space = pruned.space if space is None else space
    if pairs is None:
        corpus = list(corpus)
        if not corpus:
            raise ValueError("trajectory corpus is empty")
        pairs = corpus_pairs(corpus, space)
    pair_arr = np.array([(p.anchor, p.other, p.label) for p in pairs], dtype=np.int64).reshape(-1, 3) \
        if not isinstance(pairs, np.ndarray) else pairs
    if len(pair_arr) == 0:
        raise ValueError("no training pairs")
    counts = pair_count_matrices(pair_arr, space.n_nodes) if config.similarity == "dot" else None
    adj, x = srg_to_gcn_inputs(pruned, space)
    a_hat = normalized_adjacency(adj)
    model = GcnModel.init(x.shape[1], config.hidden, config.embed_dim, config.seed, config.activation)
    params = model.weights
    state = AdamState.zeros_like(params)
    history: list[float] = []
    best, stale = np.inf, 0
    for epoch in range(config.epochs):
        emb, cache = gcn_forward(GcnModel(params, config.activation), a_hat, x)
        # overflow shows up as a NaN loss, reported just below
        with np.errstate(over="ignore", invalid="ignore"):
            if counts is not None:
                loss, d_emb = count_loss_and_grad(emb, *counts)
            else:
                loss, d_emb = pair_loss_and_grad(emb, pair_arr, config.similarity)
        if not np.isfinite(loss):
            raise NonFiniteError(f"loss diverged at epoch {epoch}: {loss}")
        history.append(loss)
        grads = backward(GcnModel(params, config.activation), cache, d_emb)
        params, state = adam_step(params, grads, state, config)
        if config.patience is not None:
            if loss < best - config.min_delta:
                best, stale = loss, 0
            else:
                stale += 1
                if stale >= config.patience:
                    log.info("loss plateaued at epoch %d (%.6g)", epoch, loss)
                    break
    model = GcnModel(params, config.activation)
    emb, _ = gcn_forward(model, a_hat, x)
    return TrainResult(model, EmbeddingTable(space.node_names, emb), history, len(pair_arr))


def embed(model: GcnModel, pruned: SRG) -> EmbeddingTable:
    adj, x = srg_to_gcn_inputs(pruned)
    emb, _ = gcn_forward(model, normalized_adjacency(adj), x)
    return EmbeddingTable(pruned.space.node_names, emb)


# ---------------------------------------------------------------------------
# persistence


def checkpoint_to_dict(model: GcnModel, config: TrainConfig, space: CategorySpace) -> dict:
    return {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "category_space_hash": space.hash(),
        "dims": list(model.dims),
        "activation": model.activation,
        "train_config": config.to_dict(),
        "weights": [w.tolist() for w in model.weights],
    }


def checkpoint_from_dict(d: dict) -> tuple[GcnModel, TrainConfig, str]:
    if d.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version {d.get('format_version')!r}")
    model = GcnModel([np.array(w, dtype=float) for w in d["weights"]], d["activation"])
    if list(model.dims) != d["dims"]:
        raise ValueError("checkpoint weights do not match recorded dims")
    return model, TrainConfig(**d["train_config"]), d["category_space_hash"]


def dumps_checkpoint(model: GcnModel, config: TrainConfig, space: CategorySpace) -> str:
    return json.dumps(checkpoint_to_dict(model, config, space)) + "\n"

