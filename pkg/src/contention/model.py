"""Forward/backward network for contention classification.

Pipeline per window: a shared two-layer temporal encoder maps each metric's
T-step series to a node embedding, two rounds of normalized-adjacency
propagation mix embeddings along the metric graph, a mean readout pools the
nodes, and K fully parameter-disjoint heads emit one logit per contention
class. The encoder and propagation weights are shaped only by T and the
layer widths, never by D, so one parameter set serves any metric count.

All gradients are exact reverse-mode derivatives, checked against central
differences in the test suite. tanh keeps every layer smooth so those
checks are well-defined everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from contention.errors import CacheMismatchError, ConfigError, ShapeError
from contention.graph import MetricGraph
from contention.linalg import glorot_init, softmax
from contention.rng import RngStream

ENCODED = "encoded"
PROPAGATED = "propagated"


@dataclass(frozen=True)
class ModelConfig:
    window_len: int = 32  # T, timesteps per window
    num_classes: int = 5  # K, contention classes
    encoder_hidden: int = 64
    embed_width: int = 32  # node embedding width out of the encoder
    propagation_width: int = 32
    head_hidden: int = 16

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 1:
                raise ConfigError(f"{f.name} must be >= 1, got {getattr(self, f.name)}")


@dataclass
class ModelParams:
    """All trainable weights.

    Encoder and propagation blocks are shared across every metric and every
    class; each head k owns its block exclusively, so per-class gradients
    touch no other head (verified by the gradient-sparsity tests).
    """

    enc_w1: np.ndarray  # (encoder_hidden, window_len)
    enc_b1: np.ndarray  # (encoder_hidden,)
    enc_w2: np.ndarray  # (embed_width, encoder_hidden)
    enc_b2: np.ndarray  # (embed_width,)
    prop_w1: np.ndarray  # (embed_width, propagation_width)
    prop_b1: np.ndarray  # (propagation_width,)
    prop_w2: np.ndarray  # (propagation_width, propagation_width)
    prop_b2: np.ndarray  # (propagation_width,)
    head_w: np.ndarray  # (num_classes, head_hidden, propagation_width)
    head_b: np.ndarray  # (num_classes, head_hidden)
    head_u: np.ndarray  # (num_classes, head_hidden)
    head_c: np.ndarray  # (num_classes,)

    _ORDER = (
        "enc_w1", "enc_b1", "enc_w2", "enc_b2",
        "prop_w1", "prop_b1", "prop_w2", "prop_b2",
        "head_w", "head_b", "head_u", "head_c",
    )

    @staticmethod
    def shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
        t, k = cfg.window_len, cfg.num_classes
        dh, de, dp, dd = cfg.encoder_hidden, cfg.embed_width, cfg.propagation_width, cfg.head_hidden
        return {
            "enc_w1": (dh, t), "enc_b1": (dh,),
            "enc_w2": (de, dh), "enc_b2": (de,),
            "prop_w1": (de, dp), "prop_b1": (dp,),
            "prop_w2": (dp, dp), "prop_b2": (dp,),
            "head_w": (k, dd, dp), "head_b": (k, dd),
            "head_u": (k, dd), "head_c": (k,),
        }

    def validate(self, cfg: ModelConfig) -> None:
        for name, shape in self.shapes(cfg).items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise ShapeError(f"parameter {name} has shape {actual}, expected {shape}")

    @classmethod
    def zeros(cls, cfg: ModelConfig) -> "ModelParams":
        return cls(**{name: np.zeros(shape) for name, shape in cls.shapes(cfg).items()})

    def copy(self) -> "ModelParams":
        return ModelParams(**{name: getattr(self, name).copy() for name in self._ORDER})

    def accumulate(self, other: "ModelParams") -> None:
        """In-place elementwise add, used for batch gradient accumulation."""
        for name in self._ORDER:
            getattr(self, name).__iadd__(getattr(other, name))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([getattr(self, name).ravel() for name in self._ORDER])

    @classmethod
    def from_vector(cls, cfg: ModelConfig, vec: np.ndarray) -> "ModelParams":
        shapes = cls.shapes(cfg)
        vec = np.asarray(vec, dtype=np.float64)
        total = sum(int(np.prod(s)) for s in shapes.values())
        if vec.shape != (total,):
            raise ShapeError(f"expected a flat vector of {total} parameters, got shape {vec.shape}")
        out, offset = {}, 0
        for name in cls._ORDER:
            size = int(np.prod(shapes[name]))
            out[name] = vec[offset : offset + size].reshape(shapes[name])
            offset += size
        return cls(**out)

    @classmethod
    def block_slices(cls, cfg: ModelConfig) -> list[tuple[str, slice]]:
        """Named slices of the flat vector layout, for diagnostics."""
        shapes = cls.shapes(cfg)
        out, offset = [], 0
        for name in cls._ORDER:
            size = int(np.prod(shapes[name]))
            out.append((name, slice(offset, offset + size)))
            offset += size
        return out


def init_params(cfg: ModelConfig, rng: RngStream) -> ModelParams:
    """Glorot-uniform weights, zero biases. Deterministic given the stream."""
    k, dd, dp = cfg.num_classes, cfg.head_hidden, cfg.propagation_width
    p = ModelParams.zeros(cfg)
    p.enc_w1 = glorot_init(cfg.encoder_hidden, cfg.window_len, rng.substream(0))
    p.enc_w2 = glorot_init(cfg.embed_width, cfg.encoder_hidden, rng.substream(1))
    p.prop_w1 = glorot_init(cfg.embed_width, cfg.propagation_width, rng.substream(2))
    p.prop_w2 = glorot_init(cfg.propagation_width, cfg.propagation_width, rng.substream(3))
    p.head_w = np.stack([glorot_init(dd, dp, rng.substream(4 + 2 * i)) for i in range(k)])
    p.head_u = np.stack(
        [glorot_init(1, dd, rng.substream(5 + 2 * i))[0] for i in range(k)]
    )
    return p


@dataclass(frozen=True)
class NodeEmbeddings:
    """Per-metric embedding rows, tagged by pipeline stage."""

    stage: str
    values: np.ndarray  # (D, width)

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Prediction:
    logits: np.ndarray  # (K,)
    probabilities: np.ndarray  # (K,) softmax of logits
    label: int  # argmax of logits, lowest index on ties


@dataclass(slots=True)
class ForwardCache:
    """Intermediates retained for the backward pass."""

    x: np.ndarray  # (T, D) normalized input
    graph: MetricGraph
    params: ModelParams
    z1: np.ndarray  # (encoder_hidden, D) first encoder activation
    h: np.ndarray  # (D, embed_width) encoded nodes
    ah: np.ndarray  # (D, embed_width) operator applied to h
    h1: np.ndarray  # (D, propagation_width) first propagation activation
    ah1: np.ndarray  # (D, propagation_width) operator applied to h1
    ht: np.ndarray  # (D, propagation_width) propagated nodes
    r: np.ndarray  # (propagation_width,) mean readout
    head_tanh: np.ndarray  # (K, head_hidden)


def encode(values: np.ndarray, params: ModelParams) -> NodeEmbeddings:
    """Shared two-layer temporal encoder applied to every metric column.

    For each column x_i of the (T, D) window:
    h_i = tanh(W2 tanh(W1 x_i + b1) + b2). The same weights serve every
    metric, which is what makes the model independent of D and equivariant
    to metric permutations.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"window must be a (T, D) matrix, got shape {x.shape}")
    t_expected = params.enc_w1.shape[1]
    if x.shape[0] != t_expected:
        raise ShapeError(f"window has {x.shape[0]} timesteps, encoder expects {t_expected}")
    z1 = np.tanh(params.enc_w1 @ x + params.enc_b1[:, None])
    h = np.tanh(params.enc_w2 @ z1 + params.enc_b2[:, None]).T
    return NodeEmbeddings(stage=ENCODED, values=h)


def propagate(g: MetricGraph, h: NodeEmbeddings, params: ModelParams) -> NodeEmbeddings:
    """Two rounds of normalized-adjacency mixing with dense layer weights.

    Two hops let a metric's influence reach the neighbors of its neighbors,
    which is how chained cross-resource effects show up in the embedding.
    """
    if h.stage != ENCODED:
        raise ShapeError(f"propagate expects {ENCODED} embeddings, got stage '{h.stage}'")
    if g.dim != h.dim:
        raise ShapeError(f"graph has {g.dim} vertices but embeddings have {h.dim} rows")
    ah = g.normalized @ h.values
    h1 = np.tanh(ah @ params.prop_w1 + params.prop_b1)
    ah1 = g.normalized @ h1
    ht = np.tanh(ah1 @ params.prop_w2 + params.prop_b2)
    return NodeEmbeddings(stage=PROPAGATED, values=ht)


def heads(ht: NodeEmbeddings, params: ModelParams) -> np.ndarray:
    """Mean readout followed by K parameter-disjoint scoring heads.

    r = mean over node rows; z_k = u_k . tanh(Wh_k r + bh_k) + c_k. Head k's
    logit depends on no other head's parameters.
    """
    if ht.stage != PROPAGATED:
        raise ShapeError(f"heads expects {PROPAGATED} embeddings, got stage '{ht.stage}'")
    r = ht.values.mean(axis=0)
    t = np.tanh(params.head_w @ r + params.head_b)
    return (params.head_u * t).sum(axis=1) + params.head_c


def predict(logits: np.ndarray) -> Prediction:
    """Confidence distribution and hard label for a logit vector.

    The label is the argmax of the logits with ties broken toward the lowest
    index; softmax is monotone, so this always agrees with argmax of the
    probabilities.
    """
    z = np.asarray(logits, dtype=np.float64)
    return Prediction(logits=z, probabilities=softmax(z), label=int(np.argmax(z)))


def forward(
    values: np.ndarray, g: MetricGraph, params: ModelParams
) -> tuple[Prediction, ForwardCache]:
    """Full pass over one window, retaining intermediates for backward."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"window must be a (T, D) matrix, got shape {x.shape}")
    if x.shape[0] != params.enc_w1.shape[1]:
        raise ShapeError(
            f"window has {x.shape[0]} timesteps, encoder expects {params.enc_w1.shape[1]}"
        )
    if g.dim != x.shape[1]:
        raise ShapeError(f"graph has {g.dim} vertices but window has {x.shape[1]} metrics")
    z1 = np.tanh(params.enc_w1 @ x + params.enc_b1[:, None])
    h = np.tanh(params.enc_w2 @ z1 + params.enc_b2[:, None]).T
    ah = g.normalized @ h
    h1 = np.tanh(ah @ params.prop_w1 + params.prop_b1)
    ah1 = g.normalized @ h1
    ht = np.tanh(ah1 @ params.prop_w2 + params.prop_b2)
    r = ht.mean(axis=0)
    head_tanh = np.tanh(params.head_w @ r + params.head_b)
    z = (params.head_u * head_tanh).sum(axis=1) + params.head_c
    cache = ForwardCache(
        x=x, graph=g, params=params, z1=z1, h=h, ah=ah, h1=h1, ah1=ah1, ht=ht,
        r=r, head_tanh=head_tanh,
    )
    return predict(z), cache


def backward(
    cache: ForwardCache,
    dloss_dz: np.ndarray,
    g: MetricGraph,
    params: ModelParams,
) -> ModelParams:
    """Exact gradients of dloss_dz . z with respect to every parameter.

    Heads whose dloss_dz entry is zero receive exactly zero gradient, which
    is what keeps the per-class tasks decoupled during training.
    """
    if g is not cache.graph and not np.array_equal(g.normalized, cache.graph.normalized):
        raise CacheMismatchError("graph differs from the one used in forward")
    if params is not cache.params:
        raise CacheMismatchError("params differ from the ones used in forward")
    dz = np.asarray(dloss_dz, dtype=np.float64)
    k = params.head_c.shape[0]
    if dz.shape != (k,):
        raise CacheMismatchError(f"dloss_dz must have shape ({k},), got {dz.shape}")

    grads = ModelParams.zeros(
        ModelConfig(
            window_len=params.enc_w1.shape[1],
            num_classes=k,
            encoder_hidden=params.enc_w1.shape[0],
            embed_width=params.enc_w2.shape[0],
            propagation_width=params.prop_w1.shape[1],
            head_hidden=params.head_b.shape[1],
        )
    )
    t = cache.head_tanh
    grads.head_u = dz[:, None] * t
    grads.head_c = dz.copy()
    da = dz[:, None] * params.head_u * (1.0 - t * t)  # (K, head_hidden)
    grads.head_w = da[:, :, None] * cache.r[None, None, :]
    grads.head_b = da
    dr = (params.head_w * da[:, :, None]).sum(axis=(0, 1))  # (propagation_width,)

    d = cache.ht.shape[0]
    dht = np.repeat((dr / d)[None, :], d, axis=0)

    dp2 = dht * (1.0 - cache.ht * cache.ht)
    grads.prop_w2 = cache.ah1.T @ dp2
    grads.prop_b2 = dp2.sum(axis=0)
    dh1 = cache.graph.normalized.T @ (dp2 @ params.prop_w2.T)

    dp1 = dh1 * (1.0 - cache.h1 * cache.h1)
    grads.prop_w1 = cache.ah.T @ dp1
    grads.prop_b1 = dp1.sum(axis=0)
    dh = cache.graph.normalized.T @ (dp1 @ params.prop_w1.T)

    henc = cache.h.T  # (embed_width, D), equals tanh of the second pre-activation
    da2 = dh.T * (1.0 - henc * henc)
    grads.enc_w2 = da2 @ cache.z1.T
    grads.enc_b2 = da2.sum(axis=1)
    da1 = (params.enc_w2.T @ da2) * (1.0 - cache.z1 * cache.z1)
    grads.enc_w1 = da1 @ cache.x.T
    grads.enc_b1 = da1.sum(axis=1)
    return grads
