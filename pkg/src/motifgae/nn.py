"""Dense graph autoencoder in numpy: GCN / SAGE / GAT encoders, bilinear decoder.

Everything is float64. Gradients are written out by hand; ``tests/test_nn.py``
checks them against central finite differences.

Encoders have two layers (ReLU after the first, linear second) and propagate
over the symmetrized adjacency. The decoder scores ordered pairs with
``Z R Z^T`` so directed edges can be reconstructed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from motifgae.features import COLUMNS, compute_features
from motifgae.graph import DiGraph, PatternLabel

ENCODERS = ("gcn", "sage", "gat")
FEATURE_CONVENTION = "nine-centrality/minmax-per-graph/v1"
LEAKY_SLOPE = 0.2


def check_encoder(kind: str) -> str:
    kind = kind.lower()
    if kind not in ENCODERS:
        raise ValueError(f"unknown encoder {kind!r}; valid: {'|'.join(ENCODERS)}")
    return kind


# -- graph preprocessing ----------------------------------------------------

def symmetric_adjacency(g: DiGraph) -> np.ndarray:
    a = g.adjacency()
    return np.maximum(a, a.T)


def normalize_adjacency(g: DiGraph) -> np.ndarray:
    """``D^-1/2 (A_sym + I) D^-1/2`` with degrees taken after adding self-loops."""
    if g.node_count < 1:
        raise ValueError("graph must have at least one node")
    a_hat = symmetric_adjacency(g) + np.eye(g.node_count)
    d_inv_sqrt = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return a_hat * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]


def mean_aggregator(sym: np.ndarray) -> np.ndarray:
    deg = sym.sum(axis=1, keepdims=True)
    return np.divide(sym, deg, out=np.zeros_like(sym), where=deg > 0)


@dataclass
class GraphInput:
    """Per-graph tensors the encoders and loss need, computed once."""

    features: np.ndarray
    adjacency: np.ndarray
    sym: np.ndarray
    norm_adj: np.ndarray
    mean_agg: np.ndarray
    attn_mask: np.ndarray

    @property
    def n(self) -> int:
        return self.features.shape[0]


def prepare(g: DiGraph, features: np.ndarray | None = None) -> GraphInput:
    if features is None:
        features = compute_features(g).values
    sym = symmetric_adjacency(g)
    return GraphInput(
        features=np.asarray(features, dtype=float),
        adjacency=g.adjacency(),
        sym=sym,
        norm_adj=normalize_adjacency(g),
        mean_agg=mean_aggregator(sym),
        attn_mask=(sym + np.eye(g.node_count)) > 0,
    )


# -- layers -----------------------------------------------------------------

def relu(x):
    return np.maximum(x, 0.0)


def gcn_forward(norm_adj: np.ndarray, h: np.ndarray, w: np.ndarray, activate: bool = True):
    if h.shape[1] != w.shape[0] or norm_adj.shape[1] != h.shape[0]:
        raise ValueError(f"shape mismatch: adj {norm_adj.shape}, H {h.shape}, W {w.shape}")
    out = norm_adj @ h @ w
    return relu(out) if activate else out


def sage_forward(mean_agg: np.ndarray, h: np.ndarray, w: np.ndarray, activate: bool = True):
    if w.shape[0] != 2 * h.shape[1]:
        raise ValueError(f"SAGE weight must have {2 * h.shape[1]} rows, got {w.shape[0]}")
    out = np.hstack([h, mean_agg @ h]) @ w
    return relu(out) if activate else out


def attention_weights(mask: np.ndarray, hw: np.ndarray, a: np.ndarray):
    """Masked softmax of LeakyReLU(a^T [Wh_v || Wh_u]) over ``u``; returns (alpha, pre-activation)."""
    d = hw.shape[1]
    if a.shape[0] != 2 * d:
        raise ValueError(f"attention vector must have length {2 * d}, got {a.shape[0]}")
    e = (hw @ a[:d])[:, None] + (hw @ a[d:])[None, :]
    logits = np.where(e > 0, e, LEAKY_SLOPE * e)
    logits = np.where(mask, logits, -np.inf)
    logits -= logits.max(axis=1, keepdims=True)
    ex = np.exp(logits)
    return ex / ex.sum(axis=1, keepdims=True), e


def gat_forward(mask: np.ndarray, h: np.ndarray, w: np.ndarray, a: np.ndarray, activate: bool = True):
    if h.shape[1] != w.shape[0]:
        raise ValueError(f"shape mismatch: H {h.shape}, W {w.shape}")
    hw = h @ w
    alpha, _ = attention_weights(mask, hw, a)
    out = alpha @ hw
    return relu(out) if activate else out


def decode(z: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Edge logits ``Z R Z^T``; ``sigmoid`` of entry ``(u, v)`` scores ``u -> v``."""
    return z @ r @ z.T


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softplus(x):
    return np.logaddexp(0.0, x)


# -- loss -------------------------------------------------------------------

def pair_weights(adjacency: np.ndarray) -> tuple[float, int]:
    """Positive-class weight ``#non-edges / #edges`` and the off-diagonal pair count."""
    n = adjacency.shape[0]
    pairs = n * (n - 1)
    edges = int(adjacency.sum() - np.trace(adjacency))
    pos_weight = (pairs - edges) / edges if edges else 1.0
    return pos_weight, pairs


@dataclass(frozen=True)
class LossReport:
    value: float
    pos_weight: float
    pairs: int


def reconstruction_loss(logits: np.ndarray, adjacency: np.ndarray) -> LossReport:
    """Class-weighted BCE over ordered off-diagonal pairs."""
    if logits.shape != adjacency.shape or logits.shape[0] != logits.shape[1]:
        raise ValueError("logits and adjacency must be matching square matrices")
    pos_weight, pairs = pair_weights(adjacency)
    if pairs == 0:
        return LossReport(0.0, pos_weight, 0)
    per_pair = pos_weight * adjacency * softplus(-logits) + (1.0 - adjacency) * softplus(logits)
    np.fill_diagonal(per_pair, 0.0)
    return LossReport(float(per_pair.sum() / pairs), pos_weight, pairs)


def _loss_grad_logits(logits: np.ndarray, adjacency: np.ndarray) -> np.ndarray:
    pos_weight, pairs = pair_weights(adjacency)
    if pairs == 0:
        return np.zeros_like(logits)
    g = (-pos_weight * adjacency * sigmoid(-logits) + (1.0 - adjacency) * sigmoid(logits)) / pairs
    np.fill_diagonal(g, 0.0)
    return g


# -- model ------------------------------------------------------------------

@dataclass
class GaeModel:
    encoder_kind: str
    dims: tuple[int, int, int]
    params: dict[str, np.ndarray]
    trained_pattern: PatternLabel | None = None
    threshold: float | None = None
    feature_convention: str = FEATURE_CONVENTION
    meta: dict = field(default_factory=dict)

    def copy(self) -> "GaeModel":
        return GaeModel(self.encoder_kind, self.dims, {k: v.copy() for k, v in self.params.items()},
                        self.trained_pattern, self.threshold, self.feature_convention, dict(self.meta))


def param_shapes(kind: str, dims: tuple[int, int, int]) -> dict[str, tuple[int, ...]]:
    d_in, d_hid, d_lat = dims
    kind = check_encoder(kind)
    if kind == "gcn":
        shapes = {"w1": (d_in, d_hid), "w2": (d_hid, d_lat)}
    elif kind == "sage":
        shapes = {"w1": (2 * d_in, d_hid), "w2": (2 * d_hid, d_lat)}
    else:
        shapes = {"w1": (d_in, d_hid), "a1": (2 * d_hid,), "w2": (d_hid, d_lat), "a2": (2 * d_lat,)}
    shapes["r"] = (d_lat, d_lat)
    return shapes


def glorot_bound(shape: tuple[int, ...]) -> float:
    if len(shape) == 1:
        fan_in, fan_out = shape[0] // 2, 1
    else:
        fan_in, fan_out = shape
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_model(encoder_kind: str, dims: tuple[int, int, int] = (len(COLUMNS), 32, 16),
               seed: int = 0) -> GaeModel:
    if any(d < 1 for d in dims):
        raise ValueError(f"invalid dims {dims}")
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(encoder_kind, dims).items():
        bound = glorot_bound(shape)
        params[name] = rng.uniform(-bound, bound, size=shape)
    return GaeModel(check_encoder(encoder_kind), tuple(dims), params)


def encode(model: GaeModel, gi: GraphInput, cache: dict | None = None) -> np.ndarray:
    p = model.params
    x = gi.features
    kind = model.encoder_kind
    if kind == "gcn":
        pre1 = gi.norm_adj @ x @ p["w1"]
        h1 = relu(pre1)
        z = gi.norm_adj @ h1 @ p["w2"]
        if cache is not None:
            cache.update(pre1=pre1, h1=h1)
    elif kind == "sage":
        c1 = np.hstack([x, gi.mean_agg @ x])
        pre1 = c1 @ p["w1"]
        h1 = relu(pre1)
        c2 = np.hstack([h1, gi.mean_agg @ h1])
        z = c2 @ p["w2"]
        if cache is not None:
            cache.update(c1=c1, pre1=pre1, h1=h1, c2=c2)
    else:
        g1 = x @ p["w1"]
        al1, e1 = attention_weights(gi.attn_mask, g1, p["a1"])
        pre1 = al1 @ g1
        h1 = relu(pre1)
        g2 = h1 @ p["w2"]
        al2, e2 = attention_weights(gi.attn_mask, g2, p["a2"])
        z = al2 @ g2
        if cache is not None:
            cache.update(g1=g1, al1=al1, e1=e1, pre1=pre1, h1=h1, g2=g2, al2=al2, e2=e2)
    return z


def graph_loss(model: GaeModel, gi: GraphInput) -> float:
    z = encode(model, gi)
    return reconstruction_loss(decode(z, model.params["r"]), gi.adjacency).value


def _gat_backward(mask, h, w, a, g, alpha, e, d_out):
    """Backprop through ``alpha @ (h @ w)``; returns (dh, dw, da)."""
    d = g.shape[1]
    d_alpha = d_out @ g.T
    d_g = alpha.T @ d_out
    d_logits = alpha * (d_alpha - (d_alpha * alpha).sum(axis=1, keepdims=True))
    d_e = np.where(mask, d_logits * np.where(e > 0, 1.0, LEAKY_SLOPE), 0.0)
    ds_src = d_e.sum(axis=1)
    ds_dst = d_e.sum(axis=0)
    da = np.concatenate([g.T @ ds_src, g.T @ ds_dst])
    d_g += np.outer(ds_src, a[:d]) + np.outer(ds_dst, a[d:])
    return d_g @ w.T, h.T @ d_g, da


def loss_and_gradients(model: GaeModel, gi: GraphInput) -> tuple[float, dict[str, np.ndarray]]:
    p = model.params
    cache: dict = {}
    z = encode(model, gi, cache)
    r = p["r"]
    logits = decode(z, r)
    loss = reconstruction_loss(logits, gi.adjacency).value
    g_l = _loss_grad_logits(logits, gi.adjacency)

    grads: dict[str, np.ndarray] = {"r": z.T @ g_l @ z}
    d_z = g_l @ z @ r.T + g_l.T @ z @ r
    x = gi.features
    kind = model.encoder_kind
    if kind == "gcn":
        ah1 = gi.norm_adj @ cache["h1"]
        grads["w2"] = ah1.T @ d_z
        d_h1 = gi.norm_adj.T @ d_z @ p["w2"].T
        d_pre1 = d_h1 * (cache["pre1"] > 0)
        grads["w1"] = (gi.norm_adj @ x).T @ d_pre1
    elif kind == "sage":
        grads["w2"] = cache["c2"].T @ d_z
        d_c2 = d_z @ p["w2"].T
        hid = cache["h1"].shape[1]
        d_h1 = d_c2[:, :hid] + gi.mean_agg.T @ d_c2[:, hid:]
        d_pre1 = d_h1 * (cache["pre1"] > 0)
        grads["w1"] = cache["c1"].T @ d_pre1
    else:
        d_h1, grads["w2"], grads["a2"] = _gat_backward(
            gi.attn_mask, cache["h1"], p["w2"], p["a2"], cache["g2"], cache["al2"], cache["e2"], d_z)
        d_pre1 = d_h1 * (cache["pre1"] > 0)
        _, grads["w1"], grads["a1"] = _gat_backward(
            gi.attn_mask, x, p["w1"], p["a1"], cache["g1"], cache["al1"], cache["e1"], d_pre1)
    return loss, grads


# -- optimizer ----------------------------------------------------------------

@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls({k: np.zeros_like(v) for k, v in params.items()},
                   {k: np.zeros_like(v) for k, v in params.items()})


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState,
              t: int, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """Bias-corrected Adam update, in place on ``params`` and ``state``."""
    if t < 1:
        raise ValueError("step counter t must be >= 1")
    for k, g in grads.items():
        state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g
        state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * g * g
        m_hat = state.m[k] / (1.0 - beta1 ** t)
        v_hat = state.v[k] / (1.0 - beta2 ** t)
        params[k] -= lr * m_hat / (np.sqrt(v_hat) + eps)
    state.t = t


# -- persistence ----------------------------------------------------------------

def model_to_dict(model: GaeModel) -> dict:
    return {
        "encoder_kind": model.encoder_kind,
        "dims": list(model.dims),
        "trained_pattern": model.trained_pattern.value if model.trained_pattern else None,
        "threshold": model.threshold,
        "feature_convention": model.feature_convention,
        "params": {k: model.params[k].tolist() for k in sorted(model.params)},
        "meta": model.meta,
    }


def model_from_dict(doc: dict) -> GaeModel:
    kind = check_encoder(doc["encoder_kind"])
    dims = tuple(int(d) for d in doc["dims"])
    params = {k: np.asarray(v, dtype=float) for k, v in doc["params"].items()}
    expected = param_shapes(kind, dims)
    for name, shape in expected.items():
        if name not in params or params[name].shape != shape:
            raise ValueError(f"parameter {name!r} missing or not shaped {shape}")
        if not np.all(np.isfinite(params[name])):
            raise ValueError(f"parameter {name!r} has non-finite entries")
    label = doc.get("trained_pattern")
    return GaeModel(kind, dims, params,
                    PatternLabel.parse(label) if label else None,
                    doc.get("threshold"),
                    doc.get("feature_convention", FEATURE_CONVENTION),
                    doc.get("meta", {}))


def save_model(model: GaeModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path) -> GaeModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
