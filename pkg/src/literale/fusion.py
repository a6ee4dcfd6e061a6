"""Literal fusion transforms.

Every transform maps an entity embedding ``e`` (width H) and its literal row
``l`` (width N_d) to a new H-vector computed from the concatenation
``x = [e, l]``:

    linear   x @ W
    tanh     tanh(x @ W)
    relu     relu(x @ W)
    mlp      relu(relu(x @ W1) @ W2)
    gate     z + (1 - z) * e,  z = softmax(x @ W)

All functions accept a single vector or a batch of rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numeric as nx
from .errors import ConfigurationError, DimensionError

FUSION_KINDS = ("none", "linear", "tanh", "relu", "mlp", "gate")


@dataclass
class FusionConfig:
    kind: str = "linear"
    hidden_dim: int | None = None  # MLP width; defaults to the embedding width

    def __post_init__(self):
        self.kind = self.kind.lower()
        if self.kind not in FUSION_KINDS:
            raise ConfigurationError(f"unknown fusion {self.kind!r}; expected one of {FUSION_KINDS}")
        if self.hidden_dim is not None and self.hidden_dim <= 0:
            raise ConfigurationError("hidden_dim must be positive")

    @property
    def enabled(self) -> bool:
        return self.kind != "none"

    def hidden(self, embedding_dim: int) -> int:
        return self.hidden_dim or embedding_dim

    def weight_shapes(self, embedding_dim: int, n_data_relations: int) -> dict[str, tuple[int, int]]:
        H, D = embedding_dim, n_data_relations
        if self.kind == "none":
            return {}
        if self.kind == "mlp":
            Z = self.hidden(H)
            return {"W1": (H + D, Z), "W2": (Z, H)}
        return {"W": (H + D, H)}

    def parameter_count(self, embedding_dim: int, n_data_relations: int) -> int:
        return sum(a * b for a, b in self.weight_shapes(embedding_dim, n_data_relations).values())


def _concat(e, l, W):
    x = nx.concat_forward(np.asarray(e, dtype=float), np.asarray(l, dtype=float))
    if W.shape[0] != x.shape[-1]:
        raise DimensionError("fusion", f"weight rows {W.shape[0]} != H + N_d = {x.shape[-1]}")
    return x


def fuse_linear(e, l, W):
    if W.shape[1] != np.shape(e)[-1]:
        raise ConfigurationError(f"fusion output width {W.shape[1]} != embedding width {np.shape(e)[-1]}")
    return nx.affine_forward(W, _concat(e, l, W))


def fuse_nonlinear(e, l, W, h="tanh"):
    z = fuse_linear(e, l, W)
    if h == "tanh":
        return nx.tanh_forward(z)
    if h == "relu":
        return nx.relu_forward(z)
    raise ConfigurationError(f"nonlinearity must be 'tanh' or 'relu', got {h!r}")


def fuse_mlp(e, l, W1, W2):
    if W2.shape != (W1.shape[1], np.shape(e)[-1]):
        raise ConfigurationError(f"MLP weight shapes {W1.shape}, {W2.shape} inconsistent")
    hidden = nx.relu_forward(nx.affine_forward(W1, _concat(e, l, W1)))
    return nx.relu_forward(nx.affine_forward(W2, hidden))


def fuse_gate(e, l, W):
    z = nx.softmax_forward(fuse_linear(e, l, W))
    return z + (1.0 - z) * np.asarray(e, dtype=float)


def fuse_forward(kind: str, e, l, weights: dict):
    """Apply fusion ``kind``; returns ``(out, cache)`` for :func:`fuse_backward`."""
    if kind == "none":
        return e, None
    if kind == "mlp":
        W1, W2 = weights["W1"], weights["W2"]
        x = _concat(e, l, W1)
        a1 = nx.affine_forward(W1, x)
        h1 = nx.relu_forward(a1)
        a2 = nx.affine_forward(W2, h1)
        return nx.relu_forward(a2), (x, a1, h1, a2)
    W = weights["W"]
    if W.shape[1] != np.shape(e)[-1]:
        raise ConfigurationError(f"fusion output width {W.shape[1]} != embedding width {np.shape(e)[-1]}")
    x = _concat(e, l, W)
    a = nx.affine_forward(W, x)
    if kind == "linear":
        return a, (x, a, None)
    if kind == "tanh":
        out = nx.tanh_forward(a)
        return out, (x, a, out)
    if kind == "relu":
        return nx.relu_forward(a), (x, a, None)
    if kind == "gate":
        z = nx.softmax_forward(a)
        return z + (1.0 - z) * e, (x, a, z)
    raise ConfigurationError(f"unknown fusion {kind!r}")


def fuse_backward(kind: str, dout, cache, weights: dict, embedding_dim: int):
    """Returns ``(de, weight_grads)`` where ``weight_grads`` maps weight name to gradient."""
    if kind == "none":
        return dout, {}
    H = embedding_dim
    if kind == "mlp":
        x, a1, h1, a2 = cache
        da2 = nx.relu_backward(dout, a2)
        dW2, dh1 = nx.affine_backward(da2, weights["W2"], h1)
        da1 = nx.relu_backward(dh1, a1)
        dW1, dx = nx.affine_backward(da1, weights["W1"], x)
        return dx[..., :H], {"W1": dW1, "W2": dW2}
    x, a, aux = cache
    W = weights["W"]
    de_direct = 0.0
    if kind == "linear":
        da = dout
    elif kind == "tanh":
        da = nx.tanh_backward(dout, aux)
    elif kind == "relu":
        da = nx.relu_backward(dout, a)
    elif kind == "gate":
        z = aux
        e = x[..., :H]
        da = nx.softmax_backward(dout * (1.0 - e), z)
        de_direct = dout * (1.0 - z)
    else:
        raise ConfigurationError(f"unknown fusion {kind!r}")
    dW, dx = nx.affine_backward(da, W, x)
    return dx[..., :H] + de_direct, {"W": dW}
