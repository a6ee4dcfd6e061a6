"""Dense array primitives with hand-written backward passes, Adam, and checkpoints.

Each primitive comes as a ``*_forward`` / ``*_backward`` pair. Backward
functions take the upstream gradient plus whatever the forward pass needs
and return gradients with respect to each input, in argument order.
Inputs are batched along the leading axis where that makes sense.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError, LiteralEError

# ---------------------------------------------------------------------------
# primitives


def _check(cond, op, message):
    if not cond:
        raise DimensionError(op, message)


def lookup_rows_forward(table: np.ndarray, idx) -> np.ndarray:
    idx = np.asarray(idx)
    _check(table.ndim == 2, "lookup_rows", f"table must be 2-D, got shape {table.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise DimensionError("lookup_rows", f"index out of range [0, {table.shape[0]})")
    return table[idx]


def lookup_rows_backward(dout: np.ndarray, idx, n_rows: int) -> np.ndarray:
    """Scatter-add row gradients back into a dense table-shaped buffer."""
    dtable = np.zeros((n_rows, dout.shape[-1]), dtype=dout.dtype)
    np.add.at(dtable, np.asarray(idx), dout)
    return dtable


def concat_forward(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check(a.shape[:-1] == b.shape[:-1], "concat", f"leading dims differ: {a.shape} vs {b.shape}")
    return np.concatenate([a, b], axis=-1)


def concat_backward(dout: np.ndarray, width_a: int):
    return dout[..., :width_a], dout[..., width_a:]


def affine_forward(W: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``x @ W`` for a single vector or a batch of row vectors, i.e. ``W^T x``."""
    _check(W.ndim == 2, "affine", f"weights must be 2-D, got shape {W.shape}")
    _check(x.shape[-1] == W.shape[0], "affine", f"input width {x.shape[-1]} != weight rows {W.shape[0]}")
    return x @ W


def affine_backward(dout: np.ndarray, W: np.ndarray, x: np.ndarray):
    dW = np.outer(x, dout) if x.ndim == 1 else x.T @ dout
    dx = dout @ W.T
    return dW, dx


def tanh_forward(x):
    return np.tanh(x)


def tanh_backward(dout, out):
    return dout * (1.0 - out * out)


def relu_forward(x):
    return np.maximum(x, 0.0)


def relu_backward(dout, x):
    # subgradient at 0 is 0
    return dout * (x > 0)


def sigmoid_forward(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(dout, out):
    return dout * out * (1.0 - out)


def softmax_forward(x):
    """Softmax over the last axis."""
    shifted = x - x.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=-1, keepdims=True)


def softmax_backward(dout, out):
    # J^T v with J = diag(s) - s s^T, applied row-wise
    return out * (dout - (dout * out).sum(axis=-1, keepdims=True))


def elementwise_mul_forward(a, b):
    _check(np.shape(a) == np.shape(b), "elementwise_mul", f"shapes differ: {np.shape(a)} vs {np.shape(b)}")
    return a * b


def elementwise_mul_backward(dout, a, b):
    return dout * b, dout * a


def row_sum_forward(x):
    return x.sum(axis=-1)


def row_sum_backward(dout, x_shape):
    return np.broadcast_to(np.expand_dims(dout, -1), x_shape).copy()


def dropout_forward(x, rate: float, train: bool, rng: np.random.Generator | None = None):
    """Inverted dropout. Returns ``(out, mask)``; ``mask`` is None in eval mode.

    The mask already carries the ``1 / (1 - rate)`` scaling.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigurationError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x, None
    if rng is None:
        raise ConfigurationError("train-mode dropout needs a random generator")
    keep = rng.random(np.shape(x)) >= rate
    mask = keep / (1.0 - rate)
    return x * mask, mask


def dropout_backward(dout, mask):
    return dout if mask is None else dout * mask


def conv2d_forward(x: np.ndarray, filters: np.ndarray) -> np.ndarray:
    """Valid (unpadded, stride 1) cross-correlation.

    x: (B, C, H, W); filters: (F, C, kh, kw) -> (B, F, H - kh + 1, W - kw + 1)
    """
    _check(x.ndim == 4 and filters.ndim == 4, "conv2d", f"expected 4-D input and filters, got {x.shape}, {filters.shape}")
    _check(x.shape[1] == filters.shape[1], "conv2d", f"channel mismatch: {x.shape[1]} vs {filters.shape[1]}")
    kh, kw = filters.shape[2:]
    _check(x.shape[2] >= kh and x.shape[3] >= kw, "conv2d", f"filter {kh}x{kw} larger than input {x.shape[2:]}")
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    return np.einsum("bchwij,fcij->bfhw", windows, filters, optimize=True)


def conv2d_backward(dout: np.ndarray, x: np.ndarray, filters: np.ndarray):
    kh, kw = filters.shape[2:]
    oh, ow = dout.shape[2:]
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    dfilters = np.einsum("bfhw,bchwij->fcij", dout, windows, optimize=True)
    dx = np.zeros_like(x)
    for i in range(kh):
        for j in range(kw):
            dx[:, :, i : i + oh, j : j + ow] += np.einsum("bfhw,fc->bchw", dout, filters[:, :, i, j])
    return dfilters, dx


# ---------------------------------------------------------------------------
# parameters and optimisation


@dataclass
class Parameter:
    value: np.ndarray
    grad: np.ndarray = None
    adam_m: np.ndarray = None
    adam_v: np.ndarray = None

    def __post_init__(self):
        for name in ("grad", "adam_m", "adam_v"):
            buf = getattr(self, name)
            if buf is None:
                setattr(self, name, np.zeros_like(self.value))
            elif buf.shape != self.value.shape:
                raise DimensionError("Parameter", f"{name} shape {buf.shape} != value shape {self.value.shape}")

    @property
    def size(self) -> int:
        return int(self.value.size)


@dataclass
class ParameterStore:
    """Named parameter arrays with gradient and Adam moment buffers."""

    entries: dict[str, Parameter] = field(default_factory=dict)
    step_count: int = 0

    def add(self, name: str, value: np.ndarray) -> Parameter:
        p = Parameter(np.array(value))
        self.entries[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self.entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __iter__(self):
        return iter(self.entries)

    def value(self, name: str) -> np.ndarray:
        return self.entries[name].value

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        self.entries[name].grad += grad

    def zero_grads(self) -> None:
        for p in self.entries.values():
            p.grad[...] = 0.0

    def n_parameters(self) -> int:
        return sum(p.size for p in self.entries.values())

    def copy(self) -> "ParameterStore":
        return ParameterStore(
            {k: Parameter(p.value.copy(), p.grad.copy(), p.adam_m.copy(), p.adam_v.copy()) for k, p in self.entries.items()},
            self.step_count,
        )

    def equals(self, other: "ParameterStore") -> bool:
        """Bitwise equality of values and Adam state."""
        if self.step_count != other.step_count or list(self.entries) != list(other.entries):
            return False
        for k, p in self.entries.items():
            q = other.entries[k]
            for a, b in ((p.value, q.value), (p.adam_m, q.adam_m), (p.adam_v, q.adam_v)):
                if a.shape != b.shape or a.tobytes() != b.tobytes():
                    return False
        return True


@dataclass
class AdamConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigurationError(f"learning rate must be non-negative, got {self.learning_rate}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigurationError(f"betas must lie in (0, 1), got {self.beta1}, {self.beta2}")
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")


def adam_step(store: ParameterStore, config: AdamConfig) -> ParameterStore:
    """One bias-corrected Adam update, in place.

    Moments decay for every entry; values only move for entries that
    received a nonzero gradient this step.
    """
    store.step_count += 1
    t = store.step_count
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    for p in store.entries.values():
        g = p.grad
        p.adam_m *= b1
        p.adam_m += (1.0 - b1) * g
        p.adam_v *= b2
        p.adam_v += (1.0 - b2) * (g * g)
        if not g.any():
            continue
        m_hat = p.adam_m / bc1
        v_hat = p.adam_v / bc2
        p.value -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
    return store


def glorot_bound(shape) -> float:
    if len(shape) == 2:
        fan_in, fan_out = shape
    elif len(shape) > 2:
        receptive = int(np.prod(shape[2:]))
        fan_in, fan_out = shape[1] * receptive, shape[0] * receptive
    else:
        fan_in = fan_out = shape[0]
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_parameters(shapes: dict[str, tuple], seed: int, dtype=np.float64) -> ParameterStore:
    """Glorot-uniform initialisation of every named shape, in insertion order."""
    rng = np.random.default_rng(seed)
    store = ParameterStore()
    for name, shape in shapes.items():
        shape = tuple(int(d) for d in shape)
        if not shape or any(d <= 0 for d in shape):
            raise ConfigurationError(f"parameter {name!r} has invalid shape {shape}")
        bound = glorot_bound(shape)
        store.add(name, rng.uniform(-bound, bound, size=shape).astype(dtype))
    return store


# ---------------------------------------------------------------------------
# checkpoint format
#
# magic "LTRLE\0\0\1", u32 version, u32 entry count, then per entry:
#   u32 name length, utf-8 name, u32 rank, rank x u64 dims, row-major <f8 values.
# Adam moments are stored as "<name>#adam_m" / "<name>#adam_v" and the step
# counter as the rank-0 entry "#step_count".

MAGIC = b"LTRLE\x00\x00\x01"
FORMAT_VERSION = 1


class CheckpointError(LiteralEError):
    exit_code = 8


def _write_entry(f, name: str, arr: np.ndarray) -> None:
    raw = name.encode("utf-8")
    f.write(struct.pack("<I", len(raw)))
    f.write(raw)
    f.write(struct.pack("<I", arr.ndim))
    f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def save_checkpoint(store: ParameterStore, path) -> None:
    items = [("#step_count", np.array(float(store.step_count)))]
    for name, p in store.entries.items():
        items += [(name, p.value), (f"{name}#adam_m", p.adam_m), (f"{name}#adam_v", p.adam_v)]
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(items)))
        for name, arr in items:
            _write_entry(f, name, arr)


def _read_exact(f, n):
    buf = f.read(n)
    if len(buf) != n:
        raise CheckpointError("truncated checkpoint")
    return buf


def load_checkpoint(path, dtype=np.float64) -> ParameterStore:
    with open(path, "rb") as f:
        if _read_exact(f, len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        version, count = struct.unpack("<II", _read_exact(f, 8))
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported format version {version}")
        raw = {}
        for _ in range(count):
            (n,) = struct.unpack("<I", _read_exact(f, 4))
            name = _read_exact(f, n).decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(f, 4))
            dims = struct.unpack(f"<{rank}Q", _read_exact(f, 8 * rank)) if rank else ()
            size = int(np.prod(dims)) if dims else 1
            arr = np.frombuffer(_read_exact(f, 8 * size), dtype="<f8").reshape(dims)
            raw[name] = arr.astype(dtype)
    store = ParameterStore(step_count=int(raw.pop("#step_count", 0)))
    for name in [k for k in raw if "#" not in k]:
        store.entries[name] = Parameter(raw[name], None, raw[f"{name}#adam_m"], raw[f"{name}#adam_v"])
    return store
