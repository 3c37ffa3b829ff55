"""Minimal neural-net layers with explicit reverse-mode gradients.

No autodiff dependency: every layer exposes forward(...) -> (out, cache) and
backward(d_out, cache) -> d_in, accumulating parameter gradients into a shared
ParamStore. Shapes are (batch, tokens, dim) throughout.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .errors import ShapeError


class ParamStore:
    """Flat name -> array registry with matching gradient buffers."""

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self.values: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def add(self, name: str, array: np.ndarray) -> np.ndarray:
        if name in self.values:
            raise ValueError(f"duplicate parameter {name}")
        self.values[name] = np.ascontiguousarray(array, dtype=self.dtype)
        self.grads[name] = np.zeros_like(self.values[name])
        return self.values[name]

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g[...] = 0

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        self.grads[name] += grad

    def num_params(self) -> int:
        return sum(v.size for v in self.values.values())

    def copy_values(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.values.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        for k, v in self.values.items():
            if k not in values:
                raise KeyError(f"missing parameter {k}")
            if values[k].shape != v.shape:
                raise ShapeError(f"shape mismatch for {k}: {values[k].shape} vs {v.shape}")
            v[...] = values[k]


def xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out))


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------

def gelu(x):
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def gelu_backward(d_out, x):
    cdf = 0.5 * (1.0 + erf(x / np.sqrt(2.0)))
    pdf = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    return d_out * (cdf + x * pdf)


def relu(x):
    return np.maximum(x, 0)


def relu_backward(d_out, x):
    return d_out * (x > 0)


def softmax(x, axis=-1):
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(d_out, probs, axis=-1):
    return probs * (d_out - np.sum(d_out * probs, axis=axis, keepdims=True))


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------

class Linear:
    def __init__(self, store: ParamStore, name: str, d_in: int, d_out: int,
                 rng: np.random.Generator, zero_init: bool = False):
        self.store = store
        self.name = name
        w = np.zeros((d_in, d_out)) if zero_init else xavier(rng, d_in, d_out)
        self.w = store.add(f"{name}.w", w)
        self.b = store.add(f"{name}.b", np.zeros(d_out))

    def forward(self, x):
        return x @ self.w + self.b, x

    def backward(self, d_out, cache):
        x = cache
        self.store.accumulate(f"{self.name}.w",
                              x.reshape(-1, x.shape[-1]).T @ d_out.reshape(-1, d_out.shape[-1]))
        self.store.accumulate(f"{self.name}.b", d_out.reshape(-1, d_out.shape[-1]).sum(axis=0))
        return d_out @ self.w.T


class LayerNorm:
    EPS = 1e-5

    def __init__(self, store: ParamStore, name: str, dim: int):
        self.store = store
        self.name = name
        self.gamma = store.add(f"{name}.gamma", np.ones(dim))
        self.beta = store.add(f"{name}.beta", np.zeros(dim))

    def forward(self, x):
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + self.EPS)
        xhat = (x - mu) * inv
        return xhat * self.gamma + self.beta, (xhat, inv)

    def backward(self, d_out, cache):
        xhat, inv = cache
        flat = d_out.reshape(-1, d_out.shape[-1])
        self.store.accumulate(f"{self.name}.gamma",
                              (flat * xhat.reshape(-1, xhat.shape[-1])).sum(axis=0))
        self.store.accumulate(f"{self.name}.beta", flat.sum(axis=0))
        dxhat = d_out * self.gamma
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        return inv * (dxhat - m1 - xhat * m2)


class MultiHeadAttention:
    """Scaled dot-product attention; self-attention when kv is the query input."""

    def __init__(self, store: ParamStore, name: str, dim: int, heads: int,
                 rng: np.random.Generator):
        if dim % heads != 0:
            raise ShapeError(f"dim {dim} not divisible by heads {heads}")
        self.dim = dim
        self.heads = heads
        self.dh = dim // heads
        self.q = Linear(store, f"{name}.q", dim, dim, rng)
        self.k = Linear(store, f"{name}.k", dim, dim, rng)
        self.v = Linear(store, f"{name}.v", dim, dim, rng)
        self.o = Linear(store, f"{name}.o", dim, dim, rng)

    def _split(self, x):
        b, s, _ = x.shape
        return x.reshape(b, s, self.heads, self.dh).transpose(0, 2, 1, 3)

    def _merge(self, x):
        b, h, s, dh = x.shape
        return x.transpose(0, 2, 1, 3).reshape(b, s, h * dh)

    def forward(self, q_in, kv_in, capture: dict | None = None):
        q, cq = self.q.forward(q_in)
        k, ck = self.k.forward(kv_in)
        v, cv = self.v.forward(kv_in)
        qh, kh, vh = self._split(q), self._split(k), self._split(v)
        scores = qh @ kh.transpose(0, 1, 3, 2) / np.sqrt(self.dh)
        probs = softmax(scores, axis=-1)
        if capture is not None:
            capture.setdefault("attention_probs", []).append(probs)
        ctx = probs @ vh
        out, co = self.o.forward(self._merge(ctx))
        return out, (cq, ck, cv, co, qh, kh, vh, probs)

    def backward(self, d_out, cache):
        cq, ck, cv, co, qh, kh, vh, probs = cache
        d_ctx_m = self.o.backward(d_out, co)
        d_ctx = self._split(d_ctx_m)
        d_probs = d_ctx @ vh.transpose(0, 1, 3, 2)
        d_vh = probs.transpose(0, 1, 3, 2) @ d_ctx
        d_scores = softmax_backward(d_probs, probs) / np.sqrt(self.dh)
        d_qh = d_scores @ kh
        d_kh = d_scores.transpose(0, 1, 3, 2) @ qh
        d_q_in = self.q.backward(self._merge(d_qh), cq)
        d_kv = self.k.backward(self._merge(d_kh), ck)
        d_kv = d_kv + self.v.backward(self._merge(d_vh), cv)
        return d_q_in, d_kv


class FeedForward:
    def __init__(self, store: ParamStore, name: str, dim: int, hidden: int,
                 rng: np.random.Generator):
        self.lin1 = Linear(store, f"{name}.lin1", dim, hidden, rng)
        self.lin2 = Linear(store, f"{name}.lin2", hidden, dim, rng)

    def forward(self, x):
        h, c1 = self.lin1.forward(x)
        a = gelu(h)
        out, c2 = self.lin2.forward(a)
        return out, (c1, h, c2)

    def backward(self, d_out, cache):
        c1, h, c2 = cache
        da = self.lin2.backward(d_out, c2)
        dh = gelu_backward(da, h)
        return self.lin1.backward(dh, c1)


class EncoderLayer:
    """Pre-norm transformer encoder block: residual self-attention + FFN."""

    def __init__(self, store, name, dim, heads, ffn, rng):
        self.ln1 = LayerNorm(store, f"{name}.ln1", dim)
        self.attn = MultiHeadAttention(store, f"{name}.attn", dim, heads, rng)
        self.ln2 = LayerNorm(store, f"{name}.ln2", dim)
        self.ffn = FeedForward(store, f"{name}.ffn", dim, ffn, rng)

    def forward(self, x, capture=None):
        h1, cl1 = self.ln1.forward(x)
        a, ca = self.attn.forward(h1, h1, capture)
        x1 = x + a
        h2, cl2 = self.ln2.forward(x1)
        f, cf = self.ffn.forward(h2)
        return x1 + f, (cl1, ca, cl2, cf)

    def backward(self, d_out, cache):
        cl1, ca, cl2, cf = cache
        d_x1 = d_out + self.ln2.backward(self.ffn.backward(d_out, cf), cl2)
        dq, dkv = self.attn.backward(d_x1, ca)
        return d_x1 + self.ln1.backward(dq + dkv, cl1)


class DecoderLayer:
    """Pre-norm decoder block: self-attention, cross-attention to memory, FFN."""

    def __init__(self, store, name, dim, heads, ffn, rng):
        self.ln1 = LayerNorm(store, f"{name}.ln1", dim)
        self.self_attn = MultiHeadAttention(store, f"{name}.self", dim, heads, rng)
        self.ln2 = LayerNorm(store, f"{name}.ln2", dim)
        self.cross_attn = MultiHeadAttention(store, f"{name}.cross", dim, heads, rng)
        self.ln3 = LayerNorm(store, f"{name}.ln3", dim)
        self.ffn = FeedForward(store, f"{name}.ffn", dim, ffn, rng)

    def forward(self, x, memory, capture=None):
        h1, cl1 = self.ln1.forward(x)
        a, ca = self.self_attn.forward(h1, h1, capture)
        x1 = x + a
        h2, cl2 = self.ln2.forward(x1)
        c, cc = self.cross_attn.forward(h2, memory, capture)
        x2 = x1 + c
        h3, cl3 = self.ln3.forward(x2)
        f, cf = self.ffn.forward(h3)
        return x2 + f, (cl1, ca, cl2, cc, cl3, cf)

    def backward(self, d_out, cache):
        cl1, ca, cl2, cc, cl3, cf = cache
        d_x2 = d_out + self.ln3.backward(self.ffn.backward(d_out, cf), cl3)
        dq, d_mem = self.cross_attn.backward(d_x2, cc)
        d_x1 = d_x2 + self.ln2.backward(dq, cl2)
        dqs, dkvs = self.self_attn.backward(d_x1, ca)
        d_x = d_x1 + self.ln1.backward(dqs + dkvs, cl1)
        return d_x, d_mem


class TransformerEncoder:
    def __init__(self, store, name, dim, heads, ffn, depth, rng):
        self.layers = [EncoderLayer(store, f"{name}.{i}", dim, heads, ffn, rng)
                       for i in range(depth)]

    def forward(self, x, capture=None):
        caches = []
        for layer in self.layers:
            x, c = layer.forward(x, capture)
            caches.append(c)
        return x, caches

    def backward(self, d_out, caches):
        for layer, c in zip(reversed(self.layers), reversed(caches)):
            d_out = layer.backward(d_out, c)
        return d_out


class TransformerDecoder:
    def __init__(self, store, name, dim, heads, ffn, depth, rng):
        self.layers = [DecoderLayer(store, f"{name}.{i}", dim, heads, ffn, rng)
                       for i in range(depth)]

    def forward(self, x, memory, capture=None):
        caches = []
        for layer in self.layers:
            x, c = layer.forward(x, memory, capture)
            caches.append(c)
        return x, caches

    def backward(self, d_out, caches):
        d_mem_total = None
        for layer, c in zip(reversed(self.layers), reversed(caches)):
            d_out, d_mem = layer.backward(d_out, c)
            d_mem_total = d_mem if d_mem_total is None else d_mem_total + d_mem
        return d_out, d_mem_total


class Mlp:
    """Stack of affine + nonlinearity with a linear output layer."""

    def __init__(self, store, name, d_in, hidden, d_out, rng,
                 n_hidden: int = 2, zero_out: bool = False):
        self.layers = []
        d = d_in
        for i in range(n_hidden):
            self.layers.append(Linear(store, f"{name}.h{i}", d, hidden, rng))
            d = hidden
        self.out = Linear(store, f"{name}.out", d, d_out, rng, zero_init=zero_out)

    def forward(self, x):
        caches = []
        for lin in self.layers:
            h, c = lin.forward(x)
            caches.append((c, h))
            x = relu(h)
        out, co = self.out.forward(x)
        return out, (caches, co)

    def backward(self, d_out, cache):
        caches, co = cache
        dx = self.out.backward(d_out, co)
        for lin, (c, h) in zip(reversed(self.layers), reversed(caches)):
            dx = lin.backward(relu_backward(dx, h), c)
        return dx


# ---------------------------------------------------------------------------
# Positional / step encodings
# ---------------------------------------------------------------------------

def sinusoidal_encoding(positions, dim: int, base: float = 10000.0) -> np.ndarray:
    """Interleaved sin/cos encoding: out[..., 2i] = sin(p / base^(2i/dim))."""
    positions = np.atleast_1d(np.asarray(positions, dtype=np.float64))
    half = dim // 2
    freqs = base ** (-2.0 * np.arange(half) / dim)
    ang = positions[..., None] * freqs
    out = np.zeros(positions.shape + (dim,))
    out[..., 0::2] = np.sin(ang)
    out[..., 1::2] = np.cos(ang)
    return out


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

class Adam:
    def __init__(self, store: ParamStore, lr: float = 1e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in store.values.items()}
        self.v = {k: np.zeros_like(v) for k, v in store.values.items()}

    def step(self) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for k, p in self.store.values.items():
            g = self.store.grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            mhat = self.m[k] / b1c
            vhat = self.v[k] / b2c
            p -= (self.lr * mhat / (np.sqrt(vhat) + self.eps)).astype(p.dtype)
