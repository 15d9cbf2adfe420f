"""Layers with hand-written backward passes.

Every layer keeps its weights in a shared :class:`ParamStore` under a name
prefix. ``forward`` returns ``(output, cache)``; ``backward(cache, grad)``
adds parameter gradients into the store and returns the input gradient(s).
Caches are plain tuples, so one layer can be applied several times per
training step (the observation encoder is).
"""

from __future__ import annotations

import numpy as np

from memtask.nn.params import ParamStore

_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(x):
    """tanh approximation of GELU; returns (y, cache)."""
    inner = _GELU_C * (x + 0.044715 * x ** 3)
    th = np.tanh(inner)
    return 0.5 * x * (1.0 + th), (x, th)


def gelu_backward(cache, gy):
    x, th = cache
    dinner = _GELU_C * (1.0 + 3 * 0.044715 * x ** 2)
    return gy * (0.5 * (1.0 + th) + 0.5 * x * (1.0 - th ** 2) * dinner)


def _check_dim(x, n, what):
    if x.shape[-1] != n:
        raise ValueError(f"{what}: expected trailing dimension {n}, got {x.shape[-1]}")


class Linear:
    def __init__(self, store: ParamStore, name: str, n_in: int, n_out: int, gen, gain: float = 1.0):
        self.store, self.name, self.n_in, self.n_out = store, name, n_in, n_out
        store.add(f"{name}.W", gen.normal(0.0, gain / np.sqrt(n_in), size=(n_in, n_out)))
        store.add(f"{name}.b", np.zeros(n_out))

    @property
    def W(self):
        return self.store[f"{self.name}.W"]

    @property
    def b(self):
        return self.store[f"{self.name}.b"]

    def forward(self, x):
        _check_dim(x, self.n_in, self.name)
        return x @ self.W + self.b, x

    def backward(self, x, gy):
        g = self.store.grads
        g[f"{self.name}.W"] += x.reshape(-1, self.n_in).T @ gy.reshape(-1, self.n_out)
        g[f"{self.name}.b"] += gy.reshape(-1, self.n_out).sum(axis=0)
        return gy @ self.W.T


class MLP:
    """Affine layers joined by GELU; the last layer is linear."""

    def __init__(self, store: ParamStore, name: str, sizes, gen, out_gain: float = 1.0):
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least input and output sizes")
        self.sizes = tuple(sizes)
        self.layers = [
            Linear(store, f"{name}.{i}", a, b, gen, out_gain if i == len(sizes) - 2 else 1.0)
            for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))
        ]

    def forward(self, x):
        caches = []
        for i, layer in enumerate(self.layers):
            x, c = layer.forward(x)
            if i < len(self.layers) - 1:
                x, gc = gelu(x)
                caches.append((c, gc))
            else:
                caches.append((c, None))
        return x, caches

    def backward(self, caches, gy):
        for layer, (c, gc) in zip(reversed(self.layers), reversed(caches)):
            if gc is not None:
                gy = gelu_backward(gc, gy)
            gy = layer.backward(c, gy)
        return gy


def mean_pool(tokens):
    """Mean over the token axis (second to last); returns (pooled, cache)."""
    if tokens.shape[-2] == 0:
        raise ValueError("mean_pool needs at least one token")
    return tokens.mean(axis=-2), tokens.shape


def mean_pool_backward(shape, gy):
    n = shape[-2]
    return np.broadcast_to(np.expand_dims(gy, -2) / n, shape).copy()


def rms_norm(x, group: int, eps: float = 1e-6):
    """Scale each consecutive block of ``group`` features to unit RMS.

    Parameter-free. Returns (y, cache).
    """
    if x.shape[-1] % group:
        raise ValueError(f"feature size {x.shape[-1]} is not a multiple of {group}")
    xs = x.reshape(*x.shape[:-1], -1, group)
    r = np.sqrt(np.mean(xs * xs, axis=-1, keepdims=True) + eps)
    y = xs / r
    return y.reshape(x.shape).astype(x.dtype), (y, r, x.shape)


def rms_norm_backward(cache, gy):
    y, r, shape = cache
    g = gy.reshape(y.shape)
    gx = (g - y * np.mean(g * y, axis=-1, keepdims=True)) / r
    return gx.reshape(shape).astype(gy.dtype)


class Embedding:
    def __init__(self, store: ParamStore, name: str, count: int, dim: int, gen):
        self.store, self.name = store, name
        store.add(f"{name}.E", gen.normal(0.0, dim ** -0.5, size=(count, dim)))

    @property
    def E(self):
        return self.store[f"{self.name}.E"]

    def forward(self, idx):
        idx = np.asarray(idx)
        if idx.size and (idx.min() < 0 or idx.max() >= self.E.shape[0]):
            raise ValueError(f"{self.name}: index out of range")
        return self.E[idx], idx

    def backward(self, idx, gy):
        np.add.at(self.store.grads[f"{self.name}.E"], idx, gy)


class CrossAttention:
    """Single-head scaled dot-product attention from one query to a memory
    set, with a residual connection to the raw query.

    Batched: query (B, d), memory (B, M, d), mask (B, M). Rows whose mask is
    all false get no attention term, so their output is the query itself.
    """

    def __init__(self, store: ParamStore, name: str, dim: int, gen):
        self.store, self.name, self.dim = store, name, dim
        for p in ("Wq", "Wk", "Wv", "Wo"):
            store.add(f"{name}.{p}", gen.normal(0.0, 1.0 / np.sqrt(dim), size=(dim, dim)))

    def _p(self, p):
        return self.store[f"{self.name}.{p}"]

    def forward(self, q, mem, mask):
        _check_dim(q, self.dim, self.name)
        _check_dim(mem, self.dim, self.name)
        Wq, Wk, Wv, Wo = (self._p(p) for p in ("Wq", "Wk", "Wv", "Wo"))
        scale = 1.0 / np.sqrt(self.dim)
        Q = q @ Wq
        K = mem @ Wk
        V = mem @ Wv
        s = np.einsum("bmd,bd->bm", K, Q) * scale
        s = np.where(mask, s, -np.inf)
        smax = np.max(s, axis=1, keepdims=True)
        smax = np.where(np.isfinite(smax), smax, 0.0)
        e = np.where(mask, np.exp(s - smax), 0.0)
        z = e.sum(axis=1, keepdims=True)
        w = e / np.where(z > 0, z, 1.0)
        ctx = np.einsum("bm,bmd->bd", w, V)
        out = ctx @ Wo + q
        return out, (q, mem, mask, Q, K, V, w, ctx)

    def weights(self, q, mem, mask):
        return self.forward(q, mem, mask)[1][6]

    def backward(self, cache, gout):
        q, mem, mask, Q, K, V, w, ctx = cache
        Wq, Wk, Wv, Wo = (self._p(p) for p in ("Wq", "Wk", "Wv", "Wo"))
        g = self.store.grads
        n = self.name
        scale = 1.0 / np.sqrt(self.dim)
        g[f"{n}.Wo"] += ctx.T @ gout
        gctx = gout @ Wo.T
        gw = np.einsum("bmd,bd->bm", V, gctx)
        gV = w[:, :, None] * gctx[:, None, :]
        gs = w * (gw - np.sum(w * gw, axis=1, keepdims=True))
        gs = np.where(mask, gs, 0.0) * scale
        gQ = np.einsum("bm,bmd->bd", gs, K)
        gK = gs[:, :, None] * Q[:, None, :]
        g[f"{n}.Wq"] += q.T @ gQ
        flat = mem.reshape(-1, self.dim)
        g[f"{n}.Wk"] += flat.T @ gK.reshape(-1, self.dim)
        g[f"{n}.Wv"] += flat.T @ gV.reshape(-1, self.dim)
        gq = gout + gQ @ Wq.T
        gmem = gK @ Wk.T + gV @ Wv.T
        return gq, gmem


def cross_attend(attn: CrossAttention, query, memory):
    """Unbatched convenience form: ``memory`` is a (possibly empty) list of vectors."""
    query = np.asarray(query)
    if not len(memory):
        _check_dim(query, attn.dim, attn.name)
        return query.copy()
    mem = np.stack(memory)[None]
    out, _ = attn.forward(query[None], mem, np.ones(mem.shape[:2], dtype=bool))
    return out[0]
