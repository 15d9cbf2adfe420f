"""Finite-difference checks of every hand-written backward pass.

All checks run in float64 with central differences (h = 1e-3) and the
max-abs relative error of :func:`memtask.nn.gradcheck.rel_error`.
"""

import numpy as np
import pytest

from memtask.nn import (
    MLP,
    CrossAttention,
    Denoiser,
    DiffusionSchedule,
    Embedding,
    Linear,
    ParamStore,
    ddpm_loss,
    gelu,
    gelu_backward,
    mean_pool,
    mean_pool_backward,
    rms_norm,
    rms_norm_backward,
)
from memtask.nn.gradcheck import numeric_grad, rel_error

SEEDS = range(20)
TOL = 1e-4


def check_params(store, loss_fn, backward_fn):
    """Analytic parameter gradients (copied before the numeric passes, which
    would otherwise accumulate into the same buffers) against central differences."""
    store.zero_grad()
    backward_fn()
    analytic = {k: g.copy() for k, g in store.grads.items()}
    worst = 0.0
    for name, p in store.params.items():
        num = numeric_grad(loss_fn, p)
        worst = max(worst, rel_error(analytic[name], num))
    return worst


@pytest.mark.parametrize("seed", SEEDS)
def test_gelu(seed):
    gen = np.random.default_rng(seed)
    x = gen.normal(0, 2, size=(4, 5))
    r = gen.normal(size=x.shape)
    _, cache = gelu(x)
    analytic = gelu_backward(cache, r)
    num = numeric_grad(lambda: float(np.sum(gelu(x)[0] * r)), x)
    assert rel_error(analytic, num) < TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_linear(seed):
    gen = np.random.default_rng(seed)
    st = ParamStore(np.float64)
    lin = Linear(st, "l", 5, 3, gen)
    st["l.b"][...] = gen.normal(size=3)
    x = gen.normal(size=(4, 5))
    r = gen.normal(size=(4, 3))
    loss = lambda: float(np.sum(lin.forward(x)[0] * r))
    gx = lin.backward(x, r)
    assert rel_error(gx, numeric_grad(loss, x)) < TOL
    assert check_params(st, loss, lambda: lin.backward(x, r)) < TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_mlp(seed):
    gen = np.random.default_rng(seed)
    st = ParamStore(np.float64)
    mlp = MLP(st, "m", [4, 6, 6, 3], gen)
    x = gen.normal(size=(5, 4))
    r = gen.normal(size=(5, 3))
    loss = lambda: float(np.sum(mlp.forward(x)[0] * r))

    def back():
        _, c = mlp.forward(x)
        return mlp.backward(c, r)

    gx = back()
    st.zero_grad()
    assert rel_error(gx, numeric_grad(loss, x)) < TOL
    assert check_params(st, loss, back) < TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_mean_pool(seed):
    gen = np.random.default_rng(seed)
    x = gen.normal(size=(3, 4, 5))
    r = gen.normal(size=(3, 5))
    out, shape = mean_pool(x)
    g = mean_pool_backward(shape, r)
    assert rel_error(g, numeric_grad(lambda: float(np.sum(mean_pool(x)[0] * r)), x)) < TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_rms_norm(seed):
    gen = np.random.default_rng(seed)
    x = gen.normal(0, 0.3, size=(4, 12))
    r = gen.normal(size=x.shape)
    y, cache = rms_norm(x, 4)
    xs = x.reshape(4, 3, 4)
    expected = xs / np.sqrt(np.mean(xs ** 2, axis=-1, keepdims=True) + 1e-6)
    assert np.allclose(y, expected.reshape(x.shape), atol=1e-12)
    g = rms_norm_backward(cache, r)
    assert rel_error(g, numeric_grad(lambda: float(np.sum(rms_norm(x, 4)[0] * r)), x)) < TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_embedding(seed):
    gen = np.random.default_rng(seed)
    st = ParamStore(np.float64)
    emb = Embedding(st, "e", 5, 3, gen)
    idx = gen.integers(0, 5, size=7)  # repeats exercise accumulation
    r = gen.normal(size=(7, 3))
    loss = lambda: float(np.sum(emb.forward(idx)[0] * r))
    assert check_params(st, loss, lambda: emb.backward(idx, r)) < TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_cross_attention(seed):
    gen = np.random.default_rng(seed)
    st = ParamStore(np.float64)
    att = CrossAttention(st, "a", 6, gen)
    q = gen.normal(size=(3, 6))
    mem = gen.normal(size=(3, 4, 6))
    mask = gen.random((3, 4)) < 0.7
    mask[0] = False  # an empty memory row
    mask[1, 0] = True
    r = gen.normal(size=(3, 6))
    loss = lambda: float(np.sum(att.forward(q, mem, mask)[0] * r))

    def back():
        _, c = att.forward(q, mem, mask)
        return att.backward(c, r)

    gq, gmem = back()
    st.zero_grad()
    assert rel_error(gq, numeric_grad(loss, q)) < TOL
    assert rel_error(gmem, numeric_grad(loss, mem)) < TOL
    assert check_params(st, loss, back) < TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_denoiser(seed):
    gen = np.random.default_rng(seed)
    st = ParamStore(np.float64)
    den = Denoiser(st, "d", 6, 4, 8, gen, steps=5, t_dim=4)
    x = gen.normal(size=(3, 6))
    cond = gen.normal(size=(3, 4))
    t = gen.integers(0, 5, size=3)
    r = gen.normal(size=(3, 6))
    loss = lambda: float(np.sum(den.forward(x, t, cond)[0] * r))

    def back():
        _, c = den.forward(x, t, cond)
        return den.backward(c, r)

    gx, gc = back()
    st.zero_grad()
    assert rel_error(gx, numeric_grad(loss, x)) < TOL
    assert rel_error(gc, numeric_grad(loss, cond)) < TOL
    assert check_params(st, loss, back) < TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_ddpm_loss(seed):
    gen = np.random.default_rng(seed)
    st = ParamStore(np.float64)
    den = Denoiser(st, "d", 6, 4, 8, gen, steps=5, t_dim=4)
    sched = DiffusionSchedule.linear(5)
    clean = gen.normal(size=(3, 6))
    cond = gen.normal(size=(3, 4))
    loss = lambda: ddpm_loss(den, sched, clean, cond, seed)[0]
    st.zero_grad()
    _, gc = ddpm_loss(den, sched, clean, cond, seed)
    analytic = {k: g.copy() for k, g in st.grads.items()}
    assert rel_error(gc, numeric_grad(loss, cond)) < TOL
    for name, p in st.params.items():
        assert rel_error(analytic[name], numeric_grad(loss, p)) < TOL, name
