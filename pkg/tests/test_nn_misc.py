import numpy as np
import pytest

from memtask.nn import (
    Denoiser,
    DiffusionSchedule,
    Linear,
    ParamStore,
    WeightFormatError,
    adam_step,
    ddpm_loss,
    ddpm_sample,
    load_params,
    save_params,
)
from memtask.pomdp import ContractError
from memtask.policy import Mem0Model, PolicyConfig, load_checkpoint, save_checkpoint
from memtask.tasks import build_task


class OracleEps:
    """Stub that knows the clean chunk and returns the exact noise."""

    def __init__(self, x0, schedule, cond_dim=2):
        self.x0, self.schedule = x0.reshape(1, -1), schedule
        self.x_dim, self.cond_dim, self.dtype = self.x0.shape[1], cond_dim, np.float64

    def forward(self, xt, t, cond):
        ab = self.schedule.alpha_bars[t].reshape(-1, 1)
        return (xt - np.sqrt(ab) * self.x0) / np.sqrt(1.0 - ab), None

    def backward(self, cache, gy):
        return np.zeros_like(gy), np.zeros((gy.shape[0], self.cond_dim))


def test_schedule_is_linear_and_monotone():
    s = DiffusionSchedule.linear(16)
    assert s.steps == 16
    assert np.allclose(np.diff(s.betas), s.betas[1] - s.betas[0])
    assert np.all(np.diff(s.alpha_bars) < 0) and 0 < s.alpha_bars[-1] < 0.05
    with pytest.raises(ValueError):
        DiffusionSchedule(np.array([0.5, 1.0]))


def test_oracle_stub_has_zero_loss():
    sched = DiffusionSchedule.linear(16)
    x0 = np.random.default_rng(0).uniform(-1, 1, size=(3, 4))
    loss, _ = ddpm_loss(OracleEps(x0, sched), sched, x0, np.zeros(2), seed=9)
    assert loss < 1e-20


def test_single_step_reverse_inverts_forward():
    sched = DiffusionSchedule.linear(1)
    x0 = np.random.default_rng(1).uniform(-1, 1, size=(2, 5))
    out = ddpm_sample(OracleEps(x0, sched), sched, np.zeros(2), seed=3, shape=(2, 5))
    assert np.allclose(out, x0, atol=1e-12)


def test_oracle_stub_samples_its_chunk_through_all_steps():
    sched = DiffusionSchedule.linear(16)
    x0 = np.random.default_rng(2).uniform(-0.9, 0.9, size=(3, 4))
    for seed in range(5):
        out = ddpm_sample(OracleEps(x0, sched), sched, np.zeros(2), seed=seed, shape=(3, 4))
        assert np.allclose(out, x0, atol=1e-9)


def _small_denoiser(seed=0):
    st = ParamStore(np.float32)
    den = Denoiser(st, "d", 8, 3, 64, np.random.default_rng(seed), steps=16, t_dim=8)
    return st, den


def test_sampling_deterministic_and_finite():
    st, den = _small_denoiser()
    sched = DiffusionSchedule.linear(16)
    cond = np.ones(3, np.float32)
    a = ddpm_sample(den, sched, cond, 11, (2, 4))
    b = ddpm_sample(den, sched, cond, 11, (2, 4))
    c = ddpm_sample(den, sched, cond, 12, (2, 4))
    assert a.shape == (2, 4) and np.isfinite(a).all()
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    batch = ddpm_sample(den, sched, np.stack([cond, cond]), 11, (2, 4))
    assert batch.shape == (2, 2, 4)


def test_overfit_single_chunk():
    st, den = _small_denoiser()
    sched = DiffusionSchedule.linear(16)
    chunk = np.array([[1, -1, -1, -1], [-1, -1, 1, -1]], np.float32)
    cond = np.zeros((64, 3), np.float32)
    batch = np.broadcast_to(chunk.reshape(1, -1), (64, 8)).copy()
    for it in range(3000):
        ddpm_loss(den, sched, batch, cond, it)
        adam_step(st, 1e-3)
    for seed in range(5):
        out = ddpm_sample(den, sched, cond[0], seed, (2, 4))
        assert np.max(np.abs(out - chunk)) < 0.1


def test_adam_minimises_quadratic():
    st = ParamStore(np.float64)
    lin = Linear(st, "l", 3, 1, np.random.default_rng(0))
    x = np.random.default_rng(1).normal(size=(32, 3))
    y = x @ np.array([[1.0], [-2.0], [0.5]]) + 0.25
    for _ in range(1500):
        pred, _ = lin.forward(x)
        lin.backward(x, 2 * (pred - y) / len(x))
        adam_step(st, 0.05)
    assert np.allclose(st["l.W"].ravel(), [1.0, -2.0, 0.5], atol=1e-3)
    assert abs(st["l.b"][0] - 0.25) < 1e-3
    assert not any(g.any() for g in st.grads.values())  # zeroed after the step


def test_param_roundtrip_and_errors(tmp_path):
    st, _ = _small_denoiser()
    p = tmp_path / "w.bin"
    save_params(st, p)
    back = load_params(p)
    assert back.shapes() == st.shapes()
    assert all(np.array_equal(back[k], st[k]) for k in st)
    raw = bytearray(p.read_bytes())
    bad = tmp_path / "bad.bin"
    bad.write_bytes(bytes(raw[:-9]))
    with pytest.raises(WeightFormatError):
        load_params(bad)
    raw[20] ^= 1
    bad.write_bytes(bytes(raw))
    with pytest.raises(WeightFormatError, match="checksum"):
        load_params(bad)
    other, _ = _small_denoiser()
    other.add("extra", np.zeros(2))
    with pytest.raises(WeightFormatError, match="missing"):
        load_params(p, into=other)


def test_checkpoint_roundtrip(tmp_path):
    spec = build_task("press_button")
    cfg = PolicyConfig(d_z=8, tokens=2, enc_hidden=8, den_hidden=16, cls_hidden=4, plan_hidden=8)
    m = Mem0Model(spec, cfg, 4)
    path = save_checkpoint(m, tmp_path / "p.mem0")
    back = load_checkpoint(path)
    assert back.config == m.config and back.spec.name == spec.name
    assert all(np.array_equal(back.store[k], m.store[k]) for k in m.store)
    feat = m.featurize(spec.observe(spec.initial_states()[0]))
    z, zt = m.encode_step(feat, 1)
    c = m.fuse_step(z, zt, z, [z])
    p = m.proprio(None, 0)
    assert np.array_equal(m.sample_chunk(c, p, 5), back.sample_chunk(c, p, 5))
    with pytest.raises(ContractError, match="task"):
        load_checkpoint(path, spec=build_task("swap_t"))
    side = path.with_name(path.name + ".json")
    side.write_text(side.read_text().replace("mem0-policy/1", "mem0-policy/9"))
    with pytest.raises(WeightFormatError, match="format"):
        load_checkpoint(path)
