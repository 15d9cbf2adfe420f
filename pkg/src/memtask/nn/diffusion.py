"""DDPM with epsilon prediction for short action chunks.

The default schedule takes the usual 1000-step linear beta ramp
(1e-4 to 2e-2) and keeps ``steps`` evenly spaced points of its cumulative
product. A raw 16-step linear ramp over the same range only noises the
data to alpha_bar ~ 0.85, so sampling from pure noise would start far off
the training distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from memtask import rng
from memtask.nn.layers import MLP
from memtask.nn.params import ParamStore


@dataclass(frozen=True)
class DiffusionSchedule:
    betas: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.betas, dtype=np.float64)
        if b.ndim != 1 or b.size == 0 or not np.all((b > 0) & (b < 1)):
            raise ValueError("betas must be a nonempty sequence in (0, 1)")
        object.__setattr__(self, "betas", b)

    @classmethod
    def linear(cls, steps: int = 16, beta_start: float = 1e-3, beta_end: float = 0.4,
               base_steps: int | None = None) -> "DiffusionSchedule":
        """Linear ramp; with ``base_steps`` it is respaced from a finer ramp."""
        if steps < 1:
            raise ValueError("need at least one diffusion step")
        if base_steps is None or base_steps <= steps:
            return cls(np.linspace(beta_start, beta_end, steps))
        abar = np.cumprod(1.0 - np.linspace(beta_start, beta_end, base_steps))
        keep = np.round(np.linspace(0, base_steps - 1, steps)).astype(int)
        ab = abar[keep]
        prev = np.concatenate([[1.0], ab[:-1]])
        return cls(1.0 - ab / prev)

    @property
    def steps(self) -> int:
        return len(self.betas)

    @property
    def alphas(self) -> np.ndarray:
        return 1.0 - self.betas

    @property
    def alpha_bars(self) -> np.ndarray:
        return np.cumprod(self.alphas)

    def add_noise(self, x0, t, eps):
        ab = self.alpha_bars[t].reshape(-1, *([1] * (x0.ndim - 1)))
        return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def time_embedding(t, steps: int, dim: int):
    """Sinusoidal embedding of integer steps, shape (len(t), dim)."""
    t = np.asarray(t, dtype=np.float64).reshape(-1, 1)
    half = dim // 2
    pos = t / max(steps - 1, 1)  # in [0, 1]
    ang = pos * np.pi * 2.0 ** np.arange(half)
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


class Denoiser:
    """Epsilon predictor: an MLP over [noisy chunk ; condition ; time embedding]."""

    def __init__(self, store: ParamStore, name: str, x_dim: int, cond_dim: int, hidden: int,
                 gen, steps: int, t_dim: int = 16, depth: int = 2):
        self.x_dim, self.cond_dim, self.t_dim, self.steps = x_dim, cond_dim, t_dim, steps
        sizes = [x_dim + cond_dim + t_dim] + [hidden] * depth + [x_dim]
        self.mlp = MLP(store, name, sizes, gen)
        self.dtype = store.dtype

    def forward(self, x, t, cond):
        temb = time_embedding(t, self.steps, self.t_dim).astype(self.dtype)
        return self.mlp.forward(np.concatenate([x, cond, temb], axis=1))

    def backward(self, cache, gy):
        """Returns (grad wrt noisy input, grad wrt condition)."""
        g = self.mlp.backward(cache, gy)
        return g[:, : self.x_dim], g[:, self.x_dim: self.x_dim + self.cond_dim]


def ddpm_loss(denoiser, schedule: DiffusionSchedule, clean, cond, seed: int):
    """Epsilon-MSE on a batch of clean chunks.

    ``clean`` is (B, D) or a single (H, d_a) chunk; ``cond`` matches the batch.
    Accumulates parameter gradients and returns (loss, grad wrt condition).
    """
    single = clean.ndim == 2 and cond.ndim == 1
    x0 = clean.reshape(1, -1) if single else clean.reshape(clean.shape[0], -1)
    c = cond.reshape(1, -1) if single else cond
    if x0.shape[1] != denoiser.x_dim or c.shape != (x0.shape[0], denoiser.cond_dim):
        raise ValueError(f"chunk/condition shapes {clean.shape}/{cond.shape} do not match the denoiser")
    gen = rng.stream(seed, 0xD1FF)
    t = gen.integers(0, schedule.steps, size=x0.shape[0])
    eps = gen.standard_normal(x0.shape).astype(x0.dtype)
    xt = schedule.add_noise(x0, t, eps).astype(x0.dtype)
    pred, cache = denoiser.forward(xt, t, c)
    diff = pred - eps
    loss = float(np.mean(diff.astype(np.float64) ** 2))
    _, gc = denoiser.backward(cache, (2.0 / diff.size) * diff)
    return loss, (gc[0] if single else gc)


def ddpm_sample(denoiser, schedule: DiffusionSchedule, cond, seed: int, shape, clip: float | None = 1.0):
    """Ancestral sampling from pure noise; the predicted clean chunk is
    clipped to ``[-clip, clip]`` at every step. ``cond`` (C,) gives one chunk
    of ``shape``; ``cond`` (B, C) gives (B, *shape)."""
    single = np.ndim(cond) == 1
    c = np.atleast_2d(cond)
    n = c.shape[0]
    gen = rng.stream(seed, 0x5A3)
    dtype = denoiser.dtype
    x = gen.standard_normal((n, int(np.prod(shape)))).astype(dtype)
    abar = schedule.alpha_bars
    for t in range(schedule.steps - 1, -1, -1):
        eps, _ = denoiser.forward(x, np.full(n, t), c)
        ab = abar[t]
        ab_prev = abar[t - 1] if t > 0 else 1.0
        beta = schedule.betas[t]
        x0 = (x - np.sqrt(1.0 - ab) * eps) / np.sqrt(ab)
        if clip is not None:
            x0 = np.clip(x0, -clip, clip)
        mean = (beta * np.sqrt(ab_prev) / (1.0 - ab)) * x0 + ((1.0 - ab_prev) * np.sqrt(1.0 - beta) / (1.0 - ab)) * x
        if t > 0:
            var = beta * (1.0 - ab_prev) / (1.0 - ab)
            mean = mean + np.sqrt(var) * gen.standard_normal(x.shape)
        x = mean.astype(dtype)
    out = x.reshape(n, *shape)
    return out[0] if single else out
