"""Small numpy layers with explicit backward passes."""

from memtask.nn.diffusion import DiffusionSchedule, Denoiser, ddpm_loss, ddpm_sample, time_embedding
from memtask.nn.layers import (
    MLP,
    CrossAttention,
    Embedding,
    Linear,
    cross_attend,
    gelu,
    gelu_backward,
    mean_pool,
    mean_pool_backward,
    rms_norm,
    rms_norm_backward,
)
from memtask.nn.optim import adam_step
from memtask.nn.params import ParamStore, WeightFormatError, load_params, save_params

__all__ = [
    "MLP", "CrossAttention", "Embedding", "Linear", "ParamStore", "WeightFormatError",
    "DiffusionSchedule", "Denoiser", "adam_step", "cross_attend", "ddpm_loss", "ddpm_sample",
    "gelu", "gelu_backward", "load_params", "mean_pool", "mean_pool_backward", "rms_norm",
    "rms_norm_backward", "save_params",
    "time_embedding",
]
