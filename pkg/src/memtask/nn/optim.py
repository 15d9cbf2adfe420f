from __future__ import annotations

from typing import Mapping

import numpy as np

from memtask.nn.params import ParamStore


def _lr_for(name: str, lr) -> float:
    if not isinstance(lr, Mapping):
        return float(lr)
    best, rate = -1, None
    for prefix, value in lr.items():
        if name.startswith(prefix) and len(prefix) > best:
            best, rate = len(prefix), value
    if rate is None:
        raise KeyError(f"no learning rate covers parameter {name!r}")
    return float(rate)


def adam_step(store: ParamStore, lr: float | Mapping[str, float] = 1e-3,
              betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8) -> None:
    """One bias-corrected Adam update, then zero the gradients.

    ``lr`` may map name prefixes to rates; the longest matching prefix wins
    (use ``""`` as the catch-all).
    """
    b1, b2 = betas
    store.step += 1
    c1 = 1.0 - b1 ** store.step
    c2 = 1.0 - b2 ** store.step
    for name, p in store.params.items():
        g = store.grads[name]
        m, v = store.m[name], store.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= (_lr_for(name, lr) * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.dtype)
        g.fill(0)
