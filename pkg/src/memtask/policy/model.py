"""Mem-0 network: observation/subtask encoders, anchor and sliding
cross-attention, the diffusion action head, the end classifier and the
subtask planner, with batched losses for behaviour cloning.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from memtask import rng
from memtask.nn import (
    MLP,
    CrossAttention,
    Denoiser,
    DiffusionSchedule,
    Embedding,
    ParamStore,
    WeightFormatError,
    ddpm_loss,
    ddpm_sample,
    load_params,
    mean_pool,
    mean_pool_backward,
    rms_norm,
    rms_norm_backward,
    save_params,
)
from memtask.policy.config import PolicyConfig
from memtask.pomdp import ContractError, TaskSpec, featurize

CHECKPOINT_FORMAT = "mem0-policy/1"


def max_segments(spec: TaskSpec) -> int:
    """Most subtask segments any expert episode of ``spec`` can have."""
    return max(len(spec.expert_segments(s)) for s in spec.initial_states())


@dataclass(frozen=True)
class Dims:
    obs: int
    actions: int
    subtasks: int
    text_rows: int
    window: int  # key-memory positions
    goals: int

    @property
    def entry(self) -> int:
        return self.subtasks + self.obs + self.window


def _goal_index(spec: TaskSpec) -> tuple[int, int]:
    from memtask.tasks import TASK_NAMES

    return (TASK_NAMES.index(spec.name) if spec.name in TASK_NAMES else 0), len(TASK_NAMES)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class Mem0Model:
    def __init__(self, spec: TaskSpec, config: PolicyConfig, seed: int = 0, dtype=np.float32):
        self.spec, self.config, self.seed = spec, config, seed
        n_sub = len(spec.subtasks)
        goal, n_goals = _goal_index(spec)
        self.goal = goal
        self.decomposed = config.decomposed(spec)
        self.dims = Dims(spec.obs_dim, spec.action_count, n_sub, n_sub + (n_sub > 1),
                         max_segments(spec) if self.decomposed else 1, n_goals)
        self.whole_task = 0 if n_sub == 1 else n_sub
        d, c = self.dims, config
        self.store = st = ParamStore(dtype)
        gen = rng.stream(seed, 0x3E30)
        self.enc = MLP(st, "enc.img", [d.obs, c.enc_hidden, c.tokens * c.d_z], gen)
        self.txt = Embedding(st, "enc.text", d.text_rows, c.d_z, gen)
        self.attn_a = CrossAttention(st, "attn.anchor", c.d_z, gen)
        self.attn_s = CrossAttention(st, "attn.sliding", c.d_z, gen)
        self.cond_dim = 3 * c.d_z + d.actions + 1
        self.den = Denoiser(st, "head.den", c.H * d.actions, self.cond_dim, c.den_hidden, gen,
                            c.diffusion_steps)
        self.cls = MLP(st, "head.cls", [3 * c.d_z, c.cls_hidden, 1], gen)
        self.plan_o0 = MLP(st, "plan.o0", [d.obs, c.plan_hidden, c.d_z], gen)
        self.plan_goal = Embedding(st, "plan.goal", d.goals, c.d_z, gen)
        self.plan_entry = MLP(st, "plan.entry", [d.entry, c.plan_hidden, c.d_z], gen)
        self.plan_head = MLP(st, "plan.head", [3 * c.d_z, c.plan_hidden, d.subtasks], gen)
        self.schedule = DiffusionSchedule.linear(c.diffusion_steps)

    # -- execution module -------------------------------------------------

    def encode(self, feats):
        """Observation features (N, obs) -> z_img (N, d_z) via a token grid and mean pooling."""
        tok, c1 = self.enc.forward(feats)
        grid = tok.reshape(tok.shape[0], self.config.tokens, self.config.d_z)
        z, c2 = mean_pool(grid)
        return z, (c1, c2)

    def encode_backward(self, cache, gz):
        c1, shape = cache
        g = mean_pool_backward(shape, gz).reshape(gz.shape[0], -1)
        return self.enc.backward(c1, g)

    def fuse(self, zq, za, amask, zs, smask, zt):
        """c = [attend(zq, anchor) ; attend(zq, sliding) ; z_text] for a batch."""
        if not self.config.use_anchor:
            amask = np.zeros_like(amask)
        if not self.config.use_sliding:
            smask = np.zeros_like(smask)
        ta, ca = self.attn_a.forward(zq, za, amask)
        ts, cs = self.attn_s.forward(zq, zs, smask)
        return np.concatenate([ta, ts, zt], axis=1), (ca, cs)

    def fuse_backward(self, cache, gc):
        ca, cs = cache
        dz = self.config.d_z
        gqa, gza = self.attn_a.backward(ca, gc[:, :dz])
        gqs, gzs = self.attn_s.backward(cs, gc[:, dz:2 * dz])
        return gqa + gqs, gza, gzs, gc[:, 2 * dz:]

    def proprio(self, last_action: int | None, step_in_subtask: int) -> np.ndarray:
        p = np.zeros(self.dims.actions + 1, dtype=self.store.dtype)
        if self.config.markovian:
            return p
        if last_action is not None:
            p[last_action] = 1.0
        p[-1] = min(step_in_subtask / self.spec.horizon, 1.0)
        return p

    def exec_forward(self, batch):
        """Shared encoder + fusion pass for a training batch."""
        B = batch["query"].shape[0]
        K = batch["sliding"].shape[1]
        feats = np.concatenate([batch["query"], batch["anchor"],
                                batch["sliding"].reshape(B * K, -1)], axis=0)
        z, enc_cache = self.encode(feats)
        zq, za, zs = z[:B], z[B:2 * B, None, :], z[2 * B:].reshape(B, K, -1)
        zt, txt_cache = self.txt.forward(batch["subtask"])
        c, fuse_cache = self.fuse(zq, za, batch["anchor_mask"][:, None], zs, batch["sliding_mask"], zt)
        return c, (B, K, enc_cache, txt_cache, fuse_cache)

    def exec_backward(self, cache, gc):
        B, K, enc_cache, txt_cache, fuse_cache = cache
        gq, ga, gs, gt = self.fuse_backward(fuse_cache, gc)
        self.txt.backward(txt_cache, gt)
        gz = np.concatenate([gq, ga[:, 0, :], gs.reshape(B * K, -1)], axis=0)
        self.encode_backward(enc_cache, gz)

    def exec_loss(self, batch, seed: int) -> tuple[float, float]:
        """Denoising and end-classifier losses; gradients are accumulated."""
        c_raw, cache = self.exec_forward(batch)
        c, norm_cache = rms_norm(c_raw, self.config.d_z)
        cond = np.concatenate([c, batch["proprio"]], axis=1)
        den_loss, gcond = ddpm_loss(self.den, self.schedule, batch["chunk"], cond, seed)
        gc = gcond[:, : c.shape[1]].copy()
        cls_loss = 0.0
        w = batch["cls_mask"].astype(c.dtype)
        if self.decomposed and w.sum() > 0:
            logit, lc = self.cls.forward(c)
            logit = logit[:, 0]
            y = batch["end"].astype(c.dtype)
            n = w.sum()
            # numerically stable BCE with logits
            per = np.maximum(logit, 0) - logit * y + np.log1p(np.exp(-np.abs(logit)))
            cls_loss = float(np.sum(per * w) / n)
            glogit = ((_sigmoid(logit) - y) * w / n)[:, None].astype(c.dtype)
            gc += self.cls.backward(lc, glogit)
        self.exec_backward(cache, rms_norm_backward(norm_cache, gc))
        return den_loss, cls_loss

    # -- planning module --------------------------------------------------

    def entry_features(self, key_memory) -> tuple[np.ndarray, np.ndarray]:
        """Key-memory entries -> (window, entry) features and their mask."""
        d = self.dims
        feats = np.zeros((d.window, d.entry), dtype=self.store.dtype)
        mask = np.zeros(d.window, dtype=bool)
        for i, (sub, end_feat) in enumerate(key_memory):
            pos = min(i, d.window - 1)
            row = np.zeros(d.entry, dtype=self.store.dtype)
            row[sub] = 1.0
            row[d.subtasks:d.subtasks + d.obs] = end_feat
            row[d.subtasks + d.obs + pos] = 1.0
            if mask[pos]:  # overflow beyond the window folds into the last slot
                feats[pos] += row
            else:
                feats[pos] = row
            mask[pos] = True
        return feats, mask

    def planner_forward(self, o0, entries, emask, use_key: bool | None = None):
        B, P = emask.shape
        h0, c0 = self.plan_o0.forward(o0)
        hg, cg = self.plan_goal.forward(np.full(B, self.goal))
        if self.config.use_key if use_key is None else use_key:
            he, ce = self.plan_entry.forward(entries.reshape(B * P, -1))
            he = he.reshape(B, P, -1) * emask[:, :, None]
            km = he.sum(axis=1) / P
        else:
            ce, km = None, np.zeros_like(h0)
        logits, ch = self.plan_head.forward(np.concatenate([h0, hg, km], axis=1))
        return logits, (B, P, emask, c0, cg, ce, ch)

    def planner_backward(self, cache, glogits):
        B, P, emask, c0, cg, ce, ch = cache
        dz = self.config.d_z
        g = self.plan_head.backward(ch, glogits)
        self.plan_o0.backward(c0, g[:, :dz])
        self.plan_goal.backward(cg, g[:, dz:2 * dz])
        if ce is not None:
            gkm = g[:, 2 * dz:]
            ge = np.broadcast_to(gkm[:, None, :] / P, (B, P, dz)) * emask[:, :, None]
            self.plan_entry.backward(ce, ge.reshape(B * P, dz))

    def planner_loss(self, batch) -> tuple[float, float]:
        """Cross-entropy on next-subtask labels; returns (loss, accuracy)."""
        logits, cache = self.planner_forward(batch["o0"], batch["entries"], batch["entry_mask"])
        y = batch["target"]
        z = logits - logits.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        B = len(y)
        loss = float(-np.mean(np.log(p[np.arange(B), y] + 1e-12)))
        g = p.copy()
        g[np.arange(B), y] -= 1.0
        self.planner_backward(cache, (g / B).astype(logits.dtype))
        return loss, float(np.mean(p.argmax(axis=1) == y))

    # -- single-step inference --------------------------------------------

    def featurize(self, obs) -> np.ndarray:
        return featurize(self.spec, obs).astype(self.store.dtype)

    def encode_step(self, feat, subtask: int):
        z, _ = self.encode(feat[None])
        zt, _ = self.txt.forward(np.array([subtask]))
        return z[0], zt[0]

    def fuse_step(self, z_img, z_text, anchor, sliding):
        dz = self.config.d_z
        za = (np.zeros((1, 1, dz), self.store.dtype) if anchor is None else anchor[None, None])
        amask = np.array([[anchor is not None]])
        if sliding:
            zs = np.stack(sliding)[None]
            smask = np.ones((1, len(sliding)), dtype=bool)
        else:
            zs = np.zeros((1, 1, dz), self.store.dtype)
            smask = np.zeros((1, 1), dtype=bool)
        c, _ = self.fuse(z_img[None], za, amask, zs, smask, z_text[None])
        return c[0]

    def end_probability(self, c) -> float:
        logit, _ = self.cls.forward(rms_norm(c[None], self.config.d_z)[0])
        return float(_sigmoid(logit[0, 0]))

    def head_condition(self, c, proprio) -> np.ndarray:
        """Denoiser input: per-block unit-RMS conditioning vector plus proprio."""
        return np.concatenate([rms_norm(c, self.config.d_z)[0], proprio], axis=-1).astype(self.store.dtype)

    def sample_chunk(self, c, proprio, seed: int) -> np.ndarray:
        cond = self.head_condition(c, proprio)
        return ddpm_sample(self.den, self.schedule, cond, seed, (self.config.H, self.dims.actions),
                           clip=self.config.clip)

    def plan(self, o0_feat, key_memory, use_key: bool | None = None) -> int:
        """Next subtask; ``use_key`` overrides the trained setting (inference ablation)."""
        entries, mask = self.entry_features(key_memory)
        logits, _ = self.planner_forward(o0_feat[None], entries[None], mask[None], use_key)
        return int(np.argmax(logits[0]))

    # -- persistence ------------------------------------------------------

    def sidecar(self) -> dict:
        return {"format": CHECKPOINT_FORMAT, "task": self.spec.name, "task_params": self.spec.params,
                "config": self.config.to_dict(), "seed": self.seed, "dims": self.dims.__dict__,
                "shapes": {k: list(v) for k, v in self.store.shapes().items()}}


def checkpoint_paths(path: str | Path) -> tuple[Path, Path]:
    p = Path(path)
    return p, p.with_name(p.name + ".json")


def save_checkpoint(model: Mem0Model, path: str | Path) -> Path:
    weights, side = checkpoint_paths(path)
    weights.parent.mkdir(parents=True, exist_ok=True)
    save_params(model.store, weights)
    side.write_text(json.dumps(model.sidecar(), indent=2, sort_keys=True) + "\n")
    return weights


def load_checkpoint(path: str | Path, spec: TaskSpec | None = None) -> Mem0Model:
    """Rebuild a model from weights + sidecar, checking every dimension."""
    from memtask.tasks import build_task

    weights, side = checkpoint_paths(path)
    meta = json.loads(side.read_text())
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise WeightFormatError(f"{side}: unknown checkpoint format {meta.get('format')!r}")
    if spec is None:
        spec = build_task(meta["task"], **meta.get("task_params", {}))
    elif spec.name != meta["task"]:
        raise ContractError(f"checkpoint is for task {meta['task']!r}, not {spec.name!r}")
    model = Mem0Model(spec, PolicyConfig.from_dict(meta["config"]), meta.get("seed", 0))
    if model.dims.__dict__ != meta["dims"]:
        raise ContractError(f"checkpoint dimensions {meta['dims']} do not match task {spec.name}: "
                            f"{model.dims.__dict__}")
    load_params(weights, into=model.store)
    return model
