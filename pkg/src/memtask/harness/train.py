"""Behaviour cloning of the three Mem-0 heads from expert demonstrations."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from memtask import rng
from memtask.demos import DemoSet, generate_demos
from memtask.harness.config import ExperimentConfig
from memtask.nn import adam_step
from memtask.policy.model import Mem0Model
from memtask.pomdp import ContractError, featurize

_BATCH_LABEL = 0xBA7C
_NOISE_LABEL = 0xD1FF
_PLAN_LABEL = 0x91A7


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


def split_segments(trace) -> list[tuple[int, int, int]]:
    """(subtask, first step, last step) runs of a trace, split after end flags."""
    out, start = [], 0
    for i, s in enumerate(trace.steps):
        if s.end or i == len(trace.steps) - 1:
            out.append((s.subtask, start, i))
            start = i + 1
    return out


@dataclass
class ExecutionData:
    feats: np.ndarray        # (N, obs) every demo step, demos concatenated
    seg_start: np.ndarray    # (N,) global row of the step's segment start
    subtask: np.ndarray      # (N,) text-embedding row
    proprio: np.ndarray      # (N, A+1)
    chunk: np.ndarray        # (N, H*A) +-1 one-hot action windows
    end: np.ndarray          # (N,) classifier label
    cls_mask: np.ndarray     # (N,) classifier weight

    def __len__(self) -> int:
        return len(self.feats)


@dataclass
class PlannerData:
    o0: np.ndarray
    entries: np.ndarray
    entry_mask: np.ndarray
    target: np.ndarray

    def __len__(self) -> int:
        return len(self.target)


def build_execution_data(model: Mem0Model, demoset: DemoSet) -> ExecutionData:
    spec, cfg, H, A = model.spec, model.config, model.config.H, model.dims.actions
    hold = getattr(spec, "end_hold", 0)
    feats, starts, subs, prop, chunks, ends, mask = [], [], [], [], [], [], []
    for trace in demoset.demos:
        base = len(feats)
        segs = split_segments(trace)
        if not model.decomposed:
            segs = [(model.whole_task, 0, len(trace.steps) - 1)]
        last = None
        for k, (sub, a, b) in enumerate(segs):
            acts = [trace.steps[i].action for i in range(a, b + 1)]
            final = k == len(segs) - 1
            for j, i in enumerate(range(a, b + 1)):
                st = trace.steps[i]
                feats.append(featurize(spec, st.obs))
                starts.append(base + a)
                subs.append(sub)
                prop.append(model.proprio(last, j))
                window = acts[j:j + H]
                window += [acts[-1]] * (H - len(window))
                ch = -np.ones((H, A), dtype=np.float32)
                ch[np.arange(H), window] = 1.0
                chunks.append(ch.ravel())
                ends.append(float(not final and j >= len(acts) - hold))
                mask.append(float(model.decomposed))
                last = st.action
    dt = model.store.dtype
    return ExecutionData(np.asarray(feats, dt), np.asarray(starts), np.asarray(subs),
                         np.asarray(prop, dt), np.asarray(chunks, dt), np.asarray(ends, dt),
                         np.asarray(mask, dt))


def build_planner_data(model: Mem0Model, demoset: DemoSet) -> PlannerData | None:
    if not model.decomposed:
        return None
    spec = model.spec
    o0, ent, emask, target = [], [], [], []
    for trace in demoset.demos:
        first = featurize(spec, trace.steps[0].obs)
        memory = []
        for sub, a, b in split_segments(trace):
            e, m = model.entry_features(memory)
            o0.append(first)
            ent.append(e)
            emask.append(m)
            target.append(sub)
            memory.append((sub, featurize(spec, trace.steps[b].obs)))
    dt = model.store.dtype
    return PlannerData(np.asarray(o0, dt), np.asarray(ent, dt), np.asarray(emask), np.asarray(target))


def execution_batch(model: Mem0Model, data: ExecutionData, idx: np.ndarray) -> dict:
    K = model.config.K
    B = len(idx)
    sliding = np.zeros((B, K, data.feats.shape[1]), dtype=data.feats.dtype)
    smask = np.zeros((B, K), dtype=bool)
    for r, i in enumerate(idx):
        lo = max(data.seg_start[i], i - K)
        n = i - lo
        if n:
            sliding[r, :n] = data.feats[lo:i]
            smask[r, :n] = True
    return {
        "query": data.feats[idx], "anchor": data.feats[data.seg_start[idx]],
        "anchor_mask": np.ones(B, dtype=bool), "sliding": sliding, "sliding_mask": smask,
        "subtask": data.subtask[idx], "proprio": data.proprio[idx], "chunk": data.chunk[idx],
        "end": data.end[idx], "cls_mask": data.cls_mask[idx],
    }


def _clip_grads(store, limit: float) -> float:
    norm = store.global_grad_norm()
    if not math.isfinite(norm):
        raise DivergenceError(f"non-finite gradient norm {norm}")
    if limit and norm > limit:
        scale = limit / norm
        for g in store.grads.values():
            g *= scale
    return norm


def train(config: ExperimentConfig, demoset: DemoSet | None = None, log_path: str | Path | None = None,
          spec=None) -> Mem0Model:
    """Fit a fresh model; deterministic given ``config`` and the demonstrations.

    The policy is trained under ``config.policy.training_key()``; inference-only
    switches are applied at evaluation time.
    """
    spec = spec or config.build_task()
    if demoset is None:
        demoset = generate_demos(spec, config.demos, config.seed)
    elif demoset.task != spec.name:
        raise ContractError(f"demonstrations are for {demoset.task!r}, not {spec.name!r}")
    model = Mem0Model(spec, config.policy.training_key(), rng.derive(config.seed, 0x30DE1))
    exe = build_execution_data(model, demoset)
    plan = build_planner_data(model, demoset)
    lrs = config.learning_rates()
    gen = rng.stream(config.seed, _BATCH_LABEL)
    rows = []
    for it in range(config.iters):
        idx = gen.integers(0, len(exe), size=config.batch)
        den, cls = model.exec_loss(execution_batch(model, exe, idx), rng.derive(config.seed, _NOISE_LABEL, it))
        ploss = pacc = float("nan")
        if plan is not None:
            pidx = gen.integers(0, len(plan), size=min(config.planner_batch, len(plan)))
            ploss, pacc = model.planner_loss({"o0": plan.o0[pidx], "entries": plan.entries[pidx],
                                              "entry_mask": plan.entry_mask[pidx],
                                              "target": plan.target[pidx]})
        total = den + cls + (0.0 if plan is None else ploss)
        if not math.isfinite(total):
            raise DivergenceError(f"non-finite loss {total} at iteration {it}")
        norm = _clip_grads(model.store, config.grad_clip)
        adam_step(model.store, lrs)
        rows.append((it, den, cls, ploss, pacc, norm))
    if log_path is not None:
        write_loss_log(log_path, rows)
    model.loss_log = rows
    return model


def write_loss_log(path: str | Path, rows) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "denoise_loss", "end_loss", "planner_loss", "planner_acc", "grad_norm"])
        for it, *vals in rows:
            w.writerow([it] + [f"{v:.6g}" for v in vals])
