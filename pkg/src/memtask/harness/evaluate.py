"""Seeded success-rate evaluation."""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from memtask import rng
from memtask.policy.agent import run_episode
from memtask.policy.config import PolicyConfig
from memtask.policy.model import Mem0Model
from memtask.pomdp import ContractError, EpisodeTrace, TaskSpec, rollout

_EVAL_LABEL = 0xE7A1
_Z95 = 1.959963984540054


def eval_seed(seed: int, i: int) -> int:
    """Seed of the i-th evaluation episode. The top bit is set, while demo
    seeds keep it clear, so the two sets never meet."""
    return rng.derive(seed, _EVAL_LABEL, i) | (1 << 63)


def wilson_interval(successes: int, n: int, z: float = _Z95) -> tuple[float, float]:
    if n <= 0:
        raise ContractError("wilson interval needs n >= 1")
    if not 0 <= successes <= n:
        raise ContractError(f"successes {successes} outside [0, {n}]")
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class ResultRow:
    task: str
    variant: str
    successes: int
    episodes: int
    success_rate: float
    wilson_lo: float
    wilson_hi: float
    mean_steps: float
    mean_planner_calls: float
    seed: int
    checkpoint_sha256: str
    accounting_violations: int = 0

    CSV_COLUMNS = ("task", "variant", "successes", "episodes", "success_rate", "wilson_lo",
                   "wilson_hi", "mean_steps", "mean_planner_calls", "seed", "checkpoint_sha256")

    def csv_values(self) -> list[str]:
        out = []
        for k in self.CSV_COLUMNS:
            v = getattr(self, k)
            out.append(f"{v:.4f}" if isinstance(v, float) else str(v))
        return out

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ResultRow":
        names = {f.name for f in fields(cls)}
        missing = [k for k in cls.CSV_COLUMNS if k not in d]
        if missing or set(d) - names:
            raise ContractError(f"malformed result row: missing {missing}, unexpected {sorted(set(d) - names)}")
        try:
            row = cls(**{**d, "successes": int(d["successes"]), "episodes": int(d["episodes"]),
                         "seed": int(d["seed"]),
                         **{k: float(d[k]) for k in ("success_rate", "wilson_lo", "wilson_hi",
                                                     "mean_steps", "mean_planner_calls")}})
        except (TypeError, ValueError) as exc:
            raise ContractError(f"malformed result row: {exc}") from None
        if not (0.0 <= row.success_rate <= 1.0 and row.wilson_lo <= row.success_rate <= row.wilson_hi):
            raise ContractError(f"inconsistent result row for {row.task}/{row.variant}")
        return row


def model_digest(model: Mem0Model) -> str:
    """SHA-256 over parameter names, shapes and float32 values (order-independent of dict order)."""
    h = hashlib.sha256()
    for name in sorted(model.store.params):
        p = np.ascontiguousarray(model.store.params[name], dtype="<f4")
        h.update(name.encode())
        h.update(repr(p.shape).encode())
        h.update(p.tobytes())
    return h.hexdigest()


def summarize(task: str, variant: str, traces: list[EpisodeTrace], seed: int, digest: str) -> ResultRow:
    n = len(traces)
    k = sum(t.success for t in traces)
    lo, hi = wilson_interval(k, n)
    bad = sum(t.planner_calls != t.completed_subtasks + 1 for t in traces)
    return ResultRow(task, variant, k, n, k / n, lo, hi,
                     float(np.mean([t.step_count for t in traces])),
                     float(np.mean([t.planner_calls for t in traces])), seed, digest, bad)


def _episode(args):
    model, seed, config = args
    return run_episode(model, seed, config)


def rollouts(model: Mem0Model, episodes: int, seed: int, config: PolicyConfig | None = None,
             workers: int = 1) -> list[EpisodeTrace]:
    """Traces of ``episodes`` seeded episodes, in episode order."""
    if episodes < 1:
        raise ContractError("episodes must be >= 1")
    jobs = [(model, eval_seed(seed, i), config) for i in range(episodes)]
    if workers <= 1:
        return [_episode(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_episode, jobs, chunksize=max(1, episodes // (4 * workers))))


def evaluate(model: Mem0Model, episodes: int = 100, seed: int = 0, config: PolicyConfig | None = None,
             workers: int = 1) -> ResultRow:
    """Success statistics of ``model`` (optionally under inference switches ``config``)."""
    cfg = config or model.config
    traces = rollouts(model, episodes, seed, cfg, workers)
    return summarize(model.spec.name, cfg.variant, traces, seed, model_digest(model))


def evaluate_agent(spec: TaskSpec, make_agent, episodes: int = 100, seed: int = 0,
                   variant: str = "agent") -> ResultRow:
    """Same statistics for any agent factory ``make_agent(episode_index)``."""
    traces = [rollout(spec, make_agent(i), eval_seed(seed, i)) for i in range(episodes)]
    return summarize(spec.name, variant, traces, seed, "-")


class RandomAgent:
    """Uniform random actions from a seeded stream."""

    def __init__(self, spec: TaskSpec, seed: int):
        self.spec = spec
        self.gen = rng.stream(seed, 0x7A4D)
        self.planner_calls = 1

    def __call__(self, obs, state) -> int:
        return int(self.gen.integers(0, self.spec.action_count))
