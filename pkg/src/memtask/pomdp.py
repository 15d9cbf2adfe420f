"""Finite episodic POMDP contract, episode engine and trace recording."""

from __future__ import annotations

import abc
import json
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Sequence

import numpy as np

from memtask import rng

TRACE_SCHEMA = 1

Observation = tuple  # tuple of per-channel symbol codes


class ContractError(ValueError):
    """A caller broke an operation's precondition."""


class Decision(NamedTuple):
    action: int
    subtask: int = 0
    end: bool = False


class TaskSpec(abc.ABC):
    """A finite episodic POMDP with deterministic dynamics.

    Subclasses provide a uniform initial distribution (``initial_states``),
    a pure transition, a masking ``observe`` and an absorbing ``success``.
    Hidden states must be hashable so the oracle can tabulate them.
    """

    name: str = ""
    horizon: int = 0
    obs_sizes: tuple[int, ...] = ()
    actions: tuple[str, ...] = ()
    tmc_label: str = "M(0)"
    subtasks: tuple[str, ...] = ("task",)
    decomposed: bool = False

    def __init__(self, **params: Any):
        self.params = dict(params)

    @abc.abstractmethod
    def initial_states(self) -> tuple: ...

    @abc.abstractmethod
    def transition(self, state, action: int): ...

    @abc.abstractmethod
    def observe(self, state) -> Observation: ...

    @abc.abstractmethod
    def success(self, state) -> bool: ...

    def subtask_done(self, subtask: int, start_state, state) -> bool:
        """Ground-truth completion signal for ``subtask`` begun in ``start_state``."""
        return self.success(state)

    @property
    def action_count(self) -> int:
        return len(self.actions)

    @property
    def obs_dim(self) -> int:
        return sum(self.obs_sizes)

    def action_index(self, name: str) -> int:
        return self.actions.index(name)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r}, {self.params})"


def reset(spec: TaskSpec, seed: int):
    states = spec.initial_states()
    state = states[rng.randbelow(seed, len(states), 0x1217)]
    return state, spec.observe(state)


def step(spec: TaskSpec, state, action: int):
    """Apply ``action``; returns (state, obs, done, success)."""
    if not (0 <= int(action) < spec.action_count):
        raise ContractError(f"action code {action} out of range for {spec.name}")
    nxt = spec.transition(state, int(action))
    ok = spec.success(nxt)
    return nxt, spec.observe(nxt), ok, ok


def featurize(spec: TaskSpec, obs: Sequence[int]) -> np.ndarray:
    """Concatenated per-channel one-hot encoding."""
    if len(obs) != len(spec.obs_sizes):
        raise ContractError(f"observation has {len(obs)} channels, expected {len(spec.obs_sizes)}")
    out = np.zeros(spec.obs_dim, dtype=np.float32)
    off = 0
    for sym, size in zip(obs, spec.obs_sizes):
        if not 0 <= sym < size:
            raise ContractError(f"symbol {sym} outside alphabet of size {size}")
        out[off + sym] = 1.0
        off += size
    return out


@dataclass
class TraceStep:
    obs: tuple
    action: int
    end: bool = False
    subtask: int = 0


@dataclass
class EpisodeTrace:
    task: str
    seed: int
    steps: list[TraceStep] = field(default_factory=list)
    success: bool = False
    planner_calls: int = 0
    error: str | None = None

    @property
    def step_count(self) -> int:
        return len(self.steps)

    @property
    def completed_subtasks(self) -> int:
        return sum(1 for s in self.steps if s.end)

    def actions(self) -> list[int]:
        return [s.action for s in self.steps]

    def to_jsonl(self) -> str:
        head = {"schema": TRACE_SCHEMA, "task": self.task, "seed": self.seed,
                "success": self.success, "planner_calls": self.planner_calls,
                "error": self.error}
        lines = [json.dumps(head, sort_keys=True)]
        for s in self.steps:
            lines.append(json.dumps({"obs": list(s.obs), "action": s.action,
                                     "end": s.end, "subtask": s.subtask}, sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "EpisodeTrace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = json.loads(lines[0])
        if head.get("schema") != TRACE_SCHEMA:
            raise ContractError(f"unsupported trace schema {head.get('schema')}")
        steps = []
        for ln in lines[1:]:
            d = json.loads(ln)
            steps.append(TraceStep(tuple(d["obs"]), d["action"], d["end"], d["subtask"]))
        return cls(head["task"], head["seed"], steps, head["success"],
                   head["planner_calls"], head["error"])


def replay(spec: TaskSpec, seed: int, actions: Sequence[int]):
    """Re-run ``actions`` from ``reset(spec, seed)``; returns (observations, final state)."""
    state, obs = reset(spec, seed)
    seen = [obs]
    for a in actions:
        state, obs, done, _ = step(spec, state, a)
        seen.append(obs)
        if done:
            break
    return seen, state


Agent = Callable[[tuple, Any], "Decision | int"]


def rollout(spec: TaskSpec, agent, seed: int, max_steps: int | None = None) -> EpisodeTrace:
    """Run one episode.

    ``agent(obs, state)`` returns a Decision or a bare action code. Agents may
    expose ``begin(obs, state)`` (called after reset) and a ``planner_calls``
    counter. An exception raised by the agent ends the episode as a failure.
    """
    max_steps = spec.horizon if max_steps is None else max_steps
    if max_steps > spec.horizon:
        raise ContractError(f"max_steps {max_steps} exceeds horizon {spec.horizon}")
    state, obs = reset(spec, seed)
    trace = EpisodeTrace(spec.name, seed)
    try:
        if hasattr(agent, "begin"):
            agent.begin(obs, state)
        for _ in range(max_steps):
            dec = agent(obs, state)
            if not isinstance(dec, Decision):
                dec = Decision(int(dec))
            trace.steps.append(TraceStep(obs, int(dec.action), bool(dec.end), int(dec.subtask)))
            state, obs, done, ok = step(spec, state, dec.action)
            if done:
                trace.success = ok
                break
    except ContractError:
        raise
    except Exception as exc:  # agent failure aborts the episode
        trace.success = False
        trace.error = f"{type(exc).__name__}: {exc}"
    trace.planner_calls = int(getattr(agent, "planner_calls", 0))
    return trace
