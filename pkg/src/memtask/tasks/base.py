from __future__ import annotations

from typing import Any, Sequence

from memtask.pomdp import ContractError, Decision, TaskSpec


class Task(TaskSpec):
    """TaskSpec with bounded integer knobs.

    ``PARAMS`` maps knob name to (default, low, high). ``REDUCED`` holds the
    knob values of the small instance the memory oracle certifies.
    """

    PARAMS: dict[str, tuple[int, int, int]] = {}
    REDUCED: dict[str, int] = {}

    def __init__(self, **params: Any):
        unknown = set(params) - set(self.PARAMS) - {"end_hold"}
        if unknown:
            raise ContractError(f"unknown parameters for {self.name}: {sorted(unknown)}")
        resolved = {}
        for key, (default, lo, hi) in self.PARAMS.items():
            val = int(params.get(key, default))
            if not lo <= val <= hi:
                raise ContractError(f"{self.name}.{key}={val} outside [{lo}, {hi}]")
            resolved[key] = val
        hold = int(params.get("end_hold", 4 if self.decomposed else 0))
        if not 0 <= hold <= 8:
            raise ContractError(f"end_hold={hold} outside [0, 8]")
        resolved["end_hold"] = hold
        super().__init__(**resolved)
        self.end_hold = hold
        self._init_cache = None
        self.setup()

    def setup(self) -> None:
        """Derive alphabets, action names and horizon from ``self.params``."""

    def initial_states(self) -> tuple:
        if self._init_cache is None:
            self._init_cache = tuple(self.enumerate_initial())
        return self._init_cache

    def enumerate_initial(self):
        raise NotImplementedError

    def expert_segments(self, state) -> list[tuple[int, list[int]]]:
        """Scripted solution from the initial hidden state as (subtask, actions) runs."""
        raise NotImplementedError

    def wait_action(self) -> int:
        return self.action_index("wait")


def plan_decisions(task: Task, segments: Sequence[tuple[int, Sequence[int]]]) -> list[Decision]:
    """Flatten segments into per-step decisions.

    Every segment but the last is followed by ``end_hold`` wait steps; the end
    flag sits on the final step of each segment.
    """
    out: list[Decision] = []
    wait = task.wait_action()
    for i, (sub, acts) in enumerate(segments):
        steps = list(acts)
        if i < len(segments) - 1:
            steps += [wait] * task.end_hold
        for j, a in enumerate(steps):
            out.append(Decision(a, sub, j == len(steps) - 1))
    return out


class ExpertAgent:
    """Oracle agent that reads the hidden state at episode start."""

    def __init__(self, task: Task):
        self.task = task
        self.plan: list[Decision] = []
        self.t = 0
        self.planner_calls = 0

    def begin(self, obs, state) -> None:
        segments = self.task.expert_segments(state)
        self.plan = plan_decisions(self.task, segments)
        self.t = 0
        self.planner_calls = len(segments)

    def __call__(self, obs, state) -> Decision:
        if self.t >= len(self.plan):
            return Decision(self.task.wait_action(), self.plan[-1].subtask if self.plan else 0)
        dec = self.plan[self.t]
        self.t += 1
        return dec
