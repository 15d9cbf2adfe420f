"""Catalog of symbolic memory tasks."""

from __future__ import annotations

from memtask.pomdp import ContractError
from memtask.tasks.base import ExpertAgent, Task, plan_decisions
from memtask.tasks.multi import BatteryTry, BlocksRankingTry, CoverBlocks, PressButton
from memtask.tasks.single import (
    ObserveAndPickUp,
    PickFixedBlock,
    PutBackBlock,
    RearrangeBlocks,
    SwapBlocks,
    SwapT,
)

CATALOG: dict[str, type[Task]] = {
    cls.name: cls
    for cls in (
        ObserveAndPickUp, RearrangeBlocks, PutBackBlock, SwapBlocks, SwapT,
        BatteryTry, BlocksRankingTry, CoverBlocks, PressButton, PickFixedBlock,
    )
}

TASK_NAMES = tuple(CATALOG)
M1_TASKS = tuple(n for n, c in CATALOG.items() if c.tmc_label == "M(1)")
MN_TASKS = tuple(n for n, c in CATALOG.items() if c.tmc_label == "M(n)")

REDUCED_SUFFIX = "_reduced"


def build_task(name: str, **params) -> Task:
    """Instantiate a catalog task; ``<name>_reduced`` selects the oracle-sized instance."""
    reduced = name.endswith(REDUCED_SUFFIX)
    base = name[: -len(REDUCED_SUFFIX)] if reduced else name
    if base not in CATALOG:
        raise ContractError(f"unknown task {name!r}; known: {', '.join(TASK_NAMES)}")
    cls = CATALOG[base]
    if reduced:
        params = {**cls.REDUCED, **params}
    return cls(**params)


def expert_policy(spec: Task) -> ExpertAgent:
    return ExpertAgent(spec)


__all__ = [
    "CATALOG", "TASK_NAMES", "M1_TASKS", "MN_TASKS", "Task", "ExpertAgent",
    "build_task", "expert_policy", "plan_decisions",
]
