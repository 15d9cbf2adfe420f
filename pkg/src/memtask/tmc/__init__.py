"""Exact task-memory-complexity oracle.

``optimal_value`` solves the full-history problem by backward induction.
``best_value_with_memory`` searches deterministic controllers whose only
memory is a bank of at most ``m`` write-once observation slots.
``compute_tmc`` reports the smallest ``m`` that recovers the optimum.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

from memtask.pomdp import TaskSpec
from memtask.tmc import _search_py
from memtask.tmc.table import BudgetExceeded, TaskTable, optimal_value as _optimal_value, tabulate

try:
    from memtask.tmc import _search_c
except ImportError:  # extension not built
    _search_c = None

BACKEND = "cython" if _search_c is not None else "python"
DENSE_LIMIT = 1 << 22  # dense (obs, bank) table entries the compiled kernel will allocate

MEMORY_MODEL = "write-once slots holding raw observation symbols"


@dataclass
class Controller:
    """Decision table of a slot-bank controller.

    Keys are (observation index, stored observation indices); values are
    (action, write) with write 1 meaning "store the current observation".
    """

    m: int
    decisions: dict
    observations: list

    def act(self, obs_index: int, bank: tuple) -> tuple[int, int]:
        return self.decisions[(obs_index, bank)]


@dataclass
class TmcResult:
    task: str
    v_star: float
    v_by_m: list[float]
    tmc: int | None  # None means "greater than m_max"
    m_max: int
    certified: bool
    nodes_explored: int
    memory_model: str = MEMORY_MODEL
    seconds: float = 0.0
    error: str | None = None
    exact_by_m: list[bool] = field(default_factory=list)
    tmc_lower_bound: int = 0  # every m below this is certified insufficient

    @property
    def tmc_label(self) -> str:
        if self.tmc is not None:
            return str(self.tmc)
        if self.certified:
            return f">{self.m_max}"
        return f">={self.tmc_lower_bound}"

    def to_json(self) -> dict:
        d = asdict(self)
        d["tmc"] = self.tmc if self.tmc is not None else self.tmc_label
        return d


def _table(spec_or_table) -> TaskTable:
    return spec_or_table if isinstance(spec_or_table, TaskTable) else tabulate(spec_or_table)


def optimal_value(spec: TaskSpec | TaskTable, node_cap: int = 1_000_000) -> float:
    """Optimal success probability over full-history policies.

    Raises BudgetExceeded instead of approximating.
    """
    return _optimal_value(_table(spec), node_cap)[0]


def _dense_size(table: TaskTable, m: int) -> int:
    return table.n_obs * (table.n_obs + 1) ** m


def run_search(table: TaskTable, m: int, budget: int, target: int, floor: int = -1,
               backend: str | None = None):
    """Raw kernel call; returns (count, decisions, nodes, exhaustive)."""
    backend = backend or BACKEND
    if backend == "cython" and (_search_c is None or _dense_size(table, m) > DENSE_LIMIT):
        backend = "python"
    mod = _search_c if backend == "cython" else _search_py
    return mod.search(table.trans, table.obs, table.success, table.dist, table.init,
                      table.horizon, m, budget, target, floor)


@dataclass
class MemoryValue:
    """Outcome of the m-slot search.

    ``reaches_target`` is True/False when settled exhaustively and None when
    the budget ran out first; ``exact`` says whether ``value`` itself is
    certified rather than the best value found.
    """

    value: float
    controller: Controller
    reaches_target: bool | None
    exact: bool
    nodes: int


def best_value_with_memory(spec: TaskSpec | TaskTable, m: int, budget: int = 50_000_000,
                           target: float | None = None, value_budget: int | None = None,
                           backend: str | None = None) -> MemoryValue:
    """Best success probability for controllers with ``m`` write-once slots.

    With a ``target`` (normally the full-history optimum) the search first
    decides whether the target is reachable at all; every episode lost then
    prunes, which settles the question far faster than optimising the value.
    If unreachable, a second pass spends ``value_budget`` nodes on the exact
    value and reports the best found when that runs out.
    """
    table = _table(spec)
    n = len(table.init)
    goal = n if target is None else int(round(target * n))
    nodes = 0
    reaches = None
    if target is not None:
        count, decisions, nodes, done = run_search(table, m, budget, goal, goal - 1, backend)
        if count >= goal:
            return MemoryValue(count / n, Controller(m, decisions, table.observations), True, True, nodes)
        reaches = False if done else None
    vb = budget if value_budget is None else value_budget
    count, decisions, more, done = run_search(table, m, vb, goal, -1, backend)
    count = max(count, 0)
    if count >= goal:
        reaches = True
    return MemoryValue(count / n, Controller(m, decisions, table.observations), reaches, done, nodes + more)


def compute_tmc(spec: TaskSpec, m_max: int = 2, eps: float = 1e-9, budget: int = 50_000_000,
                node_cap: int = 1_000_000, value_budget: int = 2_000_000,
                backend: str | None = None) -> TmcResult:
    """Smallest slot count whose best controller matches the full-history optimum.

    ``certified`` means every "reaches / does not reach" verdict behind the
    answer was settled exhaustively. Values in ``v_by_m`` below the optimum
    are exact where ``exact_by_m`` says so and lower bounds otherwise.
    """
    t0 = time.perf_counter()
    try:
        table = tabulate(spec)
        v_star, nodes = _optimal_value(table, node_cap)
    except BudgetExceeded as exc:
        return TmcResult(spec.name, float("nan"), [], None, m_max, False, 0, error=str(exc),
                         seconds=time.perf_counter() - t0)
    res = TmcResult(spec.name, v_star, [], None, m_max, True, nodes)
    for m in range(m_max + 1):
        mv = best_value_with_memory(table, m, budget, target=v_star, value_budget=value_budget,
                                    backend=backend)
        res.v_by_m.append(mv.value)
        res.exact_by_m.append(mv.exact)
        res.nodes_explored += mv.nodes
        if mv.reaches_target is None:
            res.certified = False
            res.error = f"node budget exhausted at m={m}"
            break
        if mv.reaches_target or mv.value >= v_star - eps:
            res.tmc = res.tmc_lower_bound = m
            break
        res.tmc_lower_bound = m + 1
    res.seconds = time.perf_counter() - t0
    return res


__all__ = [
    "BACKEND", "BudgetExceeded", "Controller", "MemoryValue", "TmcResult", "TaskTable", "tabulate",
    "optimal_value", "best_value_with_memory", "compute_tmc", "run_search",
]
