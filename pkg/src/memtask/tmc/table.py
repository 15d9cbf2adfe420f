from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from memtask.pomdp import TaskSpec

UNREACHABLE = 1 << 20


class BudgetExceeded(RuntimeError):
    """Exact search needed more nodes than the configured cap."""


@dataclass
class TaskTable:
    """Integer tabulation of a task's reachable hidden states."""

    states: list
    init: np.ndarray  # initial state indices, uniform weight
    trans: np.ndarray  # (S, A) next-state index
    obs: np.ndarray  # (S,) observation index
    success: np.ndarray  # (S,) bool
    dist: np.ndarray  # (S,) fewest steps to a success state
    observations: list
    horizon: int

    @property
    def n_obs(self) -> int:
        return len(self.observations)


def tabulate(spec: TaskSpec, max_states: int = 200_000) -> TaskTable:
    index: dict = {}
    states: list = []
    obs_index: dict = {}
    observations: list = []

    def add(s):
        if s not in index:
            if len(states) >= max_states:
                raise BudgetExceeded(f"{spec.name}: more than {max_states} reachable states")
            index[s] = len(states)
            states.append(s)
            queue.append(s)
        return index[s]

    queue: deque = deque()
    init = [add(s) for s in spec.initial_states()]
    rows = []
    while queue:
        s = queue.popleft()
        rows.append((s, [add(spec.transition(s, a)) for a in range(spec.action_count)]))
    n = len(states)
    trans = np.zeros((n, spec.action_count), dtype=np.int32)
    for s, nxt in rows:
        trans[index[s]] = nxt
    obs = np.zeros(n, dtype=np.int32)
    success = np.zeros(n, dtype=bool)
    for i, s in enumerate(states):
        o = spec.observe(s)
        if o not in obs_index:
            obs_index[o] = len(observations)
            observations.append(o)
        obs[i] = obs_index[o]
        success[i] = spec.success(s)

    dist = np.full(n, UNREACHABLE, dtype=np.int32)
    preds: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        for j in set(trans[i].tolist()):
            preds[j].append(i)
    frontier = deque(np.flatnonzero(success).tolist())
    dist[success] = 0
    while frontier:
        j = frontier.popleft()
        for i in preds[j]:
            if dist[i] == UNREACHABLE:
                dist[i] = dist[j] + 1
                frontier.append(i)
    return TaskTable(states, np.asarray(init, dtype=np.int32), trans, obs, success, dist,
                     observations, spec.horizon)


def optimal_value(table: TaskTable, node_cap: int = 1_000_000) -> tuple[float, int]:
    """Best success probability for policies that see the whole history.

    The POMDP is deterministic after the initial draw, so a history node is the
    multiset of hidden states consistent with it. Returns (value, nodes).
    """
    memo: dict = {}
    nodes = 0
    n_actions = table.trans.shape[1]

    def value(belief: tuple, left: int) -> int:
        nonlocal nodes
        live = tuple((s, c) for s, c in belief if table.dist[s] <= left)
        if not live:
            return 0
        key = (live, left)
        hit = memo.get(key)
        if hit is not None:
            return hit
        nodes += 1
        if nodes > node_cap:
            raise BudgetExceeded(f"history tree exceeds {node_cap} nodes")
        total = sum(c for _, c in live)
        best = 0
        for a in range(n_actions):
            groups: dict[int, dict[int, int]] = {}
            won = 0
            for s, c in live:
                nxt = int(table.trans[s, a])
                if table.success[nxt]:
                    won += c
                else:
                    g = groups.setdefault(int(table.obs[nxt]), {})
                    g[nxt] = g.get(nxt, 0) + c
            got = won
            for g in groups.values():
                got += value(tuple(sorted(g.items())), left - 1)
            if got > best:
                best = got
                if best == total:
                    break
        memo[key] = best
        return best

    n = len(table.init)
    roots: dict[int, dict[int, int]] = {}
    won = 0
    for s in table.init.tolist():
        if table.success[s]:
            won += 1
        else:
            g = roots.setdefault(int(table.obs[s]), {})
            g[s] = g.get(s, 0) + 1
    for g in roots.values():
        won += value(tuple(sorted(g.items())), table.horizon)
    return won / n, nodes
