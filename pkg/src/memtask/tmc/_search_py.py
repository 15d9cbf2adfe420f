"""Pure-Python branch-and-bound over slot-bank controllers.

A controller maps (current observation, bank) to (action, write). The bank
holds at most ``m`` stored observations; a write copies the current
observation into the next blank slot (slots are write-once). Episodes are
simulated in lockstep with the partial decision table and the search branches
whenever an episode reaches an undecided (observation, bank) pair. Before
descending, each unfinished episode is checked for a relaxed path to success
(decided pairs followed, undecided pairs free); the count of such episodes
bounds what the branch can still achieve.
"""

from __future__ import annotations

import sys
from collections import deque

KEEP, STORE = 0, 1


def search(trans, obs, success, dist, init, horizon, m, node_budget, target, floor=-1, relax_limit=1 << 22):
    """Best episode count above ``floor``.

    Returns (count, decisions, nodes, exhaustive); count stays at ``floor``
    and decisions are empty when nothing better exists.
    """
    trans = [list(map(int, row)) for row in trans]
    obs = list(map(int, obs))
    success = list(map(bool, success))
    dist = list(map(int, dist))
    init = list(map(int, init))
    n_actions = len(trans[0])
    n_ep = len(init)
    n_obs = max(obs) + 1

    table: dict = {}
    best = [floor, {}]
    nodes = [0]
    exhausted = [False]
    paths = [[None] * (horizon + 1) for _ in range(n_ep)]

    # An action that leaves every state with a given observation unchanged
    # loops forever unless it also stores; it is never worth trying alone.
    noop = [[True] * n_actions for _ in range(n_obs)]
    for i, row in enumerate(trans):
        for a, j in enumerate(row):
            if j != i:
                noop[obs[i]][a] = False

    def options(s, blen):
        acts = sorted(range(n_actions), key=lambda a: (dist[trans[s][a]], a))
        for a in acts:
            if blen < m:
                yield (a, STORE)
            if not noop[obs[s]][a]:
                yield (a, KEEP)

    relax = len(trans) * (n_obs + 1) ** m <= relax_limit

    def reach(s0, b0, t0):
        # relaxed: decided entries are followed, undecided ones branch freely
        if not relax:
            return dist[s0] <= horizon - t0
        seen = {(s0, b0)}
        queue = deque([(s0, b0, t0)])
        while queue:
            s, b, t = queue.popleft()
            if success[s]:
                return True
            if t >= horizon or dist[s] > horizon - t:
                continue
            dec = table.get((obs[s], b))
            opts = [dec] if dec is not None else list(options(s, len(b)))
            for a, w in opts:
                nxt = (trans[s][a], b + (obs[s],) if w == STORE else b)
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append((nxt[0], nxt[1], t + 1))
        return False

    def alive(s, bank, t, prefix):
        seen = set(prefix)
        while True:
            if success[s]:
                return True
            if t >= horizon or dist[s] > horizon - t or (s, bank) in seen:
                return False
            seen.add((s, bank))
            dec = table.get((obs[s], bank))
            if dec is None:
                return reach(s, bank, t)
            if dec[1] == STORE:
                bank = bank + (obs[s],)
            s = trans[s][dec[0]]
            t += 1

    def bound(ep, t, s, bank, succ):
        total = succ + alive(s, bank, t, paths[ep][:t])
        return total + sum(1 for e in range(ep + 1, n_ep) if alive(init[e], (), 0, ()))

    def finish_episode(ep, succ, fail):
        if n_ep - fail <= best[0]:
            return
        if ep + 1 == n_ep:
            best[0] = succ
            best[1] = dict(table)
            return
        run(ep + 1, 0, init[ep + 1], (), succ, fail)

    def run(ep, t, s, bank, succ, fail):
        path = paths[ep]
        while True:
            if success[s]:
                return finish_episode(ep, succ + 1, fail)
            if t >= horizon or dist[s] > horizon - t or (s, bank) in path[:t]:
                return finish_episode(ep, succ, fail + 1)
            path[t] = (s, bank)
            key = (obs[s], bank)
            dec = table.get(key)
            if dec is None:
                break
            a, w = dec
            if w == STORE:
                bank = bank + (obs[s],)
            s = trans[s][a]
            t += 1
        if n_ep - fail <= best[0]:
            return
        for opt in options(s, len(bank)):
            if best[0] >= target or exhausted[0]:
                break
            nodes[0] += 1
            if nodes[0] > node_budget:
                exhausted[0] = True
                break
            table[key] = opt
            if bound(ep, t, s, bank, succ) <= best[0]:
                continue
            run(ep, t, s, bank, succ, fail)
        table.pop(key, None)

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 200_000))
    try:
        run(0, 0, init[0], (), 0, 0)
    finally:
        sys.setrecursionlimit(limit)
    return best[0], best[1], nodes[0], not exhausted[0]
