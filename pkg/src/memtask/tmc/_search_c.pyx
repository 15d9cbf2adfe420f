# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled branch-and-bound over slot-bank controllers.

Same search as ``_search_py`` on a dense (observation, bank) decision array.
Bank codes are base-(n_obs + 1) digit strings, one digit per filled slot.
At each branch point every unfinished episode is checked for a relaxed path
to success: decided (observation, bank) pairs are followed, undecided ones may
take any option. Episodes with no such path tighten the bound.
"""

import numpy as np
cimport numpy as cnp

cdef enum:
    UNDECIDED = 2


cdef class _Search:
    cdef int[:, :] trans
    cdef int[:] obs
    cdef char[:] success
    cdef int[:] dist
    cdef int[:] init
    cdef int horizon, m, n_actions, n_ep, n_obs
    cdef long long nbank, budget, nodes
    cdef int target, best
    cdef bint exhausted
    cdef long long[:] pw
    cdef short[:] act
    cdef char[:] wr
    cdef long long[:] assigned
    cdef int n_assigned
    cdef long long[:] best_keys
    cdef short[:] best_act
    cdef char[:] best_wr
    cdef int n_best
    cdef int[:, :] path_s
    cdef long long[:, :] path_b
    cdef int[:] scratch_s
    cdef long long[:] scratch_b
    cdef int[:] stamp
    cdef int gen
    cdef int[:] q_s
    cdef long long[:] q_b
    cdef int[:] q_n
    cdef int[:] q_t
    cdef bint relax
    cdef char[:, :] noop

    def __init__(self, trans, obs, success, dist, init, int horizon, int m, long long budget, int target,
                 int floor, long long relax_limit):
        self.trans = np.ascontiguousarray(trans, dtype=np.int32)
        self.obs = np.ascontiguousarray(obs, dtype=np.int32)
        self.success = np.ascontiguousarray(success, dtype=np.int8)
        self.dist = np.ascontiguousarray(dist, dtype=np.int32)
        self.init = np.ascontiguousarray(init, dtype=np.int32)
        self.horizon = horizon
        self.m = m
        self.n_actions = self.trans.shape[1]
        self.n_ep = self.init.shape[0]
        self.n_obs = int(np.max(obs)) + 1
        self.pw = np.array([(self.n_obs + 1) ** j for j in range(m + 1)], dtype=np.int64)
        self.nbank = self.pw[m]
        size = self.n_obs * self.nbank
        self.act = np.full(size, -1, dtype=np.int16)
        self.wr = np.zeros(size, dtype=np.int8)
        self.assigned = np.zeros(size, dtype=np.int64)
        self.best_keys = np.zeros(size, dtype=np.int64)
        self.best_act = np.zeros(size, dtype=np.int16)
        self.best_wr = np.zeros(size, dtype=np.int8)
        self.n_assigned = 0
        self.n_best = 0
        self.budget = budget
        self.nodes = 0
        self.target = target
        self.best = floor
        self.exhausted = False
        self.path_s = np.zeros((self.n_ep, horizon + 1), dtype=np.int32)
        self.path_b = np.zeros((self.n_ep, horizon + 1), dtype=np.int64)
        self.scratch_s = np.zeros(horizon + 1, dtype=np.int32)
        self.scratch_b = np.zeros(horizon + 1, dtype=np.int64)
        n_states = self.trans.shape[0]
        tr = np.asarray(self.trans)
        ob = np.asarray(self.obs)
        stay = tr == np.arange(n_states)[:, None]
        noop = np.ones((self.n_obs, self.n_actions), dtype=np.int8)
        np.logical_and.at(noop, ob, stay)
        self.noop = noop
        self.relax = n_states * self.nbank <= relax_limit
        cells = n_states * self.nbank if self.relax else 1
        self.stamp = np.zeros(cells, dtype=np.int32)
        self.gen = 0
        self.q_s = np.zeros(cells, dtype=np.int32)
        self.q_b = np.zeros(cells, dtype=np.int64)
        self.q_n = np.zeros(cells, dtype=np.int32)
        self.q_t = np.zeros(cells, dtype=np.int32)

    cdef bint reach(self, int s0, long long b0, int n0, int t0):
        """Relaxed reachability of success from (s0, b0) at time t0."""
        cdef int head = 0, tail = 0, s, n, t, a, k, lo, hi
        cdef long long b, nb2, key, cell
        if not self.relax:
            return self.dist[s0] <= self.horizon - t0
        self.gen += 1
        if self.gen == 0x7FFFFFFF:
            self.stamp[:] = 0
            self.gen = 1
        self.stamp[s0 * self.nbank + b0] = self.gen
        self.q_s[0] = s0; self.q_b[0] = b0; self.q_n[0] = n0; self.q_t[0] = t0
        tail = 1
        while head < tail:
            s = self.q_s[head]; b = self.q_b[head]; n = self.q_n[head]; t = self.q_t[head]
            head += 1
            if self.success[s]:
                return True
            if t >= self.horizon or self.dist[s] > self.horizon - t:
                continue
            key = self.obs[s] * self.nbank + b
            if self.act[key] >= 0:
                lo = self.act[key]; hi = lo + 1
            else:
                lo = 0; hi = self.n_actions
            for a in range(lo, hi):
                for k in range(2):
                    if self.act[key] >= 0:
                        if k != (0 if self.wr[key] else 1):
                            continue
                    elif k == 0 and n >= self.m:
                        continue
                    if k == 0:
                        nb2 = b + (self.obs[s] + 1) * self.pw[n]
                    else:
                        nb2 = b
                    cell = self.trans[s, a] * self.nbank + nb2
                    if self.stamp[cell] == self.gen:
                        continue
                    self.stamp[cell] = self.gen
                    self.q_s[tail] = self.trans[s, a]; self.q_b[tail] = nb2
                    self.q_n[tail] = n + (1 if k == 0 else 0); self.q_t[tail] = t + 1
                    tail += 1
        return False

    cdef bint alive(self, int s, long long bank, int nb, int t, int ep):
        """Follow decided entries from (s, bank, t); relax at the first undecided one."""
        cdef int u, a
        cdef int t0 = t
        cdef long long key
        while True:
            if self.success[s]:
                return True
            if t >= self.horizon or self.dist[s] > self.horizon - t:
                return False
            for u in range(t0, t):
                if self.scratch_s[u] == s and self.scratch_b[u] == bank:
                    return False
            if ep >= 0:
                for u in range(t0):
                    if self.path_s[ep, u] == s and self.path_b[ep, u] == bank:
                        return False
            self.scratch_s[t] = s
            self.scratch_b[t] = bank
            key = self.obs[s] * self.nbank + bank
            a = self.act[key]
            if a < 0:
                return self.reach(s, bank, nb, t)
            if self.wr[key]:
                bank += (self.obs[s] + 1) * self.pw[nb]
                nb += 1
            s = self.trans[s, a]
            t += 1

    cdef int bound(self, int ep, int t, int s, long long bank, int nb, int succ):
        cdef int e, total = succ
        if self.alive(s, bank, nb, t, ep):
            total += 1
        for e in range(ep + 1, self.n_ep):
            if self.alive(self.init[e], 0, 0, 0, -1):
                total += 1
        return total

    cdef void finish(self, int ep, int succ, int fail):
        cdef int i
        if self.n_ep - fail <= self.best:
            return
        if ep + 1 == self.n_ep:
            self.best = succ
            self.n_best = self.n_assigned
            for i in range(self.n_assigned):
                self.best_keys[i] = self.assigned[i]
                self.best_act[i] = self.act[self.assigned[i]]
                self.best_wr[i] = self.wr[self.assigned[i]]
            return
        self.run(ep + 1, 0, self.init[ep + 1], 0, 0, succ, fail)

    cdef void run(self, int ep, int t, int s, long long bank, int nb, int succ, int fail):
        cdef int u, a, k, i, j, tmp
        cdef long long key
        cdef int order[64]
        cdef int n_opt
        while True:
            if self.success[s]:
                self.finish(ep, succ + 1, fail)
                return
            if t >= self.horizon or self.dist[s] > self.horizon - t:
                self.finish(ep, succ, fail + 1)
                return
            for u in range(t):
                if self.path_s[ep, u] == s and self.path_b[ep, u] == bank:
                    self.finish(ep, succ, fail + 1)
                    return
            self.path_s[ep, t] = s
            self.path_b[ep, t] = bank
            key = self.obs[s] * self.nbank + bank
            a = self.act[key]
            if a < 0:
                break
            if self.wr[key]:
                bank += (self.obs[s] + 1) * self.pw[nb]
                nb += 1
            s = self.trans[s, a]
            t += 1

        if self.n_ep - fail <= self.best:
            return
        # actions ordered by distance-to-success of their successor
        for i in range(self.n_actions):
            order[i] = i
        for i in range(1, self.n_actions):
            j = i
            while j > 0 and self.dist[self.trans[s, order[j]]] < self.dist[self.trans[s, order[j - 1]]]:
                tmp = order[j]
                order[j] = order[j - 1]
                order[j - 1] = tmp
                j -= 1
        self.assigned[self.n_assigned] = key
        self.n_assigned += 1
        for i in range(self.n_actions):
            for k in range(2):
                if k == 0 and nb >= self.m:
                    continue
                if k == 1 and self.noop[self.obs[s], order[i]]:
                    continue
                if self.best >= self.target or self.exhausted:
                    break
                self.nodes += 1
                if self.nodes > self.budget:
                    self.exhausted = True
                    break
                self.act[key] = order[i]
                self.wr[key] = 1 if k == 0 else 0
                if self.bound(ep, t, s, bank, nb, succ) <= self.best:
                    continue
                self.run(ep, t, s, bank, nb, succ, fail)
        self.act[key] = -1
        self.wr[key] = 0
        self.n_assigned -= 1

    def solve(self):
        self.run(0, 0, self.init[0], 0, 0, 0, 0)
        decisions = {}
        base = self.n_obs + 1
        for i in range(self.n_best):
            key = self.best_keys[i]
            o, code = divmod(int(key), int(self.nbank))
            bank = []
            while code:
                code, d = divmod(code, base)
                bank.append(d - 1)
            decisions[(o, tuple(bank))] = (int(self.best_act[i]), int(self.best_wr[i]))
        return self.best, decisions, int(self.nodes), not self.exhausted


def search(trans, obs, success, dist, init, int horizon, int m, long long node_budget, int target,
           int floor=-1, long long relax_limit=1 << 22):
    return _Search(trans, obs, success, dist, init, horizon, m, node_budget, target, floor, relax_limit).solve()
