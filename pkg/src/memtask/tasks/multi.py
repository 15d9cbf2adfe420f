"""Tasks whose solutions depend on several past observations.

These tasks are decomposed into subtasks. A subtask's single productive
action is followed by ``end_hold`` wait steps in demonstrations, during which
the ground-truth end signal is on.
"""

from __future__ import annotations

from itertools import permutations, product
from typing import NamedTuple

from memtask.tasks.base import Task


class BTState(NamedTuple):
    correct: tuple
    slot1: int  # -1 empty, else inserted orientation
    buzz: bool
    fails: int
    failed: bool
    ok: bool


class BatteryTry(Task):
    """Find the hidden orientation pair for a two-slot holder by trial.

    Masking: the correct pair is never shown. Inserting the second battery
    triggers the check; a wrong pair ejects both batteries and sounds a
    one-step buzz. Running out of attempts is final.
    """

    name = "battery_try"
    tmc_label = "M(n)"
    decomposed = True
    PARAMS = {"slack": (2, 0, 4)}
    REDUCED = {}
    actions = ("ins1_o0", "ins1_o1", "ins2_o0", "ins2_o1", "wait")

    def setup(self):
        self.combos = tuple(product((0, 1), repeat=2))
        self.subtasks = tuple(f"try_{x}{y}" for x, y in self.combos)
        self.budget = len(self.combos) + self.params["slack"]
        self.obs_sizes = (3, 2)
        self.horizon = min(64, len(self.combos) * (2 + self.end_hold) + 8)

    def enumerate_initial(self):
        return [BTState(c, -1, False, 0, False, False) for c in self.combos]

    def transition(self, s, a):
        if s.failed or s.ok:
            return s
        s = s._replace(buzz=False)
        if a < 2:
            return s._replace(slot1=a) if s.slot1 < 0 else s
        if a < 4:
            if s.slot1 < 0:
                return s
            if (s.slot1, a - 2) == s.correct:
                return s._replace(ok=True)
            fails = s.fails + 1
            return s._replace(slot1=-1, buzz=True, fails=fails, failed=fails >= self.budget)
        return s

    def observe(self, s):
        return (s.slot1 + 1, int(s.buzz))

    def success(self, s):
        return s.ok

    def subtask_done(self, subtask, start, s):
        return s.ok or s.fails > start.fails

    def expert_segments(self, s):
        segs = []
        for k, (x, y) in enumerate(self.combos):
            segs.append((k, [x, 2 + y]))
            if (x, y) == s.correct:
                break
        return segs


SWAPS = ((0, 1), (0, 2), (1, 2))


def swaps_to(start: tuple, goal: tuple) -> list[int]:
    """Swap-action indices turning arrangement ``start`` into ``goal``."""
    arr = list(start)
    out = []
    for i in range(len(arr)):
        if arr[i] != goal[i]:
            j = arr.index(goal[i])
            out.append(SWAPS.index((i, j)))
            arr[i], arr[j] = arr[j], arr[i]
    return out


class BRState(NamedTuple):
    target: tuple
    start: tuple
    arr: tuple
    buzz: bool
    fails: int
    failed: bool
    ok: bool


class BlocksRankingTry(Task):
    """Find a hidden ordering of three colored blocks by trial.

    Masking: the target order is never shown. A wrong press buzzes for one
    step and the blocks are put back in their starting arrangement, so the
    tried order is no longer visible. Exhausting the attempt budget is final.
    """

    name = "blocks_ranking_try"
    tmc_label = "M(n)"
    decomposed = True
    PARAMS = {"shuffle_start": (1, 0, 1), "slack": (2, 0, 4)}
    REDUCED = {"shuffle_start": 0}
    actions = ("swap_01", "swap_02", "swap_12", "press", "wait")

    def setup(self):
        self.perms = tuple(permutations(range(3)))
        self.subtasks = tuple("try_" + "".join(map(str, p)) for p in self.perms)
        self.budget = len(self.perms) + self.params["slack"]
        self.obs_sizes = (3, 3, 3, 2)
        self.horizon = min(64, len(self.perms) * (3 + self.end_hold) + 4)

    def enumerate_initial(self):
        starts = self.perms if self.params["shuffle_start"] else (self.perms[0],)
        return [BRState(t, s0, s0, False, 0, False, False) for t in self.perms for s0 in starts]

    def transition(self, s, a):
        if s.failed or s.ok:
            return s
        s = s._replace(buzz=False)
        if a < 3:
            i, j = SWAPS[a]
            arr = list(s.arr)
            arr[i], arr[j] = arr[j], arr[i]
            return s._replace(arr=tuple(arr))
        if a == 3:
            if s.arr == s.target:
                return s._replace(ok=True)
            fails = s.fails + 1
            return s._replace(arr=s.start, buzz=True, fails=fails, failed=fails >= self.budget)
        return s

    def observe(self, s):
        return tuple(s.arr) + (int(s.buzz),)

    def success(self, s):
        return s.ok

    def subtask_done(self, subtask, start, s):
        return s.ok or s.fails > start.fails

    def expert_segments(self, s):
        segs = []
        for k, p in enumerate(self.perms):
            segs.append((k, swaps_to(s.start, p) + [3]))
            if p == s.target:
                break
        return segs


class CBState(NamedTuple):
    colors: tuple  # color at each position; 0 red, 1 green, 2 blue
    arm: int  # position the arm hovers over, 3 == home
    covered: tuple
    next_color: int
    failed: bool


class CoverBlocks(Task):
    """Cover three blocks left to right, then uncover them red, green, blue.

    Masking: a wrist camera shows only the color of the block under the arm,
    and nothing once that block is covered. ``cover`` always covers the
    leftmost open block and moves on, so the scan order carries no hidden
    information. Uncovering before all three are covered, or uncovering the
    wrong color, is final.
    """

    name = "cover_blocks"
    tmc_label = "M(n)"
    decomposed = True
    actions = ("cover", "uncover_0", "uncover_1", "uncover_2", "wait")
    subtasks = ("cover_0", "cover_1", "cover_2", "uncover_0", "uncover_1", "uncover_2")
    REDUCED = {"end_hold": 0}

    def setup(self):
        self.obs_sizes = (4, 4, 2, 2, 2)
        self.horizon = min(64, 6 * (1 + self.end_hold) + 6)

    def enumerate_initial(self):
        return [CBState(p, 0, (False,) * 3, 0, False) for p in permutations(range(3))]

    def transition(self, s, a):
        if s.failed or self.success(s):
            return s
        if a == 0:
            if all(s.covered):
                return s
            i = s.covered.index(False)
            covered = s.covered[:i] + (True,) + s.covered[i + 1:]
            return s._replace(arm=i + 1, covered=covered)
        if a <= 3:
            i = a - 1
            if not s.covered[i]:
                return s
            if s.colors[i] != s.next_color or not (all(s.covered) or s.next_color):
                return s._replace(failed=True)
            covered = s.covered[:i] + (False,) + s.covered[i + 1:]
            return s._replace(arm=i, covered=covered, next_color=s.next_color + 1)
        return s

    def observe(self, s):
        seen = 3 if s.arm == 3 or s.covered[s.arm] else s.colors[s.arm]
        return (s.arm, seen) + tuple(int(c) for c in s.covered)

    def success(self, s):
        return s.next_color == 3 and not s.failed

    def subtask_done(self, subtask, start, s):
        if subtask < 3:
            return s.covered[subtask]
        return not s.covered[subtask - 3] and s.next_color > 0

    def expert_segments(self, s):
        segs = [(i, [0]) for i in range(3)]
        for color in range(3):
            p = s.colors.index(color)
            segs.append((3 + p, [1 + p]))
        return segs


class PBTState(NamedTuple):
    d1: int
    d2: int
    fresh: bool
    left: int
    mid: int
    contact: bool
    failed: bool
    ok: bool


class PressButton(Task):
    """Press left ``d1`` times, middle ``d2`` times, then right to confirm.

    Masking: both digits are shown only in the first observation. Buttons
    look the same however often they are pressed; a contact sensor reads 1
    for the step right after any press. An extra or out-of-order press, or a
    premature confirm, is final.
    """

    name = "press_button"
    tmc_label = "M(n)"
    decomposed = True
    PARAMS = {"digits": (3, 1, 3)}
    REDUCED = {"digits": 2}
    actions = ("press_left", "press_mid", "press_right", "wait")
    subtasks = ("press_left", "press_mid", "press_right")

    def setup(self):
        d = self.params["digits"]
        self.obs_sizes = (d + 1, d + 1, 2)
        self.horizon = min(64, 2 * d * (1 + self.end_hold) + 5)

    def enumerate_initial(self):
        d = self.params["digits"]
        return [PBTState(x, y, True, 0, 0, False, False, False)
                for x in range(1, d + 1) for y in range(1, d + 1)]

    def transition(self, s, a):
        if s.failed or s.ok:
            return s
        s = s._replace(fresh=False, contact=a < 3)
        if a == 0:
            if s.mid or s.left >= s.d1:
                return s._replace(failed=True)
            return s._replace(left=s.left + 1)
        if a == 1:
            if s.left < s.d1 or s.mid >= s.d2:
                return s._replace(failed=True)
            return s._replace(mid=s.mid + 1)
        if a == 2:
            if s.left == s.d1 and s.mid == s.d2:
                return s._replace(ok=True)
            return s._replace(failed=True)
        return s

    def observe(self, s):
        if s.fresh:
            return (s.d1, s.d2, int(s.contact))
        return (0, 0, int(s.contact))

    def success(self, s):
        return s.ok

    def subtask_done(self, subtask, start, s):
        if subtask == 0:
            return s.left > start.left
        if subtask == 1:
            return s.mid > start.mid
        return s.ok

    def expert_segments(self, s):
        return [(0, [0])] * s.d1 + [(1, [1])] * s.d2 + [(2, [2])]
