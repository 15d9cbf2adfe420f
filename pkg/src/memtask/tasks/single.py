"""Memory-free control and single-observation tasks.

Each builder documents its masking rule: what the agent stops seeing, and when.
Illegal primitives leave the state unchanged. Irrevocable mistakes set a
``failed`` flag that freezes the state.
"""

from __future__ import annotations

from itertools import permutations
from typing import NamedTuple

from memtask.tasks.base import Task


class PickFixedBlock(Task):
    """Pick the target object; the target marker never disappears.

    Masking: none. Picking a non-target object is a permanent failure.
    """

    name = "pick_fixed_block"
    tmc_label = "M(0)"
    PARAMS = {"objects": (3, 2, 6)}
    REDUCED = {"objects": 2}

    def setup(self):
        n = self.params["objects"]
        self.obs_sizes = (n, n + 1)
        self.actions = tuple(f"pick_{i}" for i in range(n)) + ("wait",)
        self.horizon = 4

    def enumerate_initial(self):
        return [(t, -1) for t in range(self.params["objects"])]

    def transition(self, state, action):
        target, held = state
        if held < 0 and action < self.params["objects"]:
            return (target, action)
        return state

    def observe(self, state):
        return (state[0], state[1] + 1)

    def success(self, state):
        return state[1] == state[0]

    def expert_segments(self, state):
        return [(0, [state[0]])]


class OPState(NamedTuple):
    ref: int
    slots: tuple  # label of the object lying in each table slot
    phase: int  # 0 observing, 1 reference hidden
    held: int


class ObserveAndPickUp(Task):
    """Remember a reference label, then pick its match from the table.

    Masking: the reference label is shown only in phase 0. Any ``wait`` ends
    phase 0; picks during phase 0 are no-ops. A wrong pick is final.
    """

    name = "observe_and_pick_up"
    tmc_label = "M(1)"
    PARAMS = {"objects": (3, 2, 4)}
    REDUCED = {"objects": 2}

    def setup(self):
        n = self.params["objects"]
        self.obs_sizes = (2, n + 1) + (n,) * n + (n + 1,)
        self.actions = ("wait",) + tuple(f"pick_{i}" for i in range(n))
        self.horizon = 6

    def enumerate_initial(self):
        n = self.params["objects"]
        return [OPState(r, p, 0, -1) for r in range(n) for p in permutations(range(n))]

    def transition(self, s, a):
        if s.held >= 0:
            return s
        if a == 0:
            return s._replace(phase=1)
        if s.phase == 1:
            return s._replace(held=s.slots[a - 1])
        return s

    def observe(self, s):
        n = self.params["objects"]
        ref = s.ref if s.phase == 0 else n
        return (s.phase, ref) + tuple(s.slots) + (s.held + 1,)

    def success(self, s):
        return s.held == s.ref

    def expert_segments(self, s):
        return [(0, [0, 1 + s.slots.index(s.ref)])]


class PBState(NamedTuple):
    orig: int
    loc: int  # pad index, pads == center, pads + 1 == in gripper
    pressed: bool
    failed: bool


class PutBackBlock(Task):
    """Move a block from its pad to the center, press, return it to its pad.

    Masking: the block's current location is visible, its origin is not.
    The button only registers while the block rests in the center. Placing
    the block on a wrong pad after the press is final.
    """

    name = "put_back_block"
    tmc_label = "M(1)"
    PARAMS = {"pads": (4, 2, 6)}
    REDUCED = {"pads": 2}

    def setup(self):
        p = self.params["pads"]
        self.obs_sizes = (p + 2, 2)
        self.actions = (tuple(f"pick_pad{i}" for i in range(p)) + ("pick_center",)
                        + tuple(f"place_pad{i}" for i in range(p)) + ("place_center", "press", "wait"))
        self.horizon = 16 if p >= 3 else 8

    def enumerate_initial(self):
        return [PBState(i, i, False, False) for i in range(self.params["pads"])]

    def transition(self, s, a):
        p = self.params["pads"]
        if s.failed or self.success(s):
            return s
        held = p + 1
        if a <= p:  # pick_pad0..pick_center
            return s._replace(loc=held) if s.loc == a else s
        if a <= 2 * p + 1:  # place
            dest = a - (p + 1)
            if s.loc != held:
                return s
            if s.pressed and dest < p and dest != s.orig:
                return s._replace(loc=dest, failed=True)
            return s._replace(loc=dest)
        if self.actions[a] == "press":
            return s._replace(pressed=True) if s.loc == p else s
        return s

    def observe(self, s):
        return (s.loc, int(s.pressed))

    def success(self, s):
        return s.pressed and s.loc == s.orig and not s.failed

    def expert_segments(self, s):
        p = self.params["pads"]
        return [(0, [s.orig, 2 * p + 1, 2 * p + 2, p, p + 1 + s.orig])]


class RBState(NamedTuple):
    y_pad: int  # pad the second block started on
    x: int  # location of the block that started in the middle
    y: int
    pressed: bool
    failed: bool


PAD0, PAD1, MID, HELD = 0, 1, 2, 3


class RearrangeBlocks(Task):
    """Two identical blocks; after an intermediate move and press, bring the
    originally-padded block to the middle.

    Masking: only occupancy is visible, the blocks look alike. Blocks resting
    on pads are clamped until the button is pressed, and the button registers
    only with both pads full and the middle empty. Putting the first-moved
    block back into the middle after the press is final.
    """

    name = "rearrange_blocks"
    tmc_label = "M(1)"
    actions = ("pick_pad0", "pick_pad1", "pick_mid", "place_pad0", "place_pad1", "place_mid", "press", "wait")

    def setup(self):
        self.obs_sizes = (2, 2, 2, 2, 2)
        self.horizon = 12

    def enumerate_initial(self):
        return [RBState(p, MID, p, False, False) for p in (0, 1)]

    def transition(self, s, a):
        if s.failed or self.success(s):
            return s
        holding = HELD in (s.x, s.y)
        if a < 3:
            if holding or (a != MID and not s.pressed):
                return s
            if s.x == a:
                return s._replace(x=HELD)
            if s.y == a:
                return s._replace(y=HELD)
            return s
        if a < 6:
            dest = a - 3
            if not holding or dest in (s.x, s.y):
                return s
            if s.x == HELD:
                return s._replace(x=dest, failed=s.pressed and dest == MID)
            return s._replace(y=dest)
        if a == 6:
            ok = not holding and {s.x, s.y} == {PAD0, PAD1}
            return s._replace(pressed=True) if ok else s
        return s

    def observe(self, s):
        locs = (s.x, s.y)
        return (int(PAD0 in locs), int(PAD1 in locs), int(MID in locs), int(HELD in locs), int(s.pressed))

    def success(self, s):
        return s.pressed and s.y == MID and s.x in (PAD0, PAD1) and not s.failed

    def expert_segments(self, s):
        p = s.y_pad
        return [(0, [2, 3 + (1 - p), 6, p, 5])]


class SBState(NamedTuple):
    a0: int
    b0: int
    a: int  # pad index, 3 == held
    b: int
    fresh: bool  # nothing has happened yet: colors still visible
    pressed: bool
    failed: bool


class SwapBlocks(Task):
    """Swap two blocks through the empty third pad, then press.

    Masking: block colors are shown only in the very first observation;
    afterwards a pad reads just occupied/empty. Pressing before the swap is
    complete is final.
    """

    name = "swap_blocks"
    tmc_label = "M(1)"
    actions = ("pick_0", "pick_1", "pick_2", "place_0", "place_1", "place_2", "press", "wait")

    def setup(self):
        self.obs_sizes = (4, 4, 4, 2)
        self.horizon = 14

    def enumerate_initial(self):
        return [SBState(i, j, i, j, True, False, False) for i in range(3) for j in range(3) if i != j]

    def transition(self, s, a):
        if s.failed or s.pressed:
            return s
        s = s._replace(fresh=False)
        holding = 3 in (s.a, s.b)
        if a < 3:
            if holding:
                return s
            if s.a == a:
                return s._replace(a=3)
            if s.b == a:
                return s._replace(b=3)
            return s
        if a < 6:
            dest = a - 3
            if not holding or dest in (s.a, s.b):
                return s
            return s._replace(a=dest) if s.a == 3 else s._replace(b=dest)
        if a == 6:
            if s.a == s.b0 and s.b == s.a0:
                return s._replace(pressed=True)
            return s._replace(failed=True)
        return s

    def observe(self, s):
        pads = []
        for i in range(3):
            if s.a == i:
                pads.append(2 if s.fresh else 1)
            elif s.b == i:
                pads.append(3 if s.fresh else 1)
            else:
                pads.append(0)
        return tuple(pads) + (int(3 in (s.a, s.b)),)

    def success(self, s):
        return s.pressed and not s.failed

    def expert_segments(self, s):
        e = 3 - s.a0 - s.b0
        return [(0, [s.a0, 3 + e, s.b0, 3 + s.a0, e, 3 + s.b0, 6])]


class STState(NamedTuple):
    oa: int
    ob: int
    content: tuple  # per position: 0 empty, 1 object A, 2 object B
    orient: tuple
    held: int
    masked: bool


class SwapT(Task):
    """Swap two oriented objects so each takes the other's position and
    orientation, using a spare position.

    Masking: orientations are visible until the first pick, then every
    orientation channel reads ``unknown``.
    """

    name = "swap_t"
    tmc_label = "M(1)"
    PARAMS = {"orientations": (4, 2, 4)}
    REDUCED = {"orientations": 2}

    def setup(self):
        r = self.params["orientations"]
        self.obs_sizes = (3, 3, 3, r + 1, r + 1, r + 1, 3)
        self.actions = (("pick_0", "pick_1", "pick_2")
                        + tuple(f"place_{i}_r{k}" for i in range(3) for k in range(r)) + ("wait",))
        self.horizon = 12

    def enumerate_initial(self):
        r = self.params["orientations"]
        return [STState(x, y, (1, 2, 0), (x, y, 0), 0, False) for x in range(r) for y in range(r)]

    def transition(self, s, a):
        r = self.params["orientations"]
        if self.success(s):
            return s
        if a < 3:
            if s.held or not s.content[a]:
                return s
            content = list(s.content)
            held, content[a] = content[a], 0
            return s._replace(content=tuple(content), held=held, masked=True)
        if a < 3 + 3 * r:
            pos, rot = divmod(a - 3, r)
            if not s.held or s.content[pos]:
                return s
            content, orient = list(s.content), list(s.orient)
            content[pos], orient[pos] = s.held, rot
            return s._replace(content=tuple(content), orient=tuple(orient), held=0)
        return s

    def observe(self, s):
        r = self.params["orientations"]
        shown = tuple(o if (c and not s.masked) else r for c, o in zip(s.content, s.orient))
        return tuple(s.content) + shown + (s.held,)

    def success(self, s):
        return (s.content[1] == 1 and s.orient[1] == s.ob
                and s.content[0] == 2 and s.orient[0] == s.oa)

    def expert_segments(self, s):
        r = self.params["orientations"]
        place = lambda pos, rot: 3 + pos * r + rot  # noqa: E731
        return [(0, [0, place(2, 0), 1, place(0, s.oa), 2, place(1, s.ob)])]
