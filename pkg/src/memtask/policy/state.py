"""Per-episode memory state of a Mem-0 policy and its update rules."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from memtask.pomdp import ContractError


@dataclass
class Mem0State:
    K: int
    L: int
    anchor: np.ndarray | None = None
    sliding: list = field(default_factory=list)
    key_memory: list = field(default_factory=list)  # (subtask id, end-observation feature)
    bits: deque = field(default_factory=deque)
    subtask: int = 0
    planner_calls: int = 0
    step_in_subtask: int = 0
    queue: deque = field(default_factory=deque)
    last_action: int | None = None

    @property
    def buffers_empty(self) -> bool:
        return self.anchor is None and not self.sliding


def reset_buffers(state: Mem0State) -> None:
    """Clear anchor, sliding window, end bits and pending actions."""
    state.anchor = None
    state.sliding.clear()
    state.bits.clear()
    state.queue.clear()
    state.step_in_subtask = 0


def begin_subtask(state: Mem0State, z_first: np.ndarray) -> None:
    """Fix the anchor to the first latent of a fresh subtask."""
    if not state.buffers_empty:
        raise ContractError("begin_subtask needs empty buffers; call reset_buffers first")
    anchor = np.array(z_first, copy=True)
    anchor.setflags(write=False)
    state.anchor = anchor
    state.step_in_subtask = 0
    state.bits.clear()


def update_sliding(state: Mem0State, z: np.ndarray) -> None:
    """Append the newest latent, evicting the oldest beyond capacity K."""
    state.sliding.append(np.array(z, copy=True))
    while len(state.sliding) > state.K:
        state.sliding.pop(0)


def push_bit(state: Mem0State, bit: int) -> None:
    state.bits.append(int(bool(bit)))
    while len(state.bits) > state.L:
        state.bits.popleft()


def check_termination(state: Mem0State) -> bool:
    """True iff the last L end bits are all 1."""
    return len(state.bits) == state.L and all(state.bits)


def first_termination(bits, L: int) -> int | None:
    """Index of the step at which a stream of end bits first terminates."""
    state = Mem0State(K=1, L=L)
    for t, b in enumerate(bits):
        push_bit(state, b)
        if check_termination(state):
            return t
    return None
