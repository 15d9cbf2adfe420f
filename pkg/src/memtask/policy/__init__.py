"""Mem-0 policy: planner, memory-conditioned diffusion executor and end classifier."""

from memtask.policy.agent import Mem0Agent, run_episode
from memtask.policy.config import VARIANTS, PolicyConfig
from memtask.policy.model import Mem0Model, load_checkpoint, max_segments, save_checkpoint
from memtask.policy.state import (
    Mem0State,
    begin_subtask,
    check_termination,
    first_termination,
    push_bit,
    reset_buffers,
    update_sliding,
)

__all__ = [
    "VARIANTS", "PolicyConfig", "Mem0Model", "Mem0Agent", "Mem0State", "run_episode",
    "load_checkpoint", "save_checkpoint", "max_segments", "begin_subtask", "check_termination",
    "first_termination", "push_bit", "reset_buffers", "update_sliding",
]
