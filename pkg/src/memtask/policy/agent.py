"""Closed-loop Mem-0 controller.

Per control step the agent encodes the observation, fuses it with the
anchor and sliding memories, reads the end classifier and, when the
termination rule fires, records the finished subtask in key memory,
clears the execution buffers and asks the planner for the next subtask
before acting. Actions come from the head of a queue refilled with the
first ``delta`` steps of a freshly denoised chunk (one step for the
markovian baseline, whose queue would otherwise act as memory).
"""

from __future__ import annotations

import numpy as np

from memtask import rng
from memtask.policy.config import PolicyConfig
from memtask.policy.model import Mem0Model
from memtask.policy.state import (
    Mem0State,
    begin_subtask,
    check_termination,
    push_bit,
    reset_buffers,
    update_sliding,
)
from memtask.pomdp import ContractError, Decision, EpisodeTrace, TaskSpec, rollout

CHUNK_LABEL = 0xAC7


class Mem0Agent:
    """Callable agent for :func:`memtask.pomdp.rollout`.

    ``config`` may differ from the model's training config only in
    inference-time switches (ablation flags, ``delta``, ``L``); the network
    shapes must match.
    """

    def __init__(self, model: Mem0Model, config: PolicyConfig | None = None, seed: int = 0,
                 observer=None):
        self.model = model
        self.config = config or model.config
        if self.config.markovian != model.config.markovian or (
            self.config.decomposed(model.spec) != model.decomposed
        ):
            raise ContractError("markovian/decomposition settings must match the trained model")
        if self.config.H != model.config.H:
            raise ContractError(f"chunk horizon {self.config.H} differs from the model's {model.config.H}")
        self.spec: TaskSpec = model.spec
        self.seed = seed
        self.observer = observer  # called as observer(agent, t) after every step
        # a queued open-loop prefix would carry information across steps
        self.delta = 1 if self.config.markovian else self.config.delta
        self.state = Mem0State(K=self.config.K, L=self.config.L)
        self.t = 0
        self.denoiser_calls = 0
        self._o0 = None
        self._seg_start = None

    @property
    def planner_calls(self) -> int:
        return self.state.planner_calls

    @property
    def decomposed(self) -> bool:
        return self.model.decomposed

    def _text_index(self) -> int:
        return self.state.subtask if self.decomposed else self.model.whole_task

    def _plan(self) -> None:
        self.state.planner_calls += 1
        if self.decomposed:
            self.state.subtask = self.model.plan(self._o0, self.state.key_memory, self.config.use_key)
        else:
            self.state.subtask = 0

    def begin(self, obs, state) -> None:
        self.state = Mem0State(K=self.config.K, L=self.config.L)
        self.t = 0
        self.denoiser_calls = 0
        self._o0 = self.model.featurize(obs)
        self._seg_start = state
        self._plan()

    def _end_bit(self, c, state) -> int:
        if not self.decomposed:
            return 0
        if self.config.gt_classifier:
            return int(self.spec.subtask_done(self.state.subtask, self._seg_start, state))
        return int(self.model.end_probability(c) >= 0.5)

    def __call__(self, obs, state) -> Decision:
        st, cfg, model = self.state, self.config, self.model
        feat = model.featurize(obs)
        z, zt = model.encode_step(feat, self._text_index())
        if st.buffers_empty:
            begin_subtask(st, z)
        c = model.fuse_step(z, zt, st.anchor if cfg.use_anchor else None,
                            st.sliding if cfg.use_sliding else [])
        push_bit(st, self._end_bit(c, state))
        ended_sub = st.subtask
        end = check_termination(st)
        if end:
            st.key_memory.append((st.subtask, feat.copy()))
            reset_buffers(st)
            self._seg_start = state
            self._plan()
            z, zt = model.encode_step(feat, self._text_index())
            begin_subtask(st, z)
            c = model.fuse_step(z, zt, st.anchor if cfg.use_anchor else None, [])
        if not st.queue:
            chunk = model.sample_chunk(c, model.proprio(st.last_action, st.step_in_subtask),
                                       rng.derive(self.seed, CHUNK_LABEL, self.t))
            self.denoiser_calls += 1
            st.queue.extend(int(a) for a in np.argmax(chunk[: self.delta], axis=1))
        action = st.queue.popleft()
        update_sliding(st, z)
        st.last_action = action
        st.step_in_subtask += 1
        if self.observer is not None:
            self.observer(self, self.t)
        self.t += 1
        return Decision(action, ended_sub if end else st.subtask, end)


def run_episode(model: Mem0Model, seed: int, config: PolicyConfig | None = None,
                observer=None) -> EpisodeTrace:
    """One seeded closed-loop episode of ``model`` on its bound task."""
    agent = Mem0Agent(model, config, seed, observer)
    return rollout(model.spec, agent, seed)
