"""Experiment configuration and its flat ``key = value`` file format.

Example::

    # comments start with '#'
    task = put_back_block
    task.pads = 4          # task knobs
    demos = 50
    policy.delta = 1       # PolicyConfig fields
    lr.heads = 1e-3

Values are parsed as JSON when possible (numbers, true/false) and taken as
bare strings otherwise. Unknown keys are errors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from memtask.policy.config import PolicyConfig
from memtask.pomdp import ContractError

CONFIG_VERSION = 1


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "put_back_block"
    task_params: dict = field(default_factory=dict)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    demos: int = 50
    episodes: int = 100
    iters: int = 5000
    batch: int = 64
    planner_batch: int = 32
    lr_heads: float = 1e-3
    lr_encoder: float = 1e-4
    lr_planner: float = 1e-3
    grad_clip: float = 10.0
    seed: int = 0
    out: str = "runs"
    version: int = CONFIG_VERSION

    def __post_init__(self):
        if self.demos < 1:
            raise ContractError("demos must be >= 1")
        if self.episodes < 1:
            raise ContractError("episodes must be >= 1")
        if self.iters < 0 or self.batch < 1 or self.planner_batch < 1:
            raise ContractError("iters must be >= 0 and batch sizes >= 1")
        for name in ("lr_heads", "lr_encoder", "lr_planner"):
            if not getattr(self, name) > 0:
                raise ContractError(f"{name} must be positive")
        if self.version != CONFIG_VERSION:
            raise ContractError(f"config version {self.version} is not supported (expected {CONFIG_VERSION})")

    def learning_rates(self) -> dict[str, float]:
        return {"": self.lr_heads, "enc.": self.lr_encoder, "attn.": self.lr_encoder,
                "plan.": self.lr_planner}

    def build_task(self):
        from memtask.tasks import build_task

        return build_task(self.task, **self.task_params)

    def with_variant(self, variant: str) -> "ExperimentConfig":
        return replace(self, policy=self.policy.with_variant(variant))

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["policy"] = self.policy.to_dict()
        d["task_params"] = dict(self.task_params)
        return d

    def to_text(self) -> str:
        """Render in the flat file format (round-trips through :func:`parse_config`)."""
        lines = []
        for f in fields(self):
            if f.name in ("policy", "task_params"):
                continue
            key = f.name.replace("lr_", "lr.") if f.name.startswith("lr_") else f.name
            lines.append(f"{key} = {_fmt(getattr(self, f.name))}")
        for k, v in sorted(self.task_params.items()):
            lines.append(f"task.{k} = {_fmt(v)}")
        for k, v in self.policy.to_dict().items():
            lines.append(f"policy.{k} = {_fmt(v)}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    return v if isinstance(v, str) else json.dumps(v)


def _value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


_TOP = {f.name for f in fields(ExperimentConfig)} - {"policy", "task_params"}
_POLICY = {f.name for f in fields(PolicyConfig)}
_DEFAULTS = {**{k: getattr(ExperimentConfig(), k) for k in _TOP},
             **{f"policy.{k}": v for k, v in PolicyConfig().to_dict().items()}}


def _typed(key: str, val, where: str):
    """Check ``val`` against the type of the setting's default (ints widen to floats)."""
    want = type(_DEFAULTS[key])
    if want is float and isinstance(val, int) and not isinstance(val, bool):
        return float(val)
    if want is int and isinstance(val, bool) or not isinstance(val, want):
        raise ContractError(f"{where}: {key} expects {want.__name__}, got {val!r}")
    return val


def parse_config(text: str, base: ExperimentConfig | None = None, source: str = "<config>") -> ExperimentConfig:
    base = base or ExperimentConfig()
    top: dict = {}
    task_params: dict = {}
    policy = base.policy.to_dict()
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ContractError(f"{source}:{n}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        val = _value(raw)
        if key.startswith("task."):
            task_params[key[5:]] = val
        elif key.startswith("policy."):
            if key[7:] not in _POLICY:
                raise ContractError(f"{source}:{n}: unknown policy setting {key[7:]!r}")
            policy[key[7:]] = _typed(key, val, f"{source}:{n}")
        else:
            name = key.replace("lr.", "lr_")
            if name not in _TOP:
                raise ContractError(f"{source}:{n}: unknown key {key!r}")
            top[name] = _typed(name, val, f"{source}:{n}")
    if top.get("task", base.task) == base.task:
        task_params = {**base.task_params, **task_params}
    try:
        return replace(base, **top, task_params=task_params, policy=PolicyConfig.from_dict(policy))
    except TypeError as exc:
        raise ContractError(f"{source}: {exc}") from None


def load_config(path: str | Path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Read a config file; raises OSError if unreadable, ContractError if invalid."""
    p = Path(path)
    return parse_config(p.read_text(), base, str(p))


def example_config_path() -> Path:
    return Path(__file__).resolve().parent.parent / "configs" / "example.cfg"
