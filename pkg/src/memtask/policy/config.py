from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from memtask.pomdp import ContractError

VARIANTS = ("vanilla", "no_anchor", "no_sliding", "no_key", "gt_classifier", "markovian")


@dataclass(frozen=True)
class PolicyConfig:
    """Architecture and inference settings of a Mem-0 policy.

    ``decomposition`` is "auto" (on exactly for tasks that declare subtasks),
    "on" or "off". ``markovian`` turns off every memory, decomposition and the
    proprioceptive input, leaving a policy of the current observation only.
    """

    H: int = 8
    delta: int = 4
    K: int = 16
    L: int = 4
    d_z: int = 64
    tokens: int = 4
    diffusion_steps: int = 16
    enc_hidden: int = 128
    den_hidden: int = 256
    cls_hidden: int = 64
    plan_hidden: int = 128
    clip: float = 1.0
    decomposition: str = "auto"
    no_anchor: bool = False
    no_sliding: bool = False
    no_key: bool = False
    gt_classifier: bool = False
    markovian: bool = False

    def __post_init__(self):
        if not 1 <= self.delta <= self.H:
            raise ContractError(f"need 1 <= delta <= H, got delta={self.delta}, H={self.H}")
        for name in ("H", "K", "L", "d_z", "tokens", "diffusion_steps"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be >= 1")
        if self.decomposition not in ("auto", "on", "off"):
            raise ContractError(f"decomposition must be auto/on/off, got {self.decomposition!r}")

    def decomposed(self, spec) -> bool:
        if self.markovian:
            return False
        if self.decomposition == "auto":
            return bool(spec.decomposed)
        return self.decomposition == "on"

    @property
    def use_anchor(self) -> bool:
        return not (self.no_anchor or self.markovian)

    @property
    def use_sliding(self) -> bool:
        return not (self.no_sliding or self.markovian)

    @property
    def use_key(self) -> bool:
        return not (self.no_key or self.markovian)

    def with_variant(self, variant: str) -> "PolicyConfig":
        if variant not in VARIANTS:
            raise ContractError(f"unknown variant {variant!r}; known: {', '.join(VARIANTS)}")
        flags = {v: False for v in VARIANTS if v != "vanilla"}
        if variant != "vanilla":
            flags[variant] = True
        return replace(self, **flags)

    @property
    def variant(self) -> str:
        on = [v for v in VARIANTS[1:] if getattr(self, v)]
        return on[0] if len(on) == 1 else ("vanilla" if not on else "+".join(on))

    def training_key(self) -> "PolicyConfig":
        """The config a checkpoint is trained under (gt_classifier is inference-only)."""
        return replace(self, gt_classifier=False)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyConfig":
        known = {f.name for f in fields(cls)}
        extra = sorted(set(d) - known)
        if extra:
            raise ContractError(f"unknown policy setting {extra[0]!r}")
        return cls(**d)
