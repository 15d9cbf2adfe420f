"""Variant matrix with paired seeds: one demo set and one set of
evaluation seeds per task, one trained model per distinct training setup."""

from __future__ import annotations

from pathlib import Path

from memtask.demos import DemoSet, generate_demos
from memtask.harness.config import ExperimentConfig
from memtask.harness.evaluate import ResultRow, evaluate
from memtask.harness.train import train
from memtask.policy.model import Mem0Model, load_checkpoint, save_checkpoint
from memtask.pomdp import ContractError


def variant_set(spec) -> tuple[str, ...]:
    label = spec.tmc_label
    if label == "M(1)":
        return ("vanilla", "no_anchor", "no_sliding", "markovian")
    if label == "M(n)":
        return ("vanilla", "no_anchor", "no_sliding", "no_key", "gt_classifier", "markovian")
    return ("vanilla", "markovian")


def ablate(config: ExperimentConfig, variants: tuple[str, ...] | None = None,
           demoset: DemoSet | None = None, checkpoint_dir: str | Path | None = None,
           workers: int = 1) -> list[ResultRow]:
    """Train and evaluate every variant of ``config.task``.

    Variants that differ only at inference (``gt_classifier``) reuse the
    checkpoint of their training setup. With ``checkpoint_dir``, trained
    models and loss logs are written there and reused when present.
    """
    spec = config.build_task()
    variants = variants or variant_set(spec)
    if demoset is None:
        demoset = generate_demos(spec, config.demos, config.seed)
    trained: dict = {}
    rows = []
    for v in variants:
        policy = config.policy.with_variant(v)
        key = policy.training_key()
        if key not in trained:
            trained[key] = _model_for(config, key, demoset, spec, checkpoint_dir)
        rows.append(evaluate(trained[key], config.episodes, config.seed, policy, workers))
    return rows


def _model_for(config, key, demoset, spec, checkpoint_dir) -> Mem0Model:
    from dataclasses import replace

    cfg = replace(config, policy=key)
    if checkpoint_dir is None:
        return train(cfg, demoset, spec=spec)
    d = Path(checkpoint_dir)
    path = d / f"{config.task}.{key.variant}.mem0"
    if path.exists():
        model = load_checkpoint(path, spec)
        if model.config != key:
            raise ContractError(f"{path} was trained under a different policy config")
        return model
    model = train(cfg, demoset, d / f"{config.task}.{key.variant}.loss.csv", spec=spec)
    save_checkpoint(model, path)
    return model
