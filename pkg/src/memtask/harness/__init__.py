"""Training, evaluation, ablation, reporting and the command line."""

from memtask.harness.ablate import ablate, variant_set
from memtask.harness.config import ExperimentConfig, load_config, parse_config
from memtask.harness.evaluate import ResultRow, eval_seed, evaluate, wilson_interval
from memtask.harness.report import Ordering, default_orderings, read_rows, write_report
from memtask.harness.train import DivergenceError, train

__all__ = [
    "ExperimentConfig", "ResultRow", "Ordering", "DivergenceError", "ablate", "default_orderings",
    "eval_seed", "evaluate", "load_config", "parse_config", "read_rows", "train", "variant_set",
    "wilson_interval", "write_report",
]
