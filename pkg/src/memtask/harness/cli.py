"""Command-line entry point.

    memtask gen    --task T [--demos N] [--seed S] [--out FILE]
    memtask train  --task T [--config F] [--demos-file FILE] [--out DIR]
    memtask eval   --checkpoint FILE [--episodes N] [--variant V] [--out DIR]
    memtask ablate --task T [--config F] [--out DIR]
    memtask tmc    --task T [--m-max M]
    memtask report --rows FILE [--out DIR]

Exit status: 0 success, 1 contract or validation error (including bad
usage), 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from memtask.demos import DemoFormatError, generate_demos, load_demoset, save_demoset
from memtask.harness.config import ExperimentConfig, load_config
from memtask.nn import WeightFormatError
from memtask.pomdp import ContractError

EXIT_OK, EXIT_CONTRACT, EXIT_IO = 0, 1, 2


class UsageError(ContractError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--task")
    common.add_argument("--config", help="flat key = value experiment file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("--episodes", type=int)
    common.add_argument("--demos", type=int)
    common.add_argument("--variant")
    common.add_argument("--workers", type=int, default=1)
    p = _Parser(prog="memtask", description="memory tasks, oracle and Mem-0 harness")
    sub = p.add_subparsers(dest="cmd", parser_class=_Parser)
    sub.required = True
    sub.add_parser("gen", parents=[common], help="generate an expert demo file")
    t = sub.add_parser("train", parents=[common], help="train a policy checkpoint")
    t.add_argument("--demos-file")
    t.add_argument("--iters", type=int)
    e = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    e.add_argument("--checkpoint")
    a = sub.add_parser("ablate", parents=[common], help="train and evaluate the variant matrix")
    a.add_argument("--iters", type=int)
    o = sub.add_parser("tmc", parents=[common], help="certify task memory complexity")
    o.add_argument("--m-max", type=int, default=2)
    o.add_argument("--backend", choices=("auto", "cython", "python"), default="auto")
    r = sub.add_parser("report", parents=[common], help="write csv/json/markdown from result rows")
    r.add_argument("--rows", nargs="+")
    return p


def _experiment(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    over = {}
    if args.task is not None and args.task != cfg.task:
        over.update(task=args.task, task_params={})
    for flag in ("seed", "episodes", "demos", "out"):
        if getattr(args, flag) is not None:
            over[flag] = getattr(args, flag)
    if getattr(args, "iters", None) is not None:
        over["iters"] = args.iters
    cfg = replace(cfg, **over)
    if args.variant is not None:
        cfg = cfg.with_variant(args.variant)
    return cfg


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_gen(args) -> int:
    cfg = _experiment(args)
    spec = cfg.build_task()
    ds = generate_demos(spec, cfg.demos, cfg.seed)
    path = Path(args.out or f"{cfg.task}.demos")
    if path.suffix == "" and path.is_dir():
        path = path / f"{cfg.task}.demos"
    save_demoset(ds, path)
    _emit({"demos": str(path), "task": cfg.task, "count": len(ds), "seed": cfg.seed})
    return EXIT_OK


def cmd_train(args) -> int:
    from memtask.harness.train import train
    from memtask.policy.model import save_checkpoint

    cfg = _experiment(args)
    spec = cfg.build_task()
    ds = load_demoset(args.demos_file) if args.demos_file else generate_demos(spec, cfg.demos, cfg.seed)
    out = Path(cfg.out)
    stem = f"{cfg.task}.{cfg.policy.training_key().variant}"
    model = train(cfg, ds, out / f"{stem}.loss.csv", spec=spec)
    path = save_checkpoint(model, out / f"{stem}.mem0")
    (out / "experiment.cfg").write_text(cfg.to_text())
    _emit({"checkpoint": str(path), "iters": cfg.iters, "final_loss": model.loss_log[-1][1:4] if model.loss_log else None})
    return EXIT_OK


def cmd_eval(args) -> int:
    from memtask.harness.evaluate import evaluate
    from memtask.harness.report import write_report
    from memtask.policy.model import load_checkpoint

    if not args.checkpoint:
        raise UsageError("eval needs --checkpoint (train one with `memtask train`)")
    model = load_checkpoint(args.checkpoint)
    if args.task is not None and args.task != model.spec.name and args.task.removesuffix("_reduced") != model.spec.name:
        raise ContractError(f"checkpoint is for {model.spec.name!r}, not {args.task!r}")
    cfg = _experiment(args)
    policy = model.config.with_variant(args.variant) if args.variant else model.config
    row = evaluate(model, cfg.episodes, cfg.seed, policy, args.workers)
    paths = write_report([row], cfg.out, orderings=[], config={"checkpoint": args.checkpoint, **cfg.to_dict()})
    _emit({"row": row.to_dict(), "files": {k: str(v) for k, v in paths.items()}})
    return EXIT_OK


def cmd_ablate(args) -> int:
    from memtask.harness.ablate import ablate
    from memtask.harness.report import write_report

    cfg = _experiment(args)
    variants = (args.variant,) if args.variant else None
    if variants:
        cfg = cfg.with_variant("vanilla")
    rows = ablate(cfg, variants, checkpoint_dir=Path(cfg.out) / "checkpoints", workers=args.workers)
    paths = write_report(rows, cfg.out, config=cfg.to_dict())
    _emit({"rows": [r.to_dict() for r in rows], "files": {k: str(v) for k, v in paths.items()}})
    return EXIT_OK


def cmd_tmc(args) -> int:
    from memtask.tasks import build_task
    from memtask.tmc import compute_tmc

    if not args.task:
        raise UsageError("tmc needs --task")
    spec = build_task(args.task)
    res = compute_tmc(spec, m_max=args.m_max, backend=None if args.backend == "auto" else args.backend)
    _emit(res.to_json())
    return EXIT_OK


def cmd_report(args) -> int:
    from memtask.harness.report import read_rows, write_report

    if not args.rows:
        raise UsageError("report needs --rows FILE [FILE ...]")
    rows = [r for f in args.rows for r in read_rows(f)]
    paths = write_report(rows, args.out or ".")
    _emit({k: str(v) for k, v in paths.items()})
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval, "ablate": cmd_ablate,
            "tmc": cmd_tmc, "report": cmd_report}


def main(argv: list[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
        return COMMANDS[args.cmd](args)
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_CONTRACT
    except (ContractError, DemoFormatError, WeightFormatError, KeyError) as exc:
        print(f"memtask: error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except OSError as exc:
        print(f"memtask: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
