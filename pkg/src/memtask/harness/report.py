"""Result files: results.csv, results.json and a markdown summary.

Published success rates are shown next to the desk-scale numbers in a
separate, labelled column; they are never compared numerically, only the
expected orderings between variants are checked.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from memtask.harness.evaluate import ResultRow
from memtask.pomdp import ContractError

# (task, variant) -> (published success rate, where it comes from)
PUBLISHED: dict[tuple[str, str], tuple[float, str]] = {}
_M1 = ("observe_and_pick_up", "rearrange_blocks", "put_back_block", "swap_blocks", "swap_t")
_MN = ("battery_try", "blocks_ranking_try", "cover_blocks", "press_button")
for _variant, _vals in {
    "vanilla": (0.04, 0.89, 0.90, 0.67, 0.14),
    "no_anchor": (0.04, 0.73, 0.35, 0.15, 0.07),
    "no_sliding": (0.03, 0.62, 0.78, 0.39, 0.20),
}.items():
    for _t, _v in zip(_M1, _vals):
        PUBLISHED[(_t, _variant)] = (_v, "ablation table, M(1)")
for _variant, _vals in {
    "vanilla": (0.28, 0.18, 0.68, 0.0),
    "no_key": (0.13, 0.01, 0.05, 0.0),
    "no_anchor": (0.14, 0.0, 0.92, 0.01),
    "no_sliding": (0.17, 0.0, 0.84, 0.0),
    "gt_classifier": (0.30, 0.45, 0.92, 0.14),
}.items():
    for _t, _v in zip(_MN, _vals):
        PUBLISHED[(_t, _variant)] = (_v, "ablation table, M(n)")


@dataclass(frozen=True)
class Ordering:
    """Expected relation ``lhs <rel> rhs`` between two variants of one task.

    rel is one of ``gt``, ``ge``, ``lt``, ``le`` on point estimates, or
    ``le_ci`` (lhs rate at most the upper Wilson bound of rhs: "no better
    than rhs up to sampling noise").
    """

    task: str
    lhs: str
    rel: str
    rhs: str
    note: str = ""

    SYMBOLS = {"gt": ">", "ge": ">=", "lt": "<", "le": "<=", "le_ci": "<=~"}

    def __post_init__(self):
        if self.rel not in self.SYMBOLS:
            raise ContractError(f"unknown relation {self.rel!r}")

    def describe(self) -> str:
        return f"{self.lhs} {self.SYMBOLS[self.rel]} {self.rhs} on {self.task}"

    def verdict(self, rows: list[ResultRow]) -> bool | None:
        """True/False, or None when either side was not evaluated."""
        idx = {(r.task, r.variant): r for r in rows}
        a, b = idx.get((self.task, self.lhs)), idx.get((self.task, self.rhs))
        if a is None or b is None:
            return None
        x, y = a.success_rate, b.success_rate
        return {"gt": x > y, "ge": x >= y, "lt": x < y, "le": x <= y, "le_ci": x <= b.wilson_hi}[self.rel]


def default_orderings() -> list[Ordering]:
    out = [
        Ordering("put_back_block", "vanilla", "gt", "markovian", "memory beats the memoryless baseline"),
        Ordering("rearrange_blocks", "vanilla", "gt", "markovian", "memory beats the memoryless baseline"),
        Ordering("put_back_block", "no_anchor", "lt", "vanilla", "anchor memory matters"),
    ]
    for t in ("blocks_ranking_try", "press_button"):
        out.append(Ordering(t, "no_key", "lt", "vanilla", "key memory matters"))
        out.append(Ordering(t, "no_key", "le_ci", "markovian", "without key memory: memoryless level"))
    for t in _MN:
        out.append(Ordering(t, "gt_classifier", "ge", "vanilla", "ground-truth termination helps"))
    return out


def write_csv(rows: list[ResultRow], path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ResultRow.CSV_COLUMNS)
        for r in rows:
            w.writerow(r.csv_values())


def read_rows(path: str | Path) -> list[ResultRow]:
    """Rows from a results.csv or results.json; raises ContractError on schema problems."""
    p = Path(path)
    text = p.read_text()
    if p.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ContractError(f"{p}: not JSON ({exc})") from None
        items = data.get("rows") if isinstance(data, dict) else None
        if not isinstance(items, list):
            raise ContractError(f"{p}: expected an object with a 'rows' list")
        return [ResultRow.from_dict(d) for d in items]
    lines = text.splitlines()
    reader = csv.DictReader(lines)
    if tuple(reader.fieldnames or ()) != ResultRow.CSV_COLUMNS:
        raise ContractError(f"{p}: header does not match {','.join(ResultRow.CSV_COLUMNS)}")
    return [ResultRow.from_dict(d) for d in reader]


def markdown(rows: list[ResultRow], orderings: list[Ordering]) -> str:
    lines = ["# Results", "",
             "Desk-scale success rates over seeded evaluation episodes (95% Wilson intervals).",
             "The `published` column is a reference value from the original benchmark tables,",
             "obtained with a different simulator and model; it is not reproduced here.", "",
             "| task | variant | success | 95% CI | mean steps | planner calls | published (reference only) |",
             "|---|---|---|---|---|---|---|"]
    for r in rows:
        pub = PUBLISHED.get((r.task, r.variant))
        ref = f"{pub[0]:.0%} ({pub[1]})" if pub else "-"
        lines.append(f"| {r.task} | {r.variant} | {r.successes}/{r.episodes} = {r.success_rate:.2f} | "
                     f"[{r.wilson_lo:.2f}, {r.wilson_hi:.2f}] | {r.mean_steps:.1f} | "
                     f"{r.mean_planner_calls:.2f} | {ref} |")
    verdicts = [(o, o.verdict(rows)) for o in orderings]
    verdicts = [(o, v) for o, v in verdicts if v is not None]
    if verdicts:
        lines += ["", "## Expected orderings", "", "| ordering | verdict | note |", "|---|---|---|"]
        for o, v in verdicts:
            lines.append(f"| {o.describe()} | {'✓' if v else '✗'} | {o.note} |")
    return "\n".join(lines) + "\n"


def write_report(rows: list[ResultRow], out_dir: str | Path, orderings: list[Ordering] | None = None,
                 config: dict | None = None) -> dict[str, Path]:
    if not rows:
        raise ContractError("report needs at least one result row")
    orderings = default_orderings() if orderings is None else orderings
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / "results.csv", "json": out / "results.json", "md": out / "summary.md"}
    write_csv(rows, paths["csv"])
    verdicts = [{"ordering": o.describe(), "holds": v} for o in orderings
                if (v := o.verdict(rows)) is not None]
    doc = {"rows": [r.to_dict() for r in rows], "verdicts": verdicts, "config": config or {}}
    paths["json"].write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    paths["md"].write_text(markdown(rows, orderings))
    return paths
