"""Expert demonstration sets and their on-disk format.

File layout::

    b"RMBD" | u16 version | u16 name length | task name (utf-8) | u32 count
    body: one JSON metadata line, then one trace block per demonstration
    u32 CRC32 of the body

All integers are little-endian. Each trace block is the line-delimited JSON
of :meth:`EpisodeTrace.to_jsonl`; blocks start at their header line.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

from memtask import rng
from memtask.pomdp import ContractError, EpisodeTrace, TaskSpec, replay, rollout
from memtask.tasks import build_task, expert_policy

MAGIC = b"RMBD"
VERSION = 1
GENERATOR = "memtask-expert/1"
_DEMO_LABEL = 0xDE30


class DemoFormatError(ValueError):
    """A demo file is malformed, from another version, or corrupted."""


@dataclass
class DemoSet:
    task: str
    demos: list[EpisodeTrace]
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.demos)

    def spec(self) -> TaskSpec:
        return build_task(self.task, **self.metadata.get("params", {}))


def demo_seed(seed: int, i: int) -> int:
    """Seed of the i-th demonstration; disjoint from evaluation seeds by label."""
    return rng.derive(seed, _DEMO_LABEL, i) >> 1


def generate_demos(spec: TaskSpec, n: int, seed: int) -> DemoSet:
    """``n`` successful expert traces under distinct derived seeds."""
    if n < 1:
        raise ContractError("demo count must be at least 1")
    demos = []
    for i in range(n):
        trace = rollout(spec, expert_policy(spec), demo_seed(seed, i))
        if not trace.success:
            raise ContractError(f"expert failed on {spec.name} seed {trace.seed}: {trace.error}")
        demos.append(trace)
    meta = {"generator": GENERATOR, "seed": seed, "count": n, "params": spec.params,
            "seed_labels": [_DEMO_LABEL, 0, n - 1]}
    return DemoSet(spec.name, demos, meta)


def validate(demoset: DemoSet) -> None:
    """Replay every demo; raise ContractError on any mismatch."""
    spec = demoset.spec()
    for d in demoset.demos:
        seen, final = replay(spec, d.seed, d.actions())
        if [tuple(o) for o in seen[: len(d.steps)]] != [tuple(s.obs) for s in d.steps]:
            raise ContractError(f"demo seed {d.seed}: observations do not replay")
        if not spec.success(final):
            raise ContractError(f"demo seed {d.seed}: replay does not end in success")


def _body(demoset: DemoSet) -> bytes:
    parts = [json.dumps(demoset.metadata, sort_keys=True) + "\n"]
    parts += [d.to_jsonl() for d in demoset.demos]
    return "".join(parts).encode()


def save_demoset(demoset: DemoSet, path: str | Path) -> None:
    name = demoset.task.encode()
    body = _body(demoset)
    head = MAGIC + struct.pack("<HH", VERSION, len(name)) + name + struct.pack("<I", len(demoset))
    Path(path).write_bytes(head + body + struct.pack("<I", zlib.crc32(body)))


def load_demoset(path: str | Path) -> DemoSet:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise DemoFormatError(f"{path}: not a demo file")
    if len(raw) < 12:
        raise DemoFormatError(f"{path}: truncated header")
    version, nlen = struct.unpack_from("<HH", raw, 4)
    if version != VERSION:
        raise DemoFormatError(f"{path}: format version {version}, expected {VERSION}")
    off = 8 + nlen
    if len(raw) < off + 8:
        raise DemoFormatError(f"{path}: truncated header")
    task = raw[8:off].decode()
    (count,) = struct.unpack_from("<I", raw, off)
    body, (crc,) = raw[off + 4:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != crc:
        raise DemoFormatError(f"{path}: checksum mismatch (truncated or corrupted)")
    lines = body.decode().splitlines(keepends=True)
    meta = json.loads(lines[0])
    blocks: list[list[str]] = []
    for ln in lines[1:]:
        if "schema" in json.loads(ln):  # a trace header opens a new block
            blocks.append([])
        elif not blocks:
            raise DemoFormatError(f"{path}: step line before any trace header")
        blocks[-1].append(ln)
    demos = [EpisodeTrace.from_jsonl("".join(b)) for b in blocks]
    if len(demos) != count:
        raise DemoFormatError(f"{path}: header says {count} demos, body has {len(demos)}")
    return DemoSet(task, demos, meta)
