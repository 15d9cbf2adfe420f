import struct

import pytest

from memtask.demos import (
    MAGIC,
    DemoFormatError,
    demo_seed,
    generate_demos,
    load_demoset,
    save_demoset,
    validate,
)
from memtask.harness.evaluate import eval_seed
from memtask.pomdp import ContractError
from memtask.tasks import build_task


@pytest.fixture(scope="module")
def demos():
    return generate_demos(build_task("battery_try"), 8, seed=5)


def test_roundtrip(tmp_path, demos):
    p = tmp_path / "b.demos"
    save_demoset(demos, p)
    back = load_demoset(p)
    assert back.task == demos.task and back.metadata == demos.metadata
    assert [d.to_jsonl() for d in back.demos] == [d.to_jsonl() for d in demos.demos]
    validate(back)


def test_generation_is_deterministic(demos):
    again = generate_demos(build_task("battery_try"), 8, seed=5)
    assert [d.to_jsonl() for d in again.demos] == [d.to_jsonl() for d in demos.demos]
    other = generate_demos(build_task("battery_try"), 8, seed=6)
    assert [d.seed for d in other.demos] != [d.seed for d in demos.demos]


def test_demo_and_eval_seeds_disjoint():
    demo = {demo_seed(s, i) for s in range(4) for i in range(500)}
    ev = {eval_seed(s, i) for s in range(4) for i in range(500)}
    assert not demo & ev


def test_every_demo_succeeds(demos):
    assert all(d.success for d in demos.demos)


def test_bad_magic(tmp_path):
    p = tmp_path / "x.demos"
    p.write_bytes(b"NOPE" + b"\0" * 32)
    with pytest.raises(DemoFormatError, match="not a demo file"):
        load_demoset(p)


def test_corruption_detected(tmp_path, demos):
    p = tmp_path / "c.demos"
    save_demoset(demos, p)
    raw = bytearray(p.read_bytes())
    raw[len(raw) // 2] ^= 0x20
    p.write_bytes(bytes(raw))
    with pytest.raises(DemoFormatError, match="checksum"):
        load_demoset(p)


def test_truncation_detected(tmp_path, demos):
    p = tmp_path / "t.demos"
    save_demoset(demos, p)
    p.write_bytes(p.read_bytes()[:-40])
    with pytest.raises(DemoFormatError):
        load_demoset(p)


def test_wrong_version(tmp_path, demos):
    p = tmp_path / "v.demos"
    save_demoset(demos, p)
    raw = bytearray(p.read_bytes())
    raw[4:6] = struct.pack("<H", 99)
    p.write_bytes(bytes(raw))
    with pytest.raises(DemoFormatError, match="version"):
        load_demoset(p)
    assert bytes(raw[:4]) == MAGIC


def test_validate_catches_tampered_traces(demos):
    import copy

    bad = copy.deepcopy(demos)
    bad.demos[0].steps.pop()  # the final action is what completes the task
    with pytest.raises(ContractError, match="success"):
        validate(bad)
    bad = copy.deepcopy(demos)
    bad.demos[1].seed ^= 1 << 20  # a different hidden configuration
    with pytest.raises(ContractError):
        validate(bad)


def test_count_must_be_positive():
    with pytest.raises(ContractError):
        generate_demos(build_task("swap_t"), 0, 0)
